//! Command-line front end: configuration, fixtures, the run pipeline and
//! the scaling benchmark.

pub mod bench;
pub mod config;
pub mod fixture;
pub mod plot;
pub mod run;
