pub mod geometry;
pub mod attitude;
pub mod spline;
pub mod elimination;
pub mod penalty;
pub mod solver;
pub mod flatness;
pub mod problem;
