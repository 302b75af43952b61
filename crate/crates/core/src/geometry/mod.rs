//! Convex polyhedra, safe flight corridors and the vehicle's convex shape.
//!
//! Polyhedra are validated on construction: normals are rescaled to unit
//! length, the deepest interior point is found with a small simplex solve and
//! the vertex set is recovered from the convex hull of the polar dual about
//! that point. At most [`MAX_FACES`] faces per polyhedron and
//! [`MAX_SHAPE_VERTICES`] vertices per shape are supported.

mod corridor;
mod hull;
mod lp;
mod polyhedron;
mod shape;

pub use corridor::{Corridor, CorridorFileError, CorridorReport, OverlapCheck, OVERLAP_CLEARANCE};
pub use polyhedron::{
    enumerate_vertices, max_clearance, Halfspace, Polyhedron, MAX_FACES, MIN_INTERIOR_CLEARANCE,
    VERTEX_DEDUP_TOL,
};
pub use shape::{VehicleShape, MAX_SHAPE_VERTICES};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("half-spaces do not bound a finite region")]
    UnboundedPolyhedron,
    #[error("half-spaces have no common interior point")]
    EmptyInterior,
    #[error("half-space {0} has a zero or non-finite normal")]
    DegenerateNormal(usize),
    #[error("{0} faces exceeds the supported maximum of {MAX_FACES}")]
    TooManyFaces(usize),
    #[error("invalid vehicle shape: {0}")]
    InvalidShape(String),
}
