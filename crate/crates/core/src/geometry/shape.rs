use nalgebra::{Matrix3, Vector3};

use super::GeometryError;

/// Largest supported vertex count for a vehicle shape.
pub const MAX_SHAPE_VERTICES: usize = 64;

/// Convex hull of the vehicle, given by its vertices in the body frame.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleShape {
    body_vertices: Vec<Vector3<f64>>,
    max_radius: f64,
}

impl VehicleShape {
    pub fn new(body_vertices: Vec<Vector3<f64>>) -> Result<Self, GeometryError> {
        if body_vertices.is_empty() || body_vertices.len() > MAX_SHAPE_VERTICES {
            return Err(GeometryError::InvalidShape(format!(
                "expected 1..={MAX_SHAPE_VERTICES} vertices, got {}",
                body_vertices.len()
            )));
        }
        if body_vertices.iter().any(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(GeometryError::InvalidShape("non-finite vertex".into()));
        }
        if body_vertices.len() > 1
            && body_vertices.iter().all(|v| (v - body_vertices[0]).norm() == 0.0)
        {
            return Err(GeometryError::InvalidShape("all vertices coincide".into()));
        }
        let max_radius = body_vertices.iter().map(|v| v.norm()).fold(0.0, f64::max);
        Ok(Self {
            body_vertices,
            max_radius,
        })
    }

    /// Box of side lengths `lx × ly × lz` centred on the body origin.
    pub fn cuboid(lx: f64, ly: f64, lz: f64) -> Result<Self, GeometryError> {
        let mut v = Vec::with_capacity(8);
        for sx in [1.0, -1.0] {
            for sy in [1.0, -1.0] {
                for sz in [1.0, -1.0] {
                    v.push(Vector3::new(sx * lx / 2.0, sy * ly / 2.0, sz * lz / 2.0));
                }
            }
        }
        Self::new(v)
    }

    pub fn body_vertices(&self) -> &[Vector3<f64>] {
        &self.body_vertices
    }

    pub fn len(&self) -> usize {
        self.body_vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.body_vertices.is_empty()
    }

    /// Largest vertex distance from the body origin.
    pub fn max_radius(&self) -> f64 {
        self.max_radius
    }

    /// World position `p + R v_l` of body vertex `l`.
    pub fn vertex_world(&self, p: &Vector3<f64>, rot: &Matrix3<f64>, l: usize) -> Vector3<f64> {
        p + rot * self.body_vertices[l]
    }

    pub fn world_vertices<'a>(
        &'a self,
        p: &'a Vector3<f64>,
        rot: &'a Matrix3<f64>,
    ) -> impl Iterator<Item = Vector3<f64>> + 'a {
        self.body_vertices.iter().map(move |v| p + rot * v)
    }
}
