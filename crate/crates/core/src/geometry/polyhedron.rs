use nalgebra::{Matrix3, Vector3};

use super::hull::convex_hull;
use super::lp::deepest_point;
use super::GeometryError;

/// Largest face count supported by the vertex enumerator.
pub const MAX_FACES: usize = 128;
/// Vertices closer than this are merged.
pub const VERTEX_DEDUP_TOL: f64 = 1e-9;
/// A polyhedron whose deepest point clears every face by less than this has
/// no interior.
pub const MIN_INTERIOR_CLEARANCE: f64 = 1e-9;
/// Vertices farther than this from the interior point mark an unbounded set.
const MAX_EXTENT: f64 = 1e9;
const CLEARANCE_CAP: f64 = 1e6;

/// One face `normal^T p - offset <= 0` with a unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Halfspace {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl Halfspace {
    /// Signed slack of `p`; nonpositive inside.
    #[inline]
    pub fn slack(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// Bounded convex polyhedron with nonempty interior, stored in both
/// H-representation and V-representation.
#[derive(Debug, Clone)]
pub struct Polyhedron {
    halfspaces: Vec<Halfspace>,
    vertices: Vec<Vector3<f64>>,
    interior: Vector3<f64>,
    clearance: f64,
}

impl Polyhedron {
    /// Builds a polyhedron from raw `(normal, offset)` pairs describing
    /// `normal^T p <= offset`. Normals need not be unit length.
    pub fn new(raw: &[(Vector3<f64>, f64)]) -> Result<Self, GeometryError> {
        if raw.len() > MAX_FACES {
            return Err(GeometryError::TooManyFaces(raw.len()));
        }
        let mut halfspaces = Vec::with_capacity(raw.len());
        for (k, (n, d)) in raw.iter().enumerate() {
            let norm = n.norm();
            if !(norm > 0.0) || !norm.is_finite() || !d.is_finite() {
                return Err(GeometryError::DegenerateNormal(k));
            }
            halfspaces.push(Halfspace {
                normal: n / norm,
                offset: d / norm,
            });
        }
        // Fewer than four half-spaces can never bound a region of R^3.
        if halfspaces.len() < 4 {
            return Err(GeometryError::UnboundedPolyhedron);
        }
        let pairs: Vec<_> = halfspaces.iter().map(|h| (h.normal, h.offset)).collect();
        let deepest =
            deepest_point(&pairs, CLEARANCE_CAP).ok_or(GeometryError::EmptyInterior)?;
        if deepest.clearance < MIN_INTERIOR_CLEARANCE {
            return Err(GeometryError::EmptyInterior);
        }
        let vertices = dual_vertices(&halfspaces, &deepest.point)?;
        Ok(Self {
            halfspaces,
            vertices,
            interior: deepest.point,
            clearance: deepest.clearance,
        })
    }

    /// Axis-aligned box `[lo, hi]`.
    pub fn aabb(lo: Vector3<f64>, hi: Vector3<f64>) -> Result<Self, GeometryError> {
        Self::new(&[
            (Vector3::x(), hi.x),
            (-Vector3::x(), -lo.x),
            (Vector3::y(), hi.y),
            (-Vector3::y(), -lo.y),
            (Vector3::z(), hi.z),
            (-Vector3::z(), -lo.z),
        ])
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    /// Point of maximal face clearance found during construction.
    pub fn interior_point(&self) -> Vector3<f64> {
        self.interior
    }

    /// Radius of the largest inscribed ball.
    pub fn inradius(&self) -> f64 {
        self.clearance
    }

    pub fn vertex_centroid(&self) -> Vector3<f64> {
        self.vertices.iter().sum::<Vector3<f64>>() / self.vertices.len() as f64
    }

    /// `max_k (n_k^T p - d_k)`.
    pub fn max_slack(&self, p: &Vector3<f64>) -> f64 {
        self.halfspaces
            .iter()
            .map(|h| h.slack(p))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, p: &Vector3<f64>, tol: f64) -> bool {
        self.max_slack(p) <= tol
    }

    /// H-representation of `self ∩ other`.
    pub fn intersection(&self, other: &Polyhedron) -> Result<Polyhedron, GeometryError> {
        let raw: Vec<_> = self
            .halfspaces
            .iter()
            .chain(other.halfspaces.iter())
            .map(|h| (h.normal, h.offset))
            .collect();
        Polyhedron::new(&raw)
    }

    /// Rigid translation by `delta`.
    pub fn translated(&self, delta: &Vector3<f64>) -> Polyhedron {
        Polyhedron {
            halfspaces: self
                .halfspaces
                .iter()
                .map(|h| Halfspace {
                    normal: h.normal,
                    offset: h.offset + h.normal.dot(delta),
                })
                .collect(),
            vertices: self.vertices.iter().map(|v| v + delta).collect(),
            interior: self.interior + delta,
            clearance: self.clearance,
        }
    }
}

/// Extreme points of the polyhedron.
pub fn enumerate_vertices(poly: &Polyhedron) -> Vec<Vector3<f64>> {
    poly.vertices.clone()
}

/// Largest clearance of any point from all faces of `halfspaces`, with the
/// point attaining it.
pub fn max_clearance(halfspaces: &[Halfspace]) -> Option<(Vector3<f64>, f64)> {
    let pairs: Vec<_> = halfspaces.iter().map(|h| (h.normal, h.offset)).collect();
    deepest_point(&pairs, CLEARANCE_CAP).map(|d| (d.point, d.clearance))
}

// Polar dual about an interior point: face k maps to n_k / (d_k - n_k^T x0);
// each hull facet of the dual points is a primal vertex.
fn dual_vertices(
    halfspaces: &[Halfspace],
    x0: &Vector3<f64>,
) -> Result<Vec<Vector3<f64>>, GeometryError> {
    let dual: Vec<Vector3<f64>> = halfspaces
        .iter()
        .map(|h| h.normal / (h.offset - h.normal.dot(x0)))
        .collect();
    let facets = convex_hull(&dual).ok_or(GeometryError::UnboundedPolyhedron)?;
    let mut out: Vec<Vector3<f64>> = Vec::new();
    for f in &facets {
        if f.offset < 1.0 / MAX_EXTENT {
            return Err(GeometryError::UnboundedPolyhedron);
        }
        let approx = x0 + f.normal / f.offset;
        let v = polish_vertex(halfspaces, f.idx).unwrap_or(approx);
        if (v - approx).norm() > 1e-6 * (1.0 + approx.norm()) {
            // Three nearly dependent planes; the dual estimate is safer.
            push_unique(&mut out, approx);
        } else {
            push_unique(&mut out, v);
        }
    }
    Ok(out)
}

fn polish_vertex(halfspaces: &[Halfspace], idx: [usize; 3]) -> Option<Vector3<f64>> {
    let a = Matrix3::from_rows(&[
        halfspaces[idx[0]].normal.transpose(),
        halfspaces[idx[1]].normal.transpose(),
        halfspaces[idx[2]].normal.transpose(),
    ]);
    let b = Vector3::new(
        halfspaces[idx[0]].offset,
        halfspaces[idx[1]].offset,
        halfspaces[idx[2]].offset,
    );
    a.lu().solve(&b)
}

fn push_unique(out: &mut Vec<Vector3<f64>>, v: Vector3<f64>) {
    if !out.iter().any(|u| (u - v).norm() <= VERTEX_DEDUP_TOL) {
        out.push(v);
    }
}
