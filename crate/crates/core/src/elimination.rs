//! Smooth surjections that remove the spatial and temporal constraints:
//! `τ ↦ T = exp(τ)` onto positive durations and a barycentric map `ξ ↦ q`
//! onto the interior of a waypoint's container polytope.

use log::warn;
use nalgebra::Vector3;

use crate::geometry::{Corridor, GeometryError, Polyhedron};
use crate::spline::BoundaryCondition;

/// `τ` is clamped to `[-TAU_LIMIT, TAU_LIMIT]` before exponentiation.
pub const TAU_LIMIT: f64 = 30.0;
/// Shortest initial piece duration.
pub const MIN_INITIAL_DURATION: f64 = 0.1;

pub fn forward_t(tau: &[f64]) -> Vec<f64> {
    tau.iter()
        .map(|&t| {
            if !(-TAU_LIMIT..=TAU_LIMIT).contains(&t) {
                warn!("duration parameter {t} clamped to ±{TAU_LIMIT}");
            }
            t.clamp(-TAU_LIMIT, TAU_LIMIT).exp()
        })
        .collect()
}

/// `∂L/∂τ = ∂L/∂T · T`; zero where `τ` was clamped.
pub fn pullback_t(tau: &[f64], grad_t: &[f64]) -> Vec<f64> {
    tau.iter()
        .zip(grad_t)
        .map(|(&t, &g)| {
            if (-TAU_LIMIT..=TAU_LIMIT).contains(&t) {
                g * t.exp()
            } else {
                0.0
            }
        })
        .collect()
}

/// The polytope one interior waypoint must stay inside.
#[derive(Debug, Clone)]
pub struct WaypointContainer {
    polyhedron: Polyhedron,
}

impl WaypointContainer {
    pub fn new(polyhedron: Polyhedron) -> Self {
        Self { polyhedron }
    }

    pub fn polyhedron(&self) -> &Polyhedron {
        &self.polyhedron
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        self.polyhedron.vertices()
    }

    /// Length of this waypoint's `ξ` block (one entry per vertex).
    pub fn dim(&self) -> usize {
        self.polyhedron.vertices().len()
    }

    pub fn forward(&self, xi: &[f64]) -> Vector3<f64> {
        forward_q(xi, self)
    }

    /// Adds `(∂q/∂ξ)ᵀ grad_q` into `out`.
    pub fn pullback(&self, xi: &[f64], grad_q: &Vector3<f64>, out: &mut [f64]) {
        let v = self.vertices();
        let sum: f64 = xi.iter().map(|x| 1.0 + x * x).sum();
        let q = self.forward(xi);
        for ((o, x), vi) in out.iter_mut().zip(xi).zip(v) {
            *o += 2.0 * x / sum * (vi - q).dot(grad_q);
        }
    }
}

/// `q = Σᵢ wᵢ vᵢ` with `wᵢ = (1 + ξᵢ²) / Σₖ (1 + ξₖ²)`.
pub fn forward_q(xi: &[f64], container: &WaypointContainer) -> Vector3<f64> {
    let v = container.vertices();
    debug_assert_eq!(xi.len(), v.len());
    let mut sum = 0.0;
    let mut acc = Vector3::zeros();
    for (x, vi) in xi.iter().zip(v) {
        let w = 1.0 + x * x;
        sum += w;
        acc += vi * w;
    }
    acc / sum
}

/// One container per interior waypoint. The waypoint between pieces `j − 1`
/// and `j` lives in the overlap of their polyhedra when the assignment changes
/// there, and in the shared polyhedron otherwise.
pub fn build_containers(corridor: &Corridor) -> Result<Vec<WaypointContainer>, GeometryError> {
    let asg = corridor.assignment();
    let polys = corridor.polyhedra();
    (1..asg.len())
        .map(|j| {
            let (a, b) = (asg[j - 1], asg[j]);
            let poly = if a == b {
                polys[a].clone()
            } else {
                polys[a].intersection(&polys[b])?
            };
            Ok(WaypointContainer::new(poly))
        })
        .collect()
}

/// Unconstrained decision variables.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionVars {
    /// Concatenated per-waypoint barycentric parameters.
    pub xi: Vec<f64>,
    /// Attitude waypoints in stereographic coordinates.
    pub q_sigma: Vec<Vector3<f64>>,
    /// Log-durations.
    pub tau: Vec<f64>,
}

/// Where each block lives in the flat variable vector `[ξ, qσ, τ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarLayout {
    pub xi_offsets: Vec<usize>,
    pub xi_len: usize,
    pub num_waypoints: usize,
    pub num_pieces: usize,
}

impl VarLayout {
    pub fn new(containers: &[WaypointContainer]) -> Self {
        let mut xi_offsets = Vec::with_capacity(containers.len() + 1);
        let mut acc = 0;
        for c in containers {
            xi_offsets.push(acc);
            acc += c.dim();
        }
        xi_offsets.push(acc);
        Self {
            xi_offsets,
            xi_len: acc,
            num_waypoints: containers.len(),
            num_pieces: containers.len() + 1,
        }
    }

    pub fn len(&self) -> usize {
        self.xi_len + 3 * self.num_waypoints + self.num_pieces
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn xi_block<'a>(&self, xi: &'a [f64], j: usize) -> &'a [f64] {
        &xi[self.xi_offsets[j]..self.xi_offsets[j + 1]]
    }
}

impl DecisionVars {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.xi.len() + 3 * self.q_sigma.len() + self.tau.len());
        out.extend_from_slice(&self.xi);
        for q in &self.q_sigma {
            out.extend_from_slice(q.as_slice());
        }
        out.extend_from_slice(&self.tau);
        out
    }

    pub fn from_flat(layout: &VarLayout, x: &[f64]) -> Self {
        assert_eq!(x.len(), layout.len(), "flat vector does not match layout");
        let (xi, rest) = x.split_at(layout.xi_len);
        let (qs, tau) = rest.split_at(3 * layout.num_waypoints);
        Self {
            xi: xi.to_vec(),
            q_sigma: qs.chunks_exact(3).map(Vector3::from_column_slice).collect(),
            tau: tau.to_vec(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.xi.iter().chain(&self.tau).all(|x| x.is_finite())
            && self.q_sigma.iter().all(|q| q.iter().all(|x| x.is_finite()))
    }
}

/// Waypoints at container vertex centroids, attitude waypoints interpolated
/// linearly between the boundary values, and durations from straight-line
/// distance at `v_max` (floored at [`MIN_INITIAL_DURATION`]).
pub fn initialize(containers: &[WaypointContainer], bc: &BoundaryCondition, v_max: f64) -> DecisionVars {
    let m = containers.len() + 1;
    let xi: Vec<f64> = vec![0.0; containers.iter().map(|c| c.dim()).sum()];
    let start = bc.start[0];
    let end = bc.end[0];
    let sigma0 = start.fixed_rows::<3>(3).into_owned();
    let sigma1 = end.fixed_rows::<3>(3).into_owned();
    let q_sigma = (1..m)
        .map(|j| sigma0 + (sigma1 - sigma0) * (j as f64 / m as f64))
        .collect();

    let mut points = Vec::with_capacity(m + 1);
    points.push(start.fixed_rows::<3>(0).into_owned());
    points.extend(containers.iter().map(|c| c.polyhedron().vertex_centroid()));
    points.push(end.fixed_rows::<3>(0).into_owned());
    let tau = points
        .windows(2)
        .map(|w| ((w[1] - w[0]).norm() / v_max).max(MIN_INITIAL_DURATION).ln())
        .collect();
    DecisionVars { xi, q_sigma, tau }
}
