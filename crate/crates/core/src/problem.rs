//! The full unconstrained objective
//! `J + k_ρ Σ Tᵢ + penalties` as a function of `(ξ, qσ, τ)`, and its
//! minimization.

use log::{info, warn};
use nalgebra::{Matrix3, Rotation3, Vector3, Vector6};

use crate::attitude::{eval_attitude, sigma_from_rotation};
use crate::elimination::{
    build_containers, forward_t, initialize, pullback_t, DecisionVars, VarLayout, WaypointContainer,
};
use crate::flatness::{FlatnessError, VehicleParams};
use crate::geometry::{Corridor, GeometryError, VehicleShape};
use crate::penalty::{self, PenaltyConfig, PenaltyError, PenaltyTerms, ViolationMaxima};
use crate::solver::{minimize, SolverConfig, SolverError, Status, TraceEntry};
use crate::spline::{solve_coefficients, BoundaryCondition, SplineError, Trajectory};

/// Durations are floored here before the coefficient solve.
pub const MIN_DURATION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProblemError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error(transparent)]
    Penalty(#[from] PenaltyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Vehicle(#[from] FlatnessError),
    #[error("invalid problem: {0}")]
    InvalidSpec(String),
}

/// Position and attitude at one end of the trajectory; all higher
/// derivatives default to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Endpoint {
    pub position: Vector3<f64>,
    pub rotation: Matrix3<f64>,
}

impl Endpoint {
    pub fn level(position: Vector3<f64>) -> Self {
        Self {
            position,
            rotation: Matrix3::identity(),
        }
    }

    /// Flat-output value with the attitude mapped to `σ`.
    pub fn flat_output(&self) -> Vector6<f64> {
        let s = sigma_from_rotation(&self.rotation);
        Vector6::new(self.position.x, self.position.y, self.position.z, s.x, s.y, s.z)
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    corridor: Corridor,
    shape: VehicleShape,
    bc: BoundaryCondition,
    s: usize,
    penalty: PenaltyConfig,
    vehicle: VehicleParams,
    containers: Vec<WaypointContainer>,
    layout: VarLayout,
}

impl ProblemSpec {
    /// Rest-to-rest problem between two endpoints.
    pub fn new(
        corridor: Corridor,
        shape: VehicleShape,
        start: &Endpoint,
        end: &Endpoint,
        s: usize,
        penalty: PenaltyConfig,
        vehicle: VehicleParams,
    ) -> Result<Self, ProblemError> {
        let bc = BoundaryCondition::rest_to_rest(s, start.flat_output(), end.flat_output());
        Self::with_boundary_condition(corridor, shape, bc, penalty, vehicle)
    }

    /// Boundary derivative stacks given directly in flat-output space.
    pub fn with_boundary_condition(
        corridor: Corridor,
        shape: VehicleShape,
        bc: BoundaryCondition,
        penalty: PenaltyConfig,
        vehicle: VehicleParams,
    ) -> Result<Self, ProblemError> {
        let s = bc.order();
        if s < 2 {
            return Err(ProblemError::InvalidSpec(format!("spline order s must be at least 2, got {s}")));
        }
        if corridor.num_pieces() == 0 {
            return Err(ProblemError::InvalidSpec("corridor has no pieces".into()));
        }
        penalty.validate()?;
        vehicle.validate()?;
        let report = corridor.validate();
        if !report.pass {
            return Err(ProblemError::InvalidSpec(format!(
                "corridor fails validation; failing pairs {:?}{}",
                report.failing_pairs(),
                report.assignment_error.map(|e| format!(", {e}")).unwrap_or_default()
            )));
        }
        let containers = build_containers(&corridor)?;
        let layout = VarLayout::new(&containers);
        Ok(Self {
            corridor,
            shape,
            bc,
            s,
            penalty,
            vehicle,
            containers,
            layout,
        })
    }

    pub fn corridor(&self) -> &Corridor {
        &self.corridor
    }

    pub fn shape(&self) -> &VehicleShape {
        &self.shape
    }

    pub fn boundary(&self) -> &BoundaryCondition {
        &self.bc
    }

    pub fn order(&self) -> usize {
        self.s
    }

    pub fn penalty(&self) -> &PenaltyConfig {
        &self.penalty
    }

    pub fn vehicle(&self) -> &VehicleParams {
        &self.vehicle
    }

    pub fn containers(&self) -> &[WaypointContainer] {
        &self.containers
    }

    pub fn layout(&self) -> &VarLayout {
        &self.layout
    }

    pub fn num_pieces(&self) -> usize {
        self.layout.num_pieces
    }

    /// Centroid waypoints, interpolated attitudes, distance-based durations.
    ///
    /// Where the interpolated attitude leaves a shape vertex outside the
    /// waypoint's container, a quarter roll or pitch is used instead if it
    /// fits better.
    pub fn initial_guess(&self) -> DecisionVars {
        let mut vars = initialize(&self.containers, &self.bc, self.penalty.v_max);
        for (c, sigma) in self.containers.iter().zip(vars.q_sigma.iter_mut()) {
            let poly = c.polyhedron();
            let centre = poly.vertex_centroid();
            let worst = |rot: &Matrix3<f64>| {
                (0..self.shape.len())
                    .map(|l| poly.max_slack(&self.shape.vertex_world(&centre, rot, l)))
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            let mut best = (worst(&eval_attitude(sigma).rot), *sigma);
            if best.0 <= 0.0 {
                continue;
            }
            let quarter = std::f64::consts::FRAC_PI_2;
            for axis in [Vector3::x_axis(), Vector3::y_axis()] {
                for angle in [quarter, -quarter] {
                    let rot = *Rotation3::from_axis_angle(&axis, angle).matrix();
                    let w = worst(&rot);
                    if w < best.0 {
                        best = (w, sigma_from_rotation(&rot));
                    }
                }
            }
            *sigma = best.1;
        }
        vars
    }

    /// Durations actually used for a given `τ` (exponentiated, then floored).
    pub fn durations(&self, tau: &[f64]) -> Vec<f64> {
        forward_t(tau)
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                if t < MIN_DURATION {
                    warn!("piece {i} duration {t:e} s floored to {MIN_DURATION:e} s");
                    MIN_DURATION
                } else {
                    t
                }
            })
            .collect()
    }

    fn check_dims(&self, vars: &DecisionVars) -> Result<(), ProblemError> {
        let l = &self.layout;
        if vars.xi.len() != l.xi_len || vars.q_sigma.len() != l.num_waypoints || vars.tau.len() != l.num_pieces {
            return Err(ProblemError::InvalidSpec(format!(
                "decision variables have shape ({}, {}, {}), expected ({}, {}, {})",
                vars.xi.len(),
                vars.q_sigma.len(),
                vars.tau.len(),
                l.xi_len,
                l.num_waypoints,
                l.num_pieces
            )));
        }
        Ok(())
    }

    /// Interior waypoints in flat-output space.
    pub fn waypoints(&self, vars: &DecisionVars) -> Vec<Vector6<f64>> {
        self.containers
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let q = c.forward(self.layout.xi_block(&vars.xi, j));
                let s = vars.q_sigma[j];
                Vector6::new(q.x, q.y, q.z, s.x, s.y, s.z)
            })
            .collect()
    }

    pub fn trajectory(&self, vars: &DecisionVars) -> Result<Trajectory, ProblemError> {
        self.check_dims(vars)?;
        let t = self.durations(&vars.tau);
        Ok(solve_coefficients(self.s, &self.waypoints(vars), &t, &self.bc)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveEval {
    pub value: f64,
    pub grad_xi: Vec<f64>,
    pub grad_qsigma: Vec<Vector3<f64>>,
    pub grad_tau: Vec<f64>,
    /// Control effort `J`.
    pub smoothness: f64,
    /// `Σ Tᵢ`.
    pub total_time: f64,
    pub penalties: PenaltyTerms,
    pub maxima: ViolationMaxima,
}

impl ObjectiveEval {
    /// Gradient in the flat `[ξ, qσ, τ]` order.
    pub fn flat_grad(&self) -> Vec<f64> {
        DecisionVars {
            xi: self.grad_xi.clone(),
            q_sigma: self.grad_qsigma.clone(),
            tau: self.grad_tau.clone(),
        }
        .to_flat()
    }
}

pub fn objective(vars: &DecisionVars, spec: &ProblemSpec) -> Result<ObjectiveEval, ProblemError> {
    spec.check_dims(vars)?;
    let durations = spec.durations(&vars.tau);
    let traj = solve_coefficients(spec.s, &spec.waypoints(vars), &durations, &spec.bc)?;
    objective_on(vars, spec, &traj)
}

fn objective_on(vars: &DecisionVars, spec: &ProblemSpec, traj: &Trajectory) -> Result<ObjectiveEval, ProblemError> {
    let sm = traj.smoothness();
    let pen = penalty::evaluate(traj, &spec.corridor, &spec.shape, &spec.penalty)?;
    let k_rho = spec.penalty.k_rho;
    let total_time: f64 = traj.durations().iter().sum();
    let value = sm.cost + k_rho * total_time + pen.total;

    let grad_c: Vec<f64> = sm.grad_coeffs.iter().zip(&pen.grad_coeffs).map(|(a, b)| a + b).collect();
    let grad_t: Vec<f64> = sm
        .grad_durations
        .iter()
        .zip(&pen.grad_durations)
        .map(|(a, b)| a + b + k_rho)
        .collect();
    let back = traj.backprop(&grad_c, &grad_t)?;

    let mut grad_xi = vec![0.0; spec.layout.xi_len];
    let mut grad_qsigma = Vec::with_capacity(spec.layout.num_waypoints);
    for (j, c) in spec.containers.iter().enumerate() {
        let w = &back.waypoints[j];
        let (lo, hi) = (spec.layout.xi_offsets[j], spec.layout.xi_offsets[j + 1]);
        let gq = Vector3::new(w[0], w[1], w[2]);
        c.pullback(&vars.xi[lo..hi], &gq, &mut grad_xi[lo..hi]);
        grad_qsigma.push(Vector3::new(w[3], w[4], w[5]));
    }
    let mut grad_tau = pullback_t(&vars.tau, &back.durations);
    for (g, &t) in grad_tau.iter_mut().zip(traj.durations()) {
        if t <= MIN_DURATION {
            *g = 0.0;
        }
    }
    Ok(ObjectiveEval {
        value,
        grad_xi,
        grad_qsigma,
        grad_tau,
        smoothness: sm.cost,
        total_time,
        penalties: pen.terms,
        maxima: pen.maxima,
    })
}

/// Value and flat gradient at a flat variable vector.
pub fn objective_flat(x: &[f64], spec: &ProblemSpec) -> Result<(f64, Vec<f64>), ProblemError> {
    if x.len() != spec.layout.len() {
        return Err(ProblemError::InvalidSpec(format!(
            "flat vector has length {}, expected {}",
            x.len(),
            spec.layout.len()
        )));
    }
    let e = objective(&DecisionVars::from_flat(&spec.layout, x), spec)?;
    Ok((e.value, e.flat_grad()))
}

#[derive(Debug, Clone)]
pub struct Optimized {
    pub vars: DecisionVars,
    pub trajectory: Trajectory,
    pub eval: ObjectiveEval,
    pub status: Status,
    pub iterations: usize,
    /// Starting point first, then one entry per accepted step.
    pub history: Vec<TraceEntry>,
}

impl Optimized {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }
}

/// Runs L-BFGS from `init`. A run that stops on the iteration cap or a failed
/// line search still returns its best iterate, flagged in `status`.
pub fn optimize(spec: &ProblemSpec, init: &DecisionVars, cfg: &SolverConfig) -> Result<Optimized, ProblemError> {
    spec.check_dims(init)?;
    if !init.is_finite() {
        return Err(ProblemError::InvalidSpec("initial decision variables are not finite".into()));
    }
    let n = spec.layout.len();
    let x0 = init.to_flat();
    objective_flat(&x0, spec)?;
    let oracle = |x: &[f64]| match objective_flat(x, spec) {
        Ok(r) => r,
        Err(e) => {
            warn!("objective failed during line search: {e}");
            (f64::NAN, vec![f64::NAN; n])
        }
    };
    let min = minimize(oracle, &x0, cfg)?;
    let vars = DecisionVars::from_flat(&spec.layout, &min.x);
    let trajectory = spec.trajectory(&vars)?;
    let eval = objective_on(&vars, spec, &trajectory)?;
    info!(
        "optimizer stopped after {} iterations ({:?}), objective {:.6e}",
        min.iterations, min.status, eval.value
    );
    Ok(Optimized {
        vars,
        trajectory,
        eval,
        status: min.status,
        iterations: min.iterations,
        history: min.trace,
    })
}
