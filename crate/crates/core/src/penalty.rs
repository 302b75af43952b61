//! Sampled soft-constraint penalties on speed, acceleration, body rate and
//! whole-body corridor containment, with gradients w.r.t. piece coefficients
//! and durations.
//!
//! Piece `i` is sampled at `t̂ = (j/κ) Tᵢ`, `j = 1..=κ`, each sample weighted by
//! `Tᵢ/κ`. Every constraint `g ≤ 0` contributes `W 𝒱(g) Tᵢ/κ` with
//! `𝒱(x) = max(x, 0)³`. A piece whose polyhedron differs from its
//! predecessor's also checks containment at `j = 0`.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::attitude::{angular_acceleration_at, eval_attitude};
use crate::geometry::{Corridor, Polyhedron, VehicleShape};
use crate::spline::{basis, Trajectory, DIM};

/// Faces whose slack at the vehicle centre is below `−(r_max + TRUST_RADIUS)`
/// cannot be violated by any shape vertex and are skipped.
pub const TRUST_RADIUS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyConfig {
    pub v_max: f64,
    pub a_max: f64,
    pub omega_max: f64,
    pub kappa: usize,
    pub w_v: f64,
    pub w_a: f64,
    pub w_omega: f64,
    pub w_c: f64,
    /// Weight of `‖T‖₁`, s⁻¹. Larger values trade limit overshoot for
    /// shorter flights.
    pub k_rho: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            v_max: 0.8,
            a_max: 5.0,
            omega_max: 0.8,
            kappa: 16,
            w_v: 1e4,
            w_a: 1e4,
            w_omega: 1e4,
            w_c: 9e4,
            k_rho: 1.0,
        }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<(), PenaltyError> {
        let limits = [("v_max", self.v_max), ("a_max", self.a_max), ("omega_max", self.omega_max)];
        for (name, v) in limits {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PenaltyError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        let weights = [
            ("w_v", self.w_v),
            ("w_a", self.w_a),
            ("w_omega", self.w_omega),
            ("w_c", self.w_c),
            ("k_rho", self.k_rho),
        ];
        for (name, v) in weights {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(PenaltyError::InvalidConfig(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if self.kappa == 0 {
            return Err(PenaltyError::InvalidConfig("kappa must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PenaltyError {
    #[error("corridor assigns {got} pieces but the trajectory has {expected}")]
    AssignmentMismatch { expected: usize, got: usize },
    #[error("invalid penalty configuration: {0}")]
    InvalidConfig(String),
}

/// Largest sampled values of each constrained quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViolationMaxima {
    /// m/s
    pub speed: f64,
    /// m/s²
    pub acceleration: f64,
    /// rad/s
    pub omega: f64,
    /// Largest face slack of any shape vertex (m); negative means clearance.
    pub penetration: f64,
}

impl ViolationMaxima {
    fn empty() -> Self {
        Self {
            speed: 0.0,
            acceleration: 0.0,
            omega: 0.0,
            penetration: f64::NEG_INFINITY,
        }
    }

    fn merge(&mut self, o: &Self) {
        self.speed = self.speed.max(o.speed);
        self.acceleration = self.acceleration.max(o.acceleration);
        self.omega = self.omega.max(o.omega);
        self.penetration = self.penetration.max(o.penetration);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PenaltyTerms {
    pub velocity: f64,
    pub acceleration: f64,
    pub omega: f64,
    pub safety: f64,
}

impl PenaltyTerms {
    pub fn total(&self) -> f64 {
        self.velocity + self.acceleration + self.omega + self.safety
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyReport {
    pub total: f64,
    pub terms: PenaltyTerms,
    pub maxima: ViolationMaxima,
    /// Same layout as [`Trajectory::coeffs`].
    pub grad_coeffs: Vec<f64>,
    pub grad_durations: Vec<f64>,
}

/// `max(x, 0)³`.
pub fn violation_cubed(x: f64) -> f64 {
    if x > 0.0 {
        x * x * x
    } else {
        0.0
    }
}

/// `3 max(x, 0)²`.
pub fn violation_cubed_derivative(x: f64) -> f64 {
    if x > 0.0 {
        3.0 * x * x
    } else {
        0.0
    }
}

struct PieceResult {
    terms: PenaltyTerms,
    maxima: ViolationMaxima,
    grad_c: Vec<f64>,
    grad_t: f64,
}

pub fn evaluate(
    traj: &Trajectory,
    corridor: &Corridor,
    shape: &VehicleShape,
    cfg: &PenaltyConfig,
) -> Result<PenaltyReport, PenaltyError> {
    let m = traj.num_pieces();
    if corridor.num_pieces() != m {
        return Err(PenaltyError::AssignmentMismatch {
            expected: m,
            got: corridor.num_pieces(),
        });
    }
    cfg.validate()?;
    let pieces: Vec<PieceResult> = (0..m)
        .into_par_iter()
        .map(|i| {
            let entry = i > 0 && corridor.assignment()[i] != corridor.assignment()[i - 1];
            evaluate_piece(traj, i, corridor.piece_polyhedron(i), entry, shape, cfg)
        })
        .collect();

    let n2s = 2 * traj.order();
    let mut terms = PenaltyTerms::default();
    let mut maxima = ViolationMaxima::empty();
    let mut grad_coeffs = Vec::with_capacity(m * n2s * DIM);
    let mut grad_durations = Vec::with_capacity(m);
    for p in pieces {
        terms.velocity += p.terms.velocity;
        terms.acceleration += p.terms.acceleration;
        terms.omega += p.terms.omega;
        terms.safety += p.terms.safety;
        maxima.merge(&p.maxima);
        grad_coeffs.extend_from_slice(&p.grad_c);
        grad_durations.push(p.grad_t);
    }
    Ok(PenaltyReport {
        total: terms.total(),
        terms,
        maxima,
        grad_coeffs,
        grad_durations,
    })
}

// Per-sample sensitivities of the sampled constraint sum w.r.t. the flat
// output and its derivatives, before distribution onto coefficient rows.
#[derive(Default)]
struct SampleGrad {
    p: [f64; 3],
    v: [f64; 3],
    a: [f64; 3],
    sigma: [f64; 3],
    sigma_dot: [f64; 3],
}

fn evaluate_piece(
    traj: &Trajectory,
    i: usize,
    poly: &Polyhedron,
    entry: bool,
    shape: &VehicleShape,
    cfg: &PenaltyConfig,
) -> PieceResult {
    let s = traj.order();
    let n2s = 2 * s;
    let t_i = traj.durations()[i];
    let kappa = cfg.kappa;
    let w = t_i / kappa as f64;
    let v2 = cfg.v_max * cfg.v_max;
    let a2 = cfg.a_max * cfg.a_max;
    let om2 = cfg.omega_max * cfg.omega_max;
    let reject = -(shape.max_radius() + TRUST_RADIUS);

    let mut terms = PenaltyTerms::default();
    let mut maxima = ViolationMaxima::empty();
    let mut grad_c = vec![0.0; n2s * DIM];
    let mut grad_t = 0.0;
    let mut b = vec![vec![0.0; n2s]; 3];

    // A piece entering a new polyhedron also checks its first pose for
    // safety; the previous piece only checked it against the old one.
    let first = if entry { 0 } else { 1 };
    for j in first..=kappa {
        let dynamic = j > 0;
        let alpha = j as f64 / kappa as f64;
        let t = alpha * t_i;
        let z0 = traj.eval_piece(i, t, 0);
        let z1 = traj.eval_piece(i, t, 1);
        let z2 = traj.eval_piece(i, t, 2);
        let z3 = traj.eval_piece(i, t, 3);
        let p = z0.fixed_rows::<3>(0).into_owned();
        let vel = z1.fixed_rows::<3>(0).into_owned();
        let acc = z2.fixed_rows::<3>(0).into_owned();
        let jerk = z3.fixed_rows::<3>(0).into_owned();
        let sigma = z0.fixed_rows::<3>(3).into_owned();
        let sigma_dot = z1.fixed_rows::<3>(3).into_owned();
        let sigma_ddot = z2.fixed_rows::<3>(3).into_owned();

        let mut sg = SampleGrad::default();
        // Total derivative of this sample's Σ W 𝒱(g) w.r.t. sample time.
        let mut dt = 0.0;
        let mut value = PenaltyTerms::default();

        let gv = vel.norm_squared() - v2;
        maxima.speed = maxima.speed.max(vel.norm());
        if dynamic && gv > 0.0 {
            value.velocity = cfg.w_v * violation_cubed(gv);
            let d = cfg.w_v * violation_cubed_derivative(gv);
            for k in 0..3 {
                sg.v[k] += d * 2.0 * vel[k];
            }
            dt += d * 2.0 * vel.dot(&acc);
        }

        let ga = acc.norm_squared() - a2;
        maxima.acceleration = maxima.acceleration.max(acc.norm());
        if dynamic && ga > 0.0 {
            value.acceleration = cfg.w_a * violation_cubed(ga);
            let d = cfg.w_a * violation_cubed_derivative(ga);
            for k in 0..3 {
                sg.a[k] += d * 2.0 * acc[k];
            }
            dt += d * 2.0 * acc.dot(&jerk);
        }

        let att = eval_attitude(&sigma);
        let omega = att.angular_velocity(&sigma_dot);
        let go = omega.norm_squared() - om2;
        maxima.omega = maxima.omega.max(omega.norm());
        if dynamic && go > 0.0 {
            value.omega = cfg.w_omega * violation_cubed(go);
            let d = cfg.w_omega * violation_cubed_derivative(go);
            let d_sigma = att.angular_velocity_sigma_jacobian(&sigma_dot).transpose() * omega * (2.0 * d);
            let d_sigma_dot = att.gamma.transpose() * omega * (4.0 * d);
            for k in 0..3 {
                sg.sigma[k] += d_sigma[k];
                sg.sigma_dot[k] += d_sigma_dot[k];
            }
            let omega_dot = angular_acceleration_at(&att, &sigma_dot, &sigma_ddot);
            dt += d * 2.0 * omega.dot(&omega_dot);
        }

        let mut dr: Option<([Matrix3<f64>; 3], Matrix3<f64>)> = None;
        for hs in poly.halfspaces() {
            let centre_slack = hs.slack(&p);
            if centre_slack < reject {
                maxima.penetration = maxima.penetration.max(centre_slack + shape.max_radius());
                continue;
            }
            for bv in shape.body_vertices() {
                let rv = att.rot * bv;
                let g = centre_slack + hs.normal.dot(&rv);
                maxima.penetration = maxima.penetration.max(g);
                if g <= 0.0 {
                    continue;
                }
                let (dr_ds, rdot) = dr.get_or_insert_with(|| {
                    let dr_ds = att.rotation_sigma_jacobian();
                    let rdot = dr_ds[0] * sigma_dot[0] + dr_ds[1] * sigma_dot[1] + dr_ds[2] * sigma_dot[2];
                    (dr_ds, rdot)
                });
                value.safety += cfg.w_c * violation_cubed(g);
                let d = cfg.w_c * violation_cubed_derivative(g);
                for k in 0..3 {
                    sg.p[k] += d * hs.normal[k];
                    sg.sigma[k] += d * hs.normal.dot(&(dr_ds[k] * bv));
                }
                dt += d * hs.normal.dot(&(vel + *rdot * bv));
            }
        }

        terms.velocity += value.velocity * w;
        terms.acceleration += value.acceleration * w;
        terms.omega += value.omega * w;
        terms.safety += value.safety * w;
        grad_t += value.total() / kappa as f64 + dt * alpha * w;

        basis(0, t, &mut b[0]);
        basis(1, t, &mut b[1]);
        basis(2, t, &mut b[2]);
        for a in 0..n2s {
            let row = &mut grad_c[a * DIM..(a + 1) * DIM];
            for k in 0..3 {
                row[k] += w * (sg.p[k] * b[0][a] + sg.v[k] * b[1][a] + sg.a[k] * b[2][a]);
                row[k + 3] += w * (sg.sigma[k] * b[0][a] + sg.sigma_dot[k] * b[1][a]);
            }
        }
    }

    PieceResult {
        terms,
        maxima,
        grad_c,
        grad_t,
    }
}

/// Maxima of speed, acceleration, `‖ω‖` and vertex penetration over
/// `oversample · κ + 1` evenly spaced samples per piece, endpoints included.
pub fn max_violation_profile(
    traj: &Trajectory,
    corridor: &Corridor,
    shape: &VehicleShape,
    cfg: &PenaltyConfig,
    oversample: usize,
) -> Result<ViolationMaxima, PenaltyError> {
    let m = traj.num_pieces();
    if corridor.num_pieces() != m {
        return Err(PenaltyError::AssignmentMismatch {
            expected: m,
            got: corridor.num_pieces(),
        });
    }
    let n = (oversample * cfg.kappa).max(1);
    let per_piece: Vec<ViolationMaxima> = (0..m)
        .into_par_iter()
        .map(|i| {
            let poly = corridor.piece_polyhedron(i);
            let t_i = traj.durations()[i];
            let mut out = ViolationMaxima::empty();
            for j in 0..=n {
                let t = j as f64 / n as f64 * t_i;
                let z0 = traj.eval_piece(i, t, 0);
                let z1 = traj.eval_piece(i, t, 1);
                let z2 = traj.eval_piece(i, t, 2);
                let sigma = z0.fixed_rows::<3>(3).into_owned();
                let att = eval_attitude(&sigma);
                out.speed = out.speed.max(z1.fixed_rows::<3>(0).norm());
                out.acceleration = out.acceleration.max(z2.fixed_rows::<3>(0).norm());
                out.omega = out
                    .omega
                    .max(att.angular_velocity(&z1.fixed_rows::<3>(3).into_owned()).norm());
                let p: Vector3<f64> = z0.fixed_rows::<3>(0).into_owned();
                for bv in shape.body_vertices() {
                    out.penetration = out.penetration.max(poly.max_slack(&(p + att.rot * bv)));
                }
            }
            out
        })
        .collect();
    let mut out = ViolationMaxima::empty();
    for p in &per_piece {
        out.merge(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spline::{solve_coefficients, BoundaryCondition};
    use nalgebra::Vector6;

    fn big_box() -> Corridor {
        Corridor::with_pieces_per_polyhedron(
            vec![Polyhedron::aabb(Vector3::repeat(-5.0), Vector3::repeat(5.0)).unwrap()],
            1,
        )
    }

    #[test]
    fn cubed_hinge() {
        assert_eq!(violation_cubed(-1.0), 0.0);
        assert_eq!(violation_cubed(2.0), 8.0);
        assert_eq!(violation_cubed(0.0), 0.0);
        assert_eq!(violation_cubed_derivative(0.0), 0.0);
        assert_eq!(violation_cubed_derivative(2.0), 12.0);
    }

    #[test]
    fn entering_a_new_polyhedron_checks_the_first_pose() {
        let p = Vector6::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let traj = solve_coefficients(4, &[p], &[1.0, 1.0], &BoundaryCondition::rest_to_rest(4, p, p)).unwrap();
        let shape = VehicleShape::cuboid(1.0, 1.0, 0.35).unwrap();
        // Level body pokes 0.3 m through x = -0.2 at every sample.
        let tight = Polyhedron::aabb(Vector3::new(-0.2, -5.0, -5.0), Vector3::repeat(5.0)).unwrap();
        let cfg = PenaltyConfig::default();
        let same = Corridor::new(vec![tight.clone()], vec![0, 0]);
        let switched = Corridor::new(vec![tight.clone(), tight], vec![0, 1]);
        let a = evaluate(&traj, &same, &shape, &cfg).unwrap();
        let b = evaluate(&traj, &switched, &shape, &cfg).unwrap();
        let k = cfg.kappa as f64;
        assert!(a.terms.safety > 0.0);
        assert!((b.terms.safety / a.terms.safety - (2.0 * k + 1.0) / (2.0 * k)).abs() < 1e-12);
        assert_eq!(a.terms.velocity, b.terms.velocity);
    }

    #[test]
    fn hover_has_no_penalty() {
        let p = Vector6::new(0.0, 0.0, 0.0, 0.1, -0.2, 0.05);
        let traj = solve_coefficients(4, &[], &[2.0], &BoundaryCondition::rest_to_rest(4, p, p)).unwrap();
        let shape = VehicleShape::cuboid(1.0, 1.0, 0.35).unwrap();
        let r = evaluate(&traj, &big_box(), &shape, &PenaltyConfig::default()).unwrap();
        assert_eq!(r.total, 0.0);
        assert!(r.grad_coeffs.iter().all(|&g| g == 0.0));
        assert!(r.grad_durations.iter().all(|&g| g == 0.0));
        assert!(r.maxima.penetration < -4.0);
    }

    #[test]
    fn fast_straight_line_wants_more_time() {
        let bc = BoundaryCondition::rest_to_rest(
            4,
            Vector6::zeros(),
            Vector6::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        );
        let traj = solve_coefficients(4, &[], &[1.0], &bc).unwrap();
        let shape = VehicleShape::cuboid(1.0, 1.0, 0.35).unwrap();
        let r = evaluate(&traj, &big_box(), &shape, &PenaltyConfig::default()).unwrap();
        assert!(r.terms.velocity > 0.0);
        assert!(r.grad_durations[0] < 0.0);
    }

    #[test]
    fn assignment_mismatch() {
        let bc = BoundaryCondition::rest_to_rest(3, Vector6::zeros(), Vector6::zeros());
        let traj = solve_coefficients(3, &[Vector6::zeros()], &[1.0, 1.0], &bc).unwrap();
        let shape = VehicleShape::cuboid(0.1, 0.1, 0.1).unwrap();
        let err = evaluate(&traj, &big_box(), &shape, &PenaltyConfig::default()).unwrap_err();
        assert_eq!(err, PenaltyError::AssignmentMismatch { expected: 2, got: 1 });
    }

    #[test]
    fn config_validation() {
        let mut c = PenaltyConfig::default();
        assert!(c.validate().is_ok());
        c.kappa = 0;
        assert!(c.validate().is_err());
        let c = PenaltyConfig { v_max: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = PenaltyConfig { w_c: -1.0, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
