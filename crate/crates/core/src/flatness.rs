//! State and wrench recovery from the flat output `z = (p, σ)`.

use nalgebra::{Matrix3, Vector3, Vector4};

use crate::attitude::{angular_acceleration_at, eval_attitude, hat};
use crate::spline::{SplineError, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// Body-frame inertia, kg·m².
    pub inertia: Matrix3<f64>,
    /// World-frame gravity, m/s².
    pub gravity: Vector3<f64>,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 4.0,
            inertia: Matrix3::from_diagonal(&Vector3::new(0.08, 0.08, 0.14)),
            gravity: Vector3::new(0.0, 0.0, -9.8),
        }
    }
}

impl VehicleParams {
    pub fn new(mass: f64, inertia: Matrix3<f64>, gravity: Vector3<f64>) -> Result<Self, FlatnessError> {
        let p = Self { mass, inertia, gravity };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), FlatnessError> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(FlatnessError::InvalidParams(format!("mass must be positive, got {}", self.mass)));
        }
        if (self.inertia - self.inertia.transpose()).amax() > 1e-10 {
            return Err(FlatnessError::InvalidParams("inertia is not symmetric".into()));
        }
        if self.inertia.cholesky().is_none() {
            return Err(FlatnessError::InvalidParams("inertia is not positive definite".into()));
        }
        if !self.gravity.iter().all(|g| g.is_finite()) {
            return Err(FlatnessError::InvalidParams("gravity is not finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FlatnessError {
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),
    #[error("sample spacing must be positive, got {0}")]
    InvalidSpacing(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatState {
    pub t: f64,
    pub p: Vector3<f64>,
    pub v: Vector3<f64>,
    pub a: Vector3<f64>,
    /// Unit quaternion `(w, x, y, z)`.
    pub q: Vector4<f64>,
    pub rot: Matrix3<f64>,
    /// World frame.
    pub omega: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatInput {
    /// World frame.
    pub omega_dot: Vector3<f64>,
    /// Body-frame force, N.
    pub f_b: Vector3<f64>,
    /// Body-frame torque, N·m.
    pub tau_b: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatSample {
    pub state: FlatState,
    pub input: FlatInput,
}

pub fn state_at(traj: &Trajectory, t: f64) -> Result<FlatState, FlatnessError> {
    let (i, local) = traj.locate(t)?;
    let z0 = traj.eval_piece(i, local, 0);
    let z1 = traj.eval_piece(i, local, 1);
    let z2 = traj.eval_piece(i, local, 2);
    let att = eval_attitude(&z0.fixed_rows::<3>(3).into_owned());
    Ok(FlatState {
        t,
        p: z0.fixed_rows::<3>(0).into_owned(),
        v: z1.fixed_rows::<3>(0).into_owned(),
        a: z2.fixed_rows::<3>(0).into_owned(),
        q: att.q,
        rot: att.rot,
        omega: att.angular_velocity(&z1.fixed_rows::<3>(3).into_owned()),
    })
}

/// `f_b = m Rᵀ(p̈ − g)`, `τ_b = Rᵀ(ω^ J ω + J ω̇)` with `J = R J_b Rᵀ`.
pub fn input_at(traj: &Trajectory, params: &VehicleParams, t: f64) -> Result<FlatInput, FlatnessError> {
    Ok(sample_at(traj, params, t)?.input)
}

pub fn sample_at(traj: &Trajectory, params: &VehicleParams, t: f64) -> Result<FlatSample, FlatnessError> {
    let (i, local) = traj.locate(t)?;
    let z0 = traj.eval_piece(i, local, 0);
    let z1 = traj.eval_piece(i, local, 1);
    let z2 = traj.eval_piece(i, local, 2);
    let att = eval_attitude(&z0.fixed_rows::<3>(3).into_owned());
    let sigma_dot = z1.fixed_rows::<3>(3).into_owned();
    let omega = att.angular_velocity(&sigma_dot);
    let omega_dot = angular_acceleration_at(&att, &sigma_dot, &z2.fixed_rows::<3>(3).into_owned());
    let a = z2.fixed_rows::<3>(0).into_owned();
    let rt = att.rot.transpose();
    let j_world = att.rot * params.inertia * rt;
    let f_b = rt * (a - params.gravity) * params.mass;
    let tau_b = rt * (hat(&omega) * j_world * omega + j_world * omega_dot);
    Ok(FlatSample {
        state: FlatState {
            t,
            p: z0.fixed_rows::<3>(0).into_owned(),
            v: z1.fixed_rows::<3>(0).into_owned(),
            a,
            q: att.q,
            rot: att.rot,
            omega,
        },
        input: FlatInput { omega_dot, f_b, tau_b },
    })
}

/// Samples at `0, dt, 2dt, …` and always at the final time.
pub fn sample_profile(traj: &Trajectory, params: &VehicleParams, dt: f64) -> Result<Vec<FlatSample>, FlatnessError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(FlatnessError::InvalidSpacing(dt));
    }
    let end = traj.total_duration();
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let t = k as f64 * dt;
        if k > 0 && t >= end - 1e-9 * dt {
            break;
        }
        out.push(sample_at(traj, params, t)?);
        k += 1;
    }
    out.push(sample_at(traj, params, end)?);
    Ok(out)
}
