//! Attitude parameterization by stereographic projection of unit quaternions.
//!
//! A free vector `σ ∈ R³` maps to the unit quaternion
//! `Q = [(σᵀσ − 1)/(σᵀσ + 1), 2σᵀ/(σᵀσ + 1)]` (scalar first), which covers the
//! whole sphere except the pole `(1, 0, 0, 0)`. Rotations use the Hamilton
//! convention, so the world-frame angular velocity is `ω = 2 U Q̇` with
//! `U = [−r | wI + r^]`; this is the same vector as `(Ṙ Rᵀ)^∨`.

use nalgebra::{Matrix3, Matrix3x4, Rotation3, UnitQuaternion, Vector3, Vector4};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AttitudeError {
    #[error("quaternion norm {0} is not 1")]
    NonUnitQuaternion(f64),
}

/// Skew-symmetric matrix with `hat(a) * b = a × b`.
#[inline]
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`] (reads the skew part).
#[inline]
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Unit quaternion `(w, x, y, z)` for a stereographic coordinate.
pub fn quat_from_sigma(sigma: &Vector3<f64>) -> Vector4<f64> {
    let n2 = sigma.norm_squared();
    let inv = 1.0 / (n2 + 1.0);
    Vector4::new((n2 - 1.0) * inv, 2.0 * sigma.x * inv, 2.0 * sigma.y * inv, 2.0 * sigma.z * inv)
}

/// Inverse projection from the pole `(1, 0, 0, 0)`; `None` at the pole.
pub fn sigma_from_quat(q: &Vector4<f64>) -> Option<Vector3<f64>> {
    let den = 1.0 - q[0];
    if den <= f64::EPSILON {
        return None;
    }
    Some(Vector3::new(q[1], q[2], q[3]) / den)
}

/// Stereographic coordinate of a rotation, using the quaternion lift with
/// `w <= 0` so that `‖σ‖ <= 1`.
pub fn sigma_from_rotation(rot: &Matrix3<f64>) -> Vector3<f64> {
    let uq = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*rot));
    let mut q = Vector4::new(uq.w, uq.i, uq.j, uq.k);
    if q[0] > 0.0 {
        q = -q;
    }
    // w <= 0 keeps the denominator >= 1.
    sigma_from_quat(&q).expect("lift with w <= 0 is away from the pole")
}

pub fn rotation_from_quat(q: &Vector4<f64>) -> Result<Matrix3<f64>, AttitudeError> {
    let n = q.norm();
    if (n - 1.0).abs() > 1e-9 {
        return Err(AttitudeError::NonUnitQuaternion(n));
    }
    Ok(rotation_from_quat_unchecked(q))
}

/// `R = (w² − rᵀr) I + 2 r rᵀ + 2 w r^`, valid for unit `q`.
pub fn rotation_from_quat_unchecked(q: &Vector4<f64>) -> Matrix3<f64> {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, xz, yz) = (x * y, x * z, y * z);
    let (wx, wy, wz) = (w * x, w * y, w * z);
    Matrix3::new(
        1.0 - 2.0 * (yy + zz),
        2.0 * (xy - wz),
        2.0 * (xz + wy),
        2.0 * (xy + wz),
        1.0 - 2.0 * (xx + zz),
        2.0 * (yz - wx),
        2.0 * (xz - wy),
        2.0 * (yz + wx),
        1.0 - 2.0 * (xx + yy),
    )
}

/// Partial derivatives `∂R/∂Q_α` of the homogeneous form
/// `R = (w² − rᵀr) I + 2 r rᵀ + 2 w r^`, for `α = w, x, y, z`.
pub fn rotation_quat_jacobian(q: &Vector4<f64>) -> [Matrix3<f64>; 4] {
    let w = q[0];
    let r = Vector3::new(q[1], q[2], q[3]);
    let dw = Matrix3::identity() * (2.0 * w) + hat(&r) * 2.0;
    let mut out = [dw, Matrix3::zeros(), Matrix3::zeros(), Matrix3::zeros()];
    for a in 0..3 {
        let e = Vector3::ith(a, 1.0);
        out[a + 1] = Matrix3::identity() * (-2.0 * r[a])
            + (e * r.transpose() + r * e.transpose()) * 2.0
            + hat(&e) * (2.0 * w);
    }
    out
}

/// Everything the gradient chain needs at one stereographic coordinate.
#[derive(Debug, Clone)]
pub struct AttitudeEval {
    pub sigma: Vector3<f64>,
    /// Unit quaternion `(w, x, y, z)`.
    pub q: Vector4<f64>,
    pub rot: Matrix3<f64>,
    /// Column `α` is `∂Q_α/∂σ`.
    pub g: Matrix3x4<f64>,
    /// Hessians `∂²Q_α/∂σ²` for `α = w, x, y, z`.
    pub h: [Matrix3<f64>; 4],
    /// `[−r | wI + r^]`.
    pub u: Matrix3x4<f64>,
    /// `U Gᵀ`, so that `ω = 2 Γ σ̇`.
    pub gamma: Matrix3<f64>,
}

pub fn eval_attitude(sigma: &Vector3<f64>) -> AttitudeEval {
    let s = sigma;
    let n2 = s.norm_squared();
    let d = 1.0 + n2;
    let d2 = d * d;
    let d3 = d2 * d;
    let q = quat_from_sigma(s);
    let rot = rotation_from_quat_unchecked(&q);

    // ∂w/∂σ = 4σ/D², ∂r_a/∂σ_b = 2δ_ab/D − 4σ_aσ_b/D².
    let mut g = Matrix3x4::zeros();
    g.set_column(0, &(s * (4.0 / d2)));
    for a in 0..3 {
        for b in 0..3 {
            let delta = if a == b { 1.0 } else { 0.0 };
            g[(b, a + 1)] = 2.0 * delta / d - 4.0 * s[a] * s[b] / d2;
        }
    }

    // H_w = 4I/D² − 16σσᵀ/D³.
    // H_{r_a}[b][c] = −4(δ_ab σ_c + δ_ac σ_b + δ_bc σ_a)/D² + 16 σ_a σ_b σ_c / D³.
    let mut h = [Matrix3::zeros(); 4];
    h[0] = Matrix3::identity() * (4.0 / d2) - s * s.transpose() * (16.0 / d3);
    for a in 0..3 {
        let m = &mut h[a + 1];
        for b in 0..3 {
            for c in 0..3 {
                let kd = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
                m[(b, c)] = -4.0 * (kd(a, b) * s[c] + kd(a, c) * s[b] + kd(b, c) * s[a]) / d2
                    + 16.0 * s[a] * s[b] * s[c] / d3;
            }
        }
    }

    let u = u_matrix(&q);
    let gamma = u * g.transpose();
    AttitudeEval {
        sigma: *sigma,
        q,
        rot,
        g,
        h,
        u,
        gamma,
    }
}

// Linear in its argument, so it also yields U̇ and ∂U/∂σ_m from Q̇ and ∂Q/∂σ_m.
fn u_matrix(q: &Vector4<f64>) -> Matrix3x4<f64> {
    let r = Vector3::new(q[1], q[2], q[3]);
    let mut u = Matrix3x4::zeros();
    u.set_column(0, &(-r));
    u.fixed_view_mut::<3, 3>(0, 1)
        .copy_from(&(Matrix3::identity() * q[0] + hat(&r)));
    u
}

impl AttitudeEval {
    /// World-frame angular velocity `2 Γ σ̇`.
    pub fn angular_velocity(&self, sigma_dot: &Vector3<f64>) -> Vector3<f64> {
        self.gamma * sigma_dot * 2.0
    }

    /// `Q̇ = Gᵀ σ̇`.
    pub fn quat_rate(&self, sigma_dot: &Vector3<f64>) -> Vector4<f64> {
        self.g.transpose() * sigma_dot
    }

    /// `∂R/∂σ_m` for `m = 0, 1, 2`.
    pub fn rotation_sigma_jacobian(&self) -> [Matrix3<f64>; 3] {
        let dq = rotation_quat_jacobian(&self.q);
        let mut out = [Matrix3::zeros(); 3];
        for (m, o) in out.iter_mut().enumerate() {
            for (alpha, d) in dq.iter().enumerate() {
                *o += d * self.g[(m, alpha)];
            }
        }
        out
    }

    /// `∂ω/∂σ` at fixed `σ̇`; column `m` is the derivative w.r.t. `σ_m`.
    pub fn angular_velocity_sigma_jacobian(&self, sigma_dot: &Vector3<f64>) -> Matrix3<f64> {
        let qdot = self.quat_rate(sigma_dot);
        // Row α of this matrix is (H_α σ̇)ᵀ, i.e. ∂Q̇_α/∂σ.
        let mut dqdot = nalgebra::Matrix4x3::zeros();
        for alpha in 0..4 {
            dqdot.set_row(alpha, &(self.h[alpha] * sigma_dot).transpose());
        }
        let mut out = Matrix3::zeros();
        for m in 0..3 {
            let dq = self.g.row(m).transpose();
            let du = u_matrix(&dq);
            let col = (du * qdot + self.u * dqdot.column(m)) * 2.0;
            out.set_column(m, &col);
        }
        out
    }
}

pub fn angular_velocity(eval: &AttitudeEval, sigma_dot: &Vector3<f64>) -> Vector3<f64> {
    eval.angular_velocity(sigma_dot)
}

/// `ω̇ = 2 (U̇ Q̇ + U Q̈)` along a curve `σ(t)`.
pub fn angular_acceleration(
    sigma: &Vector3<f64>,
    sigma_dot: &Vector3<f64>,
    sigma_ddot: &Vector3<f64>,
) -> Vector3<f64> {
    angular_acceleration_at(&eval_attitude(sigma), sigma_dot, sigma_ddot)
}

pub fn angular_acceleration_at(
    eval: &AttitudeEval,
    sigma_dot: &Vector3<f64>,
    sigma_ddot: &Vector3<f64>,
) -> Vector3<f64> {
    let qdot = eval.quat_rate(sigma_dot);
    let mut qddot = eval.g.transpose() * sigma_ddot;
    for alpha in 0..4 {
        qddot[alpha] += sigma_dot.dot(&(eval.h[alpha] * sigma_dot));
    }
    let udot = u_matrix(&qdot);
    (udot * qdot + eval.u * qddot) * 2.0
}
