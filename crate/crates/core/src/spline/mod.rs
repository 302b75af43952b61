//! Minimum-control-effort piecewise polynomials over R⁶ (position and
//! stereographic attitude).
//!
//! Each piece is `z(t) = cᵢᵀ β(t − tᵢ₋₁)` with `β(α) = [1, α, …, α^{2s−1}]`.
//! Given the boundary derivative stacks, interior waypoint values and piece
//! durations, the coefficients are the unique solution of a banded linear
//! system: `s` start conditions, then for every interior knot one waypoint row
//! and `2s − 1` continuity rows (orders `0..=2s−2`), then `s` end conditions.
//! The solution is the minimizer of `∫‖z⁽ˢ⁾‖²` among all interpolants.
//!
//! Coefficients are stored row-major as `M · 2s` rows of [`DIM`] columns.

mod band;

use nalgebra::Vector6;

pub use band::{BandLu, BandMatrix, ScaledBandLu, SingularMatrix};

/// Flat-output dimension: position then stereographic attitude.
pub const DIM: usize = 6;
/// Durations below this make the construction numerically singular.
pub const MIN_SOLVABLE_DURATION: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplineError {
    #[error("piece {0} has a non-positive or non-finite duration")]
    NonPositiveDuration(usize),
    #[error("coefficient system is numerically singular")]
    SingularSystem,
    #[error("time {t} outside [0, {end}]")]
    OutOfDomain { t: f64, end: f64 },
    #[error("expected {expected} {what}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("trajectory was not built by the coefficient solver")]
    NotSolved,
}

/// Derivative stacks `z, ż, …, z⁽ˢ⁻¹⁾` at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCondition {
    pub start: Vec<Vector6<f64>>,
    pub end: Vec<Vector6<f64>>,
}

impl BoundaryCondition {
    /// Rest-to-rest: given values, all higher derivatives zero.
    pub fn rest_to_rest(s: usize, start: Vector6<f64>, end: Vector6<f64>) -> Self {
        let mut a = vec![Vector6::zeros(); s];
        let mut b = vec![Vector6::zeros(); s];
        a[0] = start;
        b[0] = end;
        Self { start: a, end: b }
    }

    /// From two `6s` stacks ordered `[z; ż; …]`.
    pub fn from_stacks(s: usize, start: &[f64], end: &[f64]) -> Result<Self, SplineError> {
        for v in [start, end] {
            if v.len() != DIM * s {
                return Err(SplineError::DimensionMismatch {
                    what: "boundary entries",
                    expected: DIM * s,
                    got: v.len(),
                });
            }
        }
        let split = |v: &[f64]| v.chunks_exact(DIM).map(Vector6::from_column_slice).collect();
        Ok(Self {
            start: split(start),
            end: split(end),
        })
    }

    pub fn order(&self) -> usize {
        self.start.len()
    }
}

/// `d^order/dα^order` of the monomial basis `[1, α, …, α^{n−1}]`.
#[inline]
pub fn basis(order: usize, alpha: f64, out: &mut [f64]) {
    let mut pow = 1.0;
    for (a, o) in out.iter_mut().enumerate() {
        if a < order {
            *o = 0.0;
        } else {
            *o = falling_factorial(a, order) * pow;
            pow *= alpha;
        }
    }
}

/// `a! / (a − k)!`.
#[inline]
pub fn falling_factorial(a: usize, k: usize) -> f64 {
    ((a - k + 1)..=a).fold(1.0, |p, x| p * x as f64)
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    s: usize,
    durations: Vec<f64>,
    knots: Vec<f64>,
    coeffs: Vec<f64>,
    lu: Option<ScaledBandLu>,
}

/// `J`, `∂J/∂c` (row-major like the coefficients) and `∂J/∂T`.
#[derive(Debug, Clone)]
pub struct SmoothnessEval {
    pub cost: f64,
    pub grad_coeffs: Vec<f64>,
    pub grad_durations: Vec<f64>,
}

/// Gradient with respect to waypoints and durations.
#[derive(Debug, Clone)]
pub struct WaypointGradient {
    pub waypoints: Vec<Vector6<f64>>,
    pub durations: Vec<f64>,
}

pub fn solve_coefficients(
    s: usize,
    waypoints: &[Vector6<f64>],
    durations: &[f64],
    bc: &BoundaryCondition,
) -> Result<Trajectory, SplineError> {
    let m = durations.len();
    if s == 0 || bc.start.len() != s || bc.end.len() != s {
        return Err(SplineError::DimensionMismatch {
            what: "boundary derivative orders",
            expected: s,
            got: bc.start.len().min(bc.end.len()),
        });
    }
    if m == 0 || waypoints.len() + 1 != m {
        return Err(SplineError::DimensionMismatch {
            what: "waypoints",
            expected: m.saturating_sub(1),
            got: waypoints.len(),
        });
    }
    for (i, &t) in durations.iter().enumerate() {
        if !(t > 0.0) || !t.is_finite() {
            return Err(SplineError::NonPositiveDuration(i));
        }
        if t < MIN_SOLVABLE_DURATION {
            return Err(SplineError::SingularSystem);
        }
    }

    let n2s = 2 * s;
    let n = n2s * m;
    let bw = 3 * s - 1;
    let mut a = BandMatrix::zeros(n, bw, bw);
    let mut rhs = vec![0.0; n * DIM];
    let mut beta = vec![0.0; n2s];

    for r in 0..s {
        a.set(r, r, falling_factorial(r, r));
        rhs[r * DIM..(r + 1) * DIM].copy_from_slice(bc.start[r].as_slice());
    }
    for i in 1..m {
        let base = s + n2s * (i - 1);
        let left = n2s * (i - 1);
        let right = n2s * i;
        let t = durations[i - 1];
        basis(0, t, &mut beta);
        for (col, b) in beta.iter().enumerate() {
            a.set(base, left + col, *b);
        }
        rhs[base * DIM..(base + 1) * DIM].copy_from_slice(waypoints[i - 1].as_slice());
        for k in 0..n2s - 1 {
            let row = base + 1 + k;
            basis(k, t, &mut beta);
            for (col, b) in beta.iter().enumerate().skip(k) {
                a.set(row, left + col, *b);
            }
            a.set(row, right + k, -falling_factorial(k, k));
        }
    }
    {
        let base = n - s;
        let left = n2s * (m - 1);
        let t = durations[m - 1];
        for r in 0..s {
            basis(r, t, &mut beta);
            for (col, b) in beta.iter().enumerate().skip(r) {
                a.set(base + r, left + col, *b);
            }
            rhs[(base + r) * DIM..(base + r + 1) * DIM].copy_from_slice(bc.end[r].as_slice());
        }
    }

    let lu = a
        .factorize_equilibrated(PIVOT_TOL)
        .map_err(|_| SplineError::SingularSystem)?;
    lu.solve_in_place(&mut rhs, DIM);
    if rhs.iter().any(|x| !x.is_finite()) {
        return Err(SplineError::SingularSystem);
    }
    Ok(Trajectory {
        s,
        knots: knots_from(durations),
        durations: durations.to_vec(),
        coeffs: rhs,
        lu: Some(lu),
    })
}

fn knots_from(durations: &[f64]) -> Vec<f64> {
    let mut knots = Vec::with_capacity(durations.len() + 1);
    let mut t = 0.0;
    knots.push(t);
    for d in durations {
        t += d;
        knots.push(t);
    }
    knots
}

impl Trajectory {
    /// Wraps raw coefficients. The result cannot transport gradients back to
    /// waypoints; see [`Trajectory::backprop`].
    pub fn from_coefficients(s: usize, durations: Vec<f64>, coeffs: Vec<f64>) -> Result<Self, SplineError> {
        let expected = 2 * s * durations.len() * DIM;
        if coeffs.len() != expected {
            return Err(SplineError::DimensionMismatch {
                what: "coefficients",
                expected,
                got: coeffs.len(),
            });
        }
        if let Some(i) = durations.iter().position(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(SplineError::NonPositiveDuration(i));
        }
        Ok(Self {
            s,
            knots: knots_from(&durations),
            durations,
            coeffs,
            lu: None,
        })
    }

    /// Integrator order `s`; pieces have degree `2s − 1`.
    pub fn order(&self) -> usize {
        self.s
    }

    pub fn num_pieces(&self) -> usize {
        self.durations.len()
    }

    pub fn durations(&self) -> &[f64] {
        &self.durations
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn total_duration(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    /// Row-major `M·2s × 6` coefficient block.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    #[inline]
    pub fn coeff(&self, piece: usize, row: usize, dim: usize) -> f64 {
        self.coeffs[(piece * 2 * self.s + row) * DIM + dim]
    }

    /// Coefficient rows of one piece.
    pub fn piece_coeffs(&self, piece: usize) -> &[f64] {
        let n2s = 2 * self.s;
        &self.coeffs[piece * n2s * DIM..(piece + 1) * n2s * DIM]
    }

    /// Piece index and local time for `t`; the final knot belongs to the last piece.
    pub fn locate(&self, t: f64) -> Result<(usize, f64), SplineError> {
        let end = self.total_duration();
        let slack = 1e-12 * end.max(1.0);
        if !(t >= -slack && t <= end + slack) {
            return Err(SplineError::OutOfDomain { t, end });
        }
        let t = t.clamp(0.0, end);
        let i = match self.knots.partition_point(|&k| k <= t) {
            0 => 0,
            p => (p - 1).min(self.num_pieces() - 1),
        };
        Ok((i, t - self.knots[i]))
    }

    pub fn eval(&self, t: f64, order: usize) -> Result<Vector6<f64>, SplineError> {
        let (i, local) = self.locate(t)?;
        Ok(self.eval_piece(i, local, order))
    }

    /// `cᵢᵀ β⁽ᵒʳᵈᵉʳ⁾(local)`; orders above `2s − 1` are zero.
    pub fn eval_piece(&self, piece: usize, local: f64, order: usize) -> Vector6<f64> {
        let n2s = 2 * self.s;
        let mut out = Vector6::zeros();
        if order >= n2s {
            return out;
        }
        let c = self.piece_coeffs(piece);
        let mut pow = 1.0;
        for a in order..n2s {
            let w = falling_factorial(a, order) * pow;
            pow *= local;
            let row = &c[a * DIM..(a + 1) * DIM];
            for k in 0..DIM {
                out[k] += w * row[k];
            }
        }
        out
    }

    /// Closed-form `J = Σᵢ ∫₀^{Tᵢ} ‖cᵢᵀ β⁽ˢ⁾‖² dt` and its partial derivatives.
    pub fn smoothness(&self) -> SmoothnessEval {
        let s = self.s;
        let n2s = 2 * s;
        let mut grad_coeffs = vec![0.0; self.coeffs.len()];
        let mut grad_durations = vec![0.0; self.num_pieces()];
        let mut cost = 0.0;
        let mut gram = vec![0.0; n2s * n2s];
        let mut beta = vec![0.0; n2s];
        for (i, &t) in self.durations.iter().enumerate() {
            gram_matrix(s, t, &mut gram);
            let c = self.piece_coeffs(i);
            let g = &mut grad_coeffs[i * n2s * DIM..(i + 1) * n2s * DIM];
            for a in s..n2s {
                for b in s..n2s {
                    let q = gram[a * n2s + b];
                    for k in 0..DIM {
                        g[a * DIM + k] += 2.0 * q * c[b * DIM + k];
                    }
                }
            }
            for a in s..n2s {
                for k in 0..DIM {
                    cost += 0.5 * g[a * DIM + k] * c[a * DIM + k];
                }
            }
            basis(s, t, &mut beta);
            let mut end = [0.0; DIM];
            for a in s..n2s {
                for k in 0..DIM {
                    end[k] += beta[a] * c[a * DIM + k];
                }
            }
            grad_durations[i] = end.iter().map(|x| x * x).sum();
        }
        SmoothnessEval {
            cost,
            grad_coeffs,
            grad_durations,
        }
    }

    /// Transports `∂L/∂c` and a direct `∂L/∂T` through the map
    /// `(q, T) ↦ c` using the adjoint of the coefficient system.
    pub fn backprop(&self, grad_coeffs: &[f64], grad_durations: &[f64]) -> Result<WaypointGradient, SplineError> {
        let lu = self.lu.as_ref().ok_or(SplineError::NotSolved)?;
        let m = self.num_pieces();
        if grad_coeffs.len() != self.coeffs.len() || grad_durations.len() != m {
            return Err(SplineError::DimensionMismatch {
                what: "gradient entries",
                expected: self.coeffs.len(),
                got: grad_coeffs.len(),
            });
        }
        let s = self.s;
        let n2s = 2 * s;
        let n = n2s * m;
        let mut adj = grad_coeffs.to_vec();
        lu.solve_transpose_in_place(&mut adj, DIM);
        if adj.iter().any(|x| !x.is_finite()) {
            return Err(SplineError::SingularSystem);
        }

        let waypoints = (1..m)
            .map(|i| {
                let row = s + n2s * (i - 1);
                Vector6::from_column_slice(&adj[row * DIM..(row + 1) * DIM])
            })
            .collect();

        // dL/dT_i = direct − Σ_rows λ_rowᵀ (∂A_row/∂T_i) c.
        let mut durations = grad_durations.to_vec();
        let mut beta = vec![0.0; n2s];
        let rows_of_piece = |i: usize| -> Vec<(usize, usize)> {
            // (row, derivative order of the basis multiplying c_i in that row)
            if i + 1 < m {
                let base = s + n2s * i;
                std::iter::once((base, 0))
                    .chain((0..n2s - 1).map(|k| (base + 1 + k, k)))
                    .collect()
            } else {
                (0..s).map(|r| (n - s + r, r)).collect()
            }
        };
        for (i, d) in durations.iter_mut().enumerate() {
            let c = self.piece_coeffs(i);
            let t = self.durations[i];
            for (row, k) in rows_of_piece(i) {
                basis(k + 1, t, &mut beta);
                let lam = &adj[row * DIM..(row + 1) * DIM];
                let mut acc = 0.0;
                for a in (k + 1)..n2s {
                    let ca = &c[a * DIM..(a + 1) * DIM];
                    for dim in 0..DIM {
                        acc += lam[dim] * beta[a] * ca[dim];
                    }
                }
                *d -= acc;
            }
        }
        Ok(WaypointGradient { waypoints, durations })
    }
}

/// `∫₀ᵀ β⁽ˢ⁾ β⁽ˢ⁾ᵀ dt`, row-major `2s × 2s`; rows and columns below `s` are zero.
pub fn gram_matrix(s: usize, t: f64, out: &mut [f64]) {
    let n2s = 2 * s;
    out.iter_mut().for_each(|x| *x = 0.0);
    for a in s..n2s {
        for b in s..n2s {
            let p = a + b - 2 * s + 1;
            // Integer numerator a!/(a−s)! · b!/(b−s)! over p, exact in f64 for s ≤ 8.
            let num = falling_factorial(a, s) * falling_factorial(b, s);
            out[a * n2s + b] = num / p as f64 * t.powi(p as i32);
        }
    }
}
