//! Optimization time against piece count on the straight fixture.

use std::time::Instant;

use serde::Serialize;

use omni_traj::problem::{optimize, ProblemSpec};

use crate::config::RunConfig;
use crate::fixture::{make_fixture, FixtureKind, FixtureParams};

/// Box length of the bench corridors, m.
pub const BOX_LENGTH: f64 = 2.0;

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub pieces: usize,
    pub median_t_opt_s: f64,
    pub t_opt_per_piece_s: f64,
    pub iterations: usize,
    pub status: String,
    /// Every repeat returned bit-identical coefficients.
    pub repeatable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
    /// Least-squares line `t_opt ≈ slope · M + intercept`; `None` with fewer
    /// than two distinct piece counts.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r_squared: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("piece count must be positive")]
    ZeroPieces,
    #[error("repeats must be positive")]
    ZeroRepeats,
    #[error("{0}")]
    Setup(String),
}

/// Straight corridor with `pieces` pieces: two per box when `pieces` is even,
/// one per box otherwise, solved with the solver and penalty settings of `base`.
pub fn bench_spec(base: &RunConfig, pieces: usize) -> Result<ProblemSpec, BenchError> {
    if pieces == 0 {
        return Err(BenchError::ZeroPieces);
    }
    let ppp = if pieces % 2 == 0 { 2 } else { 1 };
    let boxes = pieces / ppp;
    let params = FixtureParams {
        boxes,
        length: BOX_LENGTH * boxes as f64,
        pieces_per_polyhedron: ppp,
    };
    let f = make_fixture(FixtureKind::Straight, &params, base.seed).map_err(|e| BenchError::Setup(e.to_string()))?;
    let setup = |e: String| BenchError::Setup(e);
    let (start, end) = f.config.endpoints().map_err(|e| setup(e.to_string()))?;
    ProblemSpec::new(
        f.corridor,
        base.vehicle_shape().map_err(|e| setup(e.to_string()))?,
        &start,
        &end,
        base.s,
        base.penalty(),
        base.vehicle_params().map_err(|e| setup(e.to_string()))?,
    )
    .map_err(|e| setup(e.to_string()))
}

pub fn bench_scaling(base: &RunConfig, piece_counts: &[usize], repeats: usize) -> Result<BenchTable, BenchError> {
    if repeats == 0 {
        return Err(BenchError::ZeroRepeats);
    }
    let solver = base.solver_config();
    let mut rows = Vec::with_capacity(piece_counts.len());
    for &m in piece_counts {
        let spec = bench_spec(base, m)?;
        let mut times = Vec::with_capacity(repeats);
        let mut first: Option<Vec<f64>> = None;
        let mut repeatable = true;
        let mut last = None;
        for _ in 0..repeats {
            let t0 = Instant::now();
            let r = optimize(&spec, &spec.initial_guess(), &solver).map_err(|e| BenchError::Setup(e.to_string()))?;
            times.push(t0.elapsed().as_secs_f64());
            let c = r.trajectory.coeffs().to_vec();
            match &first {
                None => first = Some(c),
                Some(f) => repeatable &= *f == c,
            }
            last = Some(r);
        }
        let r = last.expect("at least one repeat");
        let median = median(&mut times);
        rows.push(BenchRow {
            pieces: m,
            median_t_opt_s: median,
            t_opt_per_piece_s: median / m as f64,
            iterations: r.iterations,
            status: format!("{:?}", r.status),
            repeatable,
        });
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.pieces as f64, r.median_t_opt_s)).collect();
    let fit = linear_fit(&pts);
    Ok(BenchTable {
        rows,
        slope: fit.map(|f| f.0),
        intercept: fit.map(|f| f.1),
        r_squared: fit.map(|f| f.2),
    })
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Ordinary least squares; returns `(slope, intercept, R²)`.
pub fn linear_fit(pts: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if pts.len() < 2 || !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Some((slope, my - slope * mx, r2))
}

impl BenchTable {
    pub fn to_text(&self) -> String {
        let mut s = String::from("pieces  median_t_opt[s]  t_opt/M[s]  iterations  status\n");
        for r in &self.rows {
            s += &format!(
                "{:>6}  {:>15.6}  {:>10.6}  {:>10}  {}\n",
                r.pieces, r.median_t_opt_s, r.t_opt_per_piece_s, r.iterations, r.status
            );
        }
        if let (Some(a), Some(r2)) = (self.slope, self.r_squared) {
            s += &format!("slope {a:.6} s/piece, R^2 {r2:.4}\n");
        }
        s
    }
}
