//! Dense tableau simplex used to find the deepest interior point of a set of
//! half-spaces (Chebyshev-center style: maximize the minimum face slack).

use nalgebra::Vector3;

const PIVOT_EPS: f64 = 1e-12;
const MAX_PIVOTS: usize = 20_000;

/// Result of [`deepest_point`]: the point and its minimum face clearance.
#[derive(Debug, Clone, Copy)]
pub struct DeepestPoint {
    pub point: Vector3<f64>,
    /// `min_k (d_k - n_k^T p)`. Positive iff `point` is strictly interior.
    pub clearance: f64,
}

/// Maximizes `t` subject to `n_k^T p + t <= d_k` for every unit normal.
///
/// The clearance is capped at `cap` so that the program stays bounded for
/// regions containing arbitrarily large balls. Returns `None` only if the
/// pivot budget is exhausted.
pub fn deepest_point(halfspaces: &[(Vector3<f64>, f64)], cap: f64) -> Option<DeepestPoint> {
    // Variables: u (3), v (3), t' (1) with p = u - v and t = t' - shift.
    // Slacks: one per half-space plus one for the cap row.
    let k = halfspaces.len();
    let shift = halfspaces.iter().map(|(_, d)| -d).fold(0.0_f64, f64::max);
    let n_struct = 7;
    let n_cols = n_struct + k + 1;
    let rows = k + 1;
    let width = n_cols + 1;
    let mut tab = vec![0.0; (rows + 1) * width];
    let mut basis: Vec<usize> = (0..rows).map(|r| n_struct + r).collect();

    for (r, (n, d)) in halfspaces.iter().enumerate() {
        let row = &mut tab[r * width..(r + 1) * width];
        for a in 0..3 {
            row[a] = n[a];
            row[3 + a] = -n[a];
        }
        row[6] = 1.0;
        row[n_struct + r] = 1.0;
        row[n_cols] = d + shift;
    }
    {
        let row = &mut tab[k * width..(k + 1) * width];
        row[6] = 1.0;
        row[n_struct + k] = 1.0;
        row[n_cols] = shift + cap;
    }
    // Objective row holds reduced costs of "maximize t'".
    tab[rows * width + 6] = -1.0;

    let mut pivots = 0;
    loop {
        // Bland's rule: first improving column.
        let obj = &tab[rows * width..(rows + 1) * width];
        let Some(enter) = (0..n_cols).find(|&j| obj[j] < -PIVOT_EPS) else {
            break;
        };
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..rows {
            let a = tab[r * width + enter];
            if a > PIVOT_EPS {
                let ratio = tab[r * width + n_cols] / a;
                match leave {
                    None => leave = Some((r, ratio)),
                    Some((lr, best)) => {
                        if ratio < best - 1e-15 || (ratio <= best + 1e-15 && basis[r] < basis[lr]) {
                            leave = Some((r, ratio));
                        }
                    }
                }
            }
        }
        // The cap row bounds t', and u/v only enter with nonzero objective
        // through t', so an unbounded ray is impossible here.
        let (pr, _) = leave?;
        pivot(&mut tab, width, rows, pr, enter);
        basis[pr] = enter;
        pivots += 1;
        if pivots > MAX_PIVOTS {
            return None;
        }
    }

    let mut x = [0.0; 7];
    for (r, &b) in basis.iter().enumerate() {
        if b < n_struct {
            x[b] = tab[r * width + n_cols];
        }
    }
    let point = Vector3::new(x[0] - x[3], x[1] - x[4], x[2] - x[5]);
    // Recompute the clearance from the geometry rather than trusting t'.
    let clearance = halfspaces
        .iter()
        .map(|(n, d)| d - n.dot(&point))
        .fold(f64::INFINITY, f64::min);
    Some(DeepestPoint { point, clearance })
}

fn pivot(tab: &mut [f64], width: usize, rows: usize, pr: usize, pc: usize) {
    let inv = 1.0 / tab[pr * width + pc];
    for j in 0..width {
        tab[pr * width + j] *= inv;
    }
    let pivot_row: Vec<f64> = tab[pr * width..(pr + 1) * width].to_vec();
    for r in 0..=rows {
        if r == pr {
            continue;
        }
        let f = tab[r * width + pc];
        if f != 0.0 {
            let row = &mut tab[r * width..(r + 1) * width];
            for (x, p) in row.iter_mut().zip(&pivot_row) {
                *x -= f * p;
            }
            row[pc] = 0.0;
        }
    }
}
