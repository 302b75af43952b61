//! Banded LU factorization with partial pivoting.
//!
//! Row `i` keeps columns `i - kl ..= i + ku + kl`; the extra `kl` columns on
//! the right absorb fill from row interchanges. Multipliers are kept in
//! product form, so `A = P₀ L₀ P₁ L₁ ⋯ U`.

/// Square band matrix of order `n` with `kl` sub- and `ku` super-diagonals.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl, "({i}, {j}) outside band");
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku + self.kl {
            return 0.0;
        }
        self.data[self.slot(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    /// Factorizes in place. Fails when a pivot is not larger than
    /// `rel_tol` times the largest entry of its column segment at the start.
    pub fn factorize(mut self, rel_tol: f64) -> Result<BandLu, SingularMatrix> {
        let n = self.n;
        let kl = self.kl;
        let reach = kl + self.ku;
        let scale = self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for r in k + 1..=last_row {
                let v = self.get(r, k).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > rel_tol * scale) {
                return Err(SingularMatrix { column: k });
            }
            piv[k] = p;
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = self.slot(k, j);
                    let b = self.slot(p, j);
                    self.data.swap(a, b);
                }
            }
            let inv = 1.0 / self.get(k, k);
            for r in k + 1..=last_row {
                let l = self.get(r, k) * inv;
                if l == 0.0 {
                    continue;
                }
                let s = self.slot(r, k);
                self.data[s] = l;
                for j in k + 1..=last_col {
                    let u = self.data[self.slot(k, j)];
                    if u != 0.0 {
                        let s = self.slot(r, j);
                        self.data[s] -= l * u;
                    }
                }
            }
        }
        Ok(BandLu { m: self, piv })
    }

    /// Scales columns, then rows, to unit max-norm and factorizes the
    /// result. Row `i` of `A` is multiplied by `row[i]`, column `j` by `col[j]`.
    pub fn factorize_equilibrated(mut self, rel_tol: f64) -> Result<ScaledBandLu, SingularMatrix> {
        let n = self.n;
        let (kl, reach) = (self.kl, self.kl + self.ku);
        let mut col = vec![0.0_f64; n];
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + reach).min(n - 1) {
                col[j] = col[j].max(self.get(i, j).abs());
            }
        }
        if let Some(column) = col.iter().position(|&c| !(c > 0.0)) {
            return Err(SingularMatrix { column });
        }
        col.iter_mut().for_each(|c| *c = 1.0 / *c);
        let mut row = vec![0.0_f64; n];
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + reach).min(n - 1);
            let mut m = 0.0_f64;
            for j in lo..=hi {
                let s = self.slot(i, j);
                self.data[s] *= col[j];
                m = m.max(self.data[s].abs());
            }
            if !(m > 0.0) {
                return Err(SingularMatrix { column: i });
            }
            row[i] = 1.0 / m;
            for j in lo..=hi {
                let s = self.slot(i, j);
                self.data[s] *= row[i];
            }
        }
        let lu = self.factorize(rel_tol)?;
        Ok(ScaledBandLu { lu, row, col })
    }
}

/// LU factors of `D_r A D_c` together with the diagonal scalings.
#[derive(Debug, Clone)]
pub struct ScaledBandLu {
    lu: BandLu,
    row: Vec<f64>,
    col: Vec<f64>,
}

impl ScaledBandLu {
    /// Solves `A X = B` in place.
    pub fn solve_in_place(&self, b: &mut [f64], cols: usize) {
        scale_rows(b, cols, &self.row);
        self.lu.solve_in_place(b, cols);
        scale_rows(b, cols, &self.col);
    }

    /// Solves `Aᵀ X = B` in place.
    pub fn solve_transpose_in_place(&self, b: &mut [f64], cols: usize) {
        scale_rows(b, cols, &self.col);
        self.lu.solve_transpose_in_place(b, cols);
        scale_rows(b, cols, &self.row);
    }
}

fn scale_rows(b: &mut [f64], cols: usize, s: &[f64]) {
    for (chunk, f) in b.chunks_exact_mut(cols).zip(s) {
        chunk.iter_mut().for_each(|x| *x *= f);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("band matrix is numerically singular at column {column}")]
pub struct SingularMatrix {
    pub column: usize,
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    /// Solves `A X = B` in place for a row-major `n × cols` right-hand side.
    pub fn solve_in_place(&self, b: &mut [f64], cols: usize) {
        let n = self.m.n;
        let kl = self.m.kl;
        let reach = kl + self.m.ku;
        debug_assert_eq!(b.len(), n * cols);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                for c in 0..cols {
                    b.swap(k * cols + c, p * cols + c);
                }
            }
            for r in k + 1..=(k + kl).min(n - 1) {
                let l = self.m.get(r, k);
                if l != 0.0 {
                    for c in 0..cols {
                        b[r * cols + c] -= l * b[k * cols + c];
                    }
                }
            }
        }
        for k in (0..n).rev() {
            for j in k + 1..=(k + reach).min(n - 1) {
                let u = self.m.get(k, j);
                if u != 0.0 {
                    for c in 0..cols {
                        b[k * cols + c] -= u * b[j * cols + c];
                    }
                }
            }
            let inv = 1.0 / self.m.get(k, k);
            for c in 0..cols {
                b[k * cols + c] *= inv;
            }
        }
    }

    /// Solves `Aᵀ X = B` in place.
    pub fn solve_transpose_in_place(&self, b: &mut [f64], cols: usize) {
        let n = self.m.n;
        let kl = self.m.kl;
        let reach = kl + self.m.ku;
        debug_assert_eq!(b.len(), n * cols);
        // Uᵀ z = b, forward.
        for k in 0..n {
            let inv = 1.0 / self.m.get(k, k);
            for c in 0..cols {
                b[k * cols + c] *= inv;
            }
            for j in k + 1..=(k + reach).min(n - 1) {
                let u = self.m.get(k, j);
                if u != 0.0 {
                    for c in 0..cols {
                        b[j * cols + c] -= u * b[k * cols + c];
                    }
                }
            }
        }
        // Then (P_k L_k)ᵀ in reverse order.
        for k in (0..n).rev() {
            for r in k + 1..=(k + kl).min(n - 1) {
                let l = self.m.get(r, k);
                if l != 0.0 {
                    for c in 0..cols {
                        b[k * cols + c] -= l * b[r * cols + c];
                    }
                }
            }
            let p = self.piv[k];
            if p != k {
                for c in 0..cols {
                    b.swap(k * cols + c, p * cols + c);
                }
            }
        }
    }
}
