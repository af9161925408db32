//! Streaming least squares for tall, narrow systems.
//!
//! Rows are folded into an upper-triangular `R` with Givens rotations as they
//! arrive, so the design matrix is never stored. The spectrum and the
//! minimum-norm solution come from a one-sided Jacobi SVD of `R`, which has
//! the same singular values as the full design.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

#[derive(Debug, Clone)]
pub struct LeastSquares {
    n: usize,
    /// Row-major upper triangle of `R` (lower part stays zero).
    r: Vec<f64>,
    /// First `n` entries of `Qᵀb`.
    qtb: Vec<f64>,
    /// `‖b‖² - ‖Qᵀb[..n]‖²`, accumulated from the rotated-out components.
    tail_sq: f64,
    rows: usize,
}

/// Singular value decomposition of the accumulated `R`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// Descending.
    pub values: Vec<f64>,
    /// Right singular vectors, `vectors[j]` pairs with `values[j]`.
    pub vectors: Vec<Vec<f64>>,
    /// `uᵀ(Qᵀb)` for each singular triple.
    projections: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub singular_values: Vec<f64>,
    /// Singular values at or above `rank_tol · σ_max`.
    pub rank: usize,
}

impl LeastSquares {
    pub fn new(n: usize) -> Self {
        LeastSquares {
            n,
            r: vec![0.0; n * n],
            qtb: vec![0.0; n],
            tail_sq: 0.0,
            rows: 0,
        }
    }

    pub fn columns(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Folds the equation `row · x = rhs` into the factorization. `row` is used
    /// as scratch space.
    pub fn push_row(&mut self, row: &mut [f64], mut rhs: f64) {
        debug_assert_eq!(row.len(), self.n);
        let n = self.n;
        for j in 0..n {
            let b = row[j];
            if b == 0.0 {
                continue;
            }
            let a = self.r[j * n + j];
            let h = math::hypot(a, b);
            let (c, s) = (a / h, b / h);
            self.r[j * n + j] = h;
            let rj = &mut self.r[j * n + j + 1..(j + 1) * n];
            for (rk, wk) in rj.iter_mut().zip(&mut row[j + 1..]) {
                let (x, y) = (*rk, *wk);
                *rk = c * x + s * y;
                *wk = c * y - s * x;
            }
            let t = self.qtb[j];
            self.qtb[j] = c * t + s * rhs;
            rhs = c * rhs - s * t;
        }
        self.tail_sq += rhs * rhs;
        self.rows += 1;
    }

    /// Squared residual of the unconstrained least-squares solution.
    pub fn full_rank_residual_sq(&self) -> f64 {
        self.tail_sq
    }

    /// `‖A x - b‖²` for any `x`.
    pub fn residual_sq(&self, x: &[f64]) -> f64 {
        let n = self.n;
        let mut acc = self.tail_sq;
        for i in 0..n {
            let row = &self.r[i * n + i..(i + 1) * n];
            let s: f64 = row.iter().zip(&x[i..]).map(|(a, b)| a * b).sum::<f64>() - self.qtb[i];
            acc += s * s;
        }
        acc
    }

    /// `‖R v‖ = ‖A v‖` for the accumulated design `A`.
    pub fn image_norm(&self, v: &[f64]) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            let row = &self.r[i * n + i..(i + 1) * n];
            let s: f64 = row.iter().zip(&v[i..]).map(|(a, b)| a * b).sum();
            acc += s * s;
        }
        math::sqrt(acc)
    }

    pub fn svd(&self) -> Svd {
        let n = self.n;
        // Columns of R.
        let mut cols: Vec<Vec<f64>> = (0..n)
            .map(|j| (0..n).map(|i| self.r[i * n + j]).collect())
            .collect();
        let mut v: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                e
            })
            .collect();
        jacobi_orthogonalize(&mut cols, &mut v);

        let mut order: Vec<usize> = (0..n).collect();
        let norms: Vec<f64> = cols.iter().map(|c| math::norm(c)).collect();
        order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
        Svd {
            values: order.iter().map(|&j| norms[j]).collect(),
            projections: order
                .iter()
                .map(|&j| math::dot(&cols[j], &self.qtb))
                .collect(),
            vectors: order
                .into_iter()
                .map(|j| core::mem::take(&mut v[j]))
                .collect(),
        }
    }

    pub fn singular_values(&self) -> Vec<f64> {
        self.svd().values
    }

    /// Minimum-norm solution with singular directions below
    /// `rank_tol · σ_max` discarded.
    pub fn solve(&self, rank_tol: f64) -> Solution {
        let svd = self.svd();
        let sigma_max = svd.values.first().copied().unwrap_or(0.0);
        let cutoff = rank_tol * sigma_max;
        let mut x = vec![0.0; self.n];
        let mut rank = 0;
        for ((&s, vec), &proj) in svd.values.iter().zip(&svd.vectors).zip(&svd.projections) {
            if s <= 0.0 || s < cutoff {
                continue;
            }
            rank += 1;
            // W = R V = U Σ, so uᵀc / σ = (wᵀc) / σ².
            let coef = proj / (s * s);
            for (xi, vi) in x.iter_mut().zip(vec) {
                *xi += coef * vi;
            }
        }
        Solution {
            x,
            singular_values: svd.values,
            rank,
        }
    }
}

/// One-sided (Hestenes) Jacobi: rotates column pairs of `a` until they are
/// mutually orthogonal, accumulating the rotations in `v`.
fn jacobi_orthogonalize(a: &mut [Vec<f64>], v: &mut [Vec<f64>]) {
    let n = a.len();
    const MAX_SWEEPS: usize = 80;
    let tol = 1e-15;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = math::dot(&a[i], &a[i]);
                let beta = math::dot(&a[j], &a[j]);
                let gamma = math::dot(&a[i], &a[j]);
                if gamma == 0.0 || math::abs(gamma) <= tol * math::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (math::abs(zeta) + math::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / math::sqrt(1.0 + t * t);
                let s = c * t;
                rotate(a, i, j, c, s);
                rotate(v, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
}

fn rotate(m: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (lo, hi) = m.split_at_mut(j);
    for (x, y) in lo[i].iter_mut().zip(hi[0].iter_mut()) {
        let (p, q) = (*x, *y);
        *x = c * p - s * q;
        *y = s * p + c * q;
    }
}
