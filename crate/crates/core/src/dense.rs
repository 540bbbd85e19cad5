//! Dense helpers on top of faer, used for small blocks and the reference backend.

use alloc::format;
use alloc::vec::Vec;

use faer::linalg::solvers::Llt;
use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};

pub fn cholesky(a: MatRef<'_, f64>) -> Result<Llt<f64>> {
    a.llt(Side::Lower)
        .map_err(|e| Error::Breakdown(format!("dense Cholesky failed: {e:?}")))
}

/// log det of an SPD matrix from its Cholesky factor.
pub fn llt_logdet(llt: &Llt<f64>) -> f64 {
    let l = llt.L();
    (0..l.nrows()).map(|i| 2.0 * crate::math::ln(l[(i, i)])).sum()
}

pub fn mat_vec(a: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    let mut out = alloc::vec![0.0; a.nrows()];
    for j in 0..a.ncols() {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        let col = a.col(j);
        for i in 0..a.nrows() {
            out[i] += col[i] * xj;
        }
    }
    out
}

pub fn mat_t_vec(a: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    (0..a.ncols())
        .map(|j| {
            let col = a.col(j);
            let mut s = 0.0;
            for i in 0..a.nrows() {
                s += col[i] * x[i];
            }
            s
        })
        .collect()
}

pub fn col_to_vec(a: MatRef<'_, f64>, j: usize) -> Vec<f64> {
    (0..a.nrows()).map(|i| a[(i, j)]).collect()
}

pub fn from_col(x: &[f64]) -> Mat<f64> {
    Mat::from_fn(x.len(), 1, |i, _| x[i])
}

/// Solve with a lower Cholesky factor in place: x <- L^{-1} x.
pub fn lower_solve(l: MatRef<'_, f64>, x: &mut [f64]) {
    let n = l.nrows();
    for i in 0..n {
        let mut s = x[i];
        for j in 0..i {
            s -= l[(i, j)] * x[j];
        }
        x[i] = s / l[(i, i)];
    }
}

pub fn llt_solve_vec(llt: &Llt<f64>, b: &[f64]) -> Vec<f64> {
    use faer::linalg::solvers::Solve;
    let x = llt.solve(from_col(b));
    col_to_vec(x.as_ref(), 0)
}

pub fn llt_inverse(llt: &Llt<f64>) -> Mat<f64> {
    use faer::linalg::solvers::DenseSolveCore;
    llt.inverse()
}

#[cfg(test)]
pub fn max_abs_diff(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    m
}

/// Cholesky factor of a small SPD matrix stored row-major; used for neighbor blocks
/// where faer's dispatch overhead dominates.
pub(crate) struct SmallChol {
    n: usize,
    l: Vec<f64>,
}

impl SmallChol {
    /// Factors a row-major `n x n` matrix in place (only the lower triangle is read).
    pub(crate) fn factor(mut a: Vec<f64>, n: usize) -> Option<Self> {
        for j in 0..n {
            let mut d = a[j * n + j];
            for k in 0..j {
                d -= a[j * n + k] * a[j * n + k];
            }
            if !(d > 0.0) {
                return None;
            }
            let d = crate::math::sqrt(d);
            a[j * n + j] = d;
            for i in j + 1..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= a[i * n + k] * a[j * n + k];
                }
                a[i * n + j] = s / d;
            }
        }
        Some(Self { n, l: a })
    }

    pub(crate) fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        let l = &self.l;
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= l[i * n + k] * x[k];
            }
            x[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= l[k * n + i] * x[k];
            }
            x[i] = s / l[i * n + i];
        }
    }
}
