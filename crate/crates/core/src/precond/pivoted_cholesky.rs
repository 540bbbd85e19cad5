use alloc::vec::Vec;

use faer::Mat;

use crate::covariance::{cov_grad_submatrix, CovParam, CovarianceSpec, Locations};
use crate::dense;
use crate::error::{Error, Result};
use crate::math;
use crate::vecchia::VecchiaFactor;

/// Access to a symmetric PSD matrix through its diagonal and single rows.
pub trait SymmetricAccessor: Sync {
    fn dim(&self) -> usize;
    fn diagonal(&self) -> Vec<f64>;
    fn row(&self, i: usize) -> Vec<f64>;
}

/// Greedy pivoted Cholesky factor `L` (n x k) with `M ~ L L^T`.
#[derive(Debug, Clone)]
pub struct PivotedCholesky {
    pub factor: Mat<f64>,
    pub pivots: Vec<usize>,
    /// `trace(M - L_j L_j^T)` after each step `j = 0..=k`.
    pub residual_trace: Vec<f64>,
}

impl PivotedCholesky {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// The leading `k x k` triangle `L[S, :]` in pivot order.
    pub fn pivot_block(&self) -> Mat<f64> {
        let k = self.rank();
        Mat::from_fn(k, k, |a, b| if b <= a { self.factor[(self.pivots[a], b)] } else { 0.0 })
    }
}

const NEGATIVE_DIAGONAL_TOL: f64 = -1e-10;

/// Rank-`k` pivoted Cholesky, stopping early once the remaining trace drops below `tol`.
pub fn pivoted_cholesky<A: SymmetricAccessor + ?Sized>(acc: &A, k: usize, tol: f64) -> Result<PivotedCholesky> {
    let n = acc.dim();
    if k > n {
        return Err(Error::Rank { rank: k, n });
    }
    let mut d = acc.diagonal();
    if let Some(&v) = d.iter().find(|&&v| v < NEGATIVE_DIAGONAL_TOL) {
        return Err(Error::NotPsd { step: 0, value: v });
    }
    let mut pivoted = alloc::vec![false; n];
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut pivots = Vec::with_capacity(k);
    let trace = |d: &[f64], pivoted: &[bool]| -> f64 {
        d.iter().zip(pivoted).filter(|(_, &p)| !p).map(|(v, _)| v.max(0.0)).sum()
    };
    let mut residual_trace = alloc::vec![trace(&d, &pivoted)];
    for step in 0..k {
        if *residual_trace.last().unwrap() < tol {
            break;
        }
        let mut p = usize::MAX;
        let mut best = f64::NEG_INFINITY;
        for i in 0..n {
            if !pivoted[i] && d[i] > best {
                best = d[i];
                p = i;
            }
        }
        if !(best > 0.0) {
            break;
        }
        let row = acc.row(p);
        let piv = math::sqrt(best);
        let mut col = alloc::vec![0.0; n];
        for i in 0..n {
            if pivoted[i] {
                continue;
            }
            let mut s = row[i];
            for c in &cols {
                s -= c[i] * c[p];
            }
            col[i] = s / piv;
        }
        col[p] = piv;
        pivoted[p] = true;
        d[p] = 0.0;
        for i in 0..n {
            if !pivoted[i] {
                d[i] -= col[i] * col[i];
                if d[i] < NEGATIVE_DIAGONAL_TOL * (1.0 + row[p].abs()) {
                    return Err(Error::NotPsd { step, value: d[i] });
                }
            }
        }
        cols.push(col);
        pivots.push(p);
        residual_trace.push(trace(&d, &pivoted));
    }
    let r = cols.len();
    let factor = Mat::from_fn(n, r, |i, j| cols[j][i]);
    Ok(PivotedCholesky { factor, pivots, residual_trace })
}

/// Rows of the covariance matrix on demand.
pub struct CovarianceAccessor<'a> {
    pub spec: &'a CovarianceSpec,
    pub locs: &'a Locations,
}

impl SymmetricAccessor for CovarianceAccessor<'_> {
    fn dim(&self) -> usize {
        self.locs.len()
    }
    fn diagonal(&self) -> Vec<f64> {
        alloc::vec![self.spec.variance(); self.locs.len()]
    }
    fn row(&self, i: usize) -> Vec<f64> {
        let p = self.locs.point(i);
        (0..self.locs.len()).map(|j| self.spec.value(p, self.locs.point(j))).collect()
    }
}

/// Rows of the Vecchia precision `B^T D^{-1} B` on demand.
pub struct PrecisionAccessor<'a> {
    factor: &'a VecchiaFactor,
    // column lists of B: (row, value) pairs including the unit diagonal
    columns: Vec<Vec<(usize, f64)>>,
}

impl<'a> PrecisionAccessor<'a> {
    pub fn new(factor: &'a VecchiaFactor) -> Self {
        let n = factor.n();
        let mut columns: Vec<Vec<(usize, f64)>> = (0..n).map(|i| alloc::vec![(i, 1.0)]).collect();
        for r in 0..n {
            let (cols, vals) = factor.b().row(r);
            for (&j, &v) in cols.iter().zip(vals) {
                columns[j].push((r, v));
            }
        }
        Self { factor, columns }
    }
}

impl SymmetricAccessor for PrecisionAccessor<'_> {
    fn dim(&self) -> usize {
        self.factor.n()
    }
    fn diagonal(&self) -> Vec<f64> {
        precision_diagonal(self.factor)
    }
    fn row(&self, i: usize) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.factor.n()];
        let d = self.factor.d();
        for &(r, v) in &self.columns[i] {
            let s = v / d[r];
            out[r] += s;
            let (cols, vals) = self.factor.b().row(r);
            for (&j, &bv) in cols.iter().zip(vals) {
                out[j] += s * bv;
            }
        }
        out
    }
}

/// Diagonal of `B^T D^{-1} B`.
pub fn precision_diagonal(factor: &VecchiaFactor) -> Vec<f64> {
    let d = factor.d();
    let mut out: Vec<f64> = d.iter().map(|v| 1.0 / v).collect();
    for r in 0..factor.n() {
        let (cols, vals) = factor.b().row(r);
        for (&j, &v) in cols.iter().zip(vals) {
            out[j] += v * v / d[r];
        }
    }
    out
}

/// Low-rank factor of the (non-Vecchia) covariance matrix.
pub fn covariance_low_rank(spec: &CovarianceSpec, locs: &Locations, k: usize) -> Result<PivotedCholesky> {
    let tol = 1e-12 * spec.variance() * locs.len() as f64;
    pivoted_cholesky(&CovarianceAccessor { spec, locs }, k, tol)
}

/// Derivative of the pivoted Cholesky factor of the covariance with the pivots held fixed:
/// `dL = dSigma[:, S] C^{-T} - L Phi(C^{-1} dSigma[S, S] C^{-T})^T`, `C = L[S, :]`.
pub fn covariance_low_rank_derivative(
    pc: &PivotedCholesky,
    spec: &CovarianceSpec,
    locs: &Locations,
    param: CovParam,
) -> Result<Mat<f64>> {
    let n = locs.len();
    let k = pc.rank();
    let all: Vec<usize> = (0..n).collect();
    let g = cov_grad_submatrix(spec, locs, &all, &pc.pivots, param)?;
    let c = pc.pivot_block();
    // Y = G C^{-T}: row i solves C y = g_i
    let rows = crate::par::map(n, |i| {
        let mut y: Vec<f64> = (0..k).map(|j| g[(i, j)]).collect();
        dense::lower_solve(c.as_ref(), &mut y);
        y
    });
    let y = Mat::from_fn(n, k, |i, j| rows[i][j]);
    // X = C^{-1} Y[S, :]
    let mut x = Mat::from_fn(k, k, |a, b| y[(pc.pivots[a], b)]);
    for b in 0..k {
        let mut col: Vec<f64> = (0..k).map(|a| x[(a, b)]).collect();
        dense::lower_solve(c.as_ref(), &mut col);
        for a in 0..k {
            x[(a, b)] = col[a];
        }
    }
    let phi_t = Mat::from_fn(k, k, |a, b| {
        if a == b {
            0.5 * x[(a, a)]
        } else if a < b {
            x[(b, a)]
        } else {
            0.0
        }
    });
    Ok(y - &pc.factor * phi_t)
}
