//! Row-compressed lower-triangular and rectangular sparse matrices.

use alloc::sync::Arc;
use alloc::vec::Vec;

use faer::Mat;

use super::neighbors::NeighborSets;

/// Lower-triangular matrix whose strictly-lower pattern is a set of neighbor lists.
/// With `unit` the diagonal is implicitly one, otherwise it is zero.
#[derive(Debug, Clone)]
pub struct SparseLower {
    pattern: Arc<NeighborSets>,
    vals: Vec<f64>,
    unit: bool,
}

impl SparseLower {
    pub fn new(pattern: Arc<NeighborSets>, vals: Vec<f64>, unit: bool) -> Self {
        assert_eq!(pattern.nnz(), vals.len());
        Self { pattern, vals, unit }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(Arc::new(NeighborSets::empty(n)), Vec::new(), true)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.pattern.len()
    }

    pub fn is_unit(&self) -> bool {
        self.unit
    }

    pub fn pattern(&self) -> &Arc<NeighborSets> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    /// Strictly-lower entries of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        (self.pattern.of(i), &self.vals[self.pattern.range(i)])
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = alloc::vec![0.0; self.n()];
        self.mul_into(x, &mut y);
        y
    }

    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            let mut s = if self.unit { x[i] } else { 0.0 };
            for (&j, &v) in cols.iter().zip(vals) {
                s += v * x[j];
            }
            *yi = s;
        }
    }

    pub fn mul_t(&self, x: &[f64]) -> Vec<f64> {
        let mut y = if self.unit { x.to_vec() } else { alloc::vec![0.0; self.n()] };
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v * xi;
            }
        }
        y
    }

    /// `L^{-1} b` for a unit-diagonal matrix.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        debug_assert!(self.unit);
        let mut x = b.to_vec();
        for i in 0..self.n() {
            let (cols, vals) = self.row(i);
            let mut s = x[i];
            for (&j, &v) in cols.iter().zip(vals) {
                s -= v * x[j];
            }
            x[i] = s;
        }
        x
    }

    /// `L^{-T} b` for a unit-diagonal matrix.
    pub fn solve_t(&self, b: &[f64]) -> Vec<f64> {
        debug_assert!(self.unit);
        let mut x = b.to_vec();
        for i in (0..self.n()).rev() {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                x[j] -= v * xi;
            }
        }
        x
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let n = self.n();
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            if self.unit {
                m[(i, i)] = 1.0;
            }
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m[(i, j)] = v;
            }
        }
        m
    }
}

/// General sparse matrix stored by rows.
#[derive(Debug, Clone)]
pub struct SparseRows {
    ncols: usize,
    pattern: NeighborSets,
    vals: Vec<f64>,
}

impl SparseRows {
    pub fn new(ncols: usize, pattern: NeighborSets, vals: Vec<f64>) -> Self {
        assert_eq!(pattern.nnz(), vals.len());
        Self { ncols, pattern, vals }
    }

    pub fn nrows(&self) -> usize {
        self.pattern.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn pattern(&self) -> &NeighborSets {
        &self.pattern
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        (self.pattern.of(i), &self.vals[self.pattern.range(i)])
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows())
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
            })
            .collect()
    }

    pub fn mul_t(&self, x: &[f64]) -> Vec<f64> {
        let mut y = alloc::vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v * xi;
            }
        }
        y
    }

    /// Row `i` as a dense vector of length `ncols`.
    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut r = alloc::vec![0.0; self.ncols];
        let (cols, vals) = self.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            r[j] = v;
        }
        r
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.nrows(), self.ncols);
        for i in 0..self.nrows() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m[(i, j)] = v;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense;
    use alloc::vec;

    fn example() -> SparseLower {
        let sets = vec![vec![], vec![0], vec![1, 0], vec![2]];
        SparseLower::new(Arc::new(NeighborSets::from_sets(&sets)), vec![-0.5, 0.3, -0.2, 0.7], true)
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-14)
    }

    #[test]
    fn products_and_solves_match_dense() {
        let l = example();
        let d = l.to_dense();
        let x = vec![1.0, -2.0, 0.5, 3.0];
        let y = l.mul(&x);
        assert!(close(&y, &dense::mat_vec(d.as_ref(), &x)));
        let yt = l.mul_t(&x);
        assert!(close(&yt, &dense::mat_t_vec(d.as_ref(), &x)));
        let s = l.solve(&y);
        let st = l.solve_t(&yt);
        for i in 0..4 {
            assert!((s[i] - x[i]).abs() < 1e-14);
            assert!((st[i] - x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn rectangular_rows() {
        let pattern = NeighborSets::from_sets(&[vec![2, 0], vec![1]]);
        let r = SparseRows::new(3, pattern, vec![1.5, -1.0, 2.0]);
        let d = r.to_dense();
        let x = vec![1.0, 2.0, 3.0];
        assert!(close(&r.mul(&x), &dense::mat_vec(d.as_ref(), &x)));
        let u = vec![0.5, -1.0];
        assert!(close(&r.mul_t(&u), &dense::mat_t_vec(d.as_ref(), &u)));
        assert_eq!(r.dense_row(0), vec![-1.0, 0.0, 1.5]);
    }
}
