use alloc::format;
use alloc::vec::Vec;

use faer::Mat;

use crate::error::{Error, Result};
use crate::math;

/// Symmetric tridiagonal matrix (`off.len() == diag.len() - 1`, or both empty).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        debug_assert!(diag.is_empty() && off.is_empty() || off.len() + 1 == diag.len());
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let l = self.len();
        let mut m = Mat::zeros(l, l);
        for i in 0..l {
            m[(i, i)] = self.diag[i];
            if i + 1 < l {
                m[(i, i + 1)] = self.off[i];
                m[(i + 1, i)] = self.off[i];
            }
        }
        m
    }

    /// Eigenvalues and the first component of each normalized eigenvector (implicit QL).
    pub fn eigen_first_components(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.len();
        let mut d = self.diag.clone();
        let mut e = self.off.clone();
        e.push(0.0);
        let mut z = alloc::vec![0.0; n];
        if n == 0 {
            return Ok((d, z));
        }
        z[0] = 1.0;
        for l in 0..n {
            let mut iter = 0;
            loop {
                let mut m = l;
                while m + 1 < n {
                    let dd = d[m].abs() + d[m + 1].abs();
                    if e[m].abs() <= f64::EPSILON * dd {
                        break;
                    }
                    m += 1;
                }
                if m == l {
                    break;
                }
                iter += 1;
                if iter > 100 {
                    return Err(Error::Breakdown(format!(
                        "tridiagonal eigensolver did not converge (size {n})"
                    )));
                }
                let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                let mut r = libm::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + if g >= 0.0 { r } else { -r });
                let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
                let mut deflated = false;
                let mut i = m;
                while i > l {
                    i -= 1;
                    let f = s * e[i];
                    let b = c * e[i];
                    r = libm::hypot(f, g);
                    e[i + 1] = r;
                    if r == 0.0 {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        deflated = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    let zf = z[i + 1];
                    z[i + 1] = s * z[i] + c * zf;
                    z[i] = c * z[i] - s * zf;
                }
                if deflated {
                    continue;
                }
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        }
        Ok((d, z))
    }

    /// `e_1^T log(T) e_1`; fails if `T` is not positive definite.
    pub fn log_quadratic_e1(&self) -> Result<f64> {
        let (vals, first) = self.eigen_first_components()?;
        let mut s = 0.0;
        for (&lam, &t) in vals.iter().zip(&first) {
            if !(lam > 0.0) {
                return Err(Error::Breakdown(format!("non-positive Ritz value {lam:e}")));
            }
            s += t * t * math::ln(lam);
        }
        Ok(s)
    }

    /// `T^{-1} b` by the LDL^T recurrence; `T` must be positive definite.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        let mut dpiv = alloc::vec![0.0; n];
        let mut l = alloc::vec![0.0; n.saturating_sub(1)];
        for i in 0..n {
            let prev = if i > 0 { l[i - 1] * l[i - 1] * dpiv[i - 1] } else { 0.0 };
            dpiv[i] = self.diag[i] - prev;
            if !(dpiv[i] > 0.0) {
                return Err(Error::Breakdown("tridiagonal matrix is not positive definite".into()));
            }
            if i + 1 < n {
                l[i] = self.off[i] / dpiv[i];
            }
        }
        let mut x = b.to_vec();
        for i in 1..n {
            x[i] -= l[i - 1] * x[i - 1];
        }
        for i in 0..n {
            x[i] /= dpiv[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            x[i] -= l[i] * x[i + 1];
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn random_tridiag(n: usize, seed: u64) -> Tridiagonal {
        let mut rng = crate::rng::stream(seed, 0);
        let off: Vec<f64> = (0..n - 1).map(|_| crate::rng::uniform(&mut rng) - 0.5).collect();
        let diag: Vec<f64> = (0..n).map(|_| 1.5 + crate::rng::uniform(&mut rng)).collect();
        Tridiagonal::new(diag, off)
    }

    #[test]
    fn eigen_matches_dense() {
        for (n, seed) in [(1, 0), (2, 1), (7, 2), (60, 3)] {
            let t = if n == 1 { Tridiagonal::new(vec![2.0], vec![]) } else { random_tridiag(n, seed) };
            let (vals, first) = t.eigen_first_components().unwrap();
            let evd = t.to_dense().self_adjoint_eigen(faer::Side::Lower).unwrap();
            let mut exp: Vec<(f64, f64)> =
                (0..n).map(|j| (evd.S()[j], evd.U()[(0, j)] * evd.U()[(0, j)])).collect();
            let mut got: Vec<(f64, f64)> = vals.iter().zip(&first).map(|(&a, &b)| (a, b * b)).collect();
            exp.sort_by(|a, b| a.0.total_cmp(&b.0));
            got.sort_by(|a, b| a.0.total_cmp(&b.0));
            for (a, b) in exp.iter().zip(&got) {
                assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn log_quadratic_matches_dense() {
        let t = random_tridiag(30, 9);
        let evd = t.to_dense().self_adjoint_eigen(faer::Side::Lower).unwrap();
        let exp: f64 = (0..30).map(|j| evd.U()[(0, j)].powi(2) * evd.S()[j].ln()).sum();
        assert!((t.log_quadratic_e1().unwrap() - exp).abs() < 1e-12);
        let bad = Tridiagonal::new(vec![1.0, -1.0], vec![0.0]);
        assert!(bad.log_quadratic_e1().is_err());
    }

    #[test]
    fn solve_inverts() {
        let t = random_tridiag(25, 4);
        let b: Vec<f64> = (0..25).map(|i| i as f64 - 3.0).collect();
        let x = t.solve(&b).unwrap();
        let back = crate::dense::mat_vec(t.to_dense().as_ref(), &x);
        for i in 0..25 {
            assert!((back[i] - b[i]).abs() < 1e-12);
        }
    }
}
