//! Isotropic Matérn covariance functions with closed forms for nu in {1/2, 3/2, 5/2}.

use alloc::format;
use alloc::vec::Vec;

use faer::Mat;

use crate::error::{Error, Result};
use crate::math::{exp, sqrt};

/// Point coordinates stored row-major, one row per location.
#[derive(Debug, Clone, PartialEq)]
pub struct Locations {
    coords: Vec<f64>,
    n: usize,
    d: usize,
}

impl Locations {
    pub fn new(coords: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidData("locations need at least one coordinate".into()));
        }
        if coords.len() % d != 0 {
            return Err(Error::DimensionMismatch {
                expected: (coords.len() / d + 1) * d,
                got: coords.len(),
            });
        }
        if let Some(i) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite coordinate in row {}", i / d)));
        }
        let n = coords.len() / d;
        Ok(Self { coords, n, d })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(|r| r.len()).unwrap_or(1);
        let mut coords = Vec::with_capacity(rows.len() * d);
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: r.len() });
            }
            coords.extend_from_slice(r);
        }
        Self::new(coords, d)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Rows reordered so that row `i` of the result is row `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut coords = Vec::with_capacity(self.coords.len());
        for &p in perm {
            coords.extend_from_slice(self.point(p));
        }
        Self { coords, n: perm.len(), d: self.d }
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        self.permuted(idx)
    }

    /// Rejects pairs of points closer than `tol` in every coordinate.
    pub fn check_distinct(&self, tol: f64) -> Result<()> {
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| self.point(a)[0].total_cmp(&self.point(b)[0]).then(a.cmp(&b)));
        for (k, &a) in order.iter().enumerate() {
            let pa = self.point(a);
            for &b in &order[k + 1..] {
                let pb = self.point(b);
                if pb[0] - pa[0] > tol {
                    break;
                }
                if pa.iter().zip(pb).all(|(x, y)| (x - y).abs() <= tol) {
                    return Err(Error::DuplicateLocation(a.min(b), a.max(b)));
                }
            }
        }
        Ok(())
    }
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    sqrt(squared_distance(a, b))
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let t = x - y;
        s += t * t;
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Smoothness {
    #[cfg_attr(feature = "serde", serde(rename = "0.5"))]
    Half,
    #[cfg_attr(feature = "serde", serde(rename = "1.5"))]
    ThreeHalves,
    #[cfg_attr(feature = "serde", serde(rename = "2.5"))]
    FiveHalves,
}

impl Smoothness {
    pub fn from_nu(nu: f64) -> Result<Self> {
        if nu == 0.5 {
            Ok(Self::Half)
        } else if nu == 1.5 {
            Ok(Self::ThreeHalves)
        } else if nu == 2.5 {
            Ok(Self::FiveHalves)
        } else {
            Err(Error::InvalidParameter(format!(
                "smoothness {nu} not supported (use 0.5, 1.5 or 2.5)"
            )))
        }
    }

    pub fn nu(self) -> f64 {
        match self {
            Self::Half => 0.5,
            Self::ThreeHalves => 1.5,
            Self::FiveHalves => 2.5,
        }
    }

    fn scale(self) -> f64 {
        match self {
            Self::Half => 1.0,
            Self::ThreeHalves => sqrt(3.0),
            Self::FiveHalves => sqrt(5.0),
        }
    }
}

/// Index of a covariance parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovParam {
    Variance = 0,
    Range = 1,
}

impl CovParam {
    pub const ALL: [CovParam; 2] = [CovParam::Variance, CovParam::Range];

    pub fn from_index(k: usize) -> Result<Self> {
        match k {
            0 => Ok(Self::Variance),
            1 => Ok(Self::Range),
            _ => Err(Error::ParameterIndex(k)),
        }
    }
}

/// Matérn covariance `c(s, s') = variance * k_nu(|s - s'| / range)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CovarianceSpec {
    smoothness: Smoothness,
    variance: f64,
    range: f64,
}

impl CovarianceSpec {
    pub const NUM_PARAMS: usize = 2;

    pub fn new(smoothness: Smoothness, variance: f64, range: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::InvalidParameter(format!("variance must be positive, got {variance}")));
        }
        if !(range > 0.0 && range.is_finite()) {
            return Err(Error::InvalidParameter(format!("range must be positive, got {range}")));
        }
        Ok(Self { smoothness, variance, range })
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn params(&self) -> [f64; 2] {
        [self.variance, self.range]
    }

    pub fn with_params(&self, variance: f64, range: f64) -> Result<Self> {
        Self::new(self.smoothness, variance, range)
    }

    /// Covariance at Euclidean distance `r`.
    pub fn at_distance(&self, r: f64) -> f64 {
        let u = self.smoothness.scale() * r / self.range;
        let e = exp(-u);
        self.variance
            * match self.smoothness {
                Smoothness::Half => e,
                Smoothness::ThreeHalves => (1.0 + u) * e,
                Smoothness::FiveHalves => (1.0 + u + u * u / 3.0) * e,
            }
    }

    /// Partial derivative of `at_distance(r)` with respect to a parameter.
    pub fn grad_at_distance(&self, r: f64, param: CovParam) -> f64 {
        match param {
            CovParam::Variance => self.at_distance(r) / self.variance,
            CovParam::Range => {
                let u = self.smoothness.scale() * r / self.range;
                let e = exp(-u);
                let s = self.variance / self.range;
                match self.smoothness {
                    Smoothness::Half => s * u * e,
                    Smoothness::ThreeHalves => s * u * u * e,
                    Smoothness::FiveHalves => s * u * u * (1.0 + u) * e / 3.0,
                }
            }
        }
    }

    pub fn value(&self, s: &[f64], t: &[f64]) -> f64 {
        self.at_distance(distance(s, t))
    }

    pub fn grad(&self, s: &[f64], t: &[f64], k: usize) -> Result<f64> {
        Ok(self.grad_at_distance(distance(s, t), CovParam::from_index(k)?))
    }
}

fn check_indices(locs: &Locations, idx: &[usize]) -> Result<()> {
    if let Some(&bad) = idx.iter().find(|&&i| i >= locs.len()) {
        return Err(Error::IndexOutOfRange { index: bad, len: locs.len() });
    }
    Ok(())
}

/// Dense block `Sigma[rows, cols]`.
pub fn cov_submatrix(
    spec: &CovarianceSpec,
    locs: &Locations,
    rows: &[usize],
    cols: &[usize],
) -> Result<Mat<f64>> {
    check_indices(locs, rows)?;
    check_indices(locs, cols)?;
    Ok(Mat::from_fn(rows.len(), cols.len(), |a, b| {
        spec.value(locs.point(rows[a]), locs.point(cols[b]))
    }))
}

/// Dense block of `dSigma / dtheta_k`.
pub fn cov_grad_submatrix(
    spec: &CovarianceSpec,
    locs: &Locations,
    rows: &[usize],
    cols: &[usize],
    param: CovParam,
) -> Result<Mat<f64>> {
    check_indices(locs, rows)?;
    check_indices(locs, cols)?;
    Ok(Mat::from_fn(rows.len(), cols.len(), |a, b| {
        spec.grad_at_distance(distance(locs.point(rows[a]), locs.point(cols[b])), param)
    }))
}

/// Full covariance matrix; intended for oracles and small problems.
pub fn cov_matrix(spec: &CovarianceSpec, locs: &Locations) -> Mat<f64> {
    let n = locs.len();
    let mut m = Mat::zeros(n, n);
    for j in 0..n {
        m[(j, j)] = spec.variance();
        for i in j + 1..n {
            let v = spec.value(locs.point(i), locs.point(j));
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}
