//! Synthetic data: uniform locations, a Matérn latent field and responses.

use alloc::vec::Vec;

use crate::covariance::{cov_matrix, CovarianceSpec, Locations, Smoothness};
use crate::dense;
use crate::error::{Error, Result};
use crate::laplace::Design;
use crate::likelihood::Likelihood;
use crate::math::sqrt;
use crate::rng;
use crate::vecchia::{build_factor, VecchiaStructure};

/// Largest size simulated with a dense Cholesky factor under [`FieldMethod::Auto`].
pub const EXACT_FIELD_MAX_N: usize = 5000;
const AUTO_VECCHIA_M: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase", tag = "kind"))]
pub enum FieldMethod {
    Auto,
    Exact,
    Vecchia { m: usize },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SimulationConfig {
    pub n: usize,
    pub dim: usize,
    pub seed: u64,
    pub smoothness: Smoothness,
    pub variance: f64,
    pub range: f64,
    pub likelihood: Likelihood,
    pub intercept: bool,
    /// Coefficients; with `intercept` the first one multiplies a column of ones and the
    /// rest standard-normal covariates.
    pub beta: Vec<f64>,
    pub field: FieldMethod,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            dim: 2,
            seed: 0,
            smoothness: Smoothness::ThreeHalves,
            variance: 1.0,
            range: 0.05,
            likelihood: Likelihood::BernoulliLogit,
            intercept: false,
            beta: Vec::new(),
            field: FieldMethod::Auto,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub locations: Locations,
    pub x: Design,
    pub b: Vec<f64>,
    pub mu: Vec<f64>,
    pub y: Vec<f64>,
}

const LOCATION_STREAM: u64 = 1;
const FIELD_STREAM: u64 = 2;
const COVARIATE_STREAM: u64 = 3;

/// Zero-mean Gaussian field with covariance `spec` at `locs`.
pub fn simulate_field(spec: &CovarianceSpec, locs: &Locations, method: FieldMethod, seed: u64) -> Result<Vec<f64>> {
    let n = locs.len();
    let mut r = rng::stream(seed, FIELD_STREAM);
    let z = rng::normals(&mut r, n);
    let method = match method {
        FieldMethod::Auto if n <= EXACT_FIELD_MAX_N => FieldMethod::Exact,
        FieldMethod::Auto => FieldMethod::Vecchia { m: AUTO_VECCHIA_M },
        m => m,
    };
    match method {
        FieldMethod::Exact => {
            if n > 2 * EXACT_FIELD_MAX_N {
                return Err(Error::Capacity(alloc::format!("exact field simulation is limited to n <= {}", 2 * EXACT_FIELD_MAX_N)));
            }
            let mut c = cov_matrix(spec, locs);
            // tiny jitter keeps smooth kernels numerically positive definite
            for i in 0..n {
                c[(i, i)] += 1e-10 * spec.variance();
            }
            let llt = dense::cholesky(c.as_ref())?;
            let l = llt.L();
            let mut b = alloc::vec![0.0; n];
            for j in 0..n {
                let zj = z[j];
                for i in j..n {
                    b[i] += l[(i, j)] * zj;
                }
            }
            Ok(b)
        }
        FieldMethod::Vecchia { m } => {
            let structure = alloc::sync::Arc::new(VecchiaStructure::new(locs, m, seed));
            let factor = build_factor(&structure, spec)?;
            let scaled: Vec<f64> = z.iter().zip(factor.d()).map(|(zi, d)| zi * sqrt(*d)).collect();
            let b = factor.b().solve(&scaled);
            Ok(structure.to_original(&b))
        }
        FieldMethod::Auto => unreachable!(),
    }
}

pub fn simulate(cfg: &SimulationConfig) -> Result<SimulatedData> {
    if cfg.n == 0 || cfg.dim == 0 {
        return Err(Error::InvalidParameter("n and dim must be positive".into()));
    }
    let spec = CovarianceSpec::new(cfg.smoothness, cfg.variance, cfg.range)?;
    let n = cfg.n;
    let mut r = rng::stream(cfg.seed, LOCATION_STREAM);
    let coords: Vec<f64> = (0..n * cfg.dim).map(|_| rng::uniform(&mut r)).collect();
    let locations = Locations::new(coords, cfg.dim)?;
    let p = cfg.beta.len();
    let mut r = rng::stream(cfg.seed, COVARIATE_STREAM);
    let mut xs = Vec::with_capacity(n * p);
    for _ in 0..n {
        for j in 0..p {
            xs.push(if cfg.intercept && j == 0 { 1.0 } else { rng::normals(&mut r, 1)[0] });
        }
    }
    let x = Design::new(n, p, xs)?;
    let b = simulate_field(&spec, &locations, cfg.field, cfg.seed)?;
    let fixed = if p > 0 { x.mul(&cfg.beta)? } else { alloc::vec![0.0; n] };
    let mu: Vec<f64> = fixed.iter().zip(&b).map(|(f, v)| f + v).collect();
    let y = cfg.likelihood.sample(&mu, cfg.seed);
    Ok(SimulatedData { locations, x, b, mu, y })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_supported() {
        let cfg = SimulationConfig { n: 100, seed: 4, ..SimulationConfig::default() };
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.b, b.b);
        assert!(a.y.iter().all(|&v| v == 0.0 || v == 1.0));
        assert!(a.locations.coords().iter().all(|&c| (0.0..1.0).contains(&c)));
    }

    #[test]
    fn field_variance_is_calibrated() {
        // average sample variance over several fields is close to sigma^2
        let mut acc = 0.0;
        let reps = 20;
        for s in 0..reps {
            let cfg = SimulationConfig { n: 400, seed: s, range: 0.02, ..SimulationConfig::default() };
            let d = simulate(&cfg).unwrap();
            acc += crate::math::sample_variance(&d.b);
        }
        let v = acc / reps as f64;
        assert!((v - 1.0).abs() < 0.15, "{v}");
    }

    #[test]
    fn vecchia_field_close_to_exact_in_distribution() {
        let cfg = SimulationConfig { n: 300, seed: 1, field: FieldMethod::Vecchia { m: 30 }, ..SimulationConfig::default() };
        let d = simulate(&cfg).unwrap();
        let v = crate::math::sample_variance(&d.b);
        assert!(v > 0.2 && v < 3.0);
    }
}
