//! Latent predictive distributions at new locations, response-scale moments and scores.

mod scores;

use alloc::vec::Vec;

use faer::Mat;

use crate::dense;
use crate::error::{check_len, Error, Result};
use crate::iterative::{lanczos_partial, FnOperator};
use crate::laplace::{BackendConfig, LaplaceState, Prior};
use crate::likelihood::Likelihood;
use crate::math::{self, sqrt};
use crate::precond::{LanczosVariant, Preconditioner};
use crate::rng;
use crate::vecchia::PredictionBlocks;

pub use scores::{crps, crps_samples, log_score, rmse};

/// Largest training size for the dense predictive variance.
pub const EXACT_MAX_N: usize = 5000;
/// Largest number of prediction points for which a full covariance is formed.
pub const FULL_COV_MAX: usize = 2000;
/// Samples used for the simulation-based variance unless configured.
pub const DEFAULT_SIM_SAMPLES: usize = 2000;
const SIM_STREAM: u64 = 0x51_0000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarianceMethod {
    Exact,
    Simulation { samples: usize, seed: u64 },
    Lanczos { rank: usize, variant: LanczosVariant },
}

/// Latent predictive distribution `N(omega_p, Omega_p)`.
#[derive(Debug, Clone)]
pub struct PredictiveDistribution {
    pub mean: Vec<f64>,
    /// Diagonal of `Omega_p`.
    pub var: Vec<f64>,
    /// Full `Omega_p`, only when requested from the exact method.
    pub cov: Option<Mat<f64>>,
    pub method: VarianceMethod,
    /// Lanczos stopped early on an invariant subspace.
    pub breakdown: bool,
    /// Lanczos rank actually achieved.
    pub achieved_rank: Option<usize>,
}

/// `omega_p = F_p - B_p^{-1} B_po b*`
pub fn latent_mean(state: &LaplaceState, blocks: &PredictionBlocks, fixed_pred: &[f64]) -> Result<Vec<f64>> {
    check_len(blocks.n_pred(), fixed_pred.len())?;
    let c = blocks.coupling(&state.mode)?;
    Ok(fixed_pred.iter().zip(&c).map(|(f, v)| f - v).collect())
}

fn check_state(prior: &Prior, state: &LaplaceState, blocks: &PredictionBlocks) -> Result<()> {
    check_len(prior.n(), state.w.len())?;
    check_len(prior.n(), blocks.bpo.ncols())
}

/// Dense predictive variances; with `full` also the whole covariance (`n_p <= 2000`).
pub fn latent_var_exact(
    prior: &Prior,
    state: &LaplaceState,
    blocks: &PredictionBlocks,
    full: bool,
) -> Result<(Vec<f64>, Option<Mat<f64>>)> {
    check_state(prior, state, blocks)?;
    let n = prior.n();
    if n > EXACT_MAX_N {
        return Err(Error::Capacity(alloc::format!(
            "exact predictive variances need n <= {EXACT_MAX_N}, got {n}"
        )));
    }
    let np = blocks.n_pred();
    if full && np > FULL_COV_MAX {
        return Err(Error::Capacity(alloc::format!(
            "full predictive covariance needs n_p <= {FULL_COV_MAX}, got {np}"
        )));
    }
    let mut a = prior.factor.precision_dense();
    for (i, wi) in state.w.iter().enumerate() {
        a[(i, i)] += wi;
    }
    let llt = dense::cholesky(a.as_ref())?;
    let l = llt.L();
    let prior_var = blocks.prior_conditional_variance();
    // rows of L^{-1} C^T, where C = B_p^{-1} B_po
    let rows = crate::par::map(np, |p| {
        let mut e = alloc::vec![0.0; np];
        e[p] = 1.0;
        let mut c = blocks.coupling_t(&e).expect("length matches");
        dense::lower_solve(l, &mut c);
        c
    });
    let var: Vec<f64> = rows.iter().zip(&prior_var).map(|(r, d)| d + math::dot(r, r)).collect();
    let cov = full.then(|| {
        let mut m = Mat::from_fn(np, np, |i, j| math::dot(&rows[i], &rows[j]));
        for (i, d) in prior_var.iter().enumerate() {
            m[(i, i)] += d;
        }
        m
    });
    Ok((var, cov))
}

/// Simulation-based unbiased estimate of the predictive variances with `samples` draws.
pub fn latent_var_sim(
    prior: &Prior,
    state: &LaplaceState,
    blocks: &PredictionBlocks,
    samples: usize,
    seed: u64,
    cfg: &BackendConfig,
) -> Result<Vec<f64>> {
    check_state(prior, state, blocks)?;
    if samples < 2 {
        return Err(Error::InvalidParameter("simulation needs at least 2 samples".into()));
    }
    let factor = &prior.factor;
    let n = factor.n();
    let np = blocks.n_pred();
    let solver = crate::laplace::mode_solver(prior, &state.w, cfg)?;
    let sqrt_w: Vec<f64> = state.w.iter().map(|&v| sqrt(v.max(0.0))).collect();
    let inv_sqrt_d: Vec<f64> = factor.d().iter().map(|&v| 1.0 / sqrt(v)).collect();
    let draws = crate::par::try_map(samples, |s| {
        let mut r = rng::stream(seed, SIM_STREAM + s as u64);
        let z1 = rng::normals(&mut r, n);
        let z2 = rng::normals(&mut r, n);
        let scaled: Vec<f64> = z2.iter().zip(&inv_sqrt_d).map(|(z, d)| z * d).collect();
        let mut z3 = factor.b().mul_t(&scaled);
        for i in 0..n {
            z3[i] += sqrt_w[i] * z1[i];
        }
        let u = solver.solve(&z3, cfg.cg_tol)?.0;
        blocks.coupling(&u)
    })?;
    let mut acc = blocks.prior_conditional_variance();
    let inv = 1.0 / samples as f64;
    for z4 in &draws {
        for p in 0..np {
            acc[p] += inv * z4[p] * z4[p];
        }
    }
    Ok(acc)
}

/// Predictive variances from a rank-`k` Lanczos decomposition, optionally preconditioned.
/// Returns the variances, the achieved rank and whether Lanczos broke down early.
pub fn latent_var_lanczos(
    prior: &Prior,
    state: &LaplaceState,
    blocks: &PredictionBlocks,
    k: usize,
    variant: LanczosVariant,
) -> Result<(Vec<f64>, usize, bool)> {
    check_state(prior, state, blocks)?;
    let factor = &prior.factor;
    let n = factor.n();
    let np = blocks.n_pred();
    if k == 0 || k > n {
        return Err(Error::Rank { rank: k, n });
    }
    let mut var = blocks.prior_conditional_variance();
    if np == 0 {
        return Ok((var, 0, false));
    }
    let cbar = blocks.coupling_t(&alloc::vec![1.0 / np as f64; np])?;
    if cbar.iter().all(|&v| v == 0.0) {
        return Ok((var, 0, false));
    }
    let w = &state.w;
    let p = Preconditioner::build_lanczos(variant, factor, w)?;
    let a_op = |x: &[f64]| -> Vec<f64> {
        let mut out = factor.apply_precision(x).expect("dimension");
        for i in 0..n {
            out[i] += w[i] * x[i];
        }
        out
    };
    // left and right factors mapping Lanczos vectors to prediction space
    let (res, left, right): (_, Vec<Vec<f64>>, Option<Vec<Vec<f64>>>) = match (&p, variant) {
        (None, _) => {
            let op = FnOperator { n, f: a_op };
            let res = lanczos_partial(&op, &cbar, k)?;
            let left = crate::par::try_map(res.rank(), |j| blocks.coupling(&res.q[j]))?;
            (res, left, None)
        }
        (Some(p), LanczosVariant::L1) => {
            let op = FnOperator {
                n,
                f: |x: &[f64]| -> Vec<f64> {
                    let u = p.sym_factor_solve(x, true).expect("dimension");
                    p.sym_factor_solve(&a_op(&u), false).expect("dimension")
                },
            };
            let start = p.sym_factor_solve(&cbar, false)?;
            let res = lanczos_partial(&op, &start, k)?;
            let left = crate::par::try_map(res.rank(), |j| blocks.coupling(&p.sym_factor_solve(&res.q[j], true)?))?;
            (res, left, None)
        }
        (Some(p), _) => {
            // P^{-1/2} (Sigma~ + W^{-1}) P^{-1/2}
            let op = FnOperator {
                n,
                f: |x: &[f64]| -> Vec<f64> {
                    let u = p.sym_factor_solve(x, true).expect("dimension");
                    let mut s = factor.apply_sigma_tilde(&u).expect("dimension");
                    for i in 0..n {
                        s[i] += u[i] / w[i];
                    }
                    p.sym_factor_solve(&s, false).expect("dimension")
                },
            };
            let start = p.sym_factor_solve(&factor.apply_sigma_tilde(&cbar)?, false)?;
            let res = lanczos_partial(&op, &start, k)?;
            let left = crate::par::try_map(res.rank(), |j| {
                let u = p.sym_factor_solve(&res.q[j], true)?;
                let u: Vec<f64> = u.iter().zip(w.iter()).map(|(a, b)| a / b).collect();
                blocks.coupling(&u)
            })?;
            let right = crate::par::try_map(res.rank(), |j| {
                let u = p.sym_factor_solve(&res.q[j], false)?;
                blocks.coupling(&factor.apply_sigma_tilde(&u)?)
            })?;
            (res, left, Some(right))
        }
    };
    let r = res.rank();
    let quad = crate::par::try_map(np, |i| {
        let li: Vec<f64> = (0..r).map(|j| left[j][i]).collect();
        let ri: Vec<f64> = match &right {
            Some(rt) => (0..r).map(|j| rt[j][i]).collect(),
            None => li.clone(),
        };
        let sol = res.t.solve(&ri)?;
        Ok(math::dot(&li, &sol))
    })?;
    for (v, q) in var.iter_mut().zip(quad) {
        *v += q;
    }
    Ok((var, r, res.breakdown))
}

/// Mean and variance plus the full predictive distribution for the chosen method.
pub fn predict(
    prior: &Prior,
    state: &LaplaceState,
    blocks: &PredictionBlocks,
    fixed_pred: &[f64],
    method: VarianceMethod,
    cfg: &BackendConfig,
) -> Result<PredictiveDistribution> {
    let mean = latent_mean(state, blocks, fixed_pred)?;
    let (var, breakdown, achieved_rank) = match method {
        VarianceMethod::Exact => (latent_var_exact(prior, state, blocks, false)?.0, false, None),
        VarianceMethod::Simulation { samples, seed } => {
            (latent_var_sim(prior, state, blocks, samples, seed, cfg)?, false, None)
        }
        VarianceMethod::Lanczos { rank, variant } => {
            let (v, r, b) = latent_var_lanczos(prior, state, blocks, rank, variant)?;
            (v, b, Some(r))
        }
    };
    Ok(PredictiveDistribution { mean, var, cov: None, method, breakdown, achieved_rank })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResponseMethod {
    ClosedForm,
    Simulation { samples: usize, seed: u64 },
}

/// Predictive moments of the response, with the draws for the simulation method.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMoments {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    /// `samples[p]` holds the draws for prediction point `p`.
    pub samples: Option<Vec<Vec<f64>>>,
}

const RESPONSE_STREAM: u64 = 0x7e5_0000;

/// Response-scale predictive moments. The closed form is available for the gamma family.
pub fn response_moments(
    mean: &[f64],
    var: &[f64],
    lik: &Likelihood,
    method: ResponseMethod,
) -> Result<ResponseMoments> {
    check_len(mean.len(), var.len())?;
    if let Some(i) = var.iter().position(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidData(alloc::format!("negative predictive variance at point {i}")));
    }
    match method {
        ResponseMethod::ClosedForm => match *lik {
            Likelihood::Gamma { shape } => {
                let m = mean.iter().zip(var).map(|(&w, &v)| math::exp(w + 0.5 * v)).collect();
                let v = mean
                    .iter()
                    .zip(var)
                    .map(|(&w, &v)| math::exp(2.0 * w + 2.0 * v) * (1.0 + 1.0 / shape) - math::exp(2.0 * w + v))
                    .collect();
                Ok(ResponseMoments { mean: m, var: v, samples: None })
            }
            _ => Err(Error::Capability(alloc::format!(
                "no closed-form response moments for the {} likelihood",
                lik.name()
            ))),
        },
        ResponseMethod::Simulation { samples, seed } => {
            if samples < 2 {
                return Err(Error::InvalidParameter("response simulation needs at least 2 samples".into()));
            }
            let draws = crate::par::map(mean.len(), |p| {
                let mut r = rng::stream(seed, RESPONSE_STREAM + p as u64);
                let sd = sqrt(var[p]);
                let mut out = Vec::with_capacity(samples);
                let latent = rng::normals(&mut r, samples);
                for z in latent {
                    out.push(lik.sample_one(mean[p] + sd * z, &mut r));
                }
                out
            });
            let m: Vec<f64> = draws.iter().map(|d| math::mean(d)).collect();
            let v: Vec<f64> = draws.iter().map(|d| math::sample_variance(d)).collect();
            Ok(ResponseMoments { mean: m, var: v, samples: Some(draws) })
        }
    }
}

/// Draws from the latent predictive marginals `N(mean_p, var_p)`.
pub fn latent_samples(mean: &[f64], var: &[f64], samples: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    check_len(mean.len(), var.len())?;
    if let Some(i) = var.iter().position(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidData(alloc::format!("negative predictive variance at point {i}")));
    }
    Ok(crate::par::map(mean.len(), |p| {
        let mut r = rng::stream(seed, SIM_STREAM + RESPONSE_STREAM + p as u64);
        let sd = sqrt(var[p]);
        rng::normals(&mut r, samples).into_iter().map(|z| mean[p] + sd * z).collect()
    }))
}
