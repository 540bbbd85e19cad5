use alloc::vec::Vec;

use faer::linalg::solvers::Llt;

use super::mode::LatentSolver;
use super::{Backend, BackendConfig, LaplaceState, Prior};
use crate::dense;
use crate::error::{check_len, Result};
use crate::iterative::{slq_logdet, Tridiagonal};
use crate::likelihood::Likelihood;
use crate::math::{dot, ln};
use crate::precond::{Preconditioner, System};
use crate::rng;

/// Negative log-marginal likelihood at a mode, with the pieces reused by the gradient.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    /// `-log p(y | mu*)`
    pub neg_log_lik: f64,
    /// `b*^T Sigma~^{-1} b* / 2`
    pub quad: f64,
    /// `log det(Sigma~ W + I)`
    pub logdet: f64,
    /// CG iterations per probe (empty for the Cholesky backend).
    pub cg_iterations: Vec<usize>,
    pub(crate) cache: Cache,
}

#[derive(Debug, Clone)]
pub(crate) enum Cache {
    Dense {
        llt: Llt<f64>,
    },
    Iterative {
        system: System,
        precond: Preconditioner,
        /// `A^{-1} z_i` on the chosen split
        solves: Vec<Vec<f64>>,
        /// `P^{-1} z_i`
        psolves: Vec<Vec<f64>>,
    },
}

impl Evaluation {
    pub fn preconditioner(&self) -> Option<&Preconditioner> {
        match &self.cache {
            Cache::Iterative { precond, .. } => Some(precond),
            Cache::Dense { .. } => None,
        }
    }
}

/// Probe `z_k = P^{1/2} g_k` with `g_k` drawn from stream `(seed, k)`.
pub(crate) fn probe(p: &Preconditioner, seed: u64, k: usize) -> Result<Vec<f64>> {
    let mut r = rng::stream(seed, k as u64);
    let g = rng::normals(&mut r, p.sample_dim());
    p.sample_from(&g)
}

/// Vecchia-Laplace negative log-marginal likelihood at the mode in `state`.
pub fn neg_marginal_loglik(
    prior: &Prior,
    lik: &Likelihood,
    y: &[f64],
    state: &LaplaceState,
    cfg: &BackendConfig,
) -> Result<Evaluation> {
    let factor = &prior.factor;
    let n = factor.n();
    check_len(n, y.len())?;
    check_len(n, state.mu.len())?;
    cfg.validate()?;
    let neg_log_lik = -lik.log_density_sum(y, &state.mu);
    let quad = 0.5 * dot(&state.mode, &factor.apply_precision(&state.mode)?);
    let solver = LatentSolver::new(prior, &state.w, cfg, None)?;
    let (logdet, cg_iterations, cache) = match cfg.backend {
        Backend::Cholesky => {
            let llt = match solver {
                LatentSolver::Dense { llt } => llt,
                LatentSolver::Iterative { .. } => unreachable!(),
            };
            let logdet = dense::llt_logdet(&llt) + factor.logdet_sigma_tilde();
            (logdet, Vec::new(), Cache::Dense { llt })
        }
        Backend::Iterative => {
            let precond = solver.precond().expect("iterative solver").clone();
            let system = solver.system();
            let runs = crate::par::try_map(cfg.num_probes, |k| {
                let z = probe(&precond, cfg.probe_seed, k)?;
                let res = solver.pcg_split(&z, cfg.cg_tol, true)?;
                let w = precond.solve(&z);
                Ok((res, w))
            })?;
            let mut weights = Vec::with_capacity(runs.len());
            let mut tri: Vec<Tridiagonal> = Vec::with_capacity(runs.len());
            let mut iters = Vec::with_capacity(runs.len());
            let mut solves = Vec::with_capacity(runs.len());
            let mut psolves = Vec::with_capacity(runs.len());
            for (res, w) in runs {
                weights.push(res.initial_rz);
                tri.push(res.tridiag.unwrap_or_default());
                iters.push(res.iterations);
                solves.push(res.solution);
                psolves.push(w);
            }
            let slq = slq_logdet(&weights, &tri)?;
            let base = match system {
                System::Precision => factor.logdet_sigma_tilde(),
                System::Covariance => state.w.iter().map(|&v| ln(v)).sum(),
            };
            (base + precond.logdet() + slq, iters, Cache::Iterative { system, precond, solves, psolves })
        }
    };
    Ok(Evaluation { value: neg_log_lik + quad + 0.5 * logdet, neg_log_lik, quad, logdet, cg_iterations, cache })
}
