//! Newton mode finding, the Vecchia-Laplace negative log-marginal likelihood and its
//! gradient, under a dense Cholesky backend and an iterative backend.

mod eval;
mod gradient;
mod mode;
#[cfg(feature = "std")]
mod theory;

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::covariance::CovarianceSpec;
use crate::error::{check_len, Error, Result};
use crate::iterative::{CgCriterion, LinearOperator, DEFAULT_CG_TOL, DEFAULT_MAX_ITER};
use crate::precond::{covariance_low_rank, default_rank, PivotedCholesky, PreconditionerKind, System};
use crate::vecchia::{build_factor, build_factor_with_gradients, VecchiaFactor, VecchiaGradient, VecchiaStructure};

pub use eval::{neg_marginal_loglik, Evaluation};
pub use gradient::{gradient, Gradient};
pub use mode::{find_mode, penalized_objective, solve_latent_system};
pub(crate) use mode::LatentSolver;

/// Solver for `(W + Sigma~^{-1}) u = r` with the backend in `cfg`.
pub(crate) fn mode_solver<'a>(prior: &'a Prior, w: &[f64], cfg: &BackendConfig) -> Result<LatentSolver<'a>> {
    LatentSolver::new(prior, w, cfg, None)
}
#[cfg(feature = "std")]
pub use theory::{chi_square_ratio, slq_sample_size, SampleSize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Backend {
    Cholesky,
    Iterative,
}

/// Linear-algebra settings shared by mode finding, likelihood and gradient.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct BackendConfig {
    pub backend: Backend,
    pub preconditioner: PreconditionerKind,
    pub num_probes: usize,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub cg_criterion: CgCriterion,
    pub probe_seed: u64,
    /// `None` picks the preconditioner's natural split.
    pub logdet_split: Option<System>,
    /// Rank of low-rank preconditioners; `None` uses [`default_rank`].
    pub rank: Option<usize>,
    /// Use control variates in the stochastic trace estimates where available.
    pub control_variates: bool,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Iterative,
            preconditioner: PreconditionerKind::Vadu,
            num_probes: 50,
            cg_tol: DEFAULT_CG_TOL,
            cg_max_iter: DEFAULT_MAX_ITER,
            cg_criterion: CgCriterion::Absolute,
            probe_seed: 0,
            logdet_split: None,
            rank: None,
            control_variates: true,
        }
    }
}

impl BackendConfig {
    pub fn cholesky() -> Self {
        Self { backend: Backend::Cholesky, ..Self::default() }
    }

    pub fn iterative(preconditioner: PreconditionerKind) -> Self {
        Self { preconditioner, ..Self::default() }
    }

    pub fn rank_for(&self, n: usize) -> usize {
        self.rank.unwrap_or_else(|| default_rank(n))
    }

    /// Split used for log-determinants and solves; rejects mismatched combinations.
    pub fn system(&self) -> Result<System> {
        let natural = self.preconditioner.natural_system();
        match self.logdet_split {
            None => Ok(natural),
            Some(s) if s == natural || self.preconditioner == PreconditionerKind::Identity => Ok(s),
            Some(s) => Err(Error::InvalidParameter(format!(
                "preconditioner '{}' works on the {:?} system, not {:?}",
                self.preconditioner.name(),
                natural,
                s
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_probes == 0 {
            return Err(Error::InvalidParameter("num_probes must be at least 1".into()));
        }
        if !(self.cg_tol > 0.0) {
            return Err(Error::InvalidParameter("cg_tol must be positive".into()));
        }
        if self.cg_max_iter == 0 {
            return Err(Error::InvalidParameter("cg_max_iter must be at least 1".into()));
        }
        self.system().map(|_| ())
    }
}

/// Damped Newton settings.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct NewtonConfig {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub rel_tol: f64,
    pub max_halvings: usize,
    /// Upper bound on the CG tolerance used for Newton steps.
    pub cg_tol_cap: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { max_iter: 100, grad_tol: 1e-6, rel_tol: 1e-8, max_halvings: 10, cg_tol_cap: 1e-4 }
    }
}

/// Posterior mode of the latent field and the curvature there.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceState {
    /// `b*`
    pub mode: Vec<f64>,
    /// `F + b*`
    pub mu: Vec<f64>,
    /// Diagonal of `W` at the mode.
    pub w: Vec<f64>,
    pub newton_iters: usize,
    /// `-log p(y | mu*) + b*^T Sigma~^{-1} b* / 2`
    pub objective: f64,
    pub grad_norm: f64,
    pub converged: bool,
}

/// Covariance-dependent pieces: the Vecchia factor, optionally its derivatives, and the
/// low-rank covariance factor used by LRAC.
#[derive(Debug, Clone)]
pub struct Prior {
    pub factor: VecchiaFactor,
    pub grads: Option<[VecchiaGradient; 2]>,
    pub lowrank: Option<PivotedCholesky>,
}

impl Prior {
    pub fn new(
        structure: &Arc<VecchiaStructure>,
        spec: &CovarianceSpec,
        cfg: &BackendConfig,
        with_gradients: bool,
    ) -> Result<Self> {
        let (factor, grads) = if with_gradients {
            let (f, g) = build_factor_with_gradients(structure, spec)?;
            (f, Some(g))
        } else {
            (build_factor(structure, spec)?, None)
        };
        let lowrank = if cfg.backend == Backend::Iterative && cfg.preconditioner == PreconditionerKind::Lrac {
            Some(covariance_low_rank(spec, structure.locations(), cfg.rank_for(structure.n()))?)
        } else {
            None
        };
        Ok(Self { factor, grads, lowrank })
    }

    pub fn from_factor(factor: VecchiaFactor) -> Self {
        Self { factor, grads: None, lowrank: None }
    }

    pub fn n(&self) -> usize {
        self.factor.n()
    }
}

/// Row-major `n x p` covariate matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl Design {
    pub fn new(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        check_len(n * p, data.len())?;
        Ok(Self { n, p, data })
    }

    pub fn empty(n: usize) -> Self {
        Self { n, p: 0, data: Vec::new() }
    }

    pub fn intercept(n: usize) -> Self {
        Self { n, p: 1, data: alloc::vec![1.0; n] }
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// `X beta`
    pub fn mul(&self, beta: &[f64]) -> Result<Vec<f64>> {
        check_len(self.p, beta.len())?;
        Ok((0..self.n).map(|i| crate::math::dot(self.row(i), beta)).collect())
    }

    /// `X^T v`
    pub fn t_mul(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, v.len())?;
        let mut out = alloc::vec![0.0; self.p];
        for i in 0..self.n {
            crate::math::axpy(v[i], self.row(i), &mut out);
        }
        Ok(out)
    }

    /// Rows reordered so that row `i` is row `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for &p in perm {
            data.extend_from_slice(self.row(p));
        }
        Self { n: perm.len(), p: self.p, data }
    }
}

/// `W + Sigma~^{-1}` or `Sigma~ + W^{-1}` as a matrix-free operator.
pub struct SystemOperator<'a> {
    pub factor: &'a VecchiaFactor,
    pub w: &'a [f64],
    pub system: System,
}

impl LinearOperator for SystemOperator<'_> {
    fn dim(&self) -> usize {
        self.factor.n()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self.system {
            System::Precision => {
                let mut out = self.factor.apply_precision(x).expect("operator dimension");
                for ((o, wi), xi) in out.iter_mut().zip(self.w).zip(x) {
                    *o += wi * xi;
                }
                out
            }
            System::Covariance => {
                let mut out = self.factor.apply_sigma_tilde(x).expect("operator dimension");
                for ((o, wi), xi) in out.iter_mut().zip(self.w).zip(x) {
                    *o += xi / wi;
                }
                out
            }
        }
    }
}
