use alloc::boxed::Box;
use alloc::vec::Vec;

use faer::linalg::solvers::Llt;
use faer::Mat;

use super::{Backend, BackendConfig, LaplaceState, NewtonConfig, Prior, SystemOperator};
use crate::dense;
use crate::error::{check_len, Error, Result};
use crate::iterative::{pcg_solve, CgCriterion, PcgOptions, PcgResult};
use crate::likelihood::Likelihood;
use crate::math::{dot, max_abs};
use crate::precond::{Preconditioner, System};
use crate::vecchia::VecchiaFactor;

/// `-log p(y | F + b) + b^T Sigma~^{-1} b / 2`
pub fn penalized_objective(
    factor: &VecchiaFactor,
    lik: &Likelihood,
    y: &[f64],
    fixed: &[f64],
    b: &[f64],
) -> Result<f64> {
    let qb = factor.apply_precision(b)?;
    Ok(objective_with(lik, y, fixed, b, &qb))
}

fn objective_with(lik: &Likelihood, y: &[f64], fixed: &[f64], b: &[f64], qb: &[f64]) -> f64 {
    let mut nlp = 0.0;
    for i in 0..y.len() {
        nlp -= lik.log_density(y[i], fixed[i] + b[i]);
    }
    nlp + 0.5 * dot(b, qb)
}

fn mu_of(fixed: &[f64], b: &[f64]) -> Vec<f64> {
    fixed.iter().zip(b).map(|(f, v)| f + v).collect()
}

/// Solver for `(W + Sigma~^{-1}) u = r` at a fixed `W`.
pub(crate) enum LatentSolver<'a> {
    Dense {
        llt: Llt<f64>,
    },
    Iterative {
        factor: &'a VecchiaFactor,
        w: Vec<f64>,
        system: System,
        precond: Preconditioner,
        max_iter: usize,
        criterion: CgCriterion,
    },
}

impl<'a> LatentSolver<'a> {
    /// `q_dense` is the dense precision for the Cholesky backend, built on demand if absent.
    pub(crate) fn new(prior: &'a Prior, w: &[f64], cfg: &BackendConfig, q_dense: Option<&Mat<f64>>) -> Result<Self> {
        let factor = &prior.factor;
        check_len(factor.n(), w.len())?;
        match cfg.backend {
            Backend::Cholesky => {
                let owned;
                let q = match q_dense {
                    Some(q) => q,
                    None => {
                        owned = factor.precision_dense();
                        &owned
                    }
                };
                let mut a = q.clone();
                for (i, wi) in w.iter().enumerate() {
                    a[(i, i)] += wi;
                }
                Ok(Self::Dense { llt: dense::cholesky(a.as_ref())? })
            }
            Backend::Iterative => {
                let system = cfg.system()?;
                let rank = cfg.rank_for(factor.n());
                let precond =
                    Preconditioner::build(cfg.preconditioner, factor, w, prior.lowrank.as_ref(), rank)?;
                if system == System::Covariance {
                    if let Some(i) = w.iter().position(|&v| !(v > 0.0)) {
                        return Err(Error::Capability(alloc::format!(
                            "the covariance split needs W > 0, but W[{i}] = {:e}; use the precision split",
                            w[i]
                        )));
                    }
                }
                Ok(Self::Iterative {
                    factor,
                    w: w.to_vec(),
                    system,
                    precond,
                    max_iter: cfg.cg_max_iter,
                    criterion: cfg.cg_criterion,
                })
            }
        }
    }

    pub(crate) fn precond(&self) -> Option<&Preconditioner> {
        match self {
            Self::Iterative { precond, .. } => Some(precond),
            Self::Dense { .. } => None,
        }
    }

    pub(crate) fn system(&self) -> System {
        match self {
            Self::Iterative { system, .. } => *system,
            Self::Dense { .. } => System::Precision,
        }
    }

    fn criterion(&self) -> CgCriterion {
        match self {
            Self::Iterative { criterion, .. } => *criterion,
            Self::Dense { .. } => CgCriterion::Absolute,
        }
    }

    /// Runs PCG on the configured split with right-hand side `rhs` (no back-transform).
    pub(crate) fn pcg_split(&self, rhs: &[f64], tol: f64, capture: bool) -> Result<PcgResult> {
        self.pcg_split_with(rhs, tol, capture, self.criterion())
    }

    fn pcg_split_with(&self, rhs: &[f64], tol: f64, capture: bool, criterion: CgCriterion) -> Result<PcgResult> {
        match self {
            Self::Iterative { factor, w, system, precond, max_iter, .. } => {
                let op = SystemOperator { factor, w, system: *system };
                let opts = PcgOptions { tol, max_iter: *max_iter, capture_tridiag: capture, criterion };
                pcg_solve(&op, rhs, precond, &opts)
            }
            Self::Dense { .. } => Err(Error::Capability("PCG needs the iterative backend".into())),
        }
    }

    /// `(W + Sigma~^{-1})^{-1} rhs` with the configured stopping rule.
    pub(crate) fn solve(&self, rhs: &[f64], tol: f64) -> Result<(Vec<f64>, usize)> {
        self.solve_with(rhs, tol, self.criterion())
    }

    /// As [`Self::solve`] but with a relative residual rule, for Newton-type corrections
    /// whose right-hand side shrinks towards zero.
    pub(crate) fn solve_relative(&self, rhs: &[f64], tol: f64) -> Result<(Vec<f64>, usize)> {
        self.solve_with(rhs, tol, CgCriterion::Relative)
    }

    fn solve_with(&self, rhs: &[f64], tol: f64, criterion: CgCriterion) -> Result<(Vec<f64>, usize)> {
        match self {
            Self::Dense { llt } => Ok((dense::llt_solve_vec(llt, rhs), 0)),
            Self::Iterative { factor, w, system, .. } => match system {
                System::Precision => {
                    let r = self.pcg_split_with(rhs, tol, false, criterion)?;
                    Ok((r.solution, r.iterations))
                }
                System::Covariance => {
                    let st = factor.apply_sigma_tilde(rhs)?;
                    let r = self.pcg_split_with(&st, tol, false, criterion)?;
                    let u = r.solution.iter().zip(w.iter()).map(|(u, wi)| u / wi).collect();
                    Ok((u, r.iterations))
                }
            },
        }
    }
}

/// `(W + Sigma~^{-1})^{-1} rhs` with the configured backend.
pub fn solve_latent_system(prior: &Prior, w: &[f64], rhs: &[f64], cfg: &BackendConfig) -> Result<Vec<f64>> {
    check_len(prior.n(), rhs.len())?;
    let solver = LatentSolver::new(prior, w, cfg, None)?;
    Ok(solver.solve(rhs, cfg.cg_tol)?.0)
}

/// Damped Newton iteration for the posterior mode `b*` of the latent field given the
/// fixed effects `fixed = F` (ordered coordinates). `init` warm-starts the iteration.
pub fn find_mode(
    prior: &Prior,
    lik: &Likelihood,
    y: &[f64],
    fixed: &[f64],
    cfg: &BackendConfig,
    newton: &NewtonConfig,
    init: Option<&[f64]>,
) -> Result<LaplaceState> {
    let factor = &prior.factor;
    let n = factor.n();
    check_len(n, y.len())?;
    check_len(n, fixed.len())?;
    lik.validate(y)?;
    cfg.validate()?;
    let q_dense = (cfg.backend == Backend::Cholesky).then(|| factor.precision_dense());
    let tol = cfg.cg_tol.min(newton.cg_tol_cap);

    let mut b = match init {
        Some(v) => {
            check_len(n, v.len())?;
            v.to_vec()
        }
        None => alloc::vec![0.0; n],
    };
    let mut qb = factor.apply_precision(&b)?;
    let mut psi = objective_with(lik, y, fixed, &b, &qb);
    if !psi.is_finite() {
        return Err(Error::InvalidData("non-finite objective at the Newton starting point".into()));
    }
    let mut small_change = false;
    let mut iters = 0;
    loop {
        let mu = mu_of(fixed, &b);
        let der = lik.derivs(y, &mu)?;
        let w = der.w();
        let grad: Vec<f64> = der.d1.iter().zip(&qb).map(|(d, q)| d - q).collect();
        let gnorm = max_abs(&grad);
        let state = |converged: bool, iters: usize| LaplaceState {
            mode: b.clone(),
            mu: mu.clone(),
            w: w.clone(),
            newton_iters: iters,
            objective: psi,
            grad_norm: gnorm,
            converged,
        };
        if gnorm < newton.grad_tol && (small_change || gnorm == 0.0) {
            return Ok(state(true, iters));
        }
        if iters >= newton.max_iter {
            return Err(Error::NewtonConvergence(Box::new(state(false, iters))));
        }
        let solver = LatentSolver::new(prior, &w, cfg, q_dense.as_ref())?;
        let (delta, _) = solver.solve_relative(&grad, tol)?;
        iters += 1;

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=newton.max_halvings {
            let cand: Vec<f64> = b.iter().zip(&delta).map(|(x, d)| x + step * d).collect();
            let cand_qb = factor.apply_precision(&cand)?;
            let cand_psi = objective_with(lik, y, fixed, &cand, &cand_qb);
            if cand_psi.is_finite() && cand_psi <= psi + 1e-12 * (1.0 + psi.abs()) {
                accepted = Some((cand, cand_qb, cand_psi));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((cand, cand_qb, cand_psi)) => {
                small_change = (psi - cand_psi).abs() < newton.rel_tol * (1.0 + cand_psi.abs());
                b = cand;
                qb = cand_qb;
                psi = cand_psi;
            }
            None => {
                // no descent along the Newton direction: only acceptable at the mode
                if gnorm < newton.grad_tol {
                    return Ok(state(true, iters));
                }
                return Err(Error::NewtonConvergence(Box::new(state(false, iters))));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{CovarianceSpec, Locations, Smoothness};
    use crate::laplace::Prior;
    use crate::precond::PreconditionerKind;
    use crate::vecchia::VecchiaStructure;
    use alloc::sync::Arc;

    fn setup(n: usize) -> (Prior, Vec<f64>) {
        let mut rng = crate::rng::stream(3, 0);
        let coords: Vec<f64> = (0..2 * n).map(|_| crate::rng::uniform(&mut rng)).collect();
        let locs = Locations::new(coords, 2).unwrap();
        let structure = Arc::new(VecchiaStructure::new(&locs, 8, 1));
        let spec = CovarianceSpec::new(Smoothness::ThreeHalves, 1.0, 0.2).unwrap();
        let prior = Prior::new(&structure, &spec, &BackendConfig::cholesky(), false).unwrap();
        let y: Vec<f64> = (0..n).map(|i| ((i * 7) % 3 == 0) as u8 as f64).collect();
        (prior, y)
    }

    #[test]
    fn mode_satisfies_stationarity() {
        let (prior, y) = setup(120);
        let lik = Likelihood::BernoulliLogit;
        let fixed = alloc::vec![0.3; 120];
        let st = find_mode(&prior, &lik, &y, &fixed, &BackendConfig::cholesky(), &NewtonConfig::default(), None)
            .unwrap();
        assert!(st.converged);
        let der = lik.derivs(&y, &st.mu).unwrap();
        let qb = prior.factor.apply_precision(&st.mode).unwrap();
        let res: Vec<f64> = der.d1.iter().zip(&qb).map(|(a, b)| a - b).collect();
        assert!(max_abs(&res) < 1e-6);
    }

    #[test]
    fn iterative_mode_matches_cholesky() {
        let (prior, y) = setup(150);
        let lik = Likelihood::BernoulliProbit;
        let fixed = alloc::vec![0.0; 150];
        let exact = find_mode(&prior, &lik, &y, &fixed, &BackendConfig::cholesky(), &NewtonConfig::default(), None)
            .unwrap();
        for kind in [PreconditionerKind::Vadu, PreconditionerKind::Identity, PreconditionerKind::Diagonal] {
            let cfg = BackendConfig::iterative(kind);
            let it = find_mode(&prior, &lik, &y, &fixed, &cfg, &NewtonConfig::default(), None).unwrap();
            let diff = it.mode.iter().zip(&exact.mode).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-5, "{kind:?}: {diff}");
        }
    }

    #[test]
    fn warm_start_at_mode_is_cheap() {
        let (prior, y) = setup(80);
        let lik = Likelihood::BernoulliLogit;
        let fixed = alloc::vec![0.0; 80];
        let cfg = BackendConfig::cholesky();
        let st = find_mode(&prior, &lik, &y, &fixed, &cfg, &NewtonConfig::default(), None).unwrap();
        let again = find_mode(&prior, &lik, &y, &fixed, &cfg, &NewtonConfig::default(), Some(&st.mode)).unwrap();
        assert!(again.newton_iters <= 1);
    }

    #[test]
    fn iteration_cap_reports_state() {
        let (prior, y) = setup(60);
        let lik = Likelihood::BernoulliLogit;
        let fixed = alloc::vec![0.0; 60];
        let newton = NewtonConfig { max_iter: 0, ..NewtonConfig::default() };
        match find_mode(&prior, &lik, &y, &fixed, &BackendConfig::cholesky(), &newton, None) {
            Err(Error::NewtonConvergence(s)) => assert_eq!(s.mode.len(), 60),
            other => panic!("unexpected {other:?}"),
        }
    }
}
