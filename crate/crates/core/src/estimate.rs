//! Marginal-likelihood maximization with Nesterov-accelerated gradient descent on
//! log-transformed parameters and a fixed probe set (sample average approximation).

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::covariance::{distance, CovarianceSpec, Locations, Smoothness};
use crate::error::{check_len, Error, Result};
use crate::laplace::{
    find_mode, gradient, neg_marginal_loglik, BackendConfig, Design, LaplaceState, NewtonConfig, Prior,
};
use crate::likelihood::Likelihood;
use crate::math::{exp, ln};
use crate::vecchia::{nearest_in, VecchiaStructure};

/// Which parameter groups are optimized; the others stay at their initial values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ParamGroups {
    pub variance: bool,
    pub range: bool,
    pub beta: bool,
    pub aux: bool,
}

impl Default for ParamGroups {
    fn default() -> Self {
        Self { variance: true, range: true, beta: true, aux: true }
    }
}

/// Starting values; `None` uses the data-driven defaults.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct InitialValues {
    pub variance: Option<f64>,
    pub range: Option<f64>,
    pub beta: Option<Vec<f64>>,
    pub aux: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct FitConfig {
    pub smoothness: Smoothness,
    /// Number of Vecchia neighbors.
    pub m: usize,
    pub ordering_seed: u64,
    pub backend: BackendConfig,
    pub newton: NewtonConfig,
    pub max_iter: usize,
    /// Initial step size in log-parameter space; gradients are divided by the sup-norm
    /// of the starting gradient (floored at `grad_tol`).
    pub learning_rate: f64,
    pub momentum: f64,
    pub lr_growth: f64,
    pub max_backtracks: usize,
    /// Stop when the sup-norm of the log-scale gradient falls below this.
    pub grad_tol: f64,
    /// Stop after three consecutive accepted steps with relative objective change below this.
    pub rel_tol: f64,
    pub optimize: ParamGroups,
    pub init: InitialValues,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            smoothness: Smoothness::ThreeHalves,
            m: 20,
            ordering_seed: 0,
            backend: BackendConfig::default(),
            newton: NewtonConfig::default(),
            max_iter: 500,
            learning_rate: 0.1,
            momentum: 0.5,
            lr_growth: 1.1,
            max_backtracks: 10,
            grad_tol: 1e-3,
            rel_tol: 1e-6,
            optimize: ParamGroups::default(),
            init: InitialValues::default(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        self.backend.validate()?;
        if self.m == 0 {
            return Err(Error::InvalidParameter("m must be at least 1".into()));
        }
        for (name, v) in [("learning_rate", self.learning_rate), ("grad_tol", self.grad_tol), ("rel_tol", self.rel_tol)] {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(alloc::format!("{name} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidParameter("momentum must lie in [0, 1)".into()));
        }
        if !(self.lr_growth >= 1.0) {
            return Err(Error::InvalidParameter("lr_growth must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceEntry {
    pub iteration: usize,
    pub objective: f64,
    /// Sup-norm of the log-scale gradient.
    pub grad_norm: f64,
    pub learning_rate: f64,
    /// `[sigma^2, rho, beta..., aux...]` on the natural scale.
    pub params: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub spec: CovarianceSpec,
    pub beta: Vec<f64>,
    pub likelihood: Likelihood,
    /// Objective at the estimates from a cold-started mode search.
    pub objective: f64,
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
    pub message: String,
    pub iterations: usize,
    pub evaluations: usize,
    /// Seconds; zero without the `std` feature.
    pub wall_time: f64,
    /// Mode at the estimates (ordered coordinates).
    pub state: LaplaceState,
    pub structure: Arc<VecchiaStructure>,
}

/// Data in the Vecchia ordering plus the fixed parts of the model.
pub struct Problem {
    pub structure: Arc<VecchiaStructure>,
    pub y: Vec<f64>,
    pub x: Design,
    pub lik: Likelihood,
    pub smoothness: Smoothness,
}

impl Problem {
    /// Orders the data with a random ordering of the locations.
    pub fn new(
        y: &[f64],
        x: &Design,
        locs: &Locations,
        lik: &Likelihood,
        smoothness: Smoothness,
        m: usize,
        ordering_seed: u64,
    ) -> Result<Self> {
        let n = locs.len();
        check_len(n, y.len())?;
        check_len(n, x.nrows())?;
        if n == 0 {
            return Err(Error::InvalidData("no observations".into()));
        }
        lik.validate(y)?;
        locs.check_distinct(1e-12)?;
        let structure = Arc::new(VecchiaStructure::new(locs, m, ordering_seed));
        Ok(Self::from_structure(structure, y, x, lik, smoothness))
    }

    pub fn from_structure(
        structure: Arc<VecchiaStructure>,
        y: &[f64],
        x: &Design,
        lik: &Likelihood,
        smoothness: Smoothness,
    ) -> Self {
        let y = structure.to_ordered(y);
        let x = x.permuted(structure.perm());
        Self { structure, y, x, lik: lik.clone(), smoothness }
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    fn num_params(&self) -> usize {
        2 + self.x.ncols() + self.lik.num_aux()
    }

    /// Natural-scale parameters from the log-scale vector.
    fn unpack(&self, phi: &[f64]) -> Result<(CovarianceSpec, Vec<f64>, Likelihood)> {
        let p = self.x.ncols();
        let spec = CovarianceSpec::new(self.smoothness, exp(phi[0]), exp(phi[1]))?;
        let beta = phi[2..2 + p].to_vec();
        let aux: Vec<f64> = phi[2 + p..].iter().map(|&v| exp(v)).collect();
        let lik = self.lik.with_aux(&aux)?;
        Ok((spec, beta, lik))
    }

    fn natural(&self, phi: &[f64]) -> Vec<f64> {
        let p = self.x.ncols();
        phi.iter().enumerate().map(|(i, &v)| if i < 2 || i >= 2 + p { exp(v) } else { v }).collect()
    }

    fn pack(&self, spec: &CovarianceSpec, beta: &[f64], lik: &Likelihood) -> Vec<f64> {
        let mut phi = alloc::vec![ln(spec.variance()), ln(spec.range())];
        phi.extend_from_slice(beta);
        phi.extend(lik.aux().iter().map(|&v| ln(v)));
        phi
    }

    /// Objective (and, with `with_grad`, the log-scale gradient) at natural parameters.
    pub fn evaluate(
        &self,
        spec: &CovarianceSpec,
        beta: &[f64],
        lik: &Likelihood,
        cfg: &BackendConfig,
        newton: &NewtonConfig,
        warm: Option<&[f64]>,
        with_grad: bool,
    ) -> Result<(f64, Option<Vec<f64>>, LaplaceState)> {
        let prior = Prior::new(&self.structure, spec, cfg, with_grad)?;
        let fixed = self.x.mul(beta)?;
        let state = find_mode(&prior, lik, &self.y, &fixed, cfg, newton, warm)?;
        let ev = neg_marginal_loglik(&prior, lik, &self.y, &state, cfg)?;
        let grad = if with_grad {
            let g = gradient(&prior, lik, &self.y, Some(&self.x), &state, &ev, cfg)?;
            let mut out = alloc::vec![g.cov[0] * spec.variance(), g.cov[1] * spec.range()];
            out.extend_from_slice(&g.beta);
            for (gi, a) in g.aux.iter().zip(lik.aux()) {
                out.push(gi * a);
            }
            Some(out)
        } else {
            None
        };
        if !ev.value.is_finite() {
            return Err(Error::Estimation("non-finite objective".into()));
        }
        Ok((ev.value, grad, state))
    }

    /// Data-driven starting values, overridden by `init`.
    pub fn initial_values(&self, init: &InitialValues, newton: &NewtonConfig) -> Result<(CovarianceSpec, Vec<f64>, Likelihood)> {
        let p = self.x.ncols();
        let beta = match &init.beta {
            Some(b) => {
                check_len(p, b.len())?;
                b.clone()
            }
            None => glm_fit(&self.lik, &self.y, &self.x, newton.max_iter)?,
        };
        let fixed = self.x.mul(&beta)?;
        let lik = match (&init.aux, &self.lik) {
            (Some(a), l) => l.with_aux(a)?,
            (None, Likelihood::Gamma { .. }) => {
                // method of moments on y / exp(X beta)
                let r: Vec<f64> = self.y.iter().zip(&fixed).map(|(y, f)| y / exp(*f)).collect();
                let m = crate::math::mean(&r);
                let v = crate::math::sample_variance(&r);
                let shape = if v > 0.0 { (m * m / v).clamp(0.1, 1e3) } else { 1.0 };
                Likelihood::Gamma { shape }
            }
            (None, l) => l.clone(),
        };
        let variance = match init.variance {
            Some(v) => v,
            None => {
                let der = lik.derivs(&self.y, &fixed)?;
                let w = der.w();
                let e: Vec<f64> = der.d1.iter().zip(&w).map(|(d, wi)| d / wi.max(1e-12)).collect();
                let inv_w = crate::math::mean(&w.iter().map(|wi| 1.0 / wi.max(1e-12)).collect::<Vec<_>>());
                let mom = crate::math::sample_variance(&e) - inv_w;
                if mom.is_finite() { mom.max(0.1) } else { 1.0 }
            }
        };
        let range = match init.range {
            Some(r) => r,
            None => 5.0 * mean_nn_distance(self.structure.locations()),
        };
        Ok((CovarianceSpec::new(self.smoothness, variance, range)?, beta, lik))
    }
}

fn mean_nn_distance(locs: &Locations) -> f64 {
    let n = locs.len();
    if n < 2 {
        return 1.0;
    }
    let (nb, _) = nearest_in(locs, locs, 2);
    let mut s = 0.0;
    for i in 0..n {
        let d = nb
            .of(i)
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| distance(locs.point(i), locs.point(j)))
            .fold(f64::INFINITY, f64::min);
        s += d;
    }
    s / n as f64
}

/// Maximum-likelihood fixed effects ignoring the latent field (damped Newton).
pub fn glm_fit(lik: &Likelihood, y: &[f64], x: &Design, max_iter: usize) -> Result<Vec<f64>> {
    let p = x.ncols();
    let n = x.nrows();
    check_len(n, y.len())?;
    let mut beta = alloc::vec![0.0; p];
    if p == 0 {
        return Ok(beta);
    }
    let obj = |b: &[f64]| -> Result<f64> { Ok(-lik.log_density_sum(y, &x.mul(b)?)) };
    let mut f = obj(&beta)?;
    for _ in 0..max_iter {
        let mu = x.mul(&beta)?;
        let der = lik.derivs(y, &mu)?;
        let w = der.w();
        let g = x.t_mul(&der.d1)?;
        if crate::math::max_abs(&g) < 1e-8 * n as f64 {
            break;
        }
        let mut h = alloc::vec![0.0; p * p];
        for i in 0..n {
            let r = x.row(i);
            for a in 0..p {
                for b in 0..=a {
                    h[a * p + b] += w[i] * r[a] * r[b];
                }
            }
        }
        for a in 0..p {
            h[a * p + a] += 1e-10 * n as f64;
        }
        let chol = crate::dense::SmallChol::factor(h, p)
            .ok_or_else(|| Error::Estimation("singular covariate matrix in the GLM start".into()))?;
        let mut step = g.clone();
        chol.solve_in_place(&mut step);
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
            let fc = obj(&cand)?;
            if fc.is_finite() && fc <= f {
                beta = cand;
                improved = (f - fc) > 1e-12 * (1.0 + f.abs());
                f = fc;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(beta)
}

#[cfg(feature = "std")]
struct Clock(std::time::Instant);
#[cfg(feature = "std")]
impl Clock {
    fn start() -> Self {
        Self(std::time::Instant::now())
    }
    fn secs(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}
#[cfg(not(feature = "std"))]
struct Clock;
#[cfg(not(feature = "std"))]
impl Clock {
    fn start() -> Self {
        Self
    }
    fn secs(&self) -> f64 {
        0.0
    }
}

/// Fits covariance parameters, fixed effects and auxiliary parameters.
pub fn fit(
    y: &[f64],
    x: &Design,
    locs: &Locations,
    lik: &Likelihood,
    cfg: &FitConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    let problem = Problem::new(y, x, locs, lik, cfg.smoothness, cfg.m, cfg.ordering_seed)?;
    fit_problem(&problem, cfg)
}

/// Runs the optimizer on an already ordered problem.
pub fn fit_problem(problem: &Problem, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    let clock = Clock::start();
    let (spec0, beta0, lik0) = problem.initial_values(&cfg.init, &cfg.newton)?;
    let np = problem.num_params();
    let p = problem.x.ncols();
    let free: Vec<bool> = (0..np)
        .map(|i| match i {
            0 => cfg.optimize.variance,
            1 => cfg.optimize.range,
            i if i < 2 + p => cfg.optimize.beta,
            _ => cfg.optimize.aux,
        })
        .collect();
    let mut evaluations = 0usize;
    let eval = |phi: &[f64], warm: Option<&[f64]>, with_grad: bool, evals: &mut usize| {
        *evals += 1;
        let (spec, beta, lik) = problem.unpack(phi)?;
        let (f, g, st) = problem.evaluate(&spec, &beta, &lik, &cfg.backend, &cfg.newton, warm, with_grad)?;
        let g = g.map(|g| g.iter().zip(&free).map(|(v, &fr)| if fr { *v } else { 0.0 }).collect::<Vec<_>>());
        Ok::<_, Error>((f, g, st))
    };

    let mut phi = problem.pack(&spec0, &beta0, &lik0);
    let (mut f, g0, mut state) = eval(&phi, None, true, &mut evaluations)
        .map_err(|e| Error::Estimation(alloc::format!("objective failed at the starting values: {e}")))?;
    let sup = |v: &[f64]| crate::math::max_abs(v);
    let g0 = g0.expect("gradient requested");
    let mut trace = alloc::vec![TraceEntry {
        iteration: 0,
        objective: f,
        grad_norm: sup(&g0),
        learning_rate: cfg.learning_rate,
        params: problem.natural(&phi),
    }];
    // steps are lr * g / scale, so the first one moves the log-parameters by at most lr
    let scale = sup(&g0).max(cfg.grad_tol);
    // gradient at phi, when known
    let mut grad_phi = Some(g0);
    let mut lr = cfg.learning_rate;
    let mut velocity = alloc::vec![0.0; np];
    let mut small_steps = 0usize;
    let mut converged = false;
    let mut message = String::from("iteration limit reached");
    let mut iterations = 0;
    'outer: while iterations < cfg.max_iter {
        // Nesterov: gradient at the look-ahead point phi + momentum * velocity
        let moving = velocity.iter().any(|&v| v != 0.0);
        let (mut look, mut look_grad, mut look_mode) = if moving {
            let look: Vec<f64> = (0..np).map(|i| phi[i] + cfg.momentum * velocity[i]).collect();
            match eval(&look, Some(&state.mode), true, &mut evaluations) {
                Ok((_, g, st)) => (look, g.expect("gradient requested"), st.mode),
                Err(_) => {
                    velocity.iter_mut().for_each(|v| *v = 0.0);
                    let g = phi_gradient(&eval, &phi, &state, &mut grad_phi, &mut evaluations)?;
                    (phi.clone(), g, state.mode.clone())
                }
            }
        } else {
            let g = phi_gradient(&eval, &phi, &state, &mut grad_phi, &mut evaluations)?;
            (phi.clone(), g, state.mode.clone())
        };
        if sup(&look_grad) < cfg.grad_tol {
            if moving {
                // small at the look-ahead point: confirm at phi itself
                velocity.iter_mut().for_each(|v| *v = 0.0);
                look_grad = phi_gradient(&eval, &phi, &state, &mut grad_phi, &mut evaluations)?;
                look = phi.clone();
                look_mode = state.mode.clone();
            }
            if sup(&look_grad) < cfg.grad_tol {
                converged = true;
                message = String::from("gradient tolerance reached");
                break;
            }
        }
        let mut backtracks = 0;
        loop {
            let cand: Vec<f64> = (0..np).map(|i| if free[i] { look[i] - lr * look_grad[i] / scale } else { phi[i] }).collect();
            match eval(&cand, Some(&look_mode), false, &mut evaluations) {
                Ok((fc, _, st)) if fc <= f => {
                    let rel = (f - fc).abs() / f.abs().max(1e-300);
                    small_steps = if rel < cfg.rel_tol { small_steps + 1 } else { 0 };
                    velocity = (0..np).map(|i| cand[i] - phi[i]).collect();
                    phi = cand;
                    f = fc;
                    state = st;
                    grad_phi = None;
                    lr *= cfg.lr_growth;
                    break;
                }
                _ => {
                    backtracks += 1;
                    lr *= 0.5;
                    if backtracks > cfg.max_backtracks {
                        // no decrease along the steepest direction: stationary up to the
                        // resolution of the stochastic objective
                        converged = iterations > 0;
                        message = String::from(if converged {
                            "line search exhausted at the objective's resolution"
                        } else {
                            "no descent step found from the starting values"
                        });
                        break 'outer;
                    }
                    if velocity.iter().any(|&v| v != 0.0) {
                        // momentum reset: step from phi along its own gradient
                        velocity.iter_mut().for_each(|v| *v = 0.0);
                        look_grad = phi_gradient(&eval, &phi, &state, &mut grad_phi, &mut evaluations)?;
                        look = phi.clone();
                        look_mode = state.mode.clone();
                    }
                }
            }
        }
        iterations += 1;
        trace.push(TraceEntry {
            iteration: iterations,
            objective: f,
            grad_norm: sup(&look_grad),
            learning_rate: lr,
            params: problem.natural(&phi),
        });
        if small_steps >= 3 {
            converged = true;
            message = String::from("relative objective change below tolerance");
            break;
        }
    }

    // cold start so that re-evaluating the returned model reproduces the objective
    let (spec, beta, lik) = problem.unpack(&phi)?;
    let (f_cold, _, state_cold) =
        problem.evaluate(&spec, &beta, &lik, &cfg.backend, &cfg.newton, None, false)?;
    evaluations += 1;
    if let Some(last) = trace.last_mut() {
        last.objective = f_cold;
    }
    Ok(FitResult {
        spec,
        beta,
        likelihood: lik,
        objective: f_cold,
        trace,
        converged,
        message,
        iterations,
        evaluations,
        wall_time: clock.secs(),
        state: state_cold,
        structure: problem.structure.clone(),
    })
}

type EvalOut = (f64, Option<Vec<f64>>, LaplaceState);

fn phi_gradient<E>(
    eval: &E,
    phi: &[f64],
    state: &LaplaceState,
    cache: &mut Option<Vec<f64>>,
    evals: &mut usize,
) -> Result<Vec<f64>>
where
    E: Fn(&[f64], Option<&[f64]>, bool, &mut usize) -> Result<EvalOut>,
{
    if let Some(g) = cache {
        return Ok(g.clone());
    }
    let (_, g, _) = eval(phi, Some(&state.mode), true, evals)?;
    let g = g.expect("gradient requested");
    *cache = Some(g.clone());
    Ok(g)
}

/// Fits on a uniform random sub-sample of `subsample` observations (all of them when
/// `subsample == n`), e.g. to estimate auxiliary parameters before a full-data fit.
pub fn profile_xi(
    y: &[f64],
    x: &Design,
    locs: &Locations,
    lik: &Likelihood,
    cfg: &FitConfig,
    subsample: usize,
    seed: u64,
) -> Result<FitResult> {
    let n = locs.len();
    if subsample > n || subsample == 0 {
        return Err(Error::InvalidParameter(alloc::format!("sub-sample size {subsample} not in 1..={n}")));
    }
    if subsample == n {
        return fit(y, x, locs, lik, cfg);
    }
    let idx = subsample_indices(n, subsample, seed);
    let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let xs = x.permuted(&idx);
    fit(&ys, &xs, &locs.subset(&idx), lik, cfg)
}

const SUBSAMPLE_STREAM: u64 = 0x5ab5;

/// Sorted indices of a uniform sample without replacement.
pub fn subsample_indices(n: usize, k: usize, seed: u64) -> Vec<usize> {
    use rand::seq::index;
    let mut r = crate::rng::stream(seed, SUBSAMPLE_STREAM);
    let mut idx = index::sample(&mut r, n, k).into_vec();
    idx.sort_unstable();
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{simulate, SimulationConfig};

    fn data(n: usize, seed: u64, lik: Likelihood) -> (Locations, Vec<f64>) {
        let cfg = SimulationConfig { n, seed, likelihood: lik, ..SimulationConfig::default() };
        let sim = simulate(&cfg).unwrap();
        (sim.locations, sim.y)
    }

    #[test]
    fn zero_iterations_echo_the_start() {
        let (locs, y) = data(150, 1, Likelihood::BernoulliLogit);
        let x = Design::empty(150);
        let init = InitialValues { variance: Some(1.0), range: Some(0.1), ..Default::default() };
        let cfg = FitConfig { max_iter: 0, init, backend: BackendConfig::cholesky(), ..FitConfig::default() };
        let r = fit(&y, &x, &locs, &Likelihood::BernoulliLogit, &cfg).unwrap();
        let p = r.spec.params();
        assert!((p[0] - 1.0).abs() < 1e-12 && (p[1] - 0.1).abs() < 1e-12);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.trace.len(), 1);
        assert_eq!(r.trace[0].objective, r.objective);
    }

    #[test]
    fn fit_reduces_objective_and_is_deterministic() {
        let (locs, y) = data(300, 2, Likelihood::Gamma { shape: 3.0 });
        let x = Design::intercept(300);
        let cfg = FitConfig { max_iter: 15, ..FitConfig::default() };
        let lik = Likelihood::Gamma { shape: 1.0 };
        let a = fit(&y, &x, &locs, &lik, &cfg).unwrap();
        let b = fit(&y, &x, &locs, &lik, &cfg).unwrap();
        assert_eq!(a.trace, b.trace);
        assert!(a.trace.last().unwrap().objective < a.trace[0].objective);
        for w in a.trace.windows(2) {
            assert!(w[1].objective <= w[0].objective + 1e-6 * w[0].objective.abs());
        }
    }

    #[test]
    fn glm_intercept_matches_closed_form() {
        let y = [1.0, 0.0, 1.0, 1.0];
        let b = glm_fit(&Likelihood::BernoulliLogit, &y, &Design::intercept(4), 50).unwrap();
        assert!((b[0] - ln(3.0)).abs() < 1e-8);
    }

    #[test]
    fn subsample_is_seeded_and_sorted() {
        let a = subsample_indices(100, 10, 3);
        assert_eq!(a, subsample_indices(100, 10, 3));
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(subsample_indices(5, 5, 1), vec![0, 1, 2, 3, 4]);
    }
}
