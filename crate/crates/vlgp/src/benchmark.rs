//! Desk-scale benchmark suites. Each emits one row per (method, replicate) and a
//! summary row per method with the mean and sample variance over replicates.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use vlgp_core::covariance::{CovarianceSpec, Locations};
use vlgp_core::estimate::{fit, Problem};
use vlgp_core::laplace::{find_mode, Backend, neg_marginal_loglik, BackendConfig, Design, LaplaceState, NewtonConfig, Prior};
use vlgp_core::math::{mean, sample_variance};
use vlgp_core::predict::{latent_var_exact, latent_var_lanczos, latent_var_sim};
use vlgp_core::rng;
use vlgp_core::simulate::{simulate, SimulatedData, SimulationConfig};
use vlgp_core::vecchia::{prediction_blocks, VecchiaStructure};

use crate::config::BenchmarkConfig;
use crate::data::fmt_f64;
use crate::error::{io_err, CliError, CliResult};

const PRED_LOCATION_STREAM: u64 = 0xbe_0001;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Preconditioners,
    LikelihoodAccuracy,
    Predvar,
    Estimation,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Self::Preconditioners, Self::LikelihoodAccuracy, Self::Predvar, Self::Estimation];

    pub fn name(self) -> &'static str {
        match self {
            Self::Preconditioners => "preconditioners",
            Self::LikelihoodAccuracy => "likelihood-accuracy",
            Self::Predvar => "predvar",
            Self::Estimation => "estimation",
        }
    }
}

impl FromStr for Suite {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Self::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|x| x.name()).collect();
            CliError::config(format!("unknown suite '{s}' (expected one of {})", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub method: String,
    /// `None` marks the summary row.
    pub replicate: Option<usize>,
    pub metric: String,
    pub value: f64,
    pub variance: Option<f64>,
    pub wall_time: f64,
}

pub const HEADER: &str = "suite,method,replicate,metric,value,variance,wall_time";

pub fn write_rows<W: Write>(w: &mut W, suite: Suite, rows: &[Row]) -> std::io::Result<()> {
    writeln!(w, "{HEADER}")?;
    for r in rows {
        let rep = r.replicate.map_or_else(|| "summary".to_string(), |k| k.to_string());
        let var = r.variance.map_or_else(String::new, fmt_f64);
        writeln!(
            w,
            "{},{},{rep},{},{},{var},{}",
            suite.name(),
            r.method,
            r.metric,
            fmt_f64(r.value),
            fmt_f64(r.wall_time)
        )?;
    }
    Ok(())
}

pub fn write_csv(path: &Path, suite: Suite, rows: &[Row]) -> CliResult<()> {
    let mut buf = Vec::new();
    write_rows(&mut buf, suite, rows).map_err(io_err(path))?;
    std::fs::write(path, buf).map_err(io_err(path))
}

/// Replicate rows for one (method, metric) followed by their summary.
fn group(method: &str, metric: &str, values: &[(f64, f64)], out: &mut Vec<Row>) {
    if values.is_empty() {
        return;
    }
    for (k, &(v, t)) in values.iter().enumerate() {
        out.push(Row {
            method: method.into(),
            replicate: Some(k),
            metric: metric.into(),
            value: v,
            variance: None,
            wall_time: t,
        });
    }
    let v: Vec<f64> = values.iter().map(|p| p.0).collect();
    out.push(Row {
        method: method.into(),
        replicate: None,
        metric: metric.into(),
        value: mean(&v),
        variance: Some(if v.len() > 1 { sample_variance(&v) } else { 0.0 }),
        wall_time: values.iter().map(|p| p.1).sum(),
    });
}

fn timed<T>(f: impl FnOnce() -> CliResult<T>) -> CliResult<(T, f64)> {
    let t = Instant::now();
    let v = f()?;
    Ok((v, t.elapsed().as_secs_f64()))
}

fn sim(cfg: &BenchmarkConfig, seed: u64) -> CliResult<SimulatedData> {
    Ok(simulate(&SimulationConfig {
        n: cfg.n,
        seed,
        smoothness: cfg.fit.smoothness,
        variance: cfg.variance,
        range: cfg.range,
        likelihood: cfg.likelihood,
        ..SimulationConfig::default()
    })?)
}

fn truth_spec(cfg: &BenchmarkConfig) -> CliResult<CovarianceSpec> {
    Ok(CovarianceSpec::new(cfg.fit.smoothness, cfg.variance, cfg.range)?)
}

fn backend(cfg: &BenchmarkConfig, kind: vlgp_core::precond::PreconditionerKind, t: usize, seed: u64) -> BackendConfig {
    BackendConfig {
        backend: Backend::Iterative,
        preconditioner: kind,
        num_probes: t,
        probe_seed: seed,
        rank: cfg.rank,
        logdet_split: None,
        ..cfg.fit.backend.clone()
    }
}

/// Mode at the true parameters from the dense backend.
fn reference_mode(
    s: &Arc<VecchiaStructure>,
    y: &[f64],
    spec: &CovarianceSpec,
    cfg: &BenchmarkConfig,
) -> CliResult<(Prior, LaplaceState)> {
    let chol = BackendConfig::cholesky();
    let prior = Prior::new(s, spec, &chol, false)?;
    let newton = NewtonConfig { grad_tol: 1e-10, ..cfg.fit.newton };
    let fixed = vec![0.0; y.len()];
    let state = find_mode(&prior, &cfg.likelihood, y, &fixed, &chol, &newton, None)?;
    Ok((prior, state))
}

pub fn run(suite: Suite, cfg: &BenchmarkConfig) -> CliResult<Vec<Row>> {
    if cfg.replicates == 0 {
        return Ok(Vec::new());
    }
    if cfg.n == 0 || cfg.m == 0 {
        return Err(CliError::config("benchmark n and m must be positive"));
    }
    match suite {
        Suite::Preconditioners => preconditioners(cfg),
        Suite::LikelihoodAccuracy => likelihood_accuracy(cfg),
        Suite::Predvar => predvar(cfg),
        Suite::Estimation => estimation(cfg),
    }
}

/// Spread of the SLQ objective over probe seeds at the true parameters and a fixed mode.
fn preconditioners(cfg: &BenchmarkConfig) -> CliResult<Vec<Row>> {
    let d = sim(cfg, cfg.seed)?;
    let s = Arc::new(VecchiaStructure::new(&d.locations, cfg.m, cfg.seed));
    let y = s.to_ordered(&d.y);
    let spec = truth_spec(cfg)?;
    let (prior0, state) = reference_mode(&s, &y, &spec, cfg)?;
    let mut rows = Vec::new();
    let (ev, t) = timed(|| Ok(neg_marginal_loglik(&prior0, &cfg.likelihood, &y, &state, &BackendConfig::cholesky())?))?;
    group("cholesky", "nll", &[(ev.value, t)], &mut rows);
    for &kind in &cfg.preconditioners {
        for &t in &cfg.probes {
            let proto = backend(cfg, kind, t, 0);
            let prior = Prior::new(&s, &spec, &proto, false)?;
            let vals = (0..cfg.replicates)
                .into_par_iter()
                .map(|r| {
                    let bc = BackendConfig { probe_seed: r as u64, ..proto.clone() };
                    timed(|| Ok(neg_marginal_loglik(&prior, &cfg.likelihood, &y, &state, &bc)?.value))
                })
                .collect::<CliResult<Vec<_>>>()?;
            group(&format!("{}:t={t}", kind.name()), "nll", &vals, &mut rows);
        }
    }
    Ok(rows)
}

/// Relative difference of the iterative objective from the dense one, one data seed
/// per replicate; each backend finds its own mode.
fn likelihood_accuracy(cfg: &BenchmarkConfig) -> CliResult<Vec<Row>> {
    let spec = truth_spec(cfg)?;
    let per_seed = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let seed = cfg.seed + r as u64;
            let d = sim(cfg, seed)?;
            let x = Design::empty(cfg.n);
            let problem = Problem::new(&d.y, &x, &d.locations, &cfg.likelihood, cfg.fit.smoothness, cfg.m, seed)?;
            let newton = cfg.fit.newton;
            let (f0, _, _) = problem.evaluate(&spec, &[], &cfg.likelihood, &BackendConfig::cholesky(), &newton, None, false)?;
            let mut out = Vec::new();
            for &kind in &cfg.preconditioners {
                for &t in &cfg.probes {
                    let bc = backend(cfg, kind, t, r as u64);
                    let (f, wt) = timed(|| Ok(problem.evaluate(&spec, &[], &cfg.likelihood, &bc, &newton, None, false)?.0))?;
                    out.push(((f - f0) / f0.abs(), wt));
                }
            }
            Ok(out)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut k = 0;
    for &kind in &cfg.preconditioners {
        for &t in &cfg.probes {
            let vals: Vec<(f64, f64)> = per_seed.iter().map(|v| v[k]).collect();
            group(&format!("{}:t={t}", kind.name()), "rel_diff", &vals, &mut rows);
            k += 1;
        }
    }
    Ok(rows)
}

pub fn uniform_points(n: usize, dim: usize, seed: u64) -> CliResult<Locations> {
    let mut r = rng::stream(seed, PRED_LOCATION_STREAM);
    Ok(Locations::new((0..n * dim).map(|_| rng::uniform(&mut r)).collect(), dim)?)
}

/// Accuracy of the approximate predictive variances against the dense ones.
fn predvar(cfg: &BenchmarkConfig) -> CliResult<Vec<Row>> {
    let d = sim(cfg, cfg.seed)?;
    let s = Arc::new(VecchiaStructure::new(&d.locations, cfg.m, cfg.seed));
    let y = s.to_ordered(&d.y);
    let spec = truth_spec(cfg)?;
    let (prior, state) = reference_mode(&s, &y, &spec, cfg)?;
    let pred = uniform_points(cfg.n_pred, d.locations.dim(), cfg.seed)?;
    let blocks = prediction_blocks(&s, &pred, &spec, cfg.m)?;
    let (exact, t_exact) = timed(|| Ok(latent_var_exact(&prior, &state, &blocks, false)?.0))?;
    let score = |v: &[f64]| -> (f64, f64) {
        let diff: Vec<f64> = v.iter().zip(&exact).map(|(a, b)| a - b).collect();
        (vlgp_core::math::norm2(&diff) / (diff.len() as f64).sqrt(), mean(&diff))
    };
    let mut rows = Vec::new();
    group("exact", "mean_var", &[(mean(&exact), t_exact)], &mut rows);
    for &variant in &cfg.variants {
        for &k in &cfg.ranks {
            let (v, t) = timed(|| Ok(latent_var_lanczos(&prior, &state, &blocks, k, variant)?.0))?;
            let (e, b) = score(&v);
            let name = format!("lanczos:{}:k={k}", variant.name());
            group(&name, "rmse", &[(e, t)], &mut rows);
            group(&name, "bias", &[(b, t)], &mut rows);
        }
    }
    let it = cfg.fit.backend.clone();
    for &samples in &cfg.samples {
        let vals = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| timed(|| Ok(latent_var_sim(&prior, &state, &blocks, samples, r as u64, &it)?)))
            .collect::<CliResult<Vec<_>>>()?;
        let scored: Vec<((f64, f64), f64)> = vals.iter().map(|(v, t)| (score(v), *t)).collect();
        let name = format!("simulation:s={samples}");
        group(&name, "rmse", &scored.iter().map(|((e, _), t)| (*e, *t)).collect::<Vec<_>>(), &mut rows);
        group(&name, "bias", &scored.iter().map(|((_, b), t)| (*b, *t)).collect::<Vec<_>>(), &mut rows);
    }
    Ok(rows)
}

/// Covariance-parameter estimates over data seeds.
fn estimation(cfg: &BenchmarkConfig) -> CliResult<Vec<Row>> {
    let fc = vlgp_core::estimate::FitConfig { m: cfg.m, ..cfg.fit.clone() };
    let fits = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let seed = cfg.seed + r as u64;
            let d = sim(cfg, seed)?;
            let x = Design::empty(cfg.n);
            let fcr = vlgp_core::estimate::FitConfig { ordering_seed: seed, ..fc.clone() };
            timed(|| Ok(fit(&d.y, &x, &d.locations, &cfg.likelihood, &fcr)?))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let method = match fc.backend.backend {
        Backend::Cholesky => "cholesky".to_string(),
        Backend::Iterative => format!("{}:t={}", fc.backend.preconditioner.name(), fc.backend.num_probes),
    };
    let mut rows = Vec::new();
    let col = |f: &dyn Fn(&vlgp_core::estimate::FitResult) -> f64| -> Vec<(f64, f64)> {
        fits.iter().map(|(r, t)| (f(r), *t)).collect()
    };
    group(&method, "variance", &col(&|r| r.spec.variance()), &mut rows);
    group(&method, "range", &col(&|r| r.spec.range()), &mut rows);
    group(&method, "objective", &col(&|r| r.objective), &mut rows);
    group(&method, "iterations", &col(&|r| r.iterations as f64), &mut rows);
    group(&method, "converged", &col(&|r| r.converged as u8 as f64), &mut rows);
    Ok(rows)
}
