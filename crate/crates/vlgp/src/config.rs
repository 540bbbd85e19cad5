//! JSON run configuration. Unknown keys are rejected everywhere.

use std::path::Path;

use serde::{Deserialize, Serialize};
use vlgp_core::estimate::FitConfig;
use vlgp_core::likelihood::Likelihood;
use vlgp_core::precond::{LanczosVariant, PreconditionerKind};
use vlgp_core::predict::{ResponseMethod, VarianceMethod, DEFAULT_SIM_SAMPLES};
use vlgp_core::simulate::SimulationConfig;

use crate::error::{CliError, CliResult};

/// Environment variable overriding [`RunConfig::threads`].
pub const THREADS_ENV: &str = "VLGP_THREADS";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Worker threads; `None` lets the thread pool decide.
    pub threads: Option<usize>,
    /// Likelihood for `fit`; the gamma shape is only a starting value.
    pub likelihood: LikelihoodConfig,
    /// Add a column of ones to the covariates read from the data file.
    pub intercept: bool,
    pub simulate: SimulationConfig,
    /// Trailing simulated rows written to the prediction file instead of the data file.
    pub holdout: usize,
    pub fit: FitConfig,
    pub predict: PredictConfig,
    pub benchmark: BenchmarkConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LikelihoodConfig {
    BernoulliLogit,
    BernoulliProbit,
    /// `shape: None` estimates a starting value from the data.
    Gamma { shape: Option<f64> },
}

impl Default for LikelihoodConfig {
    fn default() -> Self {
        Self::BernoulliLogit
    }
}

impl LikelihoodConfig {
    /// Likelihood template and optional fixed starting shape.
    pub fn template(&self) -> (Likelihood, Option<f64>) {
        match *self {
            Self::BernoulliLogit => (Likelihood::BernoulliLogit, None),
            Self::BernoulliProbit => (Likelihood::BernoulliProbit, None),
            Self::Gamma { shape } => (Likelihood::Gamma { shape: shape.unwrap_or(1.0) }, shape),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceKind {
    Exact,
    Simulation,
    Lanczos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResponseKind {
    ClosedForm,
    Simulation,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictConfig {
    pub variance: VarianceKind,
    /// Simulation draws `s`.
    pub samples: usize,
    pub seed: u64,
    /// Lanczos rank `k`.
    pub rank: usize,
    pub variant: LanczosVariant,
    /// Conditioning-set size for prediction points; `None` uses the model's `m`.
    pub m: Option<usize>,
    pub response: ResponseKind,
    pub response_samples: usize,
    pub response_seed: u64,
    /// Draws per point for the CRPS.
    pub score_samples: usize,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self {
            variance: VarianceKind::Simulation,
            samples: DEFAULT_SIM_SAMPLES,
            seed: 0,
            rank: 50,
            variant: LanczosVariant::L1,
            m: None,
            response: ResponseKind::Simulation,
            response_samples: DEFAULT_SIM_SAMPLES,
            response_seed: 0,
            score_samples: DEFAULT_SIM_SAMPLES,
        }
    }
}

impl PredictConfig {
    pub fn variance_method(&self) -> VarianceMethod {
        match self.variance {
            VarianceKind::Exact => VarianceMethod::Exact,
            VarianceKind::Simulation => VarianceMethod::Simulation { samples: self.samples, seed: self.seed },
            VarianceKind::Lanczos => VarianceMethod::Lanczos { rank: self.rank, variant: self.variant },
        }
    }

    pub fn response_method(&self) -> Option<ResponseMethod> {
        match self.response {
            ResponseKind::ClosedForm => Some(ResponseMethod::ClosedForm),
            ResponseKind::Simulation => {
                Some(ResponseMethod::Simulation { samples: self.response_samples, seed: self.response_seed })
            }
            ResponseKind::None => None,
        }
    }

    /// Short description recorded in the predictions header.
    pub fn describe(&self) -> String {
        let var = match self.variance {
            VarianceKind::Exact => "exact".to_string(),
            VarianceKind::Simulation => format!("simulation,s={},seed={}", self.samples, self.seed),
            VarianceKind::Lanczos => format!("lanczos,k={},variant={}", self.rank, self.variant.name()),
        };
        let resp = match self.response {
            ResponseKind::ClosedForm => "closed-form".to_string(),
            ResponseKind::Simulation => format!("simulation,s={},seed={}", self.response_samples, self.response_seed),
            ResponseKind::None => "none".to_string(),
        };
        format!("variance={var}; response={resp}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub n: usize,
    pub replicates: usize,
    /// Data simulation seed (the first one for suites that sweep data seeds).
    pub seed: u64,
    pub likelihood: Likelihood,
    pub variance: f64,
    pub range: f64,
    pub m: usize,
    /// Probe counts `t`.
    pub probes: Vec<usize>,
    pub preconditioners: Vec<PreconditionerKind>,
    /// Lanczos ranks for the `predvar` suite.
    pub ranks: Vec<usize>,
    /// Simulation sample sizes for the `predvar` suite.
    pub samples: Vec<usize>,
    pub variants: Vec<LanczosVariant>,
    pub n_pred: usize,
    /// Rank of the low-rank preconditioners; `None` uses the default.
    pub rank: Option<usize>,
    /// Optimizer settings for the `estimation` suite.
    pub fit: FitConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            replicates: 10,
            seed: 0,
            likelihood: Likelihood::BernoulliLogit,
            variance: 1.0,
            range: 0.05,
            m: 20,
            probes: vec![5, 50],
            preconditioners: vec![
                PreconditionerKind::Vadu,
                PreconditionerKind::Lva,
                PreconditionerKind::Lrac,
                PreconditionerKind::Diagonal,
                PreconditionerKind::PivotedCholeskyPrecision,
                PreconditionerKind::RowSelection,
            ],
            ranks: vec![10, 50, 100],
            samples: vec![100, 400],
            variants: vec![LanczosVariant::None, LanczosVariant::L1, LanczosVariant::L2],
            n_pred: 200,
            rank: None,
            fit: FitConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str, name: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| {
            CliError::config(format!("{name}: {e} (line {}, column {})", e.line(), e.column()))
        })
    }

    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
                Self::from_json(&text, &p.display().to_string())
            }
        }
    }

    /// Thread count with the environment override applied.
    pub fn effective_threads(&self) -> CliResult<Option<usize>> {
        match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|&t| t > 0)
                .map(Some)
                .ok_or_else(|| CliError::config(format!("{THREADS_ENV}='{v}' is not a positive integer"))),
            Err(_) => match self.threads {
                Some(0) => Err(CliError::config("threads must be positive")),
                t => Ok(t),
            },
        }
    }
}
