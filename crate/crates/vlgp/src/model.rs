//! Versioned JSON model files written by `fit` and read by `predict`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vlgp_core::covariance::{CovarianceSpec, Smoothness};
use vlgp_core::estimate::{FitResult, Problem, TraceEntry};
use vlgp_core::laplace::{BackendConfig, LaplaceState, NewtonConfig};
use vlgp_core::likelihood::Likelihood;

use crate::data::Dataset;
use crate::error::{io_err, CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

/// What is needed to rebuild the Vecchia structure on the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorInfo {
    pub n: usize,
    pub dim: usize,
    pub m: usize,
    pub ordering_seed: u64,
    /// SHA-256 of the training data, checked when the model is used.
    pub data_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Model {
    pub format: u32,
    pub likelihood: Likelihood,
    pub smoothness: Smoothness,
    pub variance: f64,
    pub range: f64,
    /// Fixed effects, the intercept first when present.
    pub beta: Vec<f64>,
    pub intercept: bool,
    /// Covariate columns `x1..xp` expected in data files.
    pub covariates: usize,
    /// Objective at the estimates from a cold-started mode search.
    pub objective: f64,
    pub converged: bool,
    pub message: String,
    pub iterations: usize,
    pub evaluations: usize,
    pub factor: FactorInfo,
    pub backend: BackendConfig,
    pub newton: NewtonConfig,
    pub trace: Vec<TraceEntry>,
}

/// Hex SHA-256 over the coordinates, response and covariates.
pub fn fingerprint(data: &Dataset) -> String {
    let mut h = Sha256::new();
    h.update((data.n() as u64).to_le_bytes());
    h.update((data.dim() as u64).to_le_bytes());
    h.update((data.p as u64).to_le_bytes());
    for v in data.locations.coords().iter().chain(data.y.iter().flatten()).chain(&data.x) {
        h.update(v.to_bits().to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl Model {
    pub fn from_fit(
        fit: &FitResult,
        data: &Dataset,
        intercept: bool,
        m: usize,
        ordering_seed: u64,
        backend: &BackendConfig,
        newton: &NewtonConfig,
    ) -> Self {
        let [variance, range] = fit.spec.params();
        Self {
            format: FORMAT_VERSION,
            likelihood: fit.likelihood.clone(),
            smoothness: fit.spec.smoothness(),
            variance,
            range,
            beta: fit.beta.clone(),
            intercept,
            covariates: data.p,
            objective: fit.objective,
            converged: fit.converged,
            message: fit.message.clone(),
            iterations: fit.iterations,
            evaluations: fit.evaluations,
            factor: FactorInfo {
                n: data.n(),
                dim: data.dim(),
                m,
                ordering_seed,
                data_sha256: fingerprint(data),
            },
            backend: backend.clone(),
            newton: newton.clone(),
            trace: fit.trace.clone(),
        }
    }

    pub fn spec(&self) -> CliResult<CovarianceSpec> {
        Ok(CovarianceSpec::new(self.smoothness, self.variance, self.range)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, name: &str) -> CliResult<Self> {
        #[derive(Deserialize)]
        struct Version {
            format: Option<u32>,
        }
        let v: Version = serde_json::from_str(text).map_err(|e| CliError::data(format!("{name}: {e}")))?;
        match v.format {
            Some(FORMAT_VERSION) => {}
            Some(f) => return Err(CliError::data(format!("{name}: unsupported model format {f}"))),
            None => return Err(CliError::data(format!("{name}: missing 'format' field"))),
        }
        let model: Self = serde_json::from_str(text).map_err(|e| CliError::data(format!("{name}: {e}")))?;
        if model.beta.len() != model.covariates + model.intercept as usize {
            return Err(CliError::data(format!("{name}: beta has the wrong length")));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_json()).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text, &path.display().to_string())
    }

    /// Checks that `data` is the training data this model was fitted on.
    pub fn check_training_data(&self, data: &Dataset) -> CliResult<()> {
        if data.n() != self.factor.n || data.dim() != self.factor.dim || data.p != self.covariates {
            return Err(CliError::data(format!(
                "training data has n={}, d={}, p={}; the model expects n={}, d={}, p={}",
                data.n(),
                data.dim(),
                data.p,
                self.factor.n,
                self.factor.dim,
                self.covariates
            )));
        }
        if fingerprint(data) != self.factor.data_sha256 {
            return Err(CliError::data("training data differs from the data the model was fitted on"));
        }
        Ok(())
    }

    /// Rebuilds the ordered problem on the training data.
    pub fn problem(&self, data: &Dataset) -> CliResult<Problem> {
        self.check_training_data(data)?;
        let x = data.design(self.intercept)?;
        Ok(Problem::new(
            data.response()?,
            &x,
            &data.locations,
            &self.likelihood,
            self.smoothness,
            self.factor.m,
            self.factor.ordering_seed,
        )?)
    }

    /// Objective and mode at the stored estimates, cold-started as at the end of `fit`.
    pub fn evaluate(&self, problem: &Problem) -> CliResult<(f64, LaplaceState)> {
        let (f, _, state) =
            problem.evaluate(&self.spec()?, &self.beta, &self.likelihood, &self.backend, &self.newton, None, false)?;
        Ok((f, state))
    }
}
