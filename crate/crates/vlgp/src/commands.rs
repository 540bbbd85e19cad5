//! The `simulate`, `fit`, `predict` and `evaluate` subcommands.

use std::path::{Path, PathBuf};

use vlgp_core::covariance::Locations;
use vlgp_core::estimate::fit;
use vlgp_core::laplace::{Design, Prior};
use vlgp_core::predict::{self, crps, latent_samples, log_score, response_moments, rmse};
use vlgp_core::simulate::simulate;
use vlgp_core::vecchia::prediction_blocks;

use crate::config::RunConfig;
use crate::data::{coordinate_columns, fmt_f64, read_dataset, write_columns, Dataset};
use crate::error::{io_err, CliError, CliResult};
use crate::model::Model;

/// `data.csv` -> `data.truth.csv`
pub fn truth_path_for(path: &Path) -> PathBuf {
    let s = path.to_string_lossy();
    match s.strip_suffix(".csv") {
        Some(stem) => PathBuf::from(format!("{stem}.truth.csv")),
        None => PathBuf::from(format!("{s}.truth.csv")),
    }
}

pub struct SimulateOutput {
    pub data: PathBuf,
    pub truth: PathBuf,
    pub pred: Option<(PathBuf, PathBuf)>,
}

/// Simulates a dataset. With `holdout > 0` the last `holdout` rows go to `pred`
/// (and its truth file) instead of `out`.
pub fn simulate_cmd(cfg: &RunConfig, out: &Path, truth: Option<&Path>, pred: Option<&Path>) -> CliResult<SimulateOutput> {
    let sc = &cfg.simulate;
    if cfg.holdout >= sc.n {
        return Err(CliError::config(format!("holdout {} must be smaller than n = {}", cfg.holdout, sc.n)));
    }
    if cfg.holdout > 0 && pred.is_none() {
        return Err(CliError::config("holdout > 0 needs a --pred path for the held-out rows"));
    }
    let sim = simulate(sc)?;
    let n = sc.n;
    // the constant column is implied by `intercept` when fitting
    let skip = (sc.intercept && sim.x.ncols() > 0) as usize;
    let p = sim.x.ncols() - skip;
    let write = |rows: std::ops::Range<usize>, data_path: &Path, truth_path: &Path| -> CliResult<()> {
        let idx: Vec<usize> = rows.collect();
        let locs = sim.locations.subset(&idx);
        let (mut names, mut cols) = coordinate_columns(&locs);
        names.push("y".into());
        cols.push(idx.iter().map(|&i| sim.y[i]).collect());
        for j in 0..p {
            names.push(format!("x{}", j + 1));
            cols.push(idx.iter().map(|&i| sim.x.row(i)[skip + j]).collect());
        }
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        write_columns(data_path, None, &names, &refs)?;
        let b: Vec<f64> = idx.iter().map(|&i| sim.b[i]).collect();
        let mu: Vec<f64> = idx.iter().map(|&i| sim.mu[i]).collect();
        write_columns(truth_path, None, &["b".into(), "mu".into()], &[&b, &mu])
    };
    let n_train = n - cfg.holdout;
    let truth = truth.map_or_else(|| truth_path_for(out), Path::to_path_buf);
    write(0..n_train, out, &truth)?;
    let pred = match pred {
        Some(pp) if cfg.holdout > 0 => {
            let pt = truth_path_for(pp);
            write(n_train..n, pp, &pt)?;
            Some((pp.to_path_buf(), pt))
        }
        _ => None,
    };
    Ok(SimulateOutput { data: out.to_path_buf(), truth, pred })
}

/// Fits the model and writes the model file.
pub fn fit_cmd(cfg: &RunConfig, data_path: &Path, out: &Path) -> CliResult<Model> {
    let data = read_dataset(data_path)?;
    let model = fit_dataset(cfg, &data)?;
    model.save(out)?;
    Ok(model)
}

pub fn fit_dataset(cfg: &RunConfig, data: &Dataset) -> CliResult<Model> {
    let (lik, shape) = cfg.likelihood.template();
    let mut fc = cfg.fit.clone();
    if let (Some(s), None) = (shape, &fc.init.aux) {
        fc.init.aux = Some(vec![s]);
    }
    let x = data.design(cfg.intercept)?;
    let y = data.response()?;
    let res = fit(y, &x, &data.locations, &lik, &fc)?;
    Ok(Model::from_fit(&res, data, cfg.intercept, fc.m, fc.ordering_seed, &fc.backend, &fc.newton))
}

/// Objective of a stored model on its training data.
pub fn evaluate_cmd(model_path: &Path, data_path: &Path) -> CliResult<f64> {
    let model = Model::load(model_path)?;
    let data = read_dataset(data_path)?;
    let problem = model.problem(&data)?;
    Ok(model.evaluate(&problem)?.0)
}

/// Latent truth at the prediction points.
pub fn read_truth(path: &Path) -> CliResult<Vec<f64>> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(file);
    let name = path.display();
    let header = rdr.headers().map_err(|e| CliError::data(format!("{name}: {e}")))?.clone();
    let col = header
        .iter()
        .position(|h| h == "mu")
        .ok_or_else(|| CliError::data(format!("{name}: no 'mu' column")))?;
    let mut out = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::data(format!("{name}: row {}: {e}", r + 1)))?;
        let field = rec.get(col).unwrap_or("");
        let v: f64 = field
            .parse()
            .map_err(|_| CliError::data(format!("{name}: row {}: '{field}' is not a number", r + 1)))?;
        out.push(v);
    }
    Ok(out)
}

/// Predictive summaries at the prediction points.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub locations: Locations,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub response: Option<(Vec<f64>, Vec<f64>)>,
    pub response_samples: Option<Vec<Vec<f64>>>,
    pub header: String,
}

pub fn predict_dataset(cfg: &RunConfig, model: &Model, train: &Dataset, pred: &Dataset) -> CliResult<Predictions> {
    if pred.dim() != model.factor.dim {
        return Err(CliError::data(format!(
            "prediction points have {} coordinates, the model {}",
            pred.dim(),
            model.factor.dim
        )));
    }
    if pred.p != model.covariates {
        return Err(CliError::data(format!(
            "prediction file has {} covariate columns, the model {}",
            pred.p, model.covariates
        )));
    }
    let pc = &cfg.predict;
    let problem = model.problem(train)?;
    let (_, state) = model.evaluate(&problem)?;
    let spec = model.spec()?;
    let prior = Prior::new(&problem.structure, &spec, &model.backend, false)?;
    let m = pc.m.unwrap_or(model.factor.m);
    let blocks = prediction_blocks(&problem.structure, &pred.locations, &spec, m)?;
    let xp: Design = pred.design(model.intercept)?;
    let fixed = xp.mul(&model.beta)?;
    let dist = predict::predict(&prior, &state, &blocks, &fixed, pc.variance_method(), &model.backend)?;
    let (response, response_samples) = match pc.response_method() {
        Some(method) => {
            let r = response_moments(&dist.mean, &dist.var, &model.likelihood, method)?;
            (Some((r.mean, r.var)), r.samples)
        }
        None => (None, None),
    };
    let mut header = pc.describe();
    header.push_str(&format!("; m={m}"));
    if dist.breakdown {
        header.push_str(&format!("; lanczos stopped at rank {}", dist.achieved_rank.unwrap_or(0)));
    }
    Ok(Predictions {
        locations: pred.locations.clone(),
        mean: dist.mean,
        var: dist.var,
        response,
        response_samples,
        header,
    })
}

pub fn write_predictions(path: &Path, p: &Predictions) -> CliResult<()> {
    let (mut names, coords) = coordinate_columns(&p.locations);
    let mut cols: Vec<&[f64]> = coords.iter().map(|c| c.as_slice()).collect();
    names.push("latent_mean".into());
    cols.push(&p.mean);
    names.push("latent_var".into());
    cols.push(&p.var);
    if let Some((m, v)) = &p.response {
        names.push("response_mean".into());
        cols.push(m);
        names.push("response_var".into());
        cols.push(v);
    }
    write_columns(path, Some(&p.header), &names, &cols)
}

/// `(metric, value)` pairs: response scores when the prediction file carries `y`, latent
/// scores against a truth file.
pub fn scores(cfg: &RunConfig, p: &Predictions, y: Option<&[f64]>, truth: Option<&[f64]>) -> CliResult<Vec<(String, f64)>> {
    let mut out = Vec::new();
    if let Some(t) = truth {
        if t.len() != p.mean.len() {
            return Err(CliError::data(format!(
                "truth file has {} rows for {} prediction points",
                t.len(),
                p.mean.len()
            )));
        }
        out.push(("latent_rmse".into(), rmse(&p.mean, t)?));
        out.push(("latent_log_score".into(), log_score(&p.mean, &p.var, t)?));
        let draws = latent_samples(&p.mean, &p.var, cfg.predict.score_samples, cfg.predict.seed)?;
        out.push(("latent_crps".into(), crps(&draws, t)?));
    }
    if let Some(y) = y {
        if let Some((m, _)) = &p.response {
            out.push(("response_rmse".into(), rmse(m, y)?));
        }
        if let Some(s) = &p.response_samples {
            out.push(("response_crps".into(), crps(s, y)?));
        }
    }
    Ok(out)
}

pub fn write_scores(path: &Path, header: &str, scores: &[(String, f64)]) -> CliResult<()> {
    use std::io::Write;
    let mut text = format!("# {header}\nmetric,value\n");
    for (k, v) in scores {
        text.push_str(&format!("{k},{}\n", fmt_f64(*v)));
    }
    let mut f = std::fs::File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}

pub struct PredictPaths<'a> {
    pub model: &'a Path,
    pub data: &'a Path,
    pub pred: &'a Path,
    pub out: &'a Path,
    pub truth: Option<&'a Path>,
    pub scores: Option<&'a Path>,
}

pub fn predict_cmd(cfg: &RunConfig, paths: &PredictPaths<'_>) -> CliResult<Predictions> {
    let model = Model::load(paths.model)?;
    let train = read_dataset(paths.data)?;
    let pred = read_dataset(paths.pred)?;
    let truth = paths.truth.map(read_truth).transpose()?;
    if paths.scores.is_some() && truth.is_none() && pred.y.is_none() {
        return Err(CliError::config("--scores needs a 'y' column in the prediction file or a --truth file"));
    }
    let p = predict_dataset(cfg, &model, &train, &pred)?;
    write_predictions(paths.out, &p)?;
    if let Some(sp) = paths.scores {
        let s = scores(cfg, &p, pred.y.as_deref(), truth.as_deref())?;
        write_scores(sp, &p.header, &s)?;
    }
    Ok(p)
}
