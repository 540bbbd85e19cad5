use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::benchmark::{self, Suite};
use crate::commands::{self, PredictPaths};
use crate::config::RunConfig;
use crate::data::fmt_f64;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "vlgp", version, about = "Vecchia-Laplace latent Gaussian process inference")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a dataset and its latent truth.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Data CSV to write.
        #[arg(long)]
        out: PathBuf,
        /// Truth CSV (b, mu); defaults to `<out>.truth.csv`.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Destination of the `holdout` rows.
        #[arg(long)]
        pred: Option<PathBuf>,
    },
    /// Estimate the model and write a model file.
    Fit {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// Model JSON to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict at new locations from a model file and its training data.
    Predict {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        /// Training data the model was fitted on.
        #[arg(long)]
        data: PathBuf,
        /// Prediction locations (s1..sd, optional y and x1..xp).
        #[arg(long)]
        pred: PathBuf,
        /// Predictions CSV to write.
        #[arg(long)]
        out: PathBuf,
        /// Latent truth at the prediction points, used for scores.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Scores CSV to write.
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Print the objective of a model file on its training data.
    Evaluate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Run a benchmark suite: preconditioners, likelihood-accuracy, predvar or estimation.
    Benchmark {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        suite: String,
        /// Metrics CSV to write.
        #[arg(long)]
        out: PathBuf,
    },
}

impl Command {
    fn config(&self) -> Option<&PathBuf> {
        match self {
            Self::Simulate { config, .. }
            | Self::Fit { config, .. }
            | Self::Predict { config, .. }
            | Self::Evaluate { config, .. }
            | Self::Benchmark { config, .. } => config.as_ref(),
        }
    }
}

/// Sizes the global thread pool once per process.
fn init_threads(cfg: &RunConfig) -> CliResult<()> {
    if let Some(t) = cfg.effective_threads()? {
        // a second call in the same process (tests) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    Ok(())
}

/// Runs one subcommand; messages for the user go to stdout.
pub fn run(cli: Cli) -> CliResult<()> {
    let cfg = RunConfig::load(cli.command.config().map(PathBuf::as_path))?;
    init_threads(&cfg)?;
    match cli.command {
        Command::Simulate { out, truth, pred, .. } => {
            let o = commands::simulate_cmd(&cfg, &out, truth.as_deref(), pred.as_deref())?;
            println!("wrote {} and {}", o.data.display(), o.truth.display());
            if let Some((p, t)) = o.pred {
                println!("wrote {} and {}", p.display(), t.display());
            }
        }
        Command::Fit { data, out, .. } => {
            let m = commands::fit_cmd(&cfg, &data, &out)?;
            println!(
                "variance {} range {} objective {} iterations {} converged {} ({})",
                fmt_f64(m.variance),
                fmt_f64(m.range),
                fmt_f64(m.objective),
                m.iterations,
                m.converged,
                m.message
            );
        }
        Command::Predict { model, data, pred, out, truth, scores, .. } => {
            let paths = PredictPaths {
                model: &model,
                data: &data,
                pred: &pred,
                out: &out,
                truth: truth.as_deref(),
                scores: scores.as_deref(),
            };
            let p = commands::predict_cmd(&cfg, &paths)?;
            println!("wrote {} predictions to {}", p.mean.len(), out.display());
        }
        Command::Evaluate { model, data, .. } => {
            println!("{}", fmt_f64(commands::evaluate_cmd(&model, &data)?));
        }
        Command::Benchmark { suite, out, .. } => {
            let suite: Suite = suite.parse()?;
            let rows = benchmark::run(suite, &cfg.benchmark)?;
            benchmark::write_csv(&out, suite, &rows)?;
            println!("wrote {} rows to {}", rows.len(), out.display());
        }
    }
    Ok(())
}

/// Parses arguments, mapping usage errors to the configuration exit code.
pub fn parse_args<I, T>(args: I) -> Result<Cli, (CliError, bool)>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    Cli::try_parse_from(args).map_err(|e| {
        let help = matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion);
        (CliError::config(e.to_string()), help)
    })
}
