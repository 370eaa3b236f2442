//! `diffdata`: differential data analysis experiments from the command line.

mod config;
mod output;
mod pipelines;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ExperimentConfig, Overrides};
use pipelines::{Failure, Kind, StageExt};

#[derive(Debug, Parser)]
#[command(
    name = "diffdata",
    version,
    about = "Differential data analysis for recommender systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Master seed; every random choice derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Experiment config (TOML). Flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// precision, recall, rmse or mae.
    #[arg(long, global = true)]
    metric: Option<String>,
    #[arg(long, global = true)]
    top_n: Option<usize>,
    #[arg(long, global = true)]
    chunks: Option<usize>,
    /// Suppression levels, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    /// Suppression sharpness values, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    beta: Option<Vec<f64>>,
    #[arg(long, global = true)]
    attribute: Option<String>,
    /// cosine or mf.
    #[arg(long, global = true)]
    recommender: Option<String>,
    /// Dataset kind: checkins, movielens, ratings, synthetic or city.
    #[arg(long, global = true)]
    kind: Option<String>,
    /// Dataset file.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load a dataset and write it back in normalized CSV form.
    Ingest,
    /// Per-user train/test holdout.
    Split,
    /// Remove each chunk in turn and record the accuracy.
    Diff,
    /// Z-scores of a differential run, or of an existing result file.
    Zscore {
        #[arg(long)]
        from: Option<PathBuf>,
    },
    /// Random-removal baseline.
    Baseline,
    /// Repeat the differential run on user groups or data folds.
    Stability {
        /// users or data.
        #[arg(long)]
        by: Option<String>,
    },
    /// Suppress points by learned z-scores.
    Suppress,
    /// Add fake check-ins chunk by chunk.
    Fake,
    /// Replace suppressed points with fakes.
    Replace,
    /// Remove noise and unimportant data up to a target share.
    Reduce,
    /// Generate a synthetic dataset.
    Synth,
    /// Summarize an existing result file.
    Report {
        #[arg(long)]
        from: Option<PathBuf>,
    },
    /// Run the pipeline named in the config.
    Run,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.common.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(dir) => {
            println!("outputs in {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.kind.exit_code())
        }
    }
}

fn execute(cli: Cli) -> Result<PathBuf, Failure> {
    let c = cli.common;
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p).stage(Kind::Config, "config")?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: c.seed,
        out_dir: c.out_dir,
        metric: c.metric,
        top_n: c.top_n,
        chunks: c.chunks,
        alpha: c.alpha,
        beta: c.beta,
        attribute: c.attribute,
        recommender: c.recommender,
        kind: c.kind,
        input: c.input,
    });
    let (pipeline, from) = match cli.command {
        Command::Ingest => ("ingest".to_string(), None),
        Command::Split => ("split".into(), None),
        Command::Diff => ("diff".into(), None),
        Command::Zscore { from } => ("zscore".into(), from),
        Command::Baseline => ("baseline".into(), None),
        Command::Stability { by } => {
            if let Some(by) = by {
                cfg.stability.by = by;
            }
            ("stability".into(), None)
        }
        Command::Suppress => ("suppress".into(), None),
        Command::Fake => ("fake".into(), None),
        Command::Replace => ("replace".into(), None),
        Command::Reduce => ("reduce".into(), None),
        Command::Synth => ("synth".into(), None),
        Command::Report { from } => ("report".into(), from),
        Command::Run => {
            let p = cfg.pipeline.clone().ok_or_else(|| Failure {
                kind: Kind::Config,
                stage: "config".into(),
                error: anyhow::anyhow!("`run` needs a `pipeline` entry in the config"),
            })?;
            (p, None)
        }
    };
    cfg.pipeline = Some(pipeline.clone());
    pipelines::run(&pipeline, &cfg, from.as_deref())
}
