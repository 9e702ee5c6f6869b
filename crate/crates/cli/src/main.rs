//! `mmfl` — supervised multi-modal fission learning from the command line.
//!
//! Subcommands: `simulate`, `fit`, `predict`, `evaluate`, `select-ranks`,
//! `profile`, `benchmark`. Exit codes: 0 success (possibly with warnings),
//! 2 input/validation failure, 3 numerical/solver failure.

mod bundle;
mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mmfl_core::rank::{SearchMetric, SearchStrategy};
use mmfl_core::{ErrorClass, TaskKind};

use commands::FitOverrides;

#[derive(Parser)]
#[command(name = "mmfl", version, about = "Supervised multi-modal fission learning")]
struct Cli {
    /// Random seed (overrides config-file values).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel sections (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Directory for outputs whose paths are not given explicitly.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// JSON file with fit settings (flags override it).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Classification,
    Regression,
}

impl From<TaskArg> for TaskKind {
    fn from(value: TaskArg) -> Self {
        match value {
            TaskArg::Classification => TaskKind::Classification,
            TaskArg::Regression => TaskKind::Regression,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Sequential,
    Incremental,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    CvAuc,
    CvRmse,
}

/// Fit hyperparameter flags shared by the model-fitting subcommands.
#[derive(Args, Clone, Copy)]
struct FitFlags {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    outer_max_iter: Option<usize>,
    #[arg(long, value_enum)]
    task: Option<TaskArg>,
}

impl FitFlags {
    fn overrides(&self, seed: Option<u64>) -> FitOverrides {
        FitOverrides {
            lambda: self.lambda,
            gamma: self.gamma,
            mu: self.mu,
            epsilon: self.epsilon,
            max_iter: self.max_iter,
            outer_max_iter: self.outer_max_iter,
            task: self.task.map(Into::into),
            seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark dataset from a JSON configuration.
    Simulate {
        /// Simulation configuration file (JSON).
        #[arg(long = "sim-config", visible_alias = "config-file")]
        sim_config: PathBuf,
    },
    /// Fit a model; dispatches to the incomplete-modality solver when the
    /// availability file marks modalities missing.
    Fit {
        #[arg(long)]
        spec: PathBuf,
        /// Modality CSV files, matched to spec modalities by file stem.
        #[arg(long, num_args = 1.., required = true)]
        data: Vec<PathBuf>,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        availability: Option<PathBuf>,
        /// Output bundle path (default: out-dir/model.json).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Leave the training-sample latent matrix out of the bundle.
        #[arg(long)]
        omit_latent: bool,
        #[command(flatten)]
        fit: FitFlags,
    },
    /// Score samples with a fitted model bundle.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        data: Vec<PathBuf>,
        #[arg(long)]
        availability: Option<PathBuf>,
        /// Output scores path (default: out-dir/scores.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute AUC and Youden-threshold accuracy from scores and labels.
    Evaluate {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Output report path (default: out-dir/evaluation.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Greedy per-block rank selection driven by cross-validated performance.
    SelectRanks {
        /// Candidate blocks (a structure spec; its rank values are ignored).
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        data: Vec<PathBuf>,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        availability: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "incremental")]
        strategy: StrategyArg,
        #[arg(long, value_enum, default_value = "cv-auc")]
        metric: MetricArg,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 0.005)]
        min_improvement: f64,
        #[arg(long)]
        r_max: usize,
        #[command(flatten)]
        fit: FitFlags,
    },
    /// Fit at generous ranks and export per-component loading magnitudes.
    Profile {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        data: Vec<PathBuf>,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        availability: Option<PathBuf>,
        /// Output CSV path (default: out-dir/loading_profile.csv).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        fit: FitFlags,
    },
    /// Reproduce a benchmark table over seeded replications.
    Benchmark {
        /// 2 = complete-modality scenario, 3 = incomplete-modality scenario.
        #[arg(long)]
        table: u8,
        #[arg(long, default_value_t = 20)]
        reps: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: could not configure {} threads: {e}", cli.threads);
            return ExitCode::from(2);
        }
    }

    let result = run(cli);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let class = err
                .downcast_ref::<mmfl_core::Error>()
                .map(mmfl_core::Error::class);
            match class {
                Some(ErrorClass::Numerical) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let out_dir = cli.out_dir.clone();
    match cli.command {
        Command::Simulate { sim_config } => {
            commands::cmd_simulate(&sim_config, &out_dir, cli.seed)
        }
        Command::Fit {
            spec,
            data,
            labels,
            availability,
            out,
            omit_latent,
            fit,
        } => commands::cmd_fit(
            &spec,
            &data,
            &labels,
            availability.as_deref(),
            cli.config.as_deref(),
            &fit.overrides(cli.seed),
            &out.unwrap_or_else(|| out_dir.join("model.json")),
            omit_latent,
        ),
        Command::Predict {
            model,
            data,
            availability,
            out,
        } => commands::cmd_predict(
            &model,
            &data,
            availability.as_deref(),
            &out.unwrap_or_else(|| out_dir.join("scores.csv")),
        ),
        Command::Evaluate { scores, labels, out } => commands::cmd_evaluate(
            &scores,
            &labels,
            &out.unwrap_or_else(|| out_dir.join("evaluation.json")),
        ),
        Command::SelectRanks {
            spec,
            data,
            labels,
            availability,
            strategy,
            metric,
            folds,
            min_improvement,
            r_max,
            fit,
        } => commands::cmd_select_ranks(
            &spec,
            &data,
            &labels,
            availability.as_deref(),
            match strategy {
                StrategyArg::Sequential => SearchStrategy::Sequential,
                StrategyArg::Incremental => SearchStrategy::Incremental,
            },
            match metric {
                MetricArg::CvAuc => SearchMetric::CvAuc,
                MetricArg::CvRmse => SearchMetric::CvRmse,
            },
            folds,
            min_improvement,
            r_max,
            cli.config.as_deref(),
            &fit.overrides(cli.seed),
            &out_dir,
        ),
        Command::Profile {
            spec,
            data,
            labels,
            availability,
            out,
            fit,
        } => commands::cmd_profile(
            &spec,
            &data,
            &labels,
            availability.as_deref(),
            cli.config.as_deref(),
            &fit.overrides(cli.seed),
            &out.unwrap_or_else(|| out_dir.join("loading_profile.csv")),
        ),
        Command::Benchmark { table, reps } => {
            commands::cmd_benchmark(table, reps, cli.seed.unwrap_or(7), &out_dir)
        }
    }
}
