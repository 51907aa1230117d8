//! `eop`: budget-aware reports over offline RL hyperparameter searches.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eop_core::report::{Aggregation, Sampling, DEFAULT_TABLE_BUDGETS};

mod commands;
mod config;
mod neorl;

use config::MetricKind;

#[derive(Debug, Parser)]
#[command(name = "eop", version, about = "Expected online performance of offline RL searches under a deployment budget")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Report settings as `key = value` lines; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for randomized strategies and simulations.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Largest budget to report.
    #[arg(long, global = true)]
    pub budget_max: Option<usize>,
    /// Value transform: raw, best-behavioral or min-max.
    #[arg(long, global = true)]
    pub metric: Option<MetricKind>,
    /// Offset added to returns for the best-behavioral metric.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub offset: Option<f64>,
    /// Best behavioral policy value for the best-behavioral metric.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub v_best: Option<f64>,
    /// Seed aggregation per hyperparameter assignment: mean, median or min.
    #[arg(long, global = true)]
    pub aggregation: Option<Aggregation>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Expected best value against budget, one curve file per algorithm.
    Curve {
        runs: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, default_value = "with-replacement")]
        sampling: Sampling,
    },
    /// Expected normalized regret against budget for each selection strategy.
    Regret {
        #[arg(long)]
        runs: Option<PathBuf>,
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Strategies to report: `uniform` and score method names. Defaults
        /// to uniform plus every method in the score file.
        #[arg(long, value_delimiter = ',')]
        strategies: Vec<String>,
        /// Environment to report when the runs file holds several.
        #[arg(long)]
        environment: Option<String>,
        /// Uniform selection with or without repeats.
        #[arg(long, default_value = "with-replacement")]
        uniform_sampling: Sampling,
        /// Simulated rounds for uniform selection without replacement.
        #[arg(long, default_value_t = 10_000)]
        rounds: usize,
    },
    /// Spearman's rank correlation of each ranking against a reference.
    Spearman {
        reference: PathBuf,
        #[arg(required = true)]
        others: Vec<PathBuf>,
    },
    /// Runs the tabular testbed and writes runs, scores and hyperparameters.
    Simulate {
        /// Pipeline settings as `key = value` lines.
        pipeline: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Renders curve files into one SVG figure.
    Plot {
        #[arg(required = true)]
        curves: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Legend labels in curve order; defaults to the file names.
        #[arg(long, value_delimiter = ',')]
        labels: Vec<String>,
        #[arg(long)]
        title: Option<String>,
        #[arg(long)]
        y_label: Option<String>,
    },
    /// Expected best value at fixed budgets, dashes past each algorithm's N.
    Table {
        runs: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_TABLE_BUDGETS)]
        budgets: Vec<usize>,
        #[arg(long, default_value = "with-replacement")]
        sampling: Sampling,
        #[arg(long)]
        environment: Option<String>,
        /// Also write the table to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Converts an external evaluation table into the runs schema.
    ImportNeorl(neorl::ImportArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = config::ReportConfig::resolve(&cli.global)?;
    match cli.command {
        Command::Curve { runs, out_dir, sampling } => commands::curve(&cfg, runs, out_dir, sampling),
        Command::Regret {
            runs,
            scores,
            out_dir,
            strategies,
            environment,
            uniform_sampling,
            rounds,
        } => commands::regret(
            &cfg,
            commands::RegretArgs {
                runs,
                scores,
                out_dir,
                strategies,
                environment,
                uniform_sampling,
                rounds,
            },
        ),
        Command::Spearman { reference, others } => commands::spearman(&reference, &others),
        Command::Simulate { pipeline, out_dir } => commands::simulate(&cfg, &pipeline, out_dir, cli.global.seed),
        Command::Plot {
            curves,
            out,
            labels,
            title,
            y_label,
        } => commands::plot(&curves, &out, &labels, title, y_label),
        Command::Table {
            runs,
            budgets,
            sampling,
            environment,
            out,
        } => commands::table(&cfg, runs, &budgets, sampling, environment, out),
        Command::ImportNeorl(args) => commands::import_neorl(&args),
    }
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// The error and its causes, skipping causes already quoted by a wrapper.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    one_line(&out)
}

fn main() -> ExitCode {
    env_logger::Builder::new().filter_level(log::LevelFilter::Warn).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("{}", one_line(first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}
