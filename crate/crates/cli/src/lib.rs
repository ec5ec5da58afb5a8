//! Command-line driver: `run`, `sweep`, `optimize`, `serve` and
//! `export-matrix` over a flat key-value config file.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use seqslam::Target;

pub use config::{parse_config, parse_config_str, ConfigError, Issue, PipelineConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("pipeline: {0}")]
    Pipeline(#[from] seqslam::Error),
    #[error("usage: {0}")]
    Usage(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// The message on one line, as printed on failure.
    pub fn single_line(&self) -> String {
        self.to_string().split_whitespace().collect::<Vec<_>>().join(" ")
    }
}

fn parse_target(s: &str) -> Result<Target, String> {
    s.parse()
}

#[derive(Debug, Parser)]
#[command(name = "seqslam", version, about = "Sequence-based visual place recognition")]
pub struct Cli {
    /// Configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Worker threads for the parallel stages (default: one per core).
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full pipeline and write matches and metrics.
    Run,
    /// Run the configured parameter sweep.
    Sweep {
        /// Metric optimised per point on non-threshold axes.
        #[arg(long, value_parser = parse_target)]
        target: Option<Target>,
    },
    /// Print the threshold that maximises a metric.
    Optimize {
        #[arg(long, value_parser = parse_target, default_value = "f1")]
        target: Target,
    },
    /// Serve the explorer API for the configured dataset pair.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Compute scores for every search method, not just the configured one.
        #[arg(long)]
        all_methods: bool,
    },
    /// Write the difference, enhanced and score matrices as SSM1 files.
    ExportMatrix,
}

/// Executes a parsed command line, returning the text to print.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("missing --config <PATH>".into()))?;
    let cfg = parse_config(path)?;
    let out = cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let go = || match &cli.command {
        Command::Run => commands::run(&cfg, &out),
        Command::Sweep { target } => commands::sweep(&cfg, *target, &out),
        Command::Optimize { target } => commands::optimize(&cfg, *target),
        Command::Serve { port, all_methods } => commands::serve(&cfg, *port, *all_methods),
        Command::ExportMatrix => commands::export_matrix(&cfg, &out),
    };
    match cli.workers {
        Some(0) => Err(CliError::Usage("--workers must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(go),
        None => go(),
    }
}
