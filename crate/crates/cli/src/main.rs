use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use modecause::pipeline::{
    cmd_compare, cmd_discover, cmd_effects, cmd_simulate, cmd_train_explain, PipelineError, RunConfig,
};

/// Causal discovery, effect estimation and attribution for travel-mode data.
#[derive(Parser)]
#[command(name = "modecause", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a dataset from a preset SCM, with its true graph and effects.
    Simulate(Flags),
    /// Run the PC search and write the graph and a report.
    Discover(Flags),
    /// Estimate the total effect of every variable on every other.
    Effects(Flags),
    /// Train the classifier, report accuracy and write mean |SHAP| per class.
    TrainExplain(Flags),
    /// Align total effects with attributions from earlier runs.
    Compare(Flags),
}

/// Flags override values from `--config`, which override the defaults.
#[derive(Args)]
struct Flags {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input CSV.
    #[arg(long, conflicts_with = "preset")]
    input: Option<PathBuf>,
    /// Built-in SCM name.
    #[arg(long)]
    preset: Option<String>,
    /// Rows to sample from the preset.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    codebook: Option<PathBuf>,
    #[arg(long)]
    knowledge: Option<PathBuf>,
    /// Graph used by `effects` (DOT).
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Significance level for the independence tests.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Flags {
    fn resolve(self) -> Result<RunConfig, PipelineError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(input) = self.input {
            cfg.input = Some(input);
            cfg.preset = None;
        }
        if let Some(preset) = self.preset {
            cfg.preset = Some(preset);
            cfg.input = None;
        }
        if self.n.is_some() {
            cfg.n = self.n;
        }
        if self.codebook.is_some() {
            cfg.codebook = self.codebook;
        }
        if self.knowledge.is_some() {
            cfg.knowledge = self.knowledge;
        }
        if self.graph.is_some() {
            cfg.graph = self.graph;
        }
        if let Some(alpha) = self.alpha {
            cfg.alpha = alpha;
        }
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        if let Some(out) = self.out {
            cfg.out = out;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, PipelineError> {
    match cli.command {
        Command::Simulate(f) => cmd_simulate(&f.resolve()?),
        Command::Discover(f) => cmd_discover(&f.resolve()?),
        Command::Effects(f) => cmd_effects(&f.resolve()?),
        Command::TrainExplain(f) => cmd_train_explain(&f.resolve()?),
        Command::Compare(f) => cmd_compare(&f.resolve()?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            eprintln!("modecause-error: {}: {message}", e.category());
            ExitCode::FAILURE
        }
    }
}
