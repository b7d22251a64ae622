mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde_json::json;

use crate::config::ExperimentConfig;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    /// Generate expert demonstrations
    Demos,
    /// Plain apprenticeship learning
    Al,
    /// Counterexample-guided safety-aware apprenticeship learning
    Cegal,
    /// Model-check a decision rule against the property
    Verify,
    /// Write the induced chain in explicit transition/label format
    Export,
    /// Time the pipeline stages on several grid sizes
    Bench,
}

/// Safety-aware multi-agent apprenticeship learning experiments.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    mode: Mode,
    /// JSON configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration entry, e.g. `--set learner.epsilon=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn execute(cli: &Cli) -> anyhow::Result<serde_json::Value> {
    let cfg = ExperimentConfig::load(cli.config.as_deref(), &cli.overrides)?;
    match cli.mode {
        Mode::Demos => run::demos_mode(&cfg),
        Mode::Al => run::al_mode(&cfg),
        Mode::Cegal => run::cegal_mode(&cfg),
        Mode::Verify => run::verify_mode(&cfg),
        Mode::Export => run::export_mode(&cfg),
        Mode::Bench => run::bench_mode(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(value) => {
            println!("{value}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            let kind = err
                .chain()
                .find_map(|e| e.downcast_ref::<cegal_core::Error>())
                .map_or("error", cegal_core::Error::kind);
            let record = json!({
                "error": {
                    "kind": kind,
                    "message": format!("{err:#}"),
                }
            });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
