//! `driftcal` command-line pipeline.
//!
//! Every stage reads and writes under the output directory:
//!
//! ```text
//! out/adapted/   adapted.csv, adapted_meta.json, split.json
//! out/models/    <kind>.model, <kind>_training_log.csv
//! out/eval/      metrics.csv, scatter_<kind>.csv [, scatter_<kind>.svg]
//! out/sim/       policy_table.csv, events_<policy>.csv
//! out/report.json
//! ```
//!
//! Each stage directory also holds a `run.json` with the resolved settings.

pub mod config;
pub mod pipeline;
pub mod report;
mod svg;

use anyhow::Result;
use clap::{Parser, Subcommand};

pub use config::{Flags, Settings};

#[derive(Debug, Parser)]
#[command(name = "driftcal", version, about = "Time-to-drift forecasting and calibration policy replay")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Build the calibration surrogate and the engine split.
    Adapt,
    /// Fit the models named by --model.
    Train,
    /// Score the models on the validation engines.
    Evaluate,
    /// Replay calibration policies on the validation engines.
    Simulate,
    /// Summarize every artifact under --out.
    Report,
}

pub fn run(cli: &Cli) -> Result<()> {
    let settings = Settings::resolve(&cli.flags)?;
    match cli.command {
        Command::Adapt => pipeline::adapt(&settings).map(|_| ()),
        Command::Train => pipeline::train(&settings),
        Command::Evaluate => pipeline::evaluate_models(&settings),
        Command::Simulate => pipeline::simulate_policies(&settings),
        Command::Report => {
            let report = report::write_report(&settings.out)?;
            let sections = report["sections"].as_object().map_or(0, |m| m.len());
            println!("wrote {} ({sections} sections)", settings.out.join(report::REPORT_FILE).display());
            for w in report["warnings"].as_array().into_iter().flatten() {
                println!("warning: {}", w.as_str().unwrap_or_default());
            }
            Ok(())
        }
    }
}
