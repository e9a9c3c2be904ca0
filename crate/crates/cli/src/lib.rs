//! The `hybridcast` command-line tool: one subcommand per stage plus
//! `run-pipeline`, which chains them under a single run directory.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numeric failure.

pub mod args;
pub mod commands;
pub mod error;
pub mod io;
pub mod models;
pub mod pipeline;

use args::{Cli, Command};
pub use error::{CliError, Result};

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Augment(a) => commands::augment(a),
        Command::Decompose(a) => commands::decompose(a),
        Command::DroWeights(a) => commands::dro_weights(a),
        Command::TrainTsfm(a) => commands::train_tsfm(a),
        Command::Forecast(a) => commands::forecast_cmd(a),
        Command::FuseTrain(a) => commands::fuse_train(a),
        Command::Fuse(a) => commands::fuse(a),
        Command::Coordinate(a) => commands::coordinate(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::RunPipeline(a) => pipeline::run_pipeline_cmd(a),
        Command::Info(a) => commands::info(a),
    }
}
