//! Command-line front end: dataset generation, training, sampling,
//! evaluation and reporting.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod report;

pub use args::{Cli, Command};
pub use error::{CliError, CliResult};

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::Train(a) => commands::train(a),
        Command::Sample(a) => commands::sample_cmd(a),
        Command::Eval(a) => commands::eval_cmd(a),
        Command::Report(a) => commands::report_cmd(a),
    }
}
