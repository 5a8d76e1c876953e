//! `cub` — distraction-minimizing classroom group arrangements from teacher
//! surveys.
//!
//! Exit codes: 0 success, 1 validation or input error, 2 rotation exhausted
//! (no further distinct arrangement exists for the roster).

mod commands;
mod config;
mod files;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cub_core::assign::AssignError;

use crate::config::PipelineConfig;

#[derive(Parser)]
#[command(
    name = "cub",
    version,
    about = "Generate distraction-minimizing classroom group arrangements from teacher surveys"
)]
struct Cli {
    /// JSON config file; CLI flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for arrangement rotation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: cub-out; rotate defaults to the state
    /// file's directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a survey: one (D, d) coefficient pair per student.
    Evaluate {
        /// Survey CSV with header `student_id,noise,focus,seated`.
        survey: PathBuf,
    },
    /// Build the initial arrangement and rotation state.
    Arrange {
        /// Survey CSV or coefficients CSV (recognized by header).
        input: PathBuf,
        /// Group sizes, e.g. 5,5,5,5,5.
        #[arg(long, value_delimiter = ',')]
        groups: Option<Vec<usize>>,
        /// Check the result against exhaustive search (rosters of at most 12).
        #[arg(long)]
        verify: bool,
    },
    /// Emit the next arrangement of an existing rotation.
    Rotate {
        /// Rotation state file written by `arrange` or `pipeline`.
        state: PathBuf,
    },
    /// Jaccard similarity of two arrangements' co-grouped pairs.
    Compare { a: PathBuf, b: PathBuf },
    /// Full chain: evaluate, arrange, and rotate up to `count` arrangements.
    Pipeline {
        survey: PathBuf,
        /// Total number of arrangements to emit.
        #[arg(long, short = 'n')]
        count: usize,
        /// Group sizes, e.g. 5,5,5,5,5.
        #[arg(long, value_delimiter = ',')]
        groups: Option<Vec<usize>>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = PipelineConfig::load(cli.config.as_deref(), cli.seed, cli.out)?;
    match cli.command {
        Command::Evaluate { survey } => commands::cmd_evaluate(&survey, &cfg),
        Command::Arrange {
            input,
            groups,
            verify,
        } => commands::cmd_arrange(&input, groups, verify, &cfg),
        Command::Rotate { state } => commands::cmd_rotate(&state, &cfg),
        Command::Compare { a, b } => commands::cmd_compare(&a, &b),
        Command::Pipeline {
            survey,
            count,
            groups,
        } => commands::cmd_pipeline(&survey, count, groups, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let exhausted = err.chain().any(|cause| {
                matches!(
                    cause.downcast_ref(),
                    Some(AssignError::ExhaustedRetries { .. })
                )
            });
            if exhausted {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
