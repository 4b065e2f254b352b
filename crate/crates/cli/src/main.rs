//! `migplan`: plan, simulate and compare VM migration schedules.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use migplan_core::sim::PlannerKind;
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(
    name = "migplan",
    version,
    about = "Plan and simulate concurrent VM live migrations"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Approximation accuracy, in (0, 0.5).
    #[arg(long, global = true, value_parser = parse_epsilon)]
    pub epsilon: Option<f64>,
    /// Start filter margin: a migration starts only if l > (1+theta)·r.
    #[arg(long, global = true, value_parser = parse_theta)]
    pub theta: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write results here instead of standard output.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Planner for `simulate` (fpta, optimal, grouping, one-by-one, fixed).
    #[arg(long, global = true)]
    pub planner: Option<PlannerKind>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one allocation for every request in the scenario.
    Plan { scenario: PathBuf },
    /// Replay the scenario and report makespan, downtime and the net-rate curve.
    Simulate { scenario: PathBuf },
    /// Simulate the scenario under several planners and seeds.
    Compare {
        scenario: PathBuf,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "fpta,grouping,one-by-one"
        )]
        planners: Vec<PlannerKind>,
        /// Number of consecutive seeds, starting at --seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
    },
    /// Check the approximation bounds against exact solutions on random stars.
    OracleCheck {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        /// Upper bound on each dirty rate relative to the smallest host cap.
        #[arg(long, default_value_t = 0.4)]
        eta_max: f64,
    },
}

fn parse_epsilon(s: &str) -> Result<f64, String> {
    let e: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if e > 0.0 && e < 0.5 {
        Ok(e)
    } else {
        Err(format!("epsilon must lie in (0, 0.5), got {e}"))
    }
}

fn parse_theta(s: &str) -> Result<f64, String> {
    let t: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if t.is_finite() && t >= 0.0 {
        Ok(t)
    } else {
        Err(format!("theta must be non-negative, got {t}"))
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Check(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Check(_) => 3,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let g = &cli.global;
    let result = match &cli.command {
        Command::Plan { scenario } => commands::plan(g, scenario),
        Command::Simulate { scenario } => commands::simulate(g, scenario),
        Command::Compare {
            scenario,
            planners,
            seeds,
        } => commands::compare(g, scenario, planners, *seeds),
        Command::OracleCheck { instances, eta_max } => {
            commands::oracle_check(g, *instances, *eta_max)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("migplan: {e}");
            ExitCode::from(e.code())
        }
    }
}
