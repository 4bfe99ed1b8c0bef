//! `tcldispatch`: plan minimum-cost aggregate consumption for a fleet of
//! thermostatically controlled loads against a day-ahead price forecast.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tcl_cli::{
    cmd_compare, cmd_oracle, cmd_plan, cmd_segment, cmd_synthesize, cmd_validate, Overrides,
};

#[derive(Parser)]
#[command(name = "tcldispatch", version, about = "Fleet consumption planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Step parameter of the allocation update.
    #[arg(long)]
    gamma: Option<f64>,
    /// Stopping tolerance on the multiplier spread.
    #[arg(long = "eps-pi")]
    eps_pi: Option<f64>,
    /// Grid step of the oracle in hours.
    #[arg(long)]
    dt: Option<f64>,
    /// Minimum switching period override in hours.
    #[arg(long)]
    tm: Option<f64>,
    /// Iteration cap of the allocation loop.
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            gamma: self.gamma,
            eps_pi: self.eps_pi,
            dt: self.dt,
            tm: self.tm,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario against the admissibility assumptions.
    Validate(CommonArgs),
    /// Split the price forecast into monotone segments.
    Segment(CommonArgs),
    /// Compute the relaxed optimal plan and budget allocation.
    Plan(CommonArgs),
    /// Convert the plan into implementable ON-OFF schedules.
    Synthesize(CommonArgs),
    /// Solve the time-discretized relaxation as an independent check.
    Oracle(CommonArgs),
    /// Compare the analytic plan cost against the grid oracle.
    Compare(CommonArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("TCLDISPATCH_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate(a) => cmd_validate(&a.scenario, &a.out, &a.overrides()),
        Command::Segment(a) => cmd_segment(&a.scenario, &a.out, &a.overrides()),
        Command::Plan(a) => cmd_plan(&a.scenario, &a.out, &a.overrides()),
        Command::Synthesize(a) => cmd_synthesize(&a.scenario, &a.out, &a.overrides()),
        Command::Oracle(a) => cmd_oracle(&a.scenario, &a.out, &a.overrides()),
        Command::Compare(a) => cmd_compare(&a.scenario, &a.out, &a.overrides()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!(
                "{}",
                serde_json::json!({
                    "error": err.kind(),
                    "code": err.code(),
                    "message": err.message(),
                })
            );
            ExitCode::from(err.code() as u8)
        }
    }
}
