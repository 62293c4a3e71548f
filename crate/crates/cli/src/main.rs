use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rdlab_cli::commands::{
    duality_report, exponents_report, exponents_table, summary_report, DualCoefficient,
    DualityRequest, ScheduleStatus,
};
use rdlab_cli::config::RunConfig;
use rdlab_cli::io::{to_json, write_atomic};
use rdlab_cli::pipeline::{run_simulation, run_sweep, SweepConfig};
use rdlab_cli::CliError;
use rdlab_core::exponents::DEFAULT_MAX_STEPS;
use rdlab_core::Rational;

#[derive(Parser)]
#[command(name = "rdlab", version, about = "Reaction–diffusion entropy, duality and exponent toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation from a JSON config.
    Simulate {
        config: PathBuf,
    },
    /// Run a family of configs derived from a base config.
    Sweep {
        config: PathBuf,
    },
    /// Print the exact bootstrap exponent schedule.
    Exponents {
        #[arg(long = "dimension", short = 'N')]
        dimension: i64,
        /// Nonlinearity order ν, as a fraction or decimal.
        #[arg(long, default_value = "2")]
        order: Rational,
        #[arg(long)]
        gamma: Rational,
        #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
        max_steps: usize,
        /// Write the JSON report here instead of printing it.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Estimate the maximal-regularity constant and judge the spread condition.
    Duality(DualityArgs),
    /// Summarize run summaries.
    Report {
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct DualityArgs {
    /// Dual diffusion m.
    #[arg(long, conflicts_with = "diffusions", required_unless_present = "diffusions")]
    m: Option<f64>,
    /// Spread δ judged against 2/C when m is given directly.
    #[arg(long, default_value_t = 0.0, requires = "m")]
    delta: f64,
    /// Comma-separated diffusions; m = (min + max)/2, δ = max − min.
    #[arg(long, value_delimiter = ',')]
    diffusions: Option<Vec<f64>>,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    #[arg(long = "horizon", short = 'T', default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 1)]
    dimension: usize,
    #[arg(long, default_value_t = 16)]
    cells: usize,
    #[arg(long, default_value_t = 64)]
    time_steps: usize,
    #[arg(long, default_value_t = 2000)]
    budget: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn emit(json: String, path: Option<&PathBuf>) -> Result<(), CliError> {
    match path {
        Some(p) => write_atomic(p, json.as_bytes()),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config } => {
            let cfg = RunConfig::load(&config)?;
            let outcome = run_simulation(&cfg)?;
            println!(
                "{}: {} samples to t = {}; wrote {} and {}",
                outcome.summary.name,
                outcome.summary.samples,
                outcome.summary.t_final,
                cfg.output.csv.display(),
                cfg.output.summary.display()
            );
            Ok(())
        }
        Command::Sweep { config } => {
            let sweep = SweepConfig::load(&config)?;
            let entries = run_sweep(&sweep)?;
            for e in &entries {
                println!("{}: {}", e.name, e.status);
            }
            match entries.iter().find(|e| e.status != "ok") {
                Some(e) => Err(CliError::Numerical(format!(
                    "run {} failed: {}",
                    e.name,
                    e.error.clone().unwrap_or_default()
                ))),
                None => Ok(()),
            }
        }
        Command::Exponents {
            dimension,
            order,
            gamma,
            max_steps,
            json,
        } => {
            let report = exponents_report(dimension, &order, &gamma, max_steps)?;
            print!("{}", exponents_table(&report));
            if json.is_none() {
                println!();
            }
            emit(to_json(&report), json.as_ref())?;
            match report.status {
                ScheduleStatus::Terminated => Ok(()),
                ScheduleStatus::BelowThreshold => Err(CliError::Validation(
                    report.message.unwrap_or_default(),
                )),
                ScheduleStatus::NotTerminated => Err(CliError::Numerical(
                    report.message.unwrap_or_default(),
                )),
            }
        }
        Command::Duality(args) => {
            let coefficient = match (args.m, args.diffusions) {
                (Some(m), _) => DualCoefficient::Direct { m, delta: args.delta },
                (None, Some(d)) => DualCoefficient::Diffusions(d),
                (None, None) => unreachable!("clap requires m or diffusions"),
            };
            let report = duality_report(&DualityRequest {
                coefficient,
                q: args.q,
                horizon: args.horizon,
                dimension: args.dimension,
                cells: args.cells,
                time_steps: args.time_steps,
                budget: args.budget,
                seed: args.seed,
            })?;
            emit(to_json(&report), args.output.as_ref())
        }
        Command::Report { summaries } => {
            for path in &summaries {
                print!("{}", summary_report(path)?);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rdlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
