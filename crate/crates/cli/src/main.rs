use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use multiuav::baselines::SchemeId;
use multiuav_cli::commands::{self, SolveArgs, SweepArgs, SweepParam};
use multiuav_cli::scenario_file::Overrides;
use multiuav_cli::CliError;

#[derive(Parser)]
#[command(name = "multiuav", version, about = "Multi-UAV max-min rate planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario with one scheme.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "joint")]
        scheme: SchemeId,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        period: Option<f64>,
        #[arg(long)]
        uavs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_iters: Option<usize>,
        /// Relative convergence threshold.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Solve over a list of parameter values and schemes.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "period")]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "joint")]
        schemes: Vec<SchemeId>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Re-check a run directory against its scenario.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        run: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve {
            scenario,
            scheme,
            out,
            period,
            uavs,
            seed,
            max_iters,
            eps,
        } => {
            let args = SolveArgs {
                scenario,
                scheme,
                out,
                overrides: Overrides {
                    period,
                    num_uavs: uavs,
                    seed,
                    convergence_threshold: eps,
                },
                max_iters,
            };
            let result = commands::solve(&args)?;
            println!(
                "{} eta={} binary_eta={} iterations={}",
                result.summary.scheme, result.summary.eta, result.summary.binary_eta, result.summary.iterations
            );
            Ok(())
        }
        Command::Sweep {
            scenario,
            param,
            values,
            schemes,
            out,
            max_iters,
        } => {
            let rows = commands::sweep(&SweepArgs {
                scenario,
                param,
                values,
                schemes,
                out,
                max_iters,
            })?;
            for r in &rows {
                println!("{} {}={} {} eta={:?}", r.scheme, r.param, r.value, r.status, r.eta);
            }
            match rows.iter().filter(|r| !r.is_ok()).count() {
                0 => Ok(()),
                n => Err(CliError::NotConverged(format!("{n} of {} sweep points did not finish cleanly", rows.len()))),
            }
        }
        Command::Validate { scenario, run } => {
            let report = commands::validate(&scenario, &run)?;
            for c in &report.checks {
                println!("{c}");
            }
            if report.passed() {
                Ok(())
            } else {
                Err(CliError::Validation(format!("{} check(s) failed", report.failed().len())))
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Help and version requests are not errors; usage errors are parse errors.
            return if e.use_stderr() { ExitCode::from(4) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
