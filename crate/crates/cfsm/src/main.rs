use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cfsm::harness::{fo_report_from_path, run_experiment, write_csv_file, ExperimentConfig};
use cfsm::verify;

#[derive(Parser)]
#[command(name = "cfsm", version, about = "Continual finite-sum minimization toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config and write its results CSV.
    Run { config: PathBuf },
    /// Run verification suites and print one report line per suite.
    Verify {
        /// Suite name (unbias, aggregate, sparsity, drift, variance,
        /// adversarial) or "all".
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Demonstrate the FO lower bound on the adversarial instance.
    LowerBound {
        /// Number of stages; the demo targets the final one.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Summarize final FO costs and pairwise ratios from a results CSV.
    FoReport { csv: PathBuf },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> cfsm::Result<ExitCode> {
    match cli.command {
        Command::Run { config } => {
            let config = ExperimentConfig::from_path(&config)?;
            let outcome = run_experiment(&config)?;
            write_csv_file(&config.run.output, &outcome)?;
            for method in &outcome.methods {
                let excluded = if method.excluded.is_empty() {
                    String::new()
                } else {
                    format!(", {} seeds excluded", method.excluded.len())
                };
                println!(
                    "{}: {} FOs over {} stages ({} runs{excluded})",
                    method.method,
                    method.total_fos,
                    method.rows.len(),
                    method.used_runs,
                );
            }
            if let Some(p) = outcome.sgd_parity {
                println!(
                    "sgd FO match: {} steps per stage vs csvrg total {} (relative error {:.2e})",
                    p.sgd_per_stage, p.csvrg_total, p.relative_error
                );
            }
            println!("wrote {}", config.run.output.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { suite } => {
            let reports = if suite == "all" {
                verify::run_all()?
            } else {
                vec![verify::run_suite(&suite)?]
            };
            println!("suite,cases,max_violation,tolerance,pass");
            let mut all_pass = true;
            for report in &reports {
                println!("{}", report.line());
                all_pass &= report.pass;
            }
            Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::LowerBound { n, seed } => match verify::lowerbound_demo(n, seed) {
            Ok(demo) => {
                println!(
                    "stage,measured_gap,analytic_bound,hidden_component,hidden_queried,fos_at_target"
                );
                println!(
                    "{},{:.9e},{:.9e},{},{},{}",
                    demo.stage,
                    demo.measured_gap,
                    demo.analytic_bound,
                    demo.hidden_component,
                    demo.hidden_queried,
                    demo.fos_at_target
                );
                Ok(ExitCode::SUCCESS)
            }
            Err(e @ cfsm::Error::Numeric(_)) => {
                eprintln!("lower bound violated: {e}");
                Ok(ExitCode::from(1))
            }
            Err(e) => Err(e),
        },
        Command::FoReport { csv } => {
            let report = fo_report_from_path(&csv)?;
            print!("{}", report.render());
            Ok(ExitCode::SUCCESS)
        }
    }
}
