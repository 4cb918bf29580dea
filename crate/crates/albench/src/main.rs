//! Command-line interface: run campaigns, regenerate reports, validate
//! configs, and list the builtin simulators.
//!
//! Exit codes: 0 success, 1 validation error, 2 runtime/simulator failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use albench::bench::{summary_from_detail, summary_text};
use albench::campaign::{parse_config, run_campaign};
use albench::sim::{builtin_analytic, BUILTIN_NAMES};
use albench::Error;

#[derive(Parser)]
#[command(name = "albench", version, about = "Active-learning surrogate benchmarking")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a campaign from a JSON config file.
    Run {
        config: PathBuf,
        /// Parallel worker threads for independent runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate summary.csv from an existing run directory's detail.csv.
    Report {
        run_dir: PathBuf,
        /// Query counts to summarize.
        #[arg(long, value_delimiter = ',', default_values_t = [5, 10, 20])]
        marks: Vec<usize>,
        /// Reported means above this value are written as the cap.
        #[arg(long, default_value_t = 100.0)]
        cap: f64,
    },
    /// Parse and validate a config without running anything.
    Validate { config: PathBuf },
    /// List the builtin analytic simulators.
    ListSims,
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::InvalidRunConfig(_)
        | Error::IncompatibleStrategy { .. }
        | Error::UnknownSimulator(_)
        | Error::InvalidDimension { .. }
        | Error::InvalidPoolSpec(_)
        | Error::InvalidKernel(_)
        | Error::InvalidInitialDesign { .. } => 1,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<(), (String, u8)> {
    let fail = |e: Error| (e.to_string(), exit_code_for(&e));
    match cli.command {
        Cmd::Run { config, jobs, out } => {
            let mut cfg = parse_config(&config).map_err(fail)?;
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            let result = run_campaign(&cfg, jobs).map_err(fail)?;
            println!(
                "wrote {} summary rows under {}",
                result.summary.len(),
                result.output_dir.display()
            );
            if !result.failures.is_empty() {
                for f in &result.failures {
                    eprintln!("failed: {f}");
                }
                return Err((format!("{} cell(s) failed", result.failures.len()), 2));
            }
            Ok(())
        }
        Cmd::Report { run_dir, marks, cap } => {
            let detail_path = run_dir.join("detail.csv");
            let detail = std::fs::read_to_string(&detail_path)
                .map_err(|e| fail(Error::io(&detail_path, e)))?;
            let rows = summary_from_detail(&detail, &marks, cap).map_err(fail)?;
            let text = summary_text(&rows);
            let summary_path = run_dir.join("summary.csv");
            std::fs::write(&summary_path, &text).map_err(|e| fail(Error::io(&summary_path, e)))?;
            print!("{text}");
            Ok(())
        }
        Cmd::Validate { config } => {
            parse_config(&config).map_err(fail)?;
            println!("ok");
            Ok(())
        }
        Cmd::ListSims => {
            for name in BUILTIN_NAMES {
                let sim = builtin_analytic(name).expect("builtin exists");
                let dims: Vec<String> = sim
                    .space()
                    .dims()
                    .iter()
                    .map(|d| format!("{} in [{}, {}]", d.name, d.lower, d.upper))
                    .collect();
                println!("{name}: {} <- {}", sim.response_label(), dims.join(", "));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err((msg, code)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
