use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use halfsphere_ot_cli::{configure_threads, execute, Experiment, Invocation};

/// Runs one half-sphere transport experiment and writes its report.
#[derive(Debug, Parser)]
#[command(name = "halfsphere-ot", version)]
struct Args {
    /// Experiment to run.
    experiment: Experiment,
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: the config's output_dir, else hsot-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Record wall-clock durations in report.json.
    #[arg(long)]
    timings: bool,
    /// Skip the SVG plots.
    #[arg(long)]
    no_plots: bool,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    if let Err(e) = configure_threads(std::env::var("HSOT_THREADS").ok().as_deref()) {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    let inv = Invocation {
        experiment: args.experiment,
        config: args.config,
        out: args.out,
        seed: args.seed,
        timings: args.timings,
        plots: !args.no_plots,
    };
    match execute(&inv) {
        Ok(report) => {
            for a in &report.assertions {
                let status = if a.passed { "PASS" } else { "FAIL" };
                println!("{status} {} (tol {:e}): {}", a.name, a.tolerance, a.detail);
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
