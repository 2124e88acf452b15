//! Command-line front end for the correlation-filter outlier pipeline.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric failure,
//! 4 i/o error. The OUTLIER_THREADS environment variable caps internal
//! parallelism.

mod commands;
mod manifest;

use clap::{Parser, Subcommand};
use corrfilter::ErrorClass;

#[derive(Debug, Parser)]
#[command(
    name = "corrfilter",
    version,
    about = "Contextual outlier detection via correlation-template EM filters"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit correlation-template filters and write a combined report.
    Detect(commands::detect::DetectArgs),
    /// Plant labeled synthetic outliers in a dataset.
    Inject(commands::inject::InjectArgs),
    /// Evaluate detector scores against truth labels.
    Eval(commands::eval::EvalArgs),
    /// Run a comparison detector (OLS/Cook's distance or ratio statistic).
    Baseline(commands::baseline::BaselineArgs),
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    if let Ok(threads) = std::env::var("OUTLIER_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                {
                    eprintln!("warning: could not apply OUTLIER_THREADS: {e}");
                }
            }
            _ => eprintln!("warning: ignoring invalid OUTLIER_THREADS={threads:?}"),
        }
    }

    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Detect(args) => commands::detect::run(args),
        Command::Inject(args) => commands::inject::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Baseline(args) => commands::baseline::run(args),
    };

    if let Err(e) = result {
        eprintln!("error: {e}");
        let code = match e.class() {
            ErrorClass::Config => 2,
            ErrorClass::Numeric => 3,
            ErrorClass::Io => 4,
        };
        std::process::exit(code);
    }
}
