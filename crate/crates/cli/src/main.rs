use clap::{Parser, Subcommand};
use explorer_cli::{cmd_compare, cmd_run, CliError, CSV_SCHEMAS};
use mrexplore::config::Method;
use std::path::PathBuf;
use std::process::ExitCode;

/// Multi-robot frontier exploration on occupancy-grid maps.
///
/// Logging verbosity comes from EXPLORER_LOG (error, warn, info, debug).
/// Exit codes: 0 success, 1 config error, 2 runtime error.
#[derive(Parser)]
#[command(name = "explorer", version, after_long_help = CSV_SCHEMAS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write metrics and final maps.
    #[command(after_long_help = CSV_SCHEMAS)]
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every method under every seed and summarize.
    #[command(after_long_help = CSV_SCHEMAS)]
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated: proposed, mags, greedy_frontier.
        #[arg(long, value_delimiter = ',', required = true)]
        methods: Vec<Method>,
        /// Comma-separated RNG seeds.
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EXPLORER_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // Bad arguments are reported like config errors; help and version exit normally.
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Run { config, out } => cmd_run(&config, &out).map(|m| {
            println!(
                "final coverage {:.2}% after {} ticks; wrote {}",
                m.final_coverage(),
                m.ticks.len(),
                out.display()
            );
        }),
        Command::Compare { config, methods, seeds, out } => {
            cmd_compare(&config, &methods, &seeds, &out).map(|report| {
                print!("{}", report.table());
            })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("explorer: {e}");
            ExitCode::from(CliError::exit_code(&e) as u8)
        }
    }
}
