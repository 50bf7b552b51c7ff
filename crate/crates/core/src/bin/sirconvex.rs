use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sirconvex::artifacts::{check_dir, ArtifactError, CHECK_REPORT};
use sirconvex::config::{ExperimentConfig, SCHEMA_VERSION};
use sirconvex::report::{ExperimentReport, RunReport};
use sirconvex::runner::{run, RunOptions};

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_DIAGNOSTIC: u8 = 3;

#[derive(Parser)]
#[command(
    name = "sirconvex",
    about = "Reproduction-number dynamics of heterogeneous SIR spreading"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment of a config file.
    Run {
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides the config output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Keep one trajectory row per this many steps.
        #[arg(long)]
        decimate: Option<u64>,
    },
    /// Re-check the trajectory files of an output directory.
    Check { dir: PathBuf },
    /// Print version information.
    Version,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command {
        Command::Version => {
            println!(
                "sirconvex {} (config schema {SCHEMA_VERSION})",
                env!("CARGO_PKG_VERSION")
            );
            ExitCode::SUCCESS
        }
        Command::Run {
            config,
            seed,
            threads,
            out_dir,
            decimate,
        } => run_command(
            config,
            RunOptions {
                out_dir,
                seed,
                decimate,
            },
            threads,
        ),
        Command::Check { dir } => check_command(dir),
    }
}

fn run_command(path: PathBuf, options: RunOptions, threads: Option<usize>) -> ExitCode {
    let config = match ExperimentConfig::load(&path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: config error in {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if threads == Some(0) {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(EXIT_USAGE);
    }
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    match pool.install(|| run(&config, &options)) {
        Ok(summary) => {
            for (name, took) in &summary.elapsed {
                eprintln!("{name}: {:.2}s", took.as_secs_f64());
            }
            print_report(&summary.report);
            println!("outputs in {}", summary.out_dir.display());
            verdict(&summary.report)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn check_command(dir: PathBuf) -> ExitCode {
    let reports = match check_dir(&dir) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return match e {
                ArtifactError::Missing(_) => ExitCode::from(EXIT_USAGE),
                ArtifactError::Io { ref source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
                    ExitCode::from(EXIT_USAGE)
                }
                _ => ExitCode::from(EXIT_RUNTIME),
            };
        }
    };
    let report = RunReport::new(None, reports);
    let path = dir.join(CHECK_REPORT);
    if let Err(e) = std::fs::write(&path, report.to_json()) {
        eprintln!("error: writing {}: {e}", path.display());
        return ExitCode::from(EXIT_RUNTIME);
    }
    print_report(&report);
    println!("report written to {}", path.display());
    verdict(&report)
}

fn print_experiment(e: &ExperimentReport) {
    let status = if e.passed { "PASS" } else { "FAIL" };
    println!("{status} {} ({}, {} checks)", e.name, e.kind, e.checks.len());
    for check in e.failures() {
        let at = check.location.map(|n| format!(" at n = {n}")).unwrap_or_default();
        println!(
            "  {}: {:e} exceeds tolerance {:e}{at}",
            check.name, check.value, check.tolerance
        );
    }
}

fn print_report(report: &RunReport) {
    for e in &report.experiments {
        print_experiment(e);
    }
}

fn verdict(report: &RunReport) -> ExitCode {
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_DIAGNOSTIC)
    }
}
