use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use calogero_cli::demo::demo;
use calogero_cli::table::Format;
use calogero_cli::{
    parse_scenario, run_scenario, verify_scenario, CliError, RunOptions, Scenario, VerificationReport, EXIT_CHECK_FAILED,
    EXIT_ERROR, EXIT_PASS,
};

/// Simulate the rational Calogero-Moser hierarchy and check its identities.
#[derive(Parser)]
#[command(name = "calogero", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its trajectory and report.
    Run {
        config: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Run the verification suite with the seed and tolerances of a scenario file.
    Verify {
        config: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Run a built-in scenario: two-body, three-body, discrete, chain or verify.
    Demo {
        name: String,
        #[command(flatten)]
        opts: Opts,
    },
}

#[derive(Args)]
struct Opts {
    /// Directory for the trajectory and report.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Multiply every tolerance by this factor.
    #[arg(long)]
    tolerance_scale: Option<f64>,
    /// Trajectory format: csv or json-lines.
    #[arg(long, default_value = "csv")]
    format: Format,
}

impl Opts {
    fn apply(&self, mut sc: Scenario) -> Result<(Scenario, RunOptions), CliError> {
        if let Some(seed) = self.seed {
            sc.seed = seed;
        }
        if let Some(t) = self.tolerance_scale {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(CliError::Validation { field: "--tolerance-scale".into(), message: "must be non-negative".into() });
            }
            sc.tolerance_scale = t;
        }
        Ok((sc, RunOptions { out_dir: self.out_dir.clone(), format: self.format }))
    }
}

fn print_report(report: &VerificationReport) {
    for e in &report.entries {
        println!("{} {} residual={:e} tolerance={:e}", if e.passed { "PASS" } else { "FAIL" }, e.name, e.residual, e.tolerance);
    }
    println!("{}/{} checks passed", report.summary.passed, report.summary.total);
}

fn execute(cli: Cli) -> Result<VerificationReport, CliError> {
    match cli.command {
        Command::Run { config, opts } => {
            let (sc, ro) = opts.apply(parse_scenario(&config)?)?;
            let (artifacts, report) = run_scenario(&sc, &ro)?;
            if let Some(t) = &artifacts.trajectory {
                println!("trajectory: {}", t.display());
            }
            println!("report: {}", artifacts.report.display());
            Ok(report)
        }
        Command::Verify { config, opts } => {
            let (sc, ro) = opts.apply(parse_scenario(&config)?)?;
            let (path, report) = verify_scenario(&sc, &ro)?;
            println!("report: {}", path.display());
            Ok(report)
        }
        Command::Demo { name, opts } => {
            let (sc, ro) = opts.apply(demo(&name)?)?;
            let (artifacts, report) = run_scenario(&sc, &ro)?;
            if let Some(t) = &artifacts.trajectory {
                println!("trajectory: {}", t.display());
            }
            println!("report: {}", artifacts.report.display());
            Ok(report)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(report) => {
            print_report(&report);
            ExitCode::from(if report.all_passed() { EXIT_PASS } else { EXIT_CHECK_FAILED } as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
