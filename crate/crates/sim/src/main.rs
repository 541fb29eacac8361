use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tether_sim::experiments::{self, RESOLVED_SCENARIO_FILE};
use tether_sim::scenario::{DsmKind, Experiment, GovernorKind};
use tether_sim::telemetry_io::read_telemetry;
use tether_sim::{Report, Scenario, SimError};

/// Tethered-quadrotor simulator with certificate auditing.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and audit it.
    Simulate {
        scenario: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Run one of the canned experiments on a scenario.
    Experiment {
        #[arg(value_enum)]
        name: Experiment,
        scenario: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Re-audit a telemetry file.
    Audit {
        telemetry: PathBuf,
        /// Scenario the telemetry came from [default: scenario.resolved.toml next to the file].
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Directory for report.toml [default: the telemetry file's directory].
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunOpts {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Plant and controller step (s).
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, value_enum)]
    governor: Option<GovernorKind>,
    #[arg(long, value_enum)]
    dsm: Option<DsmKind>,
}

fn load(path: &Path, opts: &RunOpts) -> Result<Scenario, SimError> {
    let mut sc = Scenario::load(path)?;
    sc.apply_overrides(opts.seed, opts.dt, opts.governor, opts.dsm);
    Ok(sc)
}

fn print_report(report: &Report) {
    for p in &report.property {
        let verdict = match (p.evaluated, p.passed) {
            (false, _) => "skip",
            (true, true) => "pass",
            (true, false) => "FAIL",
        };
        println!(
            "{verdict:4}  {:<26} worst margin {:>12.4e}  violations {}",
            p.name, p.worst_margin, p.violations
        );
    }
    for (k, v) in &report.metrics {
        println!("      {k:<26} {v}");
    }
    if let Some(b) = report.run.as_ref().and_then(|r| r.first_broken.as_ref()) {
        println!("first broken: {b}");
    }
    println!("{}: {}", report.experiment, if report.passed { "PASS" } else { "FAIL" });
}

fn run(cli: Cli) -> Result<Report, SimError> {
    match cli.command {
        Command::Simulate { scenario, opts } => {
            let sc = load(&scenario, &opts)?;
            experiments::execute(Experiment::Run, &sc, &opts.out)
        }
        Command::Experiment { name, scenario, opts } => {
            let sc = load(&scenario, &opts)?;
            experiments::execute(name, &sc, &opts.out)
        }
        Command::Audit { telemetry, scenario, out } => {
            let dir = telemetry.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
            let sc = Scenario::load(&scenario.unwrap_or_else(|| dir.join(RESOLVED_SCENARIO_FILE)))?;
            let log = read_telemetry(&telemetry)?;
            let report = experiments::audit_file(&sc, &log)?;
            let out = out.unwrap_or(dir);
            std::fs::create_dir_all(&out).map_err(|e| SimError::io(&out, e))?;
            report.write(&out.join("audit_report.toml"))?;
            Ok(report)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(report) => {
            print_report(&report);
            ExitCode::from(if report.passed { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
