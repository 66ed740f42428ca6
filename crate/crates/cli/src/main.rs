use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chemolab::harness::{
    emit_report, estimate_blowup_threshold, load_records, parse_config, run_single, run_sweep, selftest,
    CheckKind, PhaseDiagram, RunConfig, RunOutcome,
};
use chemolab::Error;
use clap::{Parser, Subcommand};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_SCHEME: u8 = 3;
const EXIT_MONITOR: u8 = 4;

/// Radial chemotaxis-consumption simulations with inequality monitors.
#[derive(Parser)]
#[command(name = "chemolab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single simulation and write its record, time series and report.
    Run { config: PathBuf },
    /// Run every (m, M) point of the [sweep] section and write the phase diagram.
    Sweep { config: PathBuf },
    /// Bisect for the smallest blowing-up M at a fixed m using M_lo/M_hi/tol_rel.
    Threshold {
        config: PathBuf,
        #[arg(long)]
        m: f64,
    },
    /// Regenerate the summary, phase diagram and plot script from stored records.
    Report { dir: PathBuf },
    /// Run the analytic-oracle and monitor self checks.
    Selftest,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Regime(_) | Error::Domain(_) | Error::Validation(_) => EXIT_CONFIG,
        Error::Scheme(_) => EXIT_SCHEME,
        Error::Io { .. } => EXIT_FAILURE,
    }
}

fn load(path: &Path) -> Result<RunConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    parse_config(&text)
}

fn cmd_run(path: &Path) -> Result<u8, Error> {
    let config = load(path)?;
    let record = run_single(&config)?;
    let diagram = PhaseDiagram::from_records(std::slice::from_ref(&record));
    let files = emit_report(&config.output.dir, std::slice::from_ref(&record), &diagram)?;
    println!(
        "{} {} t_final = {} ({} ms)",
        record.digest,
        record.outcome.label(),
        record.t_final,
        record.wall_ms
    );
    for (name, worst, tol) in record.violations() {
        println!("monitor {name} exceeded tolerance: {worst:e} > {tol:e}");
    }
    println!("summary: {}", files.summary.display());
    if record.outcome == RunOutcome::SchemeError {
        eprintln!("scheme error: {}", record.message.as_deref().unwrap_or("unknown"));
        return Ok(EXIT_SCHEME);
    }
    Ok(0)
}

fn cmd_sweep(path: &Path) -> Result<u8, Error> {
    let config = load(path)?;
    let report = run_sweep(&config)?;
    let mut records = report.records.clone();
    for t in &report.diagram.thresholds {
        records.extend(t.records.iter().cloned());
    }
    let files = emit_report(&config.output.dir, &records, &report.diagram)?;
    println!(
        "{} cells, {} runs executed, {} thresholds",
        report.diagram.cells.len(),
        report.executed,
        report.diagram.thresholds.len()
    );
    println!("phase diagram: {}", files.phase_diagram.display());
    Ok(0)
}

fn cmd_threshold(path: &Path, m: f64) -> Result<u8, Error> {
    let config = load(path)?;
    let bracket = config
        .sweep
        .as_ref()
        .and_then(|s| s.bracket)
        .ok_or_else(|| Error::Config {
            key: "M_lo".into(),
            constraint: "threshold needs M_lo and M_hi in [sweep]".into(),
        })?;
    let estimate = estimate_blowup_threshold(m, &config, bracket)?;
    for note in &estimate.notes {
        println!("{note}");
    }
    println!(
        "m = {}: M_hat = {} in [{}, {}] after {} runs (N = {}, dt_min = {}, u_blowup_factor = {})",
        estimate.m,
        estimate.estimate,
        estimate.lo,
        estimate.hi,
        estimate.records.len(),
        estimate.cells,
        estimate.dt_min,
        estimate.u_blowup_factor
    );
    if let Some(a) = &estimate.anomaly {
        eprintln!("bracket anomaly: {a}");
        return Ok(EXIT_FAILURE);
    }
    Ok(0)
}

fn cmd_report(dir: &Path) -> Result<u8, Error> {
    let records = load_records(dir)?;
    let diagram = PhaseDiagram::from_records(&records);
    let files = emit_report(dir, &records, &diagram)?;
    println!("{} records; summary: {}", records.len(), files.summary.display());
    Ok(0)
}

fn cmd_selftest() -> Result<u8, Error> {
    let checks = selftest()?;
    let mut code = 0;
    for c in &checks {
        println!("{} {:<24} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        if !c.passed {
            code = match (code, c.kind) {
                (_, CheckKind::Monitor) => EXIT_MONITOR,
                (0, CheckKind::Oracle) => EXIT_FAILURE,
                (prev, _) => prev,
            };
        }
    }
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => cmd_run(config),
        Command::Sweep { config } => cmd_sweep(config),
        Command::Threshold { config, m } => cmd_threshold(config, *m),
        Command::Report { dir } => cmd_report(dir),
        Command::Selftest => cmd_selftest(),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
