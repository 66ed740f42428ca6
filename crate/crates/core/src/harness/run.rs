use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{Prepared, RunConfig};
use crate::diagnostics::{blowup_evidence, BlowupEvidence, DiagnosticsRecord, Monitor, MonitorConfig};
use crate::error::{Error, Result};
use crate::stepper::{run_until, Outcome, SimState};

/// Bumped whenever a change to the scheme can alter output bytes.
pub const SCHEME_VERSION: &str = "1";

/// Column order of the time-series CSV.
pub const TIMESERIES_HEADER: &str =
    "t,dt,mass,u_max,v0,phi,psi,res_vmax,res_v0bound,res_logv,res_vgrad_far,res_vgrad_near,res_vgrad_U,res_barrier";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunOutcome {
    CompletedBounded,
    BlowupDetected,
    MaxStepsReached,
    SchemeError,
    ConfigError,
}

impl RunOutcome {
    pub fn label(self) -> &'static str {
        match self {
            RunOutcome::CompletedBounded => "completed_bounded",
            RunOutcome::BlowupDetected => "blowup_detected",
            RunOutcome::MaxStepsReached => "max_steps_reached",
            RunOutcome::SchemeError => "scheme_error",
            RunOutcome::ConfigError => "config_error",
        }
    }

    /// Small integer used as a colour index by the plot script.
    pub fn code(self) -> u8 {
        self as u8
    }
}

impl From<&Outcome> for RunOutcome {
    fn from(o: &Outcome) -> Self {
        match o {
            Outcome::CompletedBounded => RunOutcome::CompletedBounded,
            Outcome::BlowupDetected { .. } => RunOutcome::BlowupDetected,
            Outcome::MaxStepsReached => RunOutcome::MaxStepsReached,
        }
    }
}

/// The persisted summary of one run, stored as one NDJSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub digest: String,
    pub outcome: RunOutcome,
    pub t_final: f64,
    pub worst_residuals: BTreeMap<String, f64>,
    pub wall_ms: u64,
    pub scheme_version: String,
    pub m: f64,
    #[serde(rename = "M")]
    pub boundary_value: f64,
    #[serde(rename = "N")]
    pub cells: usize,
    pub dt_min: f64,
    pub u_blowup_factor: f64,
    pub tolerances: BTreeMap<String, f64>,
    pub final_record: Option<DiagnosticsRecord>,
    pub evidence: Option<BlowupEvidence>,
    pub detail: Option<Outcome>,
    pub message: Option<String>,
}

impl RunRecord {
    /// Monitors whose worst residual exceeded their tolerance.
    pub fn violations(&self) -> Vec<(&str, f64, f64)> {
        self.worst_residuals
            .iter()
            .filter_map(|(k, &v)| {
                let tol = *self.tolerances.get(k)?;
                (v > tol).then_some((k.as_str(), v, tol))
            })
            .collect()
    }
}

/// The configuration fields that determine simulation output.
#[derive(Serialize)]
struct DigestInput<'a> {
    scheme_version: &'a str,
    params: &'a crate::model::ProblemParams,
    initial: &'a crate::model::InitialProfile,
    cells: usize,
    stepper: &'a crate::stepper::StepperConfig,
    exponents: &'a crate::model::ExponentPolicy,
    cadence: f64,
}

/// SHA-256 of a canonical (key-sorted JSON) serialization of the
/// output-relevant configuration. Output location and sweep settings do not
/// participate.
pub fn config_digest(config: &RunConfig) -> String {
    let input = DigestInput {
        scheme_version: SCHEME_VERSION,
        params: &config.params,
        initial: &config.initial,
        cells: config.cells,
        stepper: &config.stepper,
        exponents: &config.exponents,
        cadence: config.output.cadence,
    };
    // serde_json's default map type is ordered, so going through `Value`
    // sorts every object's keys.
    let value = serde_json::to_value(&input).expect("configuration serializes");
    hex::encode(Sha256::digest(value.to_string().as_bytes()))
}

/// The result of a simulation held in memory.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub record: RunRecord,
    pub trajectory: Vec<DiagnosticsRecord>,
    pub monitors: MonitorConfig,
    pub final_state: Option<SimState>,
}

/// A record carrying only the configuration-derived fields.
pub(crate) fn placeholder_record(config: &RunConfig) -> RunRecord {
    RunRecord {
        digest: config_digest(config),
        outcome: RunOutcome::ConfigError,
        t_final: 0.0,
        worst_residuals: BTreeMap::new(),
        wall_ms: 0,
        scheme_version: SCHEME_VERSION.to_string(),
        m: config.params.exponent,
        boundary_value: config.params.boundary_value,
        cells: config.cells,
        dt_min: config.stepper.dt_min,
        u_blowup_factor: config.stepper.u_blowup_factor,
        tolerances: BTreeMap::new(),
        final_record: None,
        evidence: None,
        detail: None,
        message: None,
    }
}

/// Runs the configured simulation without touching the filesystem.
///
/// Configuration problems are returned as errors; a scheme failure during
/// time stepping is captured in the record with [`RunOutcome::SchemeError`].
pub fn simulate(config: &RunConfig) -> Result<Simulation> {
    let Prepared { grid, derived, monitors, u0 } = config.prepare()?;
    let start = Instant::now();
    let mut record = placeholder_record(config);
    let h = grid.h();
    for m in &monitors.enabled {
        record
            .tolerances
            .insert(m.name().to_string(), monitors.tolerance(*m, h, config.params.boundary_value));
    }
    let mut state = SimState::new(u0, &config.params, &grid, &config.stepper)?;
    let run = run_until(
        &mut state,
        &config.stepper,
        &config.params,
        &grid,
        &derived,
        &monitors,
        config.output.cadence,
    );
    record.wall_ms = start.elapsed().as_millis() as u64;
    record.t_final = state.t;
    let trajectory = match run {
        Ok((trajectory, outcome)) => {
            record.outcome = RunOutcome::from(&outcome);
            record.detail = Some(outcome);
            trajectory
        }
        Err(Error::Scheme(msg)) => {
            record.outcome = RunOutcome::SchemeError;
            record.message = Some(msg);
            Vec::new()
        }
        Err(e) => return Err(e),
    };
    for slice in &trajectory {
        for (monitor, residual) in &slice.residuals {
            let worst = record
                .worst_residuals
                .entry(monitor.name().to_string())
                .or_insert(f64::NEG_INFINITY);
            *worst = worst.max(residual.value);
        }
    }
    record.final_record = trajectory.last().cloned();
    if !trajectory.is_empty() {
        record.evidence = Some(blowup_evidence(
            &trajectory,
            monitors.exponents.alpha,
            &config.params,
            &derived,
        ));
    }
    Ok(Simulation { record, trajectory, monitors, final_state: Some(state) })
}

fn fmt_opt(out: &mut String, value: Option<f64>) {
    if let Some(v) = value {
        let _ = write!(out, "{v}");
    }
}

/// The time-series CSV for a trajectory.
pub fn timeseries_csv(trajectory: &[DiagnosticsRecord]) -> String {
    let mut out = String::from(TIMESERIES_HEADER);
    out.push('\n');
    for r in trajectory {
        let _ = write!(out, "{},{},{},{},{},{},{}", r.t, r.dt, r.mass, r.u_max, r.v0, r.phi, r.psi);
        for m in Monitor::ALL {
            out.push(',');
            fmt_opt(&mut out, r.residuals.get(&m).map(|x| x.value));
        }
        out.push('\n');
    }
    out
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory followed by a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Where a run's files live inside an output directory.
pub fn record_paths(dir: &Path, digest: &str) -> (PathBuf, PathBuf) {
    let runs = dir.join("runs");
    (runs.join(format!("{digest}.json")), runs.join(format!("{digest}.csv")))
}

/// Serializes a record as one NDJSON line.
pub fn record_line(record: &RunRecord) -> Result<String> {
    let mut line = serde_json::to_string(record)
        .map_err(|e| Error::Validation(format!("record does not serialize: {e}")))?;
    line.push('\n');
    Ok(line)
}

pub fn read_record(path: &Path) -> Result<RunRecord> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    serde_json::from_str(line)
        .map_err(|e| Error::Validation(format!("{}: malformed run record: {e}", path.display())))
}

/// Simulates and writes `runs/<digest>.json` and `runs/<digest>.csv` under
/// the configured output directory.
pub fn run_single(config: &RunConfig) -> Result<RunRecord> {
    let sim = simulate(config)?;
    let (json, csv) = record_paths(&config.output.dir, &sim.record.digest);
    write_atomic(&csv, timeseries_csv(&sim.trajectory).as_bytes())?;
    write_atomic(&json, record_line(&sim.record)?.as_bytes())?;
    Ok(sim.record)
}

/// Like [`run_single`], but reuses an existing record with the same digest.
/// Returns whether the simulation actually ran.
pub fn run_cached(config: &RunConfig) -> Result<(RunRecord, bool)> {
    let digest = config_digest(config);
    let (json, _) = record_paths(&config.output.dir, &digest);
    if json.exists() {
        if let Ok(record) = read_record(&json) {
            if record.digest == digest {
                return Ok((record, false));
            }
        }
    }
    Ok((run_single(config)?, true))
}
