use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Bracket, RunConfig};
use super::run::{run_cached, RunOutcome, RunRecord};
use crate::error::{Error, Result};

/// Environment variable that overrides the configured worker count.
pub const THREADS_ENV: &str = "CHEMO_THREADS";

/// Doublings/halvings tried on each side when a bracket is invalid.
const MAX_WIDENINGS: usize = 6;
const MAX_BISECTIONS: usize = 60;

/// One `(m, M)` point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramCell {
    pub m: f64,
    #[serde(rename = "M")]
    pub boundary_value: f64,
    pub outcome: RunOutcome,
    pub t_final: f64,
    pub u_max: Option<f64>,
    pub phi_slope: Option<f64>,
    pub digest: String,
}

impl DiagramCell {
    pub fn from_record(record: &RunRecord) -> Self {
        Self {
            m: record.m,
            boundary_value: record.boundary_value,
            outcome: record.outcome,
            t_final: record.t_final,
            u_max: record.final_record.as_ref().map(|r| r.u_max),
            phi_slope: record
                .evidence
                .as_ref()
                .and_then(|e| e.summary())
                .map(|s| s.phi_slope),
            digest: record.digest.clone(),
        }
    }
}

/// Bisection estimate of the smallest `M` that blows up at a fixed `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    pub m: f64,
    /// Midpoint of the final bracket.
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    /// Resolution the classifier ran at.
    pub cells: usize,
    pub dt_min: f64,
    pub u_blowup_factor: f64,
    /// Set when an outcome was neither bounded nor blow-up.
    pub anomaly: Option<String>,
    /// Bracket adjustments made before bisecting.
    pub notes: Vec<String>,
    pub records: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub cells: Vec<DiagramCell>,
    pub thresholds: Vec<ThresholdEstimate>,
}

impl PhaseDiagram {
    /// Builds a diagram from stored records, ordered by `(m, M)`.
    pub fn from_records(records: &[RunRecord]) -> Self {
        let mut cells: Vec<DiagramCell> = records.iter().map(DiagramCell::from_record).collect();
        cells.sort_by(|a, b| {
            a.m.total_cmp(&b.m)
                .then(a.boundary_value.total_cmp(&b.boundary_value))
                .then(a.digest.cmp(&b.digest))
        });
        Self { cells, thresholds: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty() && self.thresholds.is_empty()
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("m,M,outcome,code,t_final,u_max,phi_slope,digest\n");
        for c in &self.cells {
            let _ = write!(out, "{},{},{},{},{},", c.m, c.boundary_value, c.outcome.label(), c.outcome.code(), c.t_final);
            if let Some(u) = c.u_max {
                let _ = write!(out, "{u}");
            }
            out.push(',');
            if let Some(s) = c.phi_slope {
                let _ = write!(out, "{s}");
            }
            let _ = writeln!(out, ",{}", c.digest);
        }
        out
    }

    pub fn thresholds_csv(&self) -> String {
        let mut out = String::from("m,M_hat,M_lo,M_hi,N,dt_min,u_blowup_factor,anomaly\n");
        for t in &self.thresholds {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                t.m,
                t.estimate,
                t.lo,
                t.hi,
                t.cells,
                t.dt_min,
                t.u_blowup_factor,
                t.anomaly.as_deref().unwrap_or("").replace(',', ";")
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub diagram: PhaseDiagram,
    pub records: Vec<RunRecord>,
    /// Simulations actually executed; the rest came from stored records.
    pub executed: usize,
}

/// Worker count: `CHEMO_THREADS` if set, else the configured value, else
/// the machine's parallelism.
pub fn worker_count(configured: Option<usize>) -> Result<usize> {
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        return raw
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::config(THREADS_ENV, format!("must be a positive integer (got `{raw}`)")));
    }
    Ok(configured.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
}

/// Runs one cell, turning per-cell configuration failures into records.
fn run_cell(template: &RunConfig, m: f64, boundary_value: f64) -> Result<(RunRecord, bool)> {
    let config = template.at(m, boundary_value);
    match run_cached(&config) {
        Err(Error::Io { path, source }) => Err(Error::Io { path, source }),
        Err(e) => {
            let mut record = super::run::placeholder_record(&config);
            record.outcome = RunOutcome::ConfigError;
            record.message = Some(e.to_string());
            Ok((record, false))
        }
        ok => ok,
    }
}

/// Executes every `(m, M)` cell and every requested threshold bisection.
///
/// Cells are distributed over a worker pool; results are assembled in grid
/// order so the diagram does not depend on completion order.
pub fn run_sweep(config: &RunConfig) -> Result<SweepReport> {
    let spec = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("[sweep]", "the configuration has no sweep section"))?;
    let workers = worker_count(spec.workers)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Validation(format!("cannot start worker pool: {e}")))?;

    let points: Vec<(f64, f64)> = spec
        .m_values
        .iter()
        .flat_map(|&m| spec.boundary_values.iter().map(move |&b| (m, b)))
        .collect();
    let results: Vec<Result<(RunRecord, bool)>> =
        pool.install(|| points.par_iter().map(|&(m, b)| run_cell(config, m, b)).collect());

    let mut records = Vec::with_capacity(points.len());
    let mut executed = 0;
    for r in results {
        let (record, ran) = r?;
        executed += usize::from(ran);
        records.push(record);
    }
    let mut diagram = PhaseDiagram {
        cells: records.iter().map(DiagramCell::from_record).collect(),
        thresholds: Vec::new(),
    };

    if let Some(bracket) = spec.bracket {
        let limit = config.params.blowup_exponent_limit();
        let ms: Vec<f64> = spec.m_values.iter().copied().filter(|&m| m > 0.0 && m < limit).collect();
        let estimates: Vec<Result<(ThresholdEstimate, usize)>> = pool.install(|| {
            ms.par_iter()
                .map(|&m| estimate_blowup_threshold_counted(m, config, bracket))
                .collect()
        });
        for e in estimates {
            let (estimate, ran) = e?;
            executed += ran;
            diagram.thresholds.push(estimate);
        }
    }
    Ok(SweepReport { diagram, records, executed })
}

/// Bisects on the run outcome for the smallest blowing-up `M` at fixed `m`.
///
/// The bracket is validated first: `lo` must complete bounded and `hi` must
/// blow up. Otherwise the bracket is widened (and the widening noted) up to
/// a fixed number of times.
pub fn estimate_blowup_threshold(m: f64, template: &RunConfig, bracket: Bracket) -> Result<ThresholdEstimate> {
    estimate_blowup_threshold_counted(m, template, bracket).map(|(e, _)| e)
}

fn estimate_blowup_threshold_counted(
    m: f64,
    template: &RunConfig,
    bracket: Bracket,
) -> Result<(ThresholdEstimate, usize)> {
    let limit = template.params.blowup_exponent_limit();
    if !(m > 0.0 && m < limit) {
        return Err(Error::config("m", format!("threshold bisection needs 0 < m < 2/n = {limit} (got {m})")));
    }
    if !(bracket.lo > 0.0 && bracket.lo < bracket.hi) {
        return Err(Error::config("M_lo", "0 < M_lo < M_hi"));
    }
    let mut executed = 0;
    let mut records = Vec::new();
    let mut notes = Vec::new();
    let mut probe = |b: f64, records: &mut Vec<RunRecord>| -> Result<RunOutcome> {
        let (record, ran) = run_cached(&template.at(m, b))?;
        executed += usize::from(ran);
        let outcome = record.outcome;
        records.push(record);
        Ok(outcome)
    };
    let mut estimate = ThresholdEstimate {
        m,
        estimate: f64::NAN,
        lo: bracket.lo,
        hi: bracket.hi,
        cells: template.cells,
        dt_min: template.stepper.dt_min,
        u_blowup_factor: template.stepper.u_blowup_factor,
        anomaly: None,
        notes: Vec::new(),
        records: Vec::new(),
    };

    let (mut lo, mut hi) = (bracket.lo, bracket.hi);
    let mut widen = |start: f64, factor: f64, want: RunOutcome, side: &str, records: &mut Vec<RunRecord>| -> Result<std::result::Result<f64, String>> {
        let mut x = start;
        for attempt in 0..=MAX_WIDENINGS {
            let got = probe(x, records)?;
            if got == want {
                if attempt > 0 {
                    notes.push(format!("M_{side} widened from {start} to {x}"));
                }
                return Ok(Ok(x));
            }
            if !matches!(got, RunOutcome::CompletedBounded | RunOutcome::BlowupDetected) {
                return Ok(Err(format!("M = {x} gave {}", got.label())));
            }
            x *= factor;
        }
        Ok(Err(format!("no {} outcome found by widening M_{side} from {start}", want.label())))
    };
    match widen(lo, 0.5, RunOutcome::CompletedBounded, "lo", &mut records)? {
        Ok(x) => lo = x,
        Err(msg) => estimate.anomaly = Some(msg),
    }
    if estimate.anomaly.is_none() {
        match widen(hi, 2.0, RunOutcome::BlowupDetected, "hi", &mut records)? {
            Ok(x) => hi = x,
            Err(msg) => estimate.anomaly = Some(msg),
        }
    }
    if lo >= hi && estimate.anomaly.is_none() {
        estimate.anomaly = Some(format!("bracket collapsed after widening: lo = {lo}, hi = {hi}"));
    }

    let mut iterations = 0;
    while estimate.anomaly.is_none() && hi - lo > bracket.tol_rel * hi && iterations < MAX_BISECTIONS {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        match probe(mid, &mut records)? {
            RunOutcome::BlowupDetected => hi = mid,
            RunOutcome::CompletedBounded => lo = mid,
            other => {
                estimate.anomaly = Some(format!("M = {mid} gave {}", other.label()));
            }
        }
    }
    estimate.lo = lo;
    estimate.hi = hi;
    estimate.estimate = 0.5 * (lo + hi);
    estimate.notes = notes;
    estimate.records = records;
    Ok((estimate, executed))
}
