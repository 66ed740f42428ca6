//! Configuration files, single runs, `(m, M)` sweeps with threshold
//! bisection, persisted run records and report generation.
//!
//! A run writes `runs/<digest>.json` (one NDJSON line) and
//! `runs/<digest>.csv` (the diagnostics time series) under the configured
//! output directory. The digest hashes every configuration field that can
//! change the output, so identical configurations share files and sweeps
//! resume by skipping digests that already have a record.

mod config;
mod report;
mod run;
mod selftest;
mod sweep;

pub use config::{
    parse_config, Bracket, OutputConfig, Prepared, RunConfig, SweepSpec, DEFAULT_CADENCE, DEFAULT_CELLS,
};
pub use report::{emit_report, load_records, ReportFiles};
pub use run::{
    config_digest, read_record, record_line, record_paths, run_cached, run_single, simulate, timeseries_csv,
    write_atomic, RunOutcome, RunRecord, Simulation, SCHEME_VERSION, TIMESERIES_HEADER,
};
pub use selftest::{selftest, CheckKind, SelftestCheck};
pub use sweep::{
    estimate_blowup_threshold, run_sweep, worker_count, DiagramCell, PhaseDiagram, SweepReport,
    ThresholdEstimate, THREADS_ENV,
};
