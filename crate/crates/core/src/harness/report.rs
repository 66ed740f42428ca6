use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::run::{read_record, write_atomic, RunOutcome, RunRecord};
use super::sweep::PhaseDiagram;
use crate::error::{Error, Result};

/// Files written by [`emit_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub summary: PathBuf,
    pub phase_diagram: PathBuf,
    pub thresholds: Option<PathBuf>,
    pub plot_script: PathBuf,
}

/// Loads every `runs/*.json` record under `dir`, sorted by file name.
pub fn load_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let runs = dir.join("runs");
    let entries = fs::read_dir(&runs).map_err(|e| Error::io(&runs, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_record(p)).collect()
}

fn summary_text(records: &[RunRecord], diagram: &PhaseDiagram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "runs: {}", records.len());
    for r in records {
        let _ = writeln!(
            out,
            "\n{}  m = {}  M = {}  N = {}  outcome = {}  t_final = {}",
            r.digest,
            r.m,
            r.boundary_value,
            r.cells,
            r.outcome.label(),
            r.t_final
        );
        if let Some(msg) = &r.message {
            let _ = writeln!(out, "  message: {msg}");
        }
        if !r.worst_residuals.is_empty() {
            let _ = writeln!(out, "  {:<12} {:>24} {:>24}  status", "monitor", "worst residual", "tolerance");
            for (name, worst) in &r.worst_residuals {
                let tol = r.tolerances.get(name).copied();
                let status = match tol {
                    Some(t) if *worst > t => "VIOLATED",
                    Some(_) => "ok",
                    None => "-",
                };
                let tol = tol.map_or_else(|| "-".to_string(), |t| format!("{t:e}"));
                let _ = writeln!(out, "  {name:<12} {:>24} {tol:>24}  {status}", format!("{worst:e}"));
            }
        }
        if r.outcome == RunOutcome::BlowupDetected {
            match r.evidence.as_ref().and_then(|e| e.summary()) {
                Some(s) => {
                    let _ = writeln!(out, "  phi slope (final half): {:e}", s.phi_slope);
                    let _ = writeln!(out, "  psi floor {:e}, persistent: {}", s.psi_floor, s.psi_persistent);
                    if let Some(b) = s.phi_bound_residual {
                        let _ = writeln!(out, "  worst phi minus bound: {b:e}");
                    }
                    let _ = writeln!(out, "  doubling  interval");
                    for (k, dt) in s.doubling_times.iter().enumerate() {
                        let _ = writeln!(out, "  {:>8}  {dt:e}", k + 1);
                    }
                }
                None => {
                    let _ = writeln!(out, "  blow-up evidence: insufficient data");
                }
            }
        }
    }
    if !diagram.thresholds.is_empty() {
        let _ = writeln!(out, "\nblow-up thresholds");
        for t in &diagram.thresholds {
            let _ = write!(
                out,
                "  m = {}: M_hat = {} in [{}, {}] (N = {}, dt_min = {}, u_blowup_factor = {})",
                t.m, t.estimate, t.lo, t.hi, t.cells, t.dt_min, t.u_blowup_factor
            );
            if let Some(a) = &t.anomaly {
                let _ = write!(out, "  ANOMALY: {a}");
            }
            out.push('\n');
            for note in &t.notes {
                let _ = writeln!(out, "    {note}");
            }
        }
    }
    out
}

fn plot_script(records: &[RunRecord], has_thresholds: bool) -> String {
    let files: Vec<String> = records
        .iter()
        .filter(|r| r.final_record.is_some())
        .map(|r| format!("runs/{}.csv", r.digest))
        .collect();
    let mut out = String::new();
    out.push_str("# gnuplot script; run from the report directory\n");
    out.push_str("set datafile separator \",\"\nset terminal pngcairo size 1200,1000\n");
    let _ = writeln!(out, "runs = \"{}\"", files.join(" "));
    out.push_str(
        "set output \"timeseries.png\"\n\
         set multiplot layout 3,1\n\
         set logscale y\n\
         set ylabel \"u_max\"\n\
         plot for [f in runs] f using 1:4 with lines notitle\n\
         unset logscale y\n\
         set ylabel \"phi\"\n\
         plot for [f in runs] f using 1:6 with lines notitle\n\
         set ylabel \"v(0)\"\n\
         set xlabel \"t\"\n\
         plot for [f in runs] f using 1:5 with lines notitle\n\
         unset multiplot\n\
         set output \"phase_map.png\"\n\
         set xlabel \"m\"\n\
         set ylabel \"M\"\n\
         set logscale y\n\
         set palette maxcolors 5\n\
         set cbrange [0:4]\n\
         set cbtics (\"bounded\" 0, \"blow-up\" 1, \"max steps\" 2, \"scheme error\" 3, \"config error\" 4)\n",
    );
    if has_thresholds {
        out.push_str(
            "plot \"phase_diagram.csv\" using 1:2:4 skip 1 with points pt 7 ps 2 palette notitle, \\\n     \
             \"thresholds.csv\" using 1:2 skip 1 with linespoints lw 2 title \"M_hat\"\n",
        );
    } else {
        out.push_str("plot \"phase_diagram.csv\" using 1:2:4 skip 1 with points pt 7 ps 2 palette notitle\n");
    }
    out
}

/// Writes `summary.txt`, `phase_diagram.csv`, `thresholds.csv` (when
/// thresholds were estimated) and `plot.gp` into `dir`.
pub fn emit_report(dir: &Path, records: &[RunRecord], diagram: &PhaseDiagram) -> Result<ReportFiles> {
    if records.is_empty() || diagram.is_empty() {
        return Err(Error::Validation("nothing to report: no run records".into()));
    }
    let files = ReportFiles {
        summary: dir.join("summary.txt"),
        phase_diagram: dir.join("phase_diagram.csv"),
        thresholds: (!diagram.thresholds.is_empty()).then(|| dir.join("thresholds.csv")),
        plot_script: dir.join("plot.gp"),
    };
    write_atomic(&files.summary, summary_text(records, diagram).as_bytes())?;
    write_atomic(&files.phase_diagram, diagram.csv().as_bytes())?;
    if let Some(path) = &files.thresholds {
        write_atomic(path, diagram.thresholds_csv().as_bytes())?;
    }
    write_atomic(&files.plot_script, plot_script(records, files.thresholds.is_some()).as_bytes())?;
    Ok(files)
}
