//! Strict `key = value` configuration files with `[section]` headers.
//!
//! ```text
//! [problem]
//! n = 3
//! R = 1
//! M = 1
//! m = 1
//!
//! [initial]
//! kind = constant
//! amplitude = 3
//! ```
//!
//! Comments start with `#` or `;`. Every key belongs to exactly one section;
//! unknown keys, duplicates and keys in the wrong section are errors.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::diagnostics::MonitorConfig;
use crate::error::{Error, Result};
use crate::grid::{Field, RadialGrid};
use crate::model::{
    choose_exponents, BarrierMode, DerivedConstants, ExponentPolicy, InitialProfile,
    ProblemParams,
};
use crate::stepper::StepperConfig;

const SECTIONS: &[(&str, &[&str])] = &[
    ("problem", &["n", "R", "M", "m", "k_D", "K_D"]),
    ("initial", &["kind", "amplitude", "center_radius", "width", "inner", "outer"]),
    ("grid", &["N"]),
    (
        "stepper",
        &["cfl", "dt_init", "dt_min", "dt_max", "t_end", "u_blowup_factor", "picard_iters", "growth_clamp"],
    ),
    ("monitors", &["alpha", "beta", "gamma", "c_star", "delta0"]),
    ("sweep", &["m_values", "M_values", "M_lo", "M_hi", "tol_rel", "workers"]),
    ("output", &["cadence", "dir"]),
];

pub const DEFAULT_CELLS: usize = 256;
pub const DEFAULT_CADENCE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Diagnostics records per unit of simulated time.
    pub cadence: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("."), cadence: DEFAULT_CADENCE }
    }
}

/// Bisection bracket for the empirical blow-up threshold in `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub tol_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub m_values: Vec<f64>,
    pub boundary_values: Vec<f64>,
    pub bracket: Option<Bracket>,
    pub workers: Option<usize>,
}

/// A fully validated single-run configuration, optionally carrying a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: ProblemParams,
    pub initial: InitialProfile,
    pub cells: usize,
    pub stepper: StepperConfig,
    pub exponents: ExponentPolicy,
    pub output: OutputConfig,
    pub sweep: Option<SweepSpec>,
}

/// Everything derived from a [`RunConfig`] before time stepping.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub grid: RadialGrid,
    pub derived: DerivedConstants,
    pub monitors: MonitorConfig,
    pub u0: Field,
}

impl RunConfig {
    /// A configuration with defaults for everything but the problem and data.
    pub fn new(params: ProblemParams, initial: InitialProfile) -> Self {
        Self {
            params,
            initial,
            cells: DEFAULT_CELLS,
            stepper: StepperConfig::default(),
            exponents: ExponentPolicy { z_barrier: BarrierMode::IfAdmissible, ..Default::default() },
            output: OutputConfig::default(),
            sweep: None,
        }
    }

    /// Same configuration at a different point of the `(m, M)` plane.
    pub fn at(&self, m: f64, boundary_value: f64) -> Self {
        let mut c = self.clone();
        c.params.exponent = m;
        c.params.boundary_value = boundary_value;
        c
    }

    /// Builds the grid, constants and monitors, applying every interval check.
    pub fn prepare(&self) -> Result<Prepared> {
        self.params.validate()?;
        self.initial.validate(self.params.radius)?;
        self.stepper.validate()?;
        if !(self.output.cadence > 0.0 && self.output.cadence.is_finite()) {
            return Err(Error::config("cadence", "must be finite and > 0"));
        }
        let grid = RadialGrid::new(self.cells, self.params.radius, self.params.dim)
            .map_err(|e| Error::config("N", e.to_string()))?;
        let mut exponents = choose_exponents(&self.params, &self.exponents)?;
        let derived = DerivedConstants::compute(&self.params, &self.initial, &grid, exponents.gamma)?;
        exponents.attach_delta1(&self.params, &derived)?;
        let monitors = MonitorConfig::new(&self.params, exponents, &derived);
        let u0 = self.initial.cell_averages(&grid);
        Ok(Prepared { grid, derived, monitors, u0 })
    }
}

type Sections = BTreeMap<String, BTreeMap<String, (usize, String)>>;

fn tokenize(text: &str) -> Result<Sections> {
    let mut sections: Sections = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::config(format!("line {lineno}"), "unterminated section header"))?
                .trim();
            if !SECTIONS.iter().any(|(s, _)| *s == name) {
                return Err(Error::config(
                    format!("[{name}]"),
                    format!("unknown section on line {lineno}"),
                ));
            }
            if sections.contains_key(name) {
                return Err(Error::config(format!("[{name}]"), "section appears twice"));
            }
            sections.insert(name.to_string(), BTreeMap::new());
            current = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {lineno}"), "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        let section = current
            .as_deref()
            .ok_or_else(|| Error::config(key, format!("appears before any section (line {lineno})")))?;
        let allowed = SECTIONS.iter().find(|(s, _)| *s == section).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&key) {
            let home = SECTIONS.iter().find(|(_, keys)| keys.contains(&key)).map(|(s, _)| *s);
            let constraint = match home {
                Some(h) => format!("belongs in [{h}], not [{section}] (line {lineno})"),
                None => format!("unknown key (line {lineno})"),
            };
            return Err(Error::config(key, constraint));
        }
        let entries = sections.get_mut(section).expect("section registered above");
        if entries.insert(key.to_string(), (lineno, value.to_string())).is_some() {
            return Err(Error::config(key, format!("duplicate key (line {lineno})")));
        }
    }
    Ok(sections)
}

/// Typed access to one section with consumption tracking.
struct Section<'a> {
    entries: Option<&'a BTreeMap<String, (usize, String)>>,
}

impl Section<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.and_then(|e| e.get(key)).map(|(_, v)| v.as_str())
    }

    fn has(&self, key: &str) -> bool {
        self.raw(key).is_some()
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.raw(key)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::config(key, format!("expected a finite number (got `{v}`)")))
            })
            .transpose()
    }

    fn required_f64(&self, section: &str, key: &str) -> Result<f64> {
        self.f64(key)?
            .ok_or_else(|| Error::config(key, format!("required in [{section}]")))
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.raw(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| Error::config(key, format!("expected a nonnegative integer (got `{v}`)")))
            })
            .transpose()
    }

    fn list(&self, key: &str) -> Result<Vec<f64>> {
        let Some(v) = self.raw(key) else {
            return Ok(Vec::new());
        };
        v.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::config(key, format!("expected a list of numbers (bad entry `{s}`)")))
            })
            .collect()
    }
}

fn parse_initial(sec: &Section) -> Result<InitialProfile> {
    let kind = sec
        .raw("kind")
        .ok_or_else(|| Error::config("kind", "required in [initial]"))?;
    let allowed: &[&str] = match kind {
        "constant" => &["kind", "amplitude"],
        "gaussian" => &["kind", "amplitude", "center_radius", "width"],
        "annulus" => &["kind", "amplitude", "inner", "outer"],
        "tabulated" => {
            return Err(Error::config(
                "kind",
                "tabulated profiles are only available through the library API",
            ))
        }
        other => {
            return Err(Error::config(
                "kind",
                format!("one of constant, gaussian, annulus (got `{other}`)"),
            ))
        }
    };
    for key in ["amplitude", "center_radius", "width", "inner", "outer"] {
        if sec.has(key) && !allowed.contains(&key) {
            return Err(Error::config(key, format!("does not apply to kind = {kind}")));
        }
    }
    let amplitude = sec.required_f64("initial", "amplitude")?;
    Ok(match kind {
        "constant" => InitialProfile::Constant { value: amplitude },
        "gaussian" => InitialProfile::Gaussian {
            amplitude,
            center_radius: sec.f64("center_radius")?.unwrap_or(0.0),
            width: sec.required_f64("initial", "width")?,
        },
        _ => InitialProfile::Annulus {
            amplitude,
            inner: sec.required_f64("initial", "inner")?,
            outer: sec.required_f64("initial", "outer")?,
        },
    })
}

fn parse_sweep(sec: &Section) -> Result<Option<SweepSpec>> {
    if sec.entries.is_none() {
        return Ok(None);
    }
    let m_values = sec.list("m_values")?;
    if m_values.is_empty() {
        return Err(Error::config("m_values", "a sweep needs at least one m"));
    }
    if let Some(bad) = m_values.iter().find(|&&m| !(m > 0.0)) {
        return Err(Error::config("m_values", format!("every m must be > 0 (got {bad})")));
    }
    let boundary_values = sec.list("M_values")?;
    if let Some(bad) = boundary_values.iter().find(|&&x| !(x >= 0.0)) {
        return Err(Error::config("M_values", format!("every M must be ≥ 0 (got {bad})")));
    }
    let bracket = match (sec.f64("M_lo")?, sec.f64("M_hi")?) {
        (None, None) => None,
        (Some(lo), Some(hi)) => {
            if !(lo > 0.0 && lo < hi) {
                return Err(Error::config("M_lo", format!("0 < M_lo < M_hi (got {lo}, {hi})")));
            }
            let tol_rel = sec.f64("tol_rel")?.unwrap_or(0.05);
            if !(tol_rel > 0.0 && tol_rel < 1.0) {
                return Err(Error::config("tol_rel", format!("0 < tol_rel < 1 (got {tol_rel})")));
            }
            Some(Bracket { lo, hi, tol_rel })
        }
        (None, Some(_)) => return Err(Error::config("M_lo", "required together with M_hi")),
        (Some(_), None) => return Err(Error::config("M_hi", "required together with M_lo")),
    };
    if bracket.is_none() && sec.has("tol_rel") {
        return Err(Error::config("tol_rel", "only meaningful with M_lo and M_hi"));
    }
    if boundary_values.is_empty() && bracket.is_none() {
        return Err(Error::config("M_values", "a sweep needs M_values or an M_lo/M_hi bracket"));
    }
    let workers = sec.usize("workers")?;
    if workers == Some(0) {
        return Err(Error::config("workers", "must be ≥ 1"));
    }
    Ok(Some(SweepSpec { m_values, boundary_values, bracket, workers }))
}

/// Parses and fully validates a configuration file.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let sections = tokenize(text)?;
    let sec = |name: &str| Section { entries: sections.get(name) };

    let problem = sec("problem");
    let dim = problem
        .usize("n")?
        .ok_or_else(|| Error::config("n", "required in [problem]"))?;
    let dim = u32::try_from(dim).map_err(|_| Error::config("n", "too large"))?;
    if dim < 3 {
        return Err(Error::config("n", format!("n ≥ 3 (got {dim})")));
    }
    let k_lower = problem.f64("k_D")?.unwrap_or(1.0);
    let params = ProblemParams {
        dim,
        radius: problem.required_f64("problem", "R")?,
        boundary_value: problem.required_f64("problem", "M")?,
        exponent: problem.required_f64("problem", "m")?,
        k_lower,
        k_upper: problem.f64("K_D")?.unwrap_or(k_lower),
    };
    params.validate()?;

    let initial = parse_initial(&sec("initial"))?;
    let cells = sec("grid").usize("N")?.unwrap_or(DEFAULT_CELLS);

    let st = sec("stepper");
    let d = StepperConfig::default();
    let stepper = StepperConfig {
        cfl: st.f64("cfl")?.unwrap_or(d.cfl),
        dt_init: st.f64("dt_init")?.unwrap_or(d.dt_init),
        dt_min: st.f64("dt_min")?.unwrap_or(d.dt_min),
        dt_max: st.f64("dt_max")?.unwrap_or(d.dt_max),
        t_end: st.f64("t_end")?.unwrap_or(d.t_end),
        u_blowup_factor: st.f64("u_blowup_factor")?.unwrap_or(d.u_blowup_factor),
        picard_iters: st.usize("picard_iters")?.unwrap_or(d.picard_iters),
        growth_clamp: st.f64("growth_clamp")?.unwrap_or(d.growth_clamp),
        max_steps: d.max_steps,
    };

    let mon = sec("monitors");
    let exponents = ExponentPolicy {
        alpha: mon.f64("alpha")?,
        beta: mon.f64("beta")?,
        gamma: mon.f64("gamma")?,
        c_star: mon.f64("c_star")?,
        delta0: mon.f64("delta0")?,
        // an explicit β asks for the Z barrier monitor
        z_barrier: if mon.has("beta") { BarrierMode::Required } else { BarrierMode::IfAdmissible },
    };

    let out = sec("output");
    let output = OutputConfig {
        dir: out.raw("dir").map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".")),
        cadence: out.f64("cadence")?.unwrap_or(DEFAULT_CADENCE),
    };

    let config = RunConfig {
        params,
        initial,
        cells,
        stepper,
        exponents,
        output,
        sweep: parse_sweep(&sec("sweep"))?,
    };
    config.prepare()?;
    Ok(config)
}
