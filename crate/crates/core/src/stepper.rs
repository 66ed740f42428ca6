//! Time integration: explicit upwind drift, implicit diffusion, then a fresh
//! elliptic solve.
//!
//! Each step of length `dt`
//!
//! 1. takes `g = ∂ₛv` at the faces from the current `v`;
//! 2. transports `u` with the inward velocity `g` by first-order upwinding,
//!    split into as many substeps as the positivity bound requires;
//! 3. solves `vol (u − u*)/dt = Δ_h(D(u) u)` implicitly, with face
//!    diffusivities taken from the previous Picard iterate;
//! 4. recomputes `v` from the new `u`.
//!
//! Both flux stages vanish at the origin and outer faces, so the discrete
//! mass `Σ volᵢ uᵢ` is conserved up to round-off.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{DiagnosticsRecord, MonitorConfig};
use crate::elliptic::{face_gradient, solve_v};
use crate::error::{Error, Result};
use crate::grid::{Field, RadialGrid};
use crate::model::{DerivedConstants, ProblemParams};
use crate::tridiag::Tridiagonal;

/// Below this the stepper treats a negative value as a broken invariant.
const NEGATIVITY_FLOOR: f64 = -1e-13;
/// Consecutive `dt_min` steps that count as stalling.
const STALL_STEPS: usize = 10;
/// Number of trailing doubling intervals that must shrink.
const ACCELERATING_DOUBLINGS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub cfl: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_end: f64,
    /// Blow-up needs `‖u‖_∞ ≥ u_blowup_factor · ‖u(0)‖_∞`.
    pub u_blowup_factor: f64,
    pub picard_iters: usize,
    /// Largest accepted per-step growth ratio of `‖u‖_∞`.
    pub growth_clamp: f64,
    /// Hard cap on accepted steps in [`run_until`].
    pub max_steps: u64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            cfl: 0.4,
            dt_init: 1e-4,
            dt_min: 1e-12,
            dt_max: 1e-2,
            t_end: 10.0,
            u_blowup_factor: 1e3,
            picard_iters: 2,
            growth_clamp: 1.2,
            max_steps: 50_000_000,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be finite and > 0 (got {x})")))
            }
        };
        positive("cfl", self.cfl)?;
        if self.cfl > 1.0 {
            return Err(Error::config("cfl", format!("must be ≤ 1 (got {})", self.cfl)));
        }
        positive("dt_init", self.dt_init)?;
        positive("dt_min", self.dt_min)?;
        positive("dt_max", self.dt_max)?;
        if !(self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(Error::config("dt_init", "must satisfy dt_min ≤ dt_init ≤ dt_max"));
        }
        positive("t_end", self.t_end)?;
        if !(self.u_blowup_factor > 1.0) {
            return Err(Error::config("u_blowup_factor", "must be > 1"));
        }
        if self.picard_iters == 0 {
            return Err(Error::config("picard_iters", "must be ≥ 1"));
        }
        if !(self.growth_clamp > 1.0 && self.growth_clamp.is_finite()) {
            return Err(Error::config("growth_clamp", "must be finite and > 1"));
        }
        Ok(())
    }
}

/// Discrete state. `v` is always the elliptic solution for `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub t: f64,
    pub dt: f64,
    pub u: Field,
    pub v: Field,
    pub step: u64,
    /// `σₙ Σ volᵢ uᵢ` at `t = 0`.
    pub mass0: f64,
}

impl SimState {
    pub fn new(u: Field, params: &ProblemParams, grid: &RadialGrid, config: &StepperConfig) -> Result<Self> {
        let v = solve_v(&u, params.boundary_value, grid)?;
        let sigma = crate::model::unit_sphere_measure(params.dim)?;
        Ok(Self {
            t: 0.0,
            dt: config.dt_init,
            mass0: sigma * grid.radial_mass(&u),
            u,
            v,
            step: 0,
        })
    }
}

/// Upwind face velocities with the boundary faces closed.
fn drift_velocities(state: &SimState, params: &ProblemParams, grid: &RadialGrid) -> Vec<f64> {
    let mut g = face_gradient(&state.v, params.boundary_value, grid);
    let last = g.len() - 1;
    g[0] = 0.0;
    g[last] = 0.0;
    g
}

/// Per-cell outflow rates of the upwind drift; `1/max rate` bounds a
/// positivity-preserving substep.
fn outflow_rates(g: &[f64], grid: &RadialGrid) -> Vec<f64> {
    let w = grid.weights();
    grid.volumes()
        .iter()
        .enumerate()
        .map(|(i, vol)| (w[i] * g[i].max(0.0) - w[i + 1] * g[i + 1].min(0.0)) / vol)
        .collect()
}

fn drift_bound(rates: &[f64]) -> f64 {
    let max_rate = rates.iter().copied().fold(0.0, f64::max);
    if max_rate > 0.0 {
        1.0 / max_rate
    } else {
        f64::INFINITY
    }
}

/// One explicit upwind substep of length `tau`, written so that every term
/// is nonnegative when `tau · rateᵢ ≤ 1`.
fn drift_substep(u: &[f64], g: &[f64], rates: &[f64], tau: f64, grid: &RadialGrid) -> Vec<f64> {
    let w = grid.weights();
    let vol = grid.volumes();
    let n = u.len();
    (0..n)
        .map(|i| {
            let stay = u[i] * (1.0 - tau * rates[i]).max(0.0);
            let from_outer = if i + 1 < n { w[i + 1] * g[i + 1].max(0.0) * u[i + 1] } else { 0.0 };
            let from_inner = if i > 0 { -w[i] * g[i].min(0.0) * u[i - 1] } else { 0.0 };
            stay + tau / vol[i] * (from_outer + from_inner)
        })
        .collect()
}

/// Implicit diffusion `vol (u − u*)/dt = Σ ± w D_face (Δu)/h` with lagged
/// face diffusivities.
fn diffuse(u_star: &[f64], dt: f64, params: &ProblemParams, grid: &RadialGrid, iters: usize) -> Result<Vec<f64>> {
    let n = u_star.len();
    let h = grid.h();
    let w = grid.weights();
    let vol = grid.volumes();
    let mut iterate = u_star.to_vec();
    let mut face_coef = vec![0.0; n + 1];
    for _ in 0..iters {
        for i in 1..n {
            let avg = 0.5 * (iterate[i - 1] + iterate[i]).max(0.0);
            face_coef[i] = dt * w[i] * params.diffusion(avg) / h;
        }
        let mut a = Tridiagonal::zeros(n);
        for i in 0..n {
            a.diag[i] = vol[i] + face_coef[i] + face_coef[i + 1];
            a.lower[i] = -face_coef[i];
            a.upper[i] = -face_coef[i + 1];
        }
        let mut rhs: Vec<f64> = vol.iter().zip(u_star).map(|(v, u)| v * u).collect();
        a.solve_in_place(&mut rhs)?;
        iterate = rhs;
    }
    // Rebuild u from the face fluxes of the solution so the update
    // telescopes exactly instead of inheriting the solver's residual.
    let flux: Vec<f64> = (0..=n)
        .map(|j| if j == 0 || j == n { 0.0 } else { face_coef[j] * (iterate[j] - iterate[j - 1]) })
        .collect();
    Ok((0..n).map(|i| u_star[i] + (flux[i + 1] - flux[i]) / vol[i]).collect())
}

/// Advances `state` by `state.dt`.
pub fn advance(state: &mut SimState, config: &StepperConfig, params: &ProblemParams, grid: &RadialGrid) -> Result<()> {
    let dt = state.dt;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("dt must be positive (got {dt})")));
    }
    let g = drift_velocities(state, params, grid);
    let rates = outflow_rates(&g, grid);
    let substeps = (dt / drift_bound(&rates)).ceil().max(1.0);
    if substeps > 1e7 {
        return Err(Error::Scheme(format!("drift needs {substeps} substeps for dt = {dt}")));
    }
    let tau = dt / substeps;
    let mut u = state.u.values().to_vec();
    for _ in 0..substeps as usize {
        u = drift_substep(&u, &g, &rates, tau, grid);
    }
    let u = diffuse(&u, dt, params, grid, config.picard_iters)?;
    let min = u.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min >= NEGATIVITY_FLOOR) {
        return Err(Error::Scheme(format!(
            "u reached {min} at t = {} (step {})",
            state.t + dt,
            state.step + 1
        )));
    }
    let u = Field::new(u.into_iter().map(|x| x.max(0.0)).collect());
    state.v = solve_v(&u, params.boundary_value, grid)?;
    state.u = u;
    state.t += dt;
    state.step += 1;
    Ok(())
}

/// `min(dt_max, cfl·h/max|∂ₛv|, positivity bound)`, never below `dt_min`.
pub fn cfl_dt(state: &SimState, config: &StepperConfig, params: &ProblemParams, grid: &RadialGrid) -> f64 {
    raw_cfl_dt(state, config, params, grid).max(config.dt_min)
}

fn raw_cfl_dt(state: &SimState, config: &StepperConfig, params: &ProblemParams, grid: &RadialGrid) -> f64 {
    let g_max = face_gradient(&state.v, params.boundary_value, grid)
        .iter()
        .fold(0.0, |acc: f64, x| acc.max(x.abs()));
    let advective = if g_max > 0.0 { config.cfl * grid.h() / g_max } else { f64::INFINITY };
    let rates = outflow_rates(&drift_velocities(state, params, grid), grid);
    config.dt_max.min(advective).min(drift_bound(&rates))
}

/// What [`adaptive_step`] did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// The accepted step length.
    pub dt: f64,
    /// Whether the growth clamp drove the step down to `dt_min`.
    pub at_floor: bool,
}

/// Takes one step under the adaptive policy used by [`run_until`].
///
/// The trial length is the stored `state.dt` on the first step and twice
/// the last accepted step afterwards, capped by [`cfl_dt`] and by `t_end`.
/// A trial whose `‖u‖_∞` grows by more than `growth_clamp` is halved and
/// retried, down to `dt_min`.
pub fn adaptive_step(
    state: &mut SimState,
    config: &StepperConfig,
    params: &ProblemParams,
    grid: &RadialGrid,
    t_end: f64,
) -> Result<StepReport> {
    let wanted = if state.step == 0 { state.dt } else { 2.0 * state.dt };
    let mut dt = wanted.min(config.dt_max).min(cfl_dt(state, config, params, grid));
    let remaining = t_end - state.t;
    let final_step = dt >= remaining;
    if final_step {
        dt = remaining;
    }
    let u_before = state.u.max();
    let trial = loop {
        let mut trial = state.clone();
        trial.dt = dt;
        advance(&mut trial, config, params, grid)?;
        if trial.u.max() > config.growth_clamp * u_before && dt > config.dt_min {
            dt = (0.5 * dt).max(config.dt_min);
            continue;
        }
        break trial;
    };
    *state = trial;
    let final_step = final_step && dt == remaining;
    if final_step {
        state.t = t_end;
    }
    Ok(StepReport { dt, at_floor: dt <= config.dt_min * (1.0 + 1e-12) && !final_step })
}

/// Why [`run_until`] stopped, with the data backing a blow-up call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Outcome {
    CompletedBounded,
    BlowupDetected {
        u_max_ratio: f64,
        dt_min_steps: usize,
        doubling_intervals: Vec<f64>,
    },
    MaxStepsReached,
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::CompletedBounded => "completed_bounded",
            Outcome::BlowupDetected { .. } => "blowup_detected",
            Outcome::MaxStepsReached => "max_steps_reached",
        }
    }
}

/// Sup-norm doubling bookkeeping with log-linear crossing interpolation.
struct DoublingTracker {
    next_level: f64,
    crossings: Vec<f64>,
}

impl DoublingTracker {
    fn new(t0: f64, u0: f64) -> Self {
        Self { next_level: 2.0 * u0, crossings: vec![t0] }
    }

    /// Returns whether a new level was crossed between the two samples.
    fn update(&mut self, (t0, u0): (f64, f64), (t1, u1): (f64, f64)) -> bool {
        let mut crossed = false;
        while self.next_level > 0.0 && u1 >= self.next_level {
            let t = if u1 > u0 && u0 > 0.0 {
                let frac = (self.next_level / u0).ln() / (u1 / u0).ln();
                t0 + frac.clamp(0.0, 1.0) * (t1 - t0)
            } else {
                t1
            };
            self.crossings.push(t);
            self.next_level *= 2.0;
            crossed = true;
        }
        crossed
    }

    fn intervals(&self) -> Vec<f64> {
        self.crossings.windows(2).map(|w| w[1] - w[0]).collect()
    }

    fn accelerating(&self) -> bool {
        let iv = self.intervals();
        iv.len() >= ACCELERATING_DOUBLINGS
            && iv[iv.len() - ACCELERATING_DOUBLINGS..].windows(2).all(|w| w[1] < w[0])
    }
}

/// Integrates until `config.t_end`, blow-up detection, or `max_steps`,
/// recording diagnostics `cadence` times per unit time, whenever `‖u‖_∞`
/// grows by another factor `√2`, and at the final state.
pub fn run_until(
    state: &mut SimState,
    config: &StepperConfig,
    params: &ProblemParams,
    grid: &RadialGrid,
    derived: &DerivedConstants,
    monitors: &MonitorConfig,
    cadence: f64,
) -> Result<(Vec<DiagnosticsRecord>, Outcome)> {
    config.validate()?;
    if !(cadence > 0.0 && cadence.is_finite()) {
        return Err(Error::config("cadence", "must be finite and > 0"));
    }
    let record = |s: &SimState| DiagnosticsRecord::evaluate(s.t, s.dt, &s.u, &s.v, params, grid, derived, monitors);
    let mut records = vec![record(state)?];
    let period = 1.0 / cadence;
    let mut next_record = state.t + period;
    let u_ref = state.u.max();
    let mut doublings = DoublingTracker::new(state.t, u_ref);
    // records also follow growth at half-doubling resolution
    let mut next_growth_record = std::f64::consts::SQRT_2 * u_ref;
    let mut stalled = 0usize;

    while state.t < config.t_end {
        if state.step >= config.max_steps {
            records.push(record(state)?);
            return Ok((records, Outcome::MaxStepsReached));
        }
        let before = (state.t, state.u.max());
        let report = adaptive_step(state, config, params, grid, config.t_end)?;
        stalled = if report.at_floor { stalled + 1 } else { 0 };

        let after = (state.t, state.u.max());
        let crossed = doublings.update(before, after);
        let mut due = crossed;
        if u_ref > 0.0 && after.1 >= next_growth_record {
            due = true;
            while next_growth_record <= after.1 {
                next_growth_record *= std::f64::consts::SQRT_2;
            }
        }
        if state.t >= next_record {
            due = true;
            while next_record <= state.t {
                next_record += period;
            }
        }
        let big = after.1 >= config.u_blowup_factor * u_ref;
        if big && (stalled >= STALL_STEPS || doublings.accelerating()) {
            records.push(record(state)?);
            let outcome = Outcome::BlowupDetected {
                u_max_ratio: after.1 / u_ref,
                dt_min_steps: stalled,
                doubling_intervals: doublings.intervals(),
            };
            return Ok((records, outcome));
        }
        if due && state.t < config.t_end {
            records.push(record(state)?);
        }
    }
    records.push(record(state)?);
    Ok((records, Outcome::CompletedBounded))
}
