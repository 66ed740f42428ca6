//! Mass accumulation, the weighted functionals `φ` and `ψ`, and monitors
//! that evaluate the pointwise inequalities of the radial theory on a
//! discrete state.
//!
//! Every monitor returns a signed residual: the largest value of
//! `lhs − bound` over the faces it inspects, positive meaning violated.
//! Monitors never stop a run.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::elliptic::{face_gradient, v_at_origin};
use crate::error::{Error, Result};
use crate::grid::{Field, RadialGrid};
use crate::model::{
    barrier_w, barrier_z, smallness_threshold, DerivedConstants, ExponentChoice, ProblemParams,
};
use crate::quadrature::power_integral;

/// `U` at the `N + 1` faces: `U(s_i) = Σ_{j<i} vol_j u_j`.
pub fn mass_accumulation(u: &Field, grid: &RadialGrid) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.len() + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for (vol, ui) in grid.volumes().iter().zip(u.values()) {
        acc += vol * ui;
        out.push(acc);
    }
    out
}

/// Per-cell integrals of `s^p U(s)` where `U` is reconstructed from the face
/// values assuming a constant density in each cell:
/// `U(s) = U_i + ρ_i (s^n − s_i^n)/n` on cell `i`.
///
/// In the first cell this is the local model `U = U(s_1)(s/s_1)^n`.
fn cell_weighted_integrals(big_u: &[f64], p: f64, grid: &RadialGrid) -> Vec<f64> {
    let faces = grid.faces();
    let n = grid.n();
    grid.volumes()
        .iter()
        .enumerate()
        .map(|(i, vol)| {
            let (a, b) = (faces[i], faces[i + 1]);
            let rho = (big_u[i + 1] - big_u[i]) / vol;
            let local = rho / n * power_integral(a, b, p + n);
            if i == 0 {
                // U(0) = 0, so the possibly singular s^p term is absent
                local
            } else {
                (big_u[i] - rho * a.powf(n) / n) * power_integral(a, b, p) + local
            }
        })
        .collect()
}

/// `φ = ∫₀^R s^{−α} U(s) ds`.
pub fn phi(big_u: &[f64], alpha: f64, grid: &RadialGrid) -> Result<f64> {
    if !(alpha < grid.n() + 1.0) {
        return Err(Error::Domain(format!(
            "φ needs α < n + 1 for integrability (got {alpha})"
        )));
    }
    Ok(cell_weighted_integrals(big_u, -alpha, grid).iter().sum())
}

/// `ψ = ∫₀^R ρ^{1−n} U(ρ) dρ`.
pub fn psi(big_u: &[f64], grid: &RadialGrid) -> f64 {
    cell_weighted_integrals(big_u, 1.0 - grid.n(), grid).iter().sum()
}

/// `∫₀^{s_i} ρ^{1−n} U dρ` at every face.
fn psi_prefix(big_u: &[f64], grid: &RadialGrid) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.len() + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for c in cell_weighted_integrals(big_u, 1.0 - grid.n(), grid) {
        acc += c;
        out.push(acc);
    }
    out
}

/// Worst signed residual and where it occurred.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub value: f64,
    pub location: f64,
}

impl Residual {
    fn worst(items: impl IntoIterator<Item = (f64, f64)>) -> Option<Self> {
        items
            .into_iter()
            .fold(None, |best: Option<Residual>, (value, location)| match best {
                Some(b) if b.value >= value => Some(b),
                _ => Some(Residual { value, location }),
            })
    }
}

/// Linear interpolation of face values at `s`, for `s` strictly inside the
/// first and last interior faces.
fn interpolate(values: &[f64], faces: &[f64], s: f64) -> Option<f64> {
    let j = faces.partition_point(|&f| f <= s);
    if j < 2 || j >= faces.len() - 1 {
        return None;
    }
    let (a, b) = (faces[j - 1], faces[j]);
    let theta = (s - a) / (b - a);
    Some((1.0 - theta) * values[j - 1] + theta * values[j])
}

/// `v(0) − M/(1 + ψ)`.
pub fn monitor_v0_bound(v0: f64, psi: f64, boundary_value: f64) -> f64 {
    v0 - boundary_value / (1.0 + psi)
}

/// Worst value over interior faces of
/// `s^{1−n}U / (1 + ∫₀^s ρ^{1−n}U dρ) − ∂ₛ ln v`.
pub fn monitor_logv_gradient(v: &Field, big_u: &[f64], grid: &RadialGrid) -> Residual {
    let vals = v.values();
    let h = grid.h();
    let faces = grid.faces();
    let w = grid.weights();
    let prefix = psi_prefix(big_u, grid);
    Residual::worst((1..grid.len()).map(|i| {
        let rhs = big_u[i] / w[i] / (1.0 + prefix[i]);
        let dlog = (vals[i].ln() - vals[i - 1].ln()) / h;
        (rhs - dlog, faces[i])
    }))
    .unwrap_or(Residual { value: 0.0, location: 0.0 })
}

/// Residual streams for the bounds on `∂ₛv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientResiduals {
    /// `∂ₛv − δ₀^{1−n} L M` on faces `s ≥ δ₀`.
    pub far: Residual,
    /// `∂ₛv − (n−2) M C*/s` on faces `0 < s ≤ R(1 − 1/C*)^{1/(n−2)}`.
    pub near: Option<Residual>,
    /// `∂ₛv − M s^{1−n} U` on all faces `s > 0`.
    pub global: Residual,
}

pub fn monitor_vgrad_bounds(
    v: &Field,
    big_u: &[f64],
    params: &ProblemParams,
    grid: &RadialGrid,
    exponents: &ExponentChoice,
    derived: &DerivedConstants,
) -> GradientResiduals {
    let big_m = params.boundary_value;
    let n = params.n();
    let g = face_gradient(v, big_m, grid);
    let faces = grid.faces();
    let w = grid.weights();
    let far_bound = exponents.delta0.powf(1.0 - n) * derived.mass * big_m;
    let delta0 = exponents.delta0;
    let far = Residual::worst(
        (1..faces.len())
            .filter(|&i| faces[i] >= delta0)
            .map(|i| (g[i] - far_bound, faces[i]))
            .chain(interpolate(&g, faces, delta0).map(|x| (x - far_bound, delta0))),
    )
    .unwrap_or(Residual { value: -far_bound, location: params.radius });
    let near_edge = exponents.near_origin_radius(params);
    let near_coef = (n - 2.0) * big_m * exponents.c_star;
    let near = Residual::worst(
        (1..faces.len())
            .filter(|&i| faces[i] <= near_edge)
            .map(|i| (g[i] - near_coef / faces[i], faces[i]))
            .chain(interpolate(&g, faces, near_edge).map(|x| (x - near_coef / near_edge, near_edge))),
    );
    let global = Residual::worst((1..faces.len()).map(|i| (g[i] - big_m * big_u[i] / w[i], faces[i])))
        .unwrap_or(Residual { value: 0.0, location: 0.0 });
    GradientResiduals { far, near, global }
}

/// Which comparison barrier applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Barrier {
    /// `Z(s) = L (s/δ₁)^{n−β}` on `(0, δ₁)`.
    Z { beta: f64, delta1: f64 },
    /// `W(s) = η s^{n−γ}` on `(0, R]`.
    W { gamma: f64, eta: f64 },
}

impl Barrier {
    /// The barrier supported by the current regime, if any.
    pub fn for_regime(
        params: &ProblemParams,
        exponents: &ExponentChoice,
        derived: &DerivedConstants,
    ) -> Option<Self> {
        let m = params.exponent;
        if m == 1.0 {
            match (exponents.beta, exponents.delta1) {
                (Some(beta), Some(delta1)) => Some(Barrier::Z { beta, delta1 }),
                _ => None,
            }
        } else if m > 0.0 && m < 1.0 {
            let (gamma, eta) = (exponents.gamma?, derived.eta?);
            let threshold = smallness_threshold(gamma, eta, params).ok()?;
            (params.boundary_value <= threshold).then_some(Barrier::W { gamma, eta })
        } else {
            None
        }
    }
}

/// Worst `U(s) − barrier(s)` over the barrier's faces.
///
/// Fails when the barrier's hypotheses do not hold for `params`.
pub fn monitor_barriers(
    big_u: &[f64],
    params: &ProblemParams,
    grid: &RadialGrid,
    barrier: &Barrier,
    derived: &DerivedConstants,
) -> Result<Residual> {
    let faces = grid.faces();
    let m = params.exponent;
    match *barrier {
        Barrier::Z { beta, delta1 } => {
            if m != 1.0 || params.boundary_value >= params.critical_boundary_value() {
                return Err(Error::config(
                    "beta",
                    "the Z barrier requires m = 1 and M < 2k_D/(n−2)",
                ));
            }
            let worst = Residual::worst(
                (1..faces.len())
                    .filter(|&i| faces[i] < delta1)
                    .map(|i| {
                        let z = barrier_z(faces[i], beta, delta1, derived.mass, params.dim)
                            .unwrap_or(f64::INFINITY);
                        (big_u[i] - z, faces[i])
                    }),
            );
            Ok(worst.unwrap_or(Residual { value: 0.0, location: 0.0 }))
        }
        Barrier::W { gamma, eta } => {
            if !(m > 0.0 && m < 1.0) {
                return Err(Error::config("gamma", "the W barrier requires 0 < m < 1"));
            }
            let threshold = smallness_threshold(gamma, eta, params)?;
            if params.boundary_value > threshold {
                return Err(Error::config(
                    "M",
                    format!("the W barrier requires M ≤ M* = {threshold}"),
                ));
            }
            Ok(Residual::worst((1..faces.len()).map(|i| {
                let w = barrier_w(faces[i], gamma, eta, params).unwrap_or(f64::INFINITY);
                (big_u[i] - w, faces[i])
            }))
            .unwrap_or(Residual { value: 0.0, location: 0.0 }))
        }
    }
}

/// `max(v) − M` and `−min(v)`, the two sides of `0 ≤ v ≤ M`.
pub fn monitor_vmax(v: &Field, boundary_value: f64) -> (f64, f64) {
    (v.max() - boundary_value, -v.min())
}

/// Names of the monitored inequalities, in CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    Vmax,
    V0Bound,
    Logv,
    VgradFar,
    VgradNear,
    VgradU,
    Barrier,
}

impl Monitor {
    pub const ALL: [Monitor; 7] = [
        Monitor::Vmax,
        Monitor::V0Bound,
        Monitor::Logv,
        Monitor::VgradFar,
        Monitor::VgradNear,
        Monitor::VgradU,
        Monitor::Barrier,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Monitor::Vmax => "vmax",
            Monitor::V0Bound => "v0bound",
            Monitor::Logv => "logv",
            Monitor::VgradFar => "vgrad_far",
            Monitor::VgradNear => "vgrad_near",
            Monitor::VgradU => "vgrad_U",
            Monitor::Barrier => "barrier",
        }
    }
}

/// Monitor selection and the slack model `c₁ h + c₂ h²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    pub exponents: ExponentChoice,
    pub barrier: Option<Barrier>,
    pub enabled: Vec<Monitor>,
    pub c1: f64,
    pub c2: f64,
}

impl MonitorConfig {
    /// All applicable monitors with the default slack `c₁ = 5 max(M, L, 1)`, `c₂ = 50`.
    pub fn new(params: &ProblemParams, exponents: ExponentChoice, derived: &DerivedConstants) -> Self {
        let barrier = Barrier::for_regime(params, &exponents, derived);
        let enabled = Monitor::ALL
            .into_iter()
            .filter(|&m| m != Monitor::Barrier || barrier.is_some())
            .collect();
        Self {
            exponents,
            barrier,
            enabled,
            c1: 5.0 * params.boundary_value.max(derived.mass).max(1.0),
            c2: 50.0,
        }
    }

    pub fn is_enabled(&self, monitor: Monitor) -> bool {
        self.enabled.contains(&monitor)
    }

    /// `c₁ h`.
    pub fn linear_slack(&self, h: f64) -> f64 {
        self.c1 * h
    }

    /// `c₁ h + c₂ h²`.
    pub fn slack(&self, h: f64) -> f64 {
        self.c1 * h + self.c2 * h * h
    }

    /// Allowed residual for one monitor. The `v ≤ M` check is a discrete
    /// maximum principle and only gets round-off slack.
    pub fn tolerance(&self, monitor: Monitor, h: f64, boundary_value: f64) -> f64 {
        match monitor {
            Monitor::Vmax => 1e-12 * boundary_value.max(1.0),
            _ => self.slack(h),
        }
    }
}

/// One time slice of functionals and monitor residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub dt: f64,
    /// `σₙ U(R)`.
    pub mass: f64,
    pub u_max: f64,
    pub v0: f64,
    pub phi: f64,
    pub psi: f64,
    pub residuals: BTreeMap<Monitor, Residual>,
}

impl DiagnosticsRecord {
    /// Evaluates all enabled monitors on `(u, v)`.
    #[allow(clippy::too_many_arguments)]
    pub fn evaluate(
        t: f64,
        dt: f64,
        u: &Field,
        v: &Field,
        params: &ProblemParams,
        grid: &RadialGrid,
        derived: &DerivedConstants,
        monitors: &MonitorConfig,
    ) -> Result<Self> {
        let big_u = mass_accumulation(u, grid);
        let big_m = params.boundary_value;
        let v0 = v_at_origin(v);
        let phi_val = phi(&big_u, monitors.exponents.alpha, grid)?;
        let psi_val = psi(&big_u, grid);
        let mut residuals = BTreeMap::new();
        if monitors.is_enabled(Monitor::Vmax) {
            let (upper, lower) = monitor_vmax(v, big_m);
            let r = if upper >= lower {
                Residual { value: upper, location: argmax(v.values(), grid) }
            } else {
                Residual { value: lower, location: argmin(v.values(), grid) }
            };
            residuals.insert(Monitor::Vmax, r);
        }
        if monitors.is_enabled(Monitor::V0Bound) {
            residuals.insert(
                Monitor::V0Bound,
                Residual { value: monitor_v0_bound(v0, psi_val, big_m), location: 0.0 },
            );
        }
        if monitors.is_enabled(Monitor::Logv) && v.min() > 0.0 {
            residuals.insert(Monitor::Logv, monitor_logv_gradient(v, &big_u, grid));
        }
        let grads = monitor_vgrad_bounds(v, &big_u, params, grid, &monitors.exponents, derived);
        if monitors.is_enabled(Monitor::VgradFar) {
            residuals.insert(Monitor::VgradFar, grads.far);
        }
        if monitors.is_enabled(Monitor::VgradNear) {
            if let Some(near) = grads.near {
                residuals.insert(Monitor::VgradNear, near);
            }
        }
        if monitors.is_enabled(Monitor::VgradU) {
            residuals.insert(Monitor::VgradU, grads.global);
        }
        if monitors.is_enabled(Monitor::Barrier) {
            if let Some(barrier) = &monitors.barrier {
                residuals.insert(
                    Monitor::Barrier,
                    monitor_barriers(&big_u, params, grid, barrier, derived)?,
                );
            }
        }
        Ok(Self {
            t,
            dt,
            mass: derived.sphere_measure * big_u[grid.len()],
            u_max: u.max(),
            v0,
            phi: phi_val,
            psi: psi_val,
            residuals,
        })
    }

    /// Monitors whose residual exceeds the tolerance at this slice.
    pub fn violations(&self, monitors: &MonitorConfig, h: f64, boundary_value: f64) -> Vec<(Monitor, Residual)> {
        self.residuals
            .iter()
            .filter(|(m, r)| r.value > monitors.tolerance(**m, h, boundary_value))
            .map(|(m, r)| (*m, *r))
            .collect()
    }
}

fn argmax(values: &[f64], grid: &RadialGrid) -> f64 {
    let (i, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc });
    grid.centers()[i]
}

fn argmin(values: &[f64], grid: &RadialGrid) -> f64 {
    let (i, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &x)| if x < acc.1 { (i, x) } else { acc });
    grid.centers()[i]
}

/// Minimum trajectory length for [`blowup_evidence`].
pub const MIN_EVIDENCE_RECORDS: usize = 20;

/// Growth indicators extracted from a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSummary {
    /// Least-squares slope of `φ(t)` over the final half (in time) of the run.
    pub phi_slope: f64,
    /// `½ R^{1−n+α} φ(0)`, the level `ψ` must stay above in the blow-up argument.
    pub psi_floor: f64,
    /// Whether `ψ ≥ psi_floor` on every record.
    pub psi_persistent: bool,
    /// Times between successive doublings of `‖u‖_∞`.
    pub doubling_times: Vec<f64>,
    /// For `n = 3` with `α < 1`: worst `φ − L R^{1−α}/(1−α)` over the run.
    pub phi_bound_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowupEvidence {
    InsufficientData { records: usize },
    Summary(EvidenceSummary),
}

impl BlowupEvidence {
    pub fn summary(&self) -> Option<&EvidenceSummary> {
        match self {
            BlowupEvidence::Summary(s) => Some(s),
            BlowupEvidence::InsufficientData { .. } => None,
        }
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fitted_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    if points.len() < 2 {
        return 0.0;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Intervals between the first times `‖u‖_∞` reaches `2^k ‖u(0)‖_∞`.
pub fn doubling_times(trajectory: &[DiagnosticsRecord]) -> Vec<f64> {
    let Some(first) = trajectory.first() else {
        return Vec::new();
    };
    let mut level = 2.0 * first.u_max;
    let mut crossings = vec![first.t];
    for r in trajectory {
        while r.u_max >= level {
            crossings.push(r.t);
            level *= 2.0;
        }
    }
    crossings.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Summarises growth of `φ`, persistence of `ψ` and sup-norm doubling.
pub fn blowup_evidence(
    trajectory: &[DiagnosticsRecord],
    alpha: f64,
    params: &ProblemParams,
    derived: &DerivedConstants,
) -> BlowupEvidence {
    if trajectory.len() < MIN_EVIDENCE_RECORDS {
        return BlowupEvidence::InsufficientData { records: trajectory.len() };
    }
    let t_last = trajectory[trajectory.len() - 1].t;
    let t_half = trajectory[0].t + 0.5 * (t_last - trajectory[0].t);
    let tail: Vec<(f64, f64)> = trajectory
        .iter()
        .filter(|r| r.t >= t_half)
        .map(|r| (r.t, r.phi))
        .collect();
    let n = params.n();
    let r = params.radius;
    let psi_floor = 0.5 * r.powf(1.0 - n + alpha) * trajectory[0].phi;
    let phi_bound_residual = (params.dim == 3 && alpha < 1.0).then(|| {
        let bound = derived.mass * r.powf(1.0 - alpha) / (1.0 - alpha);
        trajectory
            .iter()
            .map(|rec| rec.phi - bound)
            .fold(f64::NEG_INFINITY, f64::max)
    });
    BlowupEvidence::Summary(EvidenceSummary {
        phi_slope: fitted_slope(&tail),
        psi_floor,
        psi_persistent: trajectory.iter().all(|rec| rec.psi >= psi_floor),
        doubling_times: doubling_times(trajectory),
        phi_bound_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::solve_v;
    use crate::model::{choose_exponents, ExponentPolicy, InitialProfile};
    use approx::assert_relative_eq;

    fn grid(n: usize) -> RadialGrid {
        RadialGrid::new(n, 1.0, 3).unwrap()
    }

    #[test]
    fn interpolation_between_interior_faces() {
        let g = grid(20);
        let values: Vec<f64> = g.faces().iter().map(|f| 3.0 * f - 1.0).collect();
        assert_relative_eq!(interpolate(&values, g.faces(), 0.437).unwrap(), 3.0 * 0.437 - 1.0, epsilon = 1e-14);
        assert_relative_eq!(interpolate(&values, g.faces(), 0.5).unwrap(), 0.5, epsilon = 1e-14);
        assert!(interpolate(&values, g.faces(), 0.01).is_none());
        assert!(interpolate(&values, g.faces(), 0.99).is_none());
    }

    #[test]
    fn accumulation_of_constant_density() {
        let g = grid(40);
        let c = 1.7;
        let big_u = mass_accumulation(&Field::constant(40, c), &g);
        for (f, u) in g.faces().iter().zip(&big_u) {
            assert_relative_eq!(*u, c * f.powi(3) / 3.0, max_relative = 1e-13, epsilon = 1e-300);
        }
        assert_eq!(big_u[0], 0.0);
        assert!(big_u.windows(2).all(|w| w[1] >= w[0]));
        // reconstructing cell masses is exact
        let u = Field::new((0..40).map(|i| (i as f64 * 0.37).sin().abs()).collect());
        let big_u = mass_accumulation(&u, &g);
        for (i, vol) in g.volumes().iter().enumerate() {
            let exact = vol * u.values()[i];
            assert_eq!(big_u[i + 1] - big_u[i], big_u[i] + exact - big_u[i]);
        }
    }

    #[test]
    fn phi_and_psi_exact_for_constant_density() {
        let g = grid(64);
        let c = 2.5;
        let big_u = mass_accumulation(&Field::constant(64, c), &g);
        assert_relative_eq!(phi(&big_u, 0.4, &g).unwrap(), c / (3.0 * 3.6), max_relative = 1e-12);
        assert_relative_eq!(c / (3.0 * 3.6), c * 0.0925926, max_relative = 1e-6);
        assert_relative_eq!(psi(&big_u, &g), c / 6.0, max_relative = 1e-12);
        let zero = mass_accumulation(&Field::constant(64, 0.0), &g);
        assert_eq!(phi(&zero, 0.4, &g).unwrap(), 0.0);
        assert_eq!(psi(&zero, &g), 0.0);
    }

    #[test]
    fn phi_converges_for_smooth_density() {
        // u = 1 + s², n = 3: U = s³/3 + s⁵/5, φ = ∫ s^{−α} U with α = 0.4
        let alpha: f64 = 0.4;
        let exact = 1.0 / (3.0 * (4.0 - alpha)) + 1.0 / (5.0 * (6.0 - alpha));
        let mut errs = Vec::new();
        for n in [32, 64, 128] {
            let g = grid(n);
            let avg: Vec<f64> = g
                .faces()
                .windows(2)
                .zip(g.volumes())
                .map(|(w, vol)| {
                    ((w[1].powi(3) - w[0].powi(3)) / 3.0 + (w[1].powi(5) - w[0].powi(5)) / 5.0) / vol
                })
                .collect();
            let big_u = mass_accumulation(&Field::new(avg), &g);
            errs.push((phi(&big_u, alpha, &g).unwrap() - exact).abs());
        }
        assert!(errs[1] <= 0.6 * errs[0] && errs[2] <= 0.6 * errs[1], "{errs:?}");
    }

    #[test]
    fn v0_bound_examples() {
        assert_eq!(monitor_v0_bound(2.0, 0.0, 2.0), 0.0);
        let v0 = 1.0 / 1f64.sinh();
        let r = monitor_v0_bound(v0, 1.0 / 6.0, 1.0);
        assert_relative_eq!(r, v0 - 6.0 / 7.0, max_relative = 1e-14);
        assert!(r < 0.0 && r > -0.0065);
    }

    #[test]
    fn logv_monitor_on_closed_form() {
        let g = grid(128);
        let u = Field::constant(128, 1.0);
        let v = solve_v(&u, 1.0, &g).unwrap();
        let big_u = mass_accumulation(&u, &g);
        let r = monitor_logv_gradient(&v, &big_u, &g);
        assert!(r.value <= 5.0 * g.h(), "{r:?}");
        let zero = Field::constant(128, 0.0);
        let v = solve_v(&zero, 1.0, &g).unwrap();
        let r = monitor_logv_gradient(&v, &mass_accumulation(&zero, &g), &g);
        assert!(r.value.abs() < 1e-12);
    }

    #[test]
    fn gradient_monitors() {
        let params = ProblemParams::new(3, 1.0, 1.0, 0.5).unwrap();
        let g = grid(128);
        let policy = ExponentPolicy { c_star: Some(2.0), ..Default::default() };
        let ex = choose_exponents(&params, &policy).unwrap();
        let derived = DerivedConstants { mass: 1.0 / 3.0, sphere_measure: 4.0 * std::f64::consts::PI, u0_sup: 1.0, eta: None };

        let zero = Field::constant(128, 0.0);
        let v = solve_v(&zero, 1.0, &g).unwrap();
        let r = monitor_vgrad_bounds(&v, &mass_accumulation(&zero, &g), &params, &g, &ex, &derived);
        assert_relative_eq!(r.far.value, -(0.5f64.powi(-2) * derived.mass), max_relative = 1e-10);
        assert_relative_eq!(r.global.value, 0.0, epsilon = 1e-12);

        let u = Field::constant(128, 1.0);
        let v = solve_v(&u, 1.0, &g).unwrap();
        let big_u = mass_accumulation(&u, &g);
        let r = monitor_vgrad_bounds(&v, &big_u, &params, &g, &ex, &derived);
        // closed form: v'(s) = (s cosh s − sinh s)/(s² sinh 1) ≤ 2/s on (0, 1/2]
        let exact = |s: f64| (s * s.cosh() - s.sinh()) / (s * s * 1f64.sinh());
        for k in 1..=50 {
            let s = 0.5 * k as f64 / 50.0;
            assert!(exact(s) - 2.0 / s < 0.0);
        }
        let near = r.near.unwrap();
        assert!(near.value < 0.0 && near.location <= 0.5 + 1e-12);
        assert!(r.far.value <= 1e-12 && r.global.value <= 1e-12);
    }

    #[test]
    fn vmax_monitor() {
        let (hi, lo) = monitor_vmax(&Field::constant(4, 2.0), 2.0);
        assert_eq!((hi, lo), (0.0, -2.0));
        let mut v = Field::constant(4, 0.5);
        v.values_mut()[2] = 1.1;
        assert!(monitor_vmax(&v, 1.0).0 > 0.0);
    }

    #[test]
    fn barrier_w_holds_at_initial_time() {
        let params = ProblemParams::new(3, 1.0, 0.05, 0.5).unwrap();
        let g = grid(128);
        let u0 = InitialProfile::Gaussian { amplitude: 2.0, center_radius: 0.3, width: 0.1 };
        let ex = choose_exponents(&params, &ExponentPolicy::default()).unwrap();
        let derived = DerivedConstants::compute(&params, &u0, &g, ex.gamma).unwrap();
        let barrier = Barrier::for_regime(&params, &ex, &derived).expect("small M admits W");
        let big_u = mass_accumulation(&u0.cell_averages(&g), &g);
        let r = monitor_barriers(&big_u, &params, &g, &barrier, &derived).unwrap();
        assert!(r.value <= 1e-15 * derived.mass, "{r:?}");

        let wrong = ProblemParams::new(3, 1.0, 0.05, 1.0).unwrap();
        assert!(monitor_barriers(&big_u, &wrong, &g, &barrier, &derived).is_err());
    }

    #[test]
    fn barrier_z_holds_at_initial_time() {
        let params = ProblemParams::new(3, 1.0, 1.0, 1.0).unwrap();
        let g = grid(256);
        for u0 in [
            InitialProfile::Constant { value: 3.0 },
            InitialProfile::Gaussian { amplitude: 5.0, center_radius: 0.0, width: 0.1 },
            InitialProfile::Annulus { amplitude: 1.0, inner: 0.6, outer: 0.9 },
        ] {
            let mut ex = choose_exponents(&params, &ExponentPolicy::default()).unwrap();
            let derived = DerivedConstants::compute(&params, &u0, &g, ex.gamma).unwrap();
            ex.attach_delta1(&params, &derived).unwrap();
            let barrier = Barrier::for_regime(&params, &ex, &derived).unwrap();
            let big_u = mass_accumulation(&u0.cell_averages(&g), &g);
            let r = monitor_barriers(&big_u, &params, &g, &barrier, &derived).unwrap();
            assert!(r.value <= 0.0, "{u0:?}: {r:?}");
        }
    }

    #[test]
    fn psi_dominates_scaled_phi() {
        let g = grid(64);
        let u = Field::new((0..64).map(|i| 1.0 + (i as f64 * 0.9).cos()).collect());
        let big_u = mass_accumulation(&u, &g);
        for alpha in [0.1, 0.5, 0.9] {
            assert!(psi(&big_u, &g) >= phi(&big_u, alpha, &g).unwrap() * (1.0 - 1e-14));
        }
    }

    #[test]
    fn evidence_needs_enough_records() {
        let params = ProblemParams::default();
        let derived = DerivedConstants { mass: 1.0, sphere_measure: 1.0, u0_sup: 1.0, eta: None };
        let rec = DiagnosticsRecord { t: 0.0, dt: 0.1, mass: 1.0, u_max: 1.0, v0: 1.0, phi: 1.0, psi: 1.0, residuals: BTreeMap::new() };
        let short = vec![rec.clone(); 5];
        assert_eq!(
            blowup_evidence(&short, 0.5, &params, &derived),
            BlowupEvidence::InsufficientData { records: 5 }
        );
        let flat: Vec<_> = (0..30).map(|k| DiagnosticsRecord { t: k as f64, ..rec.clone() }).collect();
        let ev = blowup_evidence(&flat, 0.5, &params, &derived);
        let s = ev.summary().unwrap();
        assert_eq!(s.phi_slope, 0.0);
        assert!(s.psi_persistent);
        assert!(s.doubling_times.is_empty());
    }

    #[test]
    fn doubling_series() {
        let rec = |t: f64, u: f64| DiagnosticsRecord { t, dt: 0.0, mass: 0.0, u_max: u, v0: 0.0, phi: 0.0, psi: 0.0, residuals: BTreeMap::new() };
        let traj = vec![rec(0.0, 1.0), rec(1.0, 2.0), rec(1.5, 4.5), rec(1.7, 8.0)];
        assert_eq!(doubling_times(&traj), vec![1.0, 0.5, 0.19999999999999996]);
    }
}
