//! Problem parameters, initial data, derived constants, exponent windows,
//! comparison barriers and the explicit regime thresholds.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, RadialGrid};
use crate::quadrature;

/// Parameters of one instance of the radial system on the ball `B_R ⊂ ℝⁿ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    /// Space dimension `n ≥ 3`.
    pub dim: u32,
    /// Ball radius `R`.
    pub radius: f64,
    /// Dirichlet value `M` of the chemical on the boundary. Zero is accepted
    /// as a test hook that switches the drift off.
    pub boundary_value: f64,
    /// Diffusion exponent `m` in `D(ξ) = k_D (1 + ξ)^{m−1}`.
    pub exponent: f64,
    /// Lower diffusion constant `k_D`.
    pub k_lower: f64,
    /// Upper diffusion constant `K_D`.
    pub k_upper: f64,
}

impl Default for ProblemParams {
    fn default() -> Self {
        Self {
            dim: 3,
            radius: 1.0,
            boundary_value: 1.0,
            exponent: 1.0,
            k_lower: 1.0,
            k_upper: 1.0,
        }
    }
}

impl ProblemParams {
    pub fn new(dim: u32, radius: f64, boundary_value: f64, exponent: f64) -> Result<Self> {
        let p = Self {
            dim,
            radius,
            boundary_value,
            exponent,
            ..Self::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 3 {
            return Err(Error::config("n", format!("n ≥ 3 (got {})", self.dim)));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::config("R", format!("R > 0 (got {})", self.radius)));
        }
        if !(self.boundary_value >= 0.0 && self.boundary_value.is_finite()) {
            return Err(Error::config(
                "M",
                format!("M ≥ 0 (got {})", self.boundary_value),
            ));
        }
        if !(self.exponent > 0.0 && self.exponent.is_finite()) {
            return Err(Error::config("m", format!("m > 0 (got {})", self.exponent)));
        }
        if !(self.k_lower > 0.0 && self.k_lower.is_finite()) {
            return Err(Error::config("k_D", format!("k_D > 0 (got {})", self.k_lower)));
        }
        if !(self.k_upper >= self.k_lower && self.k_upper.is_finite()) {
            return Err(Error::config(
                "K_D",
                format!("K_D ≥ k_D (got K_D = {}, k_D = {})", self.k_upper, self.k_lower),
            ));
        }
        Ok(())
    }

    pub fn n(&self) -> f64 {
        self.dim as f64
    }

    /// `k_D = K_D = 1`.
    pub fn is_prototype(&self) -> bool {
        self.k_lower == 1.0 && self.k_upper == 1.0
    }

    /// The diffusion coefficient used by the scheme, `k_D (1 + ξ)^{m−1}`.
    ///
    /// It lies between `k_D (1+ξ)^{m−1}` and `K_D (1+ξ)^{m−1}` by construction
    /// and reduces to the prototype when `k_D = 1`.
    #[inline]
    pub fn diffusion(&self, xi: f64) -> f64 {
        self.k_lower * (1.0 + xi.max(0.0)).powf(self.exponent - 1.0)
    }

    /// `2 k_D / (n − 2)`, the bound on `M` for the linear-diffusion case.
    pub fn critical_boundary_value(&self) -> f64 {
        2.0 * self.k_lower / (self.n() - 2.0)
    }

    /// `2 / n`, the upper end of the exponent range with large-`M` blow-up.
    pub fn blowup_exponent_limit(&self) -> f64 {
        2.0 / self.n()
    }
}

/// `D(ξ) = (1 + ξ)^{m−1}` for the prototype diffusion.
pub fn diffusion_coeff(xi: f64, m: f64) -> Result<f64> {
    if !(xi >= 0.0) {
        return Err(Error::Domain(format!("D(ξ) requires ξ ≥ 0 (got {xi})")));
    }
    Ok((1.0 + xi).powf(m - 1.0))
}

/// Γ(n/2) by exact recursion from Γ(1) = 1 and Γ(1/2) = √π.
fn gamma_half(n: u32) -> f64 {
    let (mut value, mut x) = if n.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (PI.sqrt(), 0.5)
    };
    let target = n as f64 / 2.0;
    while x < target {
        value *= x;
        x += 1.0;
    }
    value
}

/// σₙ = 2π^{n/2}/Γ(n/2), the measure of the unit sphere in ℝⁿ.
pub fn unit_sphere_measure(n: u32) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("σₙ requires n ≥ 2 (got {n})")));
    }
    Ok(2.0 * PI.powf(n as f64 / 2.0) / gamma_half(n))
}

/// Radially symmetric nonnegative initial density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialProfile {
    Constant {
        value: f64,
    },
    /// `A exp(−(s − c)² / (2 w²))`.
    Gaussian {
        amplitude: f64,
        center_radius: f64,
        width: f64,
    },
    /// `A` on `[inner, outer]`, zero elsewhere.
    Annulus {
        amplitude: f64,
        inner: f64,
        outer: f64,
    },
    /// Piecewise-linear interpolation of `(radius, value)` samples, held
    /// constant outside the sampled range.
    Tabulated {
        samples: Vec<(f64, f64)>,
    },
}

impl InitialProfile {
    pub fn validate(&self, radius: f64) -> Result<()> {
        let nonneg = |key: &str, x: f64| {
            if x >= 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be finite and ≥ 0 (got {x})")))
            }
        };
        match self {
            InitialProfile::Constant { value } => nonneg("amplitude", *value)?,
            InitialProfile::Gaussian {
                amplitude,
                center_radius,
                width,
            } => {
                nonneg("amplitude", *amplitude)?;
                nonneg("center_radius", *center_radius)?;
                if !(*width > 0.0 && width.is_finite()) {
                    return Err(Error::config("width", format!("width > 0 (got {width})")));
                }
            }
            InitialProfile::Annulus {
                amplitude,
                inner,
                outer,
            } => {
                nonneg("amplitude", *amplitude)?;
                nonneg("inner", *inner)?;
                if !(outer > inner) {
                    return Err(Error::config(
                        "outer",
                        format!("outer > inner (got inner = {inner}, outer = {outer})"),
                    ));
                }
                if *inner >= radius {
                    return Err(Error::config("inner", format!("inner < R = {radius}")));
                }
            }
            InitialProfile::Tabulated { samples } => {
                if samples.is_empty() {
                    return Err(Error::config("samples", "at least one sample"));
                }
                for (r, u) in samples {
                    nonneg("samples", *r)?;
                    nonneg("samples", *u)?;
                }
                if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::config("samples", "radii must be strictly increasing"));
                }
            }
        }
        if self.sup_norm(radius) <= 0.0 {
            return Err(Error::Validation(
                "initial profile is identically zero".into(),
            ));
        }
        Ok(())
    }

    /// Pointwise value.
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            InitialProfile::Constant { value } => *value,
            InitialProfile::Gaussian {
                amplitude,
                center_radius,
                width,
            } => {
                let z = (s - center_radius) / width;
                amplitude * (-0.5 * z * z).exp()
            }
            InitialProfile::Annulus {
                amplitude,
                inner,
                outer,
            } => {
                if s >= *inner && s <= *outer {
                    *amplitude
                } else {
                    0.0
                }
            }
            InitialProfile::Tabulated { samples } => {
                let first = samples[0];
                let last = samples[samples.len() - 1];
                if s <= first.0 {
                    return first.1;
                }
                if s >= last.0 {
                    return last.1;
                }
                let k = samples.partition_point(|&(r, _)| r <= s);
                let (r0, u0) = samples[k - 1];
                let (r1, u1) = samples[k];
                u0 + (u1 - u0) * (s - r0) / (r1 - r0)
            }
        }
    }

    /// `‖u₀‖_∞` on `[0, R]`.
    pub fn sup_norm(&self, radius: f64) -> f64 {
        match self {
            InitialProfile::Constant { value } => *value,
            InitialProfile::Gaussian { center_radius, .. } => self.eval(center_radius.min(radius)),
            InitialProfile::Annulus {
                amplitude, inner, ..
            } => {
                if *inner < radius {
                    *amplitude
                } else {
                    0.0
                }
            }
            InitialProfile::Tabulated { samples } => samples
                .iter()
                .filter(|(r, _)| *r <= radius)
                .map(|&(_, u)| u)
                .chain(std::iter::once(self.eval(radius)))
                .fold(0.0, f64::max),
        }
    }

    /// Radii where the profile or its derivative jumps.
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            InitialProfile::Constant { .. } => Vec::new(),
            InitialProfile::Gaussian { center_radius, .. } => vec![*center_radius],
            InitialProfile::Annulus { inner, outer, .. } => vec![*inner, *outer],
            InitialProfile::Tabulated { samples } => samples.iter().map(|&(r, _)| r).collect(),
        }
    }

    /// Largest panel width keeping 8-point Gauss–Legendre near machine precision.
    fn panel_width(&self) -> f64 {
        match self {
            InitialProfile::Gaussian { width, .. } => width / 4.0,
            _ => f64::INFINITY,
        }
    }

    /// `∫_a^b s^{n−1} u₀(s) ds`.
    pub fn radial_integral(&self, a: f64, b: f64, dim: u32) -> f64 {
        if b <= a {
            return 0.0;
        }
        let n = dim as f64;
        match self {
            InitialProfile::Constant { value } => value * (b.powf(n) - a.powf(n)) / n,
            InitialProfile::Annulus {
                amplitude,
                inner,
                outer,
            } => {
                let lo = a.max(*inner);
                let hi = b.min(*outer);
                if hi > lo {
                    amplitude * (hi.powf(n) - lo.powf(n)) / n
                } else {
                    0.0
                }
            }
            _ => {
                let mut cuts = vec![a];
                cuts.extend(self.breakpoints().into_iter().filter(|&r| r > a && r < b));
                cuts.push(b);
                let panel = self.panel_width();
                let mut total = 0.0;
                for w in cuts.windows(2) {
                    let (lo, hi) = (w[0], w[1]);
                    let pieces = ((hi - lo) / panel).ceil().max(1.0) as usize;
                    let step = (hi - lo) / pieces as f64;
                    for k in 0..pieces {
                        let x0 = lo + k as f64 * step;
                        let x1 = if k + 1 == pieces { hi } else { x0 + step };
                        total += quadrature::gauss_legendre8(x0, x1, |s| {
                            s.powi(dim as i32 - 1) * self.eval(s)
                        });
                    }
                }
                total
            }
        }
    }

    /// Cell averages on a grid, chosen so that `Σ volᵢ uᵢ` reproduces the
    /// radial mass integral cell by cell.
    pub fn cell_averages(&self, grid: &RadialGrid) -> Field {
        let faces = grid.faces();
        Field::new(
            grid.volumes()
                .iter()
                .enumerate()
                .map(|(i, vol)| self.radial_integral(faces[i], faces[i + 1], grid.dim()) / vol)
                .collect(),
        )
    }
}

/// `L = ∫₀^R s^{n−1} u₀(s) ds`.
pub fn initial_mass(u0: &InitialProfile, params: &ProblemParams) -> Result<f64> {
    u0.validate(params.radius)?;
    let l = u0.radial_integral(0.0, params.radius, params.dim);
    if l <= 0.0 {
        return Err(Error::Validation("initial profile carries no mass".into()));
    }
    Ok(l)
}

/// Points in the geometric radius grid used for the η supremum.
pub const ETA_GRID_POINTS: usize = 4096;

/// Geometric grid on `[R·10⁻⁶, R]`, densest near the origin.
fn eta_radii(radius: f64) -> Vec<f64> {
    let ratio: f64 = 1e-6;
    (0..ETA_GRID_POINTS)
        .map(|k| {
            if k + 1 == ETA_GRID_POINTS {
                radius
            } else {
                radius * ratio.powf(1.0 - k as f64 / (ETA_GRID_POINTS - 1) as f64)
            }
        })
        .collect()
}

fn check_gamma(gamma: f64, params: &ProblemParams) -> Result<()> {
    let window = gamma_window(params)?;
    if !window.contains(gamma) {
        return Err(Error::config(
            "gamma",
            format!("γ ∈ {window} (got {gamma})"),
        ));
    }
    Ok(())
}

/// `η(u₀, γ) = sup_{r∈(0,R)} r^{γ−n} U₀(r)` on a 4096-point geometric grid.
///
/// This is a lower bound for the true supremum.
pub fn eta(u0: &InitialProfile, gamma: f64, params: &ProblemParams) -> Result<f64> {
    check_gamma(gamma, params)?;
    u0.validate(params.radius)?;
    let n = params.n();
    let mut acc = 0.0;
    let mut prev = 0.0;
    let mut best: f64 = 0.0;
    for r in eta_radii(params.radius) {
        acc += u0.radial_integral(prev, r, params.dim);
        prev = r;
        best = best.max(r.powf(gamma - n) * acc);
    }
    Ok(best)
}

/// [`eta`] extended by the face values of a simulation grid, so that the
/// discrete `U` at `t = 0` lies below `W` on every face.
pub fn eta_on_grid(
    u0: &InitialProfile,
    gamma: f64,
    params: &ProblemParams,
    grid: &RadialGrid,
) -> Result<f64> {
    let base = eta(u0, gamma, params)?;
    let n = params.n();
    let faces = grid.faces();
    let u = u0.cell_averages(grid);
    let mut acc = 0.0;
    let mut best = base;
    for (i, (vol, ui)) in grid.volumes().iter().zip(u.values()).enumerate() {
        acc += vol * ui;
        let f = faces[i + 1];
        best = best.max(f.powf(gamma - n) * acc);
    }
    Ok(best)
}

/// `M* = γ / (η (R^γ + η(n−γ))^{1−m} R^{2−γ(2−m)})`, the smallness bound on
/// `M` under which the `W` barrier holds for `0 < m < 1`.
pub fn smallness_threshold(gamma: f64, eta: f64, params: &ProblemParams) -> Result<f64> {
    let m = params.exponent;
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::Regime(format!(
            "M* is defined for 0 < m < 1 (got m = {m})"
        )));
    }
    check_gamma(gamma, params)?;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Domain(format!("η must be positive (got {eta})")));
    }
    let n = params.n();
    let r = params.radius;
    Ok(gamma / (eta * (r.powf(gamma) + eta * (n - gamma)).powf(1.0 - m) * r.powf(2.0 - gamma * (2.0 - m))))
}

/// Constants computed once from the initial data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// `L`, the initial radial mass.
    pub mass: f64,
    /// σₙ.
    pub sphere_measure: f64,
    /// `‖u₀‖_∞`.
    pub u0_sup: f64,
    /// `η(u₀, γ)` when a `γ` was chosen.
    pub eta: Option<f64>,
}

impl DerivedConstants {
    /// Uses the discrete cell averages on `grid` for `L` so that the
    /// simulation's initial mass matches exactly.
    pub fn compute(
        params: &ProblemParams,
        u0: &InitialProfile,
        grid: &RadialGrid,
        gamma: Option<f64>,
    ) -> Result<Self> {
        u0.validate(params.radius)?;
        let mass = grid.radial_mass(&u0.cell_averages(grid));
        if mass <= 0.0 {
            return Err(Error::Validation("initial profile carries no mass".into()));
        }
        let eta = gamma
            .map(|g| eta_on_grid(u0, g, params, grid))
            .transpose()?;
        Ok(Self {
            mass,
            sphere_measure: unit_sphere_measure(params.dim)?,
            u0_sup: u0.sup_norm(params.radius),
            eta,
        })
    }
}

/// Open interval `(lo, hi)`; `hi` may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpenInterval {
    pub lo: f64,
    pub hi: f64,
}

impl OpenInterval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn is_empty(&self) -> bool {
        !(self.hi > self.lo)
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    /// Midpoint; `lo + 1` when the interval is unbounded above.
    pub fn midpoint(&self) -> f64 {
        if self.hi.is_finite() {
            0.5 * (self.lo + self.hi)
        } else {
            self.lo + 1.0
        }
    }
}

impl std::fmt::Display for OpenInterval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.lo, self.hi)
    }
}

/// Window for the `Z` barrier exponent `β`: `(M(n−2)/k_D, 2)`.
pub fn beta_window(params: &ProblemParams) -> OpenInterval {
    OpenInterval::new(
        params.boundary_value * (params.n() - 2.0) / params.k_lower,
        2.0,
    )
}

/// Window for `C*`: `(1, k_D β/(M(n−2)))` in the linear-diffusion mode, `(1, ∞)` otherwise.
pub fn c_star_window(params: &ProblemParams, beta: Option<f64>) -> OpenInterval {
    match beta {
        Some(b) if params.boundary_value > 0.0 => OpenInterval::new(
            1.0,
            params.k_lower * b / (params.boundary_value * (params.n() - 2.0)),
        ),
        _ => OpenInterval::new(1.0, f64::INFINITY),
    }
}

/// Window for the `W` barrier exponent `γ`: `(0, 2/(2−m))`, only for `0 < m < 1`.
pub fn gamma_window(params: &ProblemParams) -> Result<OpenInterval> {
    let m = params.exponent;
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::Regime(format!(
            "γ is only defined for 0 < m < 1 (got m = {m})"
        )));
    }
    Ok(OpenInterval::new(0.0, 2.0 / (2.0 - m)))
}

/// Window for the `φ` weight exponent `α`.
///
/// For `m < 2/n` this is `(n−3, n(1−m)−1)`, additionally capped at 1 when
/// `n = 3`. Outside that range `φ` is still recorded for reporting, with the
/// window `(n−3, n−2)`.
pub fn alpha_window(params: &ProblemParams) -> OpenInterval {
    let n = params.n();
    let m = params.exponent;
    if m < params.blowup_exponent_limit() {
        let mut hi = n * (1.0 - m) - 1.0;
        if params.dim == 3 {
            hi = hi.min(1.0);
        }
        OpenInterval::new(n - 3.0, hi)
    } else {
        OpenInterval::new(n - 3.0, n - 2.0)
    }
}

/// Whether the `Z` barrier must be constructible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BarrierMode {
    /// Fail when `m = 1` and the `β` window is empty.
    #[default]
    Required,
    /// Leave `β` unset when its window is empty.
    IfAdmissible,
}

/// User overrides for [`choose_exponents`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExponentPolicy {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub c_star: Option<f64>,
    pub delta0: Option<f64>,
    pub z_barrier: BarrierMode,
}

/// Exponents and radii used by the barrier and functional monitors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentChoice {
    /// `Z` barrier exponent, present only in the linear-diffusion mode below the critical `M`.
    pub beta: Option<f64>,
    /// `C* > 1` for the near-origin gradient bound.
    pub c_star: f64,
    /// `W` barrier exponent, present only for `0 < m < 1`.
    pub gamma: Option<f64>,
    /// Weight exponent of `φ`.
    pub alpha: f64,
    /// Far-field cutoff radius.
    pub delta0: f64,
    /// Radius of the `Z` barrier region, filled in by [`ExponentChoice::attach_delta1`].
    pub delta1: Option<f64>,
}

fn pick(key: &str, value: Option<f64>, window: OpenInterval, hypothesis: &str) -> Result<f64> {
    if window.is_empty() {
        return Err(Error::config(key, format!("empty interval {window}: {hypothesis}")));
    }
    let x = value.unwrap_or_else(|| window.midpoint());
    if !window.contains(x) {
        return Err(Error::config(key, format!("{key} ∈ {window} (got {x})")));
    }
    Ok(x)
}

/// Selects exponents: midpoints of the open windows unless overridden.
pub fn choose_exponents(params: &ProblemParams, policy: &ExponentPolicy) -> Result<ExponentChoice> {
    params.validate()?;
    let r = params.radius;
    let delta0 = pick("delta0", policy.delta0, OpenInterval::new(0.0, r), "0 < δ₀ < R")?;
    let m = params.exponent;

    let mut beta = None;
    if m == 1.0 {
        let thr = params.critical_boundary_value();
        let admissible = params.boundary_value < thr;
        let required = policy.z_barrier == BarrierMode::Required || policy.beta.is_some();
        if admissible {
            beta = Some(pick(
                "beta",
                policy.beta,
                beta_window(params),
                "M < 2k_D/(n−2)",
            )?);
        } else if required {
            return Err(Error::config(
                "M",
                format!(
                    "M < 2k_D/(n−2) = {thr} is required for the Z barrier (got M = {})",
                    params.boundary_value
                ),
            ));
        }
    } else if policy.beta.is_some() {
        return Err(Error::config("beta", "β applies only to m = 1"));
    }

    let c_window = c_star_window(params, beta);
    let c_star = match (beta, policy.c_star) {
        (Some(_), v) => pick("c_star", v, c_window, "C* < k_D β/(M(n−2))")?,
        (None, v) => pick("c_star", Some(v.unwrap_or(2.0)), c_window, "C* > 1")?,
    };

    let gamma = if m > 0.0 && m < 1.0 {
        Some(pick("gamma", policy.gamma, gamma_window(params)?, "0 < m < 1")?)
    } else if policy.gamma.is_some() {
        return Err(Error::config("gamma", "γ applies only to 0 < m < 1"));
    } else {
        None
    };

    let alpha = pick(
        "alpha",
        policy.alpha,
        alpha_window(params),
        "n − 3 < α < n(1−m) − 1",
    )?;

    Ok(ExponentChoice {
        beta,
        c_star,
        gamma,
        alpha,
        delta0,
        delta1: None,
    })
}

impl ExponentChoice {
    /// Re-checks every exponent against its window.
    pub fn validate(&self, params: &ProblemParams) -> Result<()> {
        let r = params.radius;
        if !OpenInterval::new(0.0, r).contains(self.delta0) {
            return Err(Error::config("delta0", format!("δ₀ ∈ (0, {r})")));
        }
        if let Some(b) = self.beta {
            if params.exponent != 1.0 {
                return Err(Error::config("beta", "β applies only to m = 1"));
            }
            let w = beta_window(params);
            if !w.contains(b) {
                return Err(Error::config("beta", format!("β ∈ {w} (got {b})")));
            }
        }
        let cw = c_star_window(params, self.beta);
        if !cw.contains(self.c_star) {
            return Err(Error::config("c_star", format!("C* ∈ {cw} (got {})", self.c_star)));
        }
        match self.gamma {
            Some(g) => check_gamma(g, params)?,
            None if params.exponent > 0.0 && params.exponent < 1.0 => {
                return Err(Error::config("gamma", "γ is required for 0 < m < 1"));
            }
            None => {}
        }
        let aw = alpha_window(params);
        if !aw.contains(self.alpha) {
            return Err(Error::config("alpha", format!("α ∈ {aw} (got {})", self.alpha)));
        }
        if let Some(d1) = self.delta1 {
            if !(d1 > 0.0 && d1 <= r) {
                return Err(Error::config("delta1", format!("δ₁ ∈ (0, {r}]")));
            }
        }
        Ok(())
    }

    /// Computes `δ₁` when `β` is set.
    pub fn attach_delta1(&mut self, params: &ProblemParams, derived: &DerivedConstants) -> Result<()> {
        if let Some(beta) = self.beta {
            self.delta1 = Some(barrier_delta1(beta, self.c_star, params, derived)?);
        }
        Ok(())
    }

    /// `R (1 − 1/C*)^{1/(n−2)}`, the outer edge of the near-origin gradient bound.
    pub fn near_origin_radius(&self, params: &ProblemParams) -> f64 {
        params.radius * (1.0 - 1.0 / self.c_star).powf(1.0 / (params.n() - 2.0))
    }
}

/// Radius `δ₁` below which the `Z` barrier dominates `U`.
pub fn barrier_delta1(
    beta: f64,
    c_star: f64,
    params: &ProblemParams,
    derived: &DerivedConstants,
) -> Result<f64> {
    if params.exponent != 1.0 {
        return Err(Error::Regime(format!(
            "δ₁ requires m = 1 (got m = {})",
            params.exponent
        )));
    }
    let thr = params.critical_boundary_value();
    let big_m = params.boundary_value;
    if big_m >= thr {
        return Err(Error::Regime(format!(
            "δ₁ requires M < 2k_D/(n−2) = {thr} (got M = {big_m})"
        )));
    }
    if big_m <= 0.0 {
        return Err(Error::Domain("δ₁ requires M > 0".into()));
    }
    let bw = beta_window(params);
    if !bw.contains(beta) {
        return Err(Error::config("beta", format!("β ∈ {bw} (got {beta})")));
    }
    let cw = c_star_window(params, Some(beta));
    if !cw.contains(c_star) {
        return Err(Error::config("c_star", format!("C* ∈ {cw} (got {c_star})")));
    }
    let n = params.n();
    let l = derived.mass;
    let first = params.radius * (1.0 - 1.0 / c_star).powf(1.0 / (n - 2.0));
    let second = (n * l / derived.u0_sup).powf(1.0 / n);
    let third = ((l * big_m).powf(n) / (n * derived.sphere_measure * (2.0 - beta)))
        .powf(1.0 / (n * (n - 2.0)));
    Ok(first.min(second).min(third))
}

/// `Z(s) = L (s/δ₁)^{n−β}` on `[0, δ₁]`.
pub fn barrier_z(s: f64, beta: f64, delta1: f64, mass: f64, dim: u32) -> Result<f64> {
    if !(s >= 0.0 && s <= delta1) {
        return Err(Error::Domain(format!("Z(s) requires s ∈ [0, {delta1}] (got {s})")));
    }
    Ok(mass * (s / delta1).powf(dim as f64 - beta))
}

/// `W(s) = η s^{n−γ}` on `[0, R]`.
pub fn barrier_w(s: f64, gamma: f64, eta: f64, params: &ProblemParams) -> Result<f64> {
    if !(s >= 0.0 && s <= params.radius) {
        return Err(Error::Domain(format!(
            "W(s) requires s ∈ [0, {}] (got {s})",
            params.radius
        )));
    }
    Ok(eta * s.powf(params.n() - gamma))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RegimeLabel {
    BoundedGuaranteed,
    SmallMBounded,
    BlowupCandidate,
    Indeterminate,
}

/// Which hypotheses of the boundedness and blow-up results were checked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeWitness {
    pub superlinear_diffusion: bool,
    /// `2k_D/(n−2)` when `m = 1`.
    pub critical_boundary_value: Option<f64>,
    /// `M*(γ)` at the default `γ` when `0 < m < 1`.
    pub smallness_threshold: Option<f64>,
    pub below_blowup_exponent: bool,
    /// The empirical blow-up threshold supplied by the caller.
    pub blowup_threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeClassification {
    pub label: RegimeLabel,
    pub witness: RegimeWitness,
}

/// Labels `(m, M)` by the hypotheses it satisfies.
pub fn classify_regime(
    params: &ProblemParams,
    u0: &InitialProfile,
    blowup_threshold: Option<f64>,
) -> RegimeClassification {
    let m = params.exponent;
    let big_m = params.boundary_value;
    let mut witness = RegimeWitness {
        superlinear_diffusion: m > 1.0,
        critical_boundary_value: None,
        smallness_threshold: None,
        below_blowup_exponent: m < params.blowup_exponent_limit(),
        blowup_threshold,
    };
    if m == 1.0 {
        witness.critical_boundary_value = Some(params.critical_boundary_value());
    }
    if m > 0.0 && m < 1.0 {
        witness.smallness_threshold = gamma_window(params)
            .ok()
            .and_then(|w| {
                let g = w.midpoint();
                let e = eta(u0, g, params).ok()?;
                smallness_threshold(g, e, params).ok()
            });
    }

    let below_critical = witness.critical_boundary_value.is_some_and(|thr| big_m < thr);
    let label = if witness.superlinear_diffusion || below_critical {
        RegimeLabel::BoundedGuaranteed
    } else if witness.smallness_threshold.is_some_and(|thr| big_m <= thr) {
        RegimeLabel::SmallMBounded
    } else if witness.below_blowup_exponent && blowup_threshold.is_some_and(|thr| big_m > thr) {
        RegimeLabel::BlowupCandidate
    } else {
        RegimeLabel::Indeterminate
    };
    RegimeClassification { label, witness }
}
