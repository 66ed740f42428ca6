use serde::{Deserialize, Serialize};

use crate::diagnostics::{mass_accumulation, phi, psi, DiagnosticsRecord, MonitorConfig};
use crate::elliptic::{solve_v, v_at_origin};
use crate::error::Result;
use crate::grid::{Field, RadialGrid};
use crate::model::{choose_exponents, BarrierMode, DerivedConstants, ExponentPolicy, ProblemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// Compares against a closed form.
    Oracle,
    /// Checks a monitored inequality against its tolerance.
    Monitor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelftestCheck {
    pub name: String,
    pub kind: CheckKind,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, kind: CheckKind, passed: bool, detail: String) -> SelftestCheck {
    SelftestCheck { name: name.to_string(), kind, passed, detail }
}

fn sinh_profile(s: f64) -> f64 {
    if s == 0.0 {
        1.0 / 1f64.sinh()
    } else {
        s.sinh() / (s * 1f64.sinh())
    }
}

/// Analytic-oracle checks plus monitor checks on deterministic stationary
/// fields.
pub fn selftest() -> Result<Vec<SelftestCheck>> {
    let mut out = Vec::new();

    // elliptic convergence against the closed form for u ≡ 1, M = 1
    let mut errors = Vec::new();
    for cells in [64, 128, 256] {
        let grid = RadialGrid::new(cells, 1.0, 3)?;
        let v = solve_v(&Field::constant(cells, 1.0), 1.0, &grid)?;
        let err = grid
            .centers()
            .iter()
            .zip(v.values())
            .map(|(&s, &x)| (x - sinh_profile(s)).abs())
            .fold(0.0, f64::max);
        let origin_err = (v_at_origin(&v) - sinh_profile(0.0)).abs();
        errors.push((grid.h(), err, origin_err));
    }
    let order = (errors[1].1 / errors[2].1).log2();
    out.push(check(
        "elliptic_order",
        CheckKind::Oracle,
        (1.8..=2.2).contains(&order),
        format!("observed order {order:.3}"),
    ));
    let origin_ok = errors.iter().all(|&(h, _, e)| e <= 10.0 * h * h);
    out.push(check(
        "elliptic_origin",
        CheckKind::Oracle,
        origin_ok,
        format!("v(0) errors {:?}", errors.iter().map(|e| e.2).collect::<Vec<_>>()),
    ));

    // φ and ψ for constant density
    let grid = RadialGrid::new(64, 1.0, 3)?;
    let big_u = mass_accumulation(&Field::constant(64, 1.0), &grid);
    let (phi_val, psi_val) = (phi(&big_u, 0.5, &grid)?, psi(&big_u, &grid));
    let phi_exact = 1.0 / (3.0 * 3.5);
    out.push(check(
        "phi_psi_constant",
        CheckKind::Oracle,
        (phi_val - phi_exact).abs() < 1e-12 && (psi_val - 1.0 / 6.0).abs() < 1e-12,
        format!("phi {phi_val}, psi {psi_val}"),
    ));

    // monitors on a family of deterministic stationary fields
    let params = ProblemParams::new(3, 1.0, 1.0, 0.5)?;
    let policy = ExponentPolicy { z_barrier: BarrierMode::IfAdmissible, ..Default::default() };
    let exponents = choose_exponents(&params, &policy)?;
    for (label, shape) in [
        ("constant", Box::new(|_: f64| 1.0) as Box<dyn Fn(f64) -> f64>),
        ("peak_at_origin", Box::new(|s: f64| 20.0 * (-s * s / 0.01).exp())),
        ("shell", Box::new(|s: f64| if (0.5..0.7).contains(&s) { 5.0 } else { 0.0 })),
        ("oscillating", Box::new(|s: f64| 1.0 + (12.0 * s).sin())),
    ] {
        let grid = RadialGrid::new(128, 1.0, 3)?;
        let u = Field::new(grid.centers().iter().map(|&s| shape(s)).collect());
        let derived = DerivedConstants {
            mass: grid.radial_mass(&u),
            sphere_measure: crate::model::unit_sphere_measure(3)?,
            u0_sup: u.max(),
            eta: None,
        };
        let monitors = MonitorConfig::new(&params, exponents, &derived);
        let v = solve_v(&u, params.boundary_value, &grid)?;
        let rec = DiagnosticsRecord::evaluate(0.0, 0.0, &u, &v, &params, &grid, &derived, &monitors)?;
        let bad = rec.violations(&monitors, grid.h(), params.boundary_value);
        out.push(check(
            &format!("monitors_{label}"),
            CheckKind::Monitor,
            bad.is_empty(),
            if bad.is_empty() {
                format!("{} monitors within tolerance", rec.residuals.len())
            } else {
                format!("violations: {bad:?}")
            },
        ));
    }
    Ok(out)
}
