//! The elliptic constraint `0 = s^{1−n}(s^{n−1} v_s)_s − u v`, `v(R) = M`,
//! `v_s(0) = 0`, solved exactly on the radial grid.
//!
//! Cell `i` balances the face fluxes against the consumption term:
//!
//! ```text
//! w_{i+1}(v_{i+1} − v_i)/h − w_i(v_i − v_{i−1})/h = volᵢ uᵢ vᵢ
//! ```
//!
//! The origin face has zero weight. At the outer face a ghost value with
//! `(v_ghost + v_{N−1})/2 = M` closes the system, so the outer gradient is
//! `(M − v_{N−1})/(h/2)`. Summing the rows up to face `i` telescopes into the
//! discrete identity `s^{n−1} v_s = Σ_{j<i} vol_j u_j v_j`, which is what
//! [`flux_identity_residual`] measures.

use crate::error::{Error, Result};
use crate::grid::{Field, RadialGrid};
use crate::tridiag::Tridiagonal;

/// Assembles the tridiagonal system for `v` given `u`.
fn assemble(u: &Field, boundary_value: f64, grid: &RadialGrid) -> (Tridiagonal, Vec<f64>) {
    let n = grid.len();
    let h = grid.h();
    let w = grid.weights();
    let vol = grid.volumes();
    let mut a = Tridiagonal::zeros(n);
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let inner = w[i] / h;
        let outer = if i + 1 == n { 2.0 * w[n] / h } else { w[i + 1] / h };
        a.diag[i] = inner + outer + vol[i] * u.values()[i];
        if i > 0 {
            a.lower[i] = -inner;
        }
        if i + 1 < n {
            a.upper[i] = -outer;
        } else {
            rhs[i] = outer * boundary_value;
        }
    }
    (a, rhs)
}

/// Solves for `v` given `u ≥ 0` and the boundary value `M ≥ 0`.
pub fn solve_v(u: &Field, boundary_value: f64, grid: &RadialGrid) -> Result<Field> {
    u.check_len(grid)?;
    if !u.is_finite() {
        return Err(Error::Domain("u contains non-finite values".into()));
    }
    if !(boundary_value >= 0.0 && boundary_value.is_finite()) {
        return Err(Error::Domain(format!("M must be finite and ≥ 0 (got {boundary_value})")));
    }
    if u.min() < 0.0 {
        return Err(Error::Domain(format!("u must be nonnegative (min {})", u.min())));
    }
    let (a, mut rhs) = assemble(u, boundary_value, grid);
    debug_assert!(a.is_diagonally_dominant());
    a.solve_in_place(&mut rhs)?;
    Ok(Field::new(rhs))
}

/// `∂ₛv` at all `N + 1` faces: zero at the origin, centered differences inside,
/// the ghost-cell gradient `(M − v_{N−1})/(h/2)` at the boundary.
pub fn face_gradient(v: &Field, boundary_value: f64, grid: &RadialGrid) -> Vec<f64> {
    let n = grid.len();
    let h = grid.h();
    let vals = v.values();
    let mut g = Vec::with_capacity(n + 1);
    g.push(0.0);
    g.extend(vals.windows(2).map(|w| (w[1] - w[0]) / h));
    g.push((boundary_value - vals[n - 1]) / (0.5 * h));
    g
}

/// `v(0)` by the even quadratic through the first two cell values,
/// `(9 v₀ − v₁)/8`.
pub fn v_at_origin(v: &Field) -> f64 {
    let vals = v.values();
    (9.0 * vals[0] - vals[1]) / 8.0
}

/// `∂ₛv − s^{1−n} Σ_{j below the face} vol_j u_j v_j` at every face.
pub fn flux_identity_residual(
    u: &Field,
    v: &Field,
    boundary_value: f64,
    grid: &RadialGrid,
) -> Vec<f64> {
    let g = face_gradient(v, boundary_value, grid);
    let w = grid.weights();
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(g.len());
    out.push(0.0);
    for (i, (vol, (ui, vi))) in grid
        .volumes()
        .iter()
        .zip(u.values().iter().zip(v.values()))
        .enumerate()
    {
        acc += vol * ui * vi;
        out.push(g[i + 1] - acc / w[i + 1]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `v(s) = M sinh(k s)/(s sinh(k R))·R` solves `v'' + 2v'/s = k² v`, `v(R) = M`.
    fn sinh_solution(s: f64, k: f64, m: f64) -> f64 {
        if s == 0.0 {
            m * k / k.sinh()
        } else {
            m * (k * s).sinh() / (s * k.sinh())
        }
    }

    #[test]
    fn zero_density_gives_constant() {
        let g = RadialGrid::new(32, 1.0, 3).unwrap();
        let v = solve_v(&Field::constant(32, 0.0), 1.0, &g).unwrap();
        assert!(v.values().iter().all(|&x| (x - 1.0).abs() < 1e-14));
        assert!(face_gradient(&v, 1.0, &g).iter().all(|&x| x.abs() < 1e-12));
        assert!((v_at_origin(&v) - 1.0).abs() < 1e-14);
        assert!(flux_identity_residual(&Field::constant(32, 0.0), &v, 1.0, &g)
            .iter()
            .all(|&x| x.abs() < 1e-12));
    }

    #[test]
    fn matches_sinh_solution_for_constant_density() {
        let v0 = 1.0 / 1f64.sinh();
        assert!((v0 - 0.8509181282).abs() < 1e-9);
        for &(c, m) in &[(1.0, 1.0), (4.0, 2.0)] {
            let k = f64::sqrt(c);
            let g = RadialGrid::new(256, 1.0, 3).unwrap();
            let v = solve_v(&Field::constant(256, c), m, &g).unwrap();
            let err = g
                .centers()
                .iter()
                .zip(v.values())
                .map(|(&s, &x)| (x - sinh_solution(s, k, m)).abs())
                .fold(0.0, f64::max);
            assert!(err < 5.0 * g.h() * g.h(), "err {err}");
            let origin = sinh_solution(0.0, k, m);
            assert!((v_at_origin(&v) - origin).abs() < 10.0 * g.h() * g.h());
        }
        // 4/sinh(2), the origin value for c = 4, M = 2
        assert!((sinh_solution(0.0, 2.0, 2.0) - 4.0 / 2f64.sinh()).abs() < 1e-15);
        assert!((4.0 / 2f64.sinh() - 1.102882259).abs() < 1e-9);
    }

    #[test]
    fn face_gradient_matches_closed_form() {
        let g = RadialGrid::new(128, 1.0, 3).unwrap();
        let v = solve_v(&Field::constant(128, 1.0), 1.0, &g).unwrap();
        let grad = face_gradient(&v, 1.0, &g);
        let exact = |s: f64| (s * s.cosh() - s.sinh()) / (s * s * 1f64.sinh());
        for (i, &f) in g.faces().iter().enumerate().skip(1).take(127) {
            assert!((grad[i] - exact(f)).abs() < 5.0 * g.h() * g.h());
        }
        assert_eq!(grad[0], 0.0);
    }
}
