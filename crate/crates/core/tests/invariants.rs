use chemolab::diagnostics::{mass_accumulation, phi, psi, DiagnosticsRecord, MonitorConfig};
use chemolab::elliptic::solve_v;
use chemolab::model::{choose_exponents, unit_sphere_measure, DerivedConstants, ExponentPolicy, ProblemParams};
use chemolab::stepper::{advance, cfl_dt, SimState, StepperConfig};
use chemolab::{Field, RadialGrid};
use proptest::prelude::*;

fn density(cells: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..10.0f64, cells).prop_filter("needs mass", |u| u.iter().any(|&x| x > 1e-3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn steps_conserve_mass_and_sign(
        u in density(40),
        dim in 3u32..=5,
        m in prop::sample::select(vec![0.5, 1.0, 1.5]),
        big_m in 0.0..20.0f64,
    ) {
        let params = ProblemParams::new(dim, 1.0, big_m, m).unwrap();
        let grid = RadialGrid::new(40, 1.0, dim).unwrap();
        let stepper = StepperConfig::default();
        let mut state = SimState::new(Field::new(u), &params, &grid, &stepper).unwrap();
        let mass0 = grid.radial_mass(&state.u);
        for _ in 0..20 {
            state.dt = cfl_dt(&state, &stepper, &params, &grid);
            advance(&mut state, &stepper, &params, &grid).unwrap();
            prop_assert!(state.u.min() >= 0.0);
            prop_assert!(state.v.max() <= big_m);
            prop_assert!(state.v.min() >= 0.0);
        }
        prop_assert!(((grid.radial_mass(&state.u) - mass0) / mass0).abs() < 1e-13);
    }

    #[test]
    fn psi_dominates_scaled_phi(u in density(32), dim in 3u32..=5, m in 0.1..1.0f64) {
        let params = ProblemParams::new(dim, 1.5, 1.0, m).unwrap();
        let grid = RadialGrid::new(32, 1.5, dim).unwrap();
        let exponents = choose_exponents(&params, &ExponentPolicy::default()).unwrap();
        let alpha = exponents.alpha;
        let big_u = mass_accumulation(&Field::new(u), &grid);
        let phi = phi(&big_u, alpha, &grid).unwrap();
        let psi = psi(&big_u, &grid);
        let n = f64::from(dim);
        prop_assert!(psi >= 1.5f64.powf(1.0 - n + alpha) * phi * (1.0 - 1e-12));
    }

    #[test]
    fn evaluation_is_pure(u in density(24), big_m in 0.1..5.0f64) {
        let params = ProblemParams::new(3, 1.0, big_m, 1.5).unwrap();
        let grid = RadialGrid::new(24, 1.0, 3).unwrap();
        let u = Field::new(u);
        let v = solve_v(&u, big_m, &grid).unwrap();
        let derived = DerivedConstants {
            mass: grid.radial_mass(&u),
            sphere_measure: unit_sphere_measure(3).unwrap(),
            u0_sup: u.max(),
            eta: None,
        };
        let exponents = choose_exponents(&params, &ExponentPolicy::default()).unwrap();
        let monitors = MonitorConfig::new(&params, exponents, &derived);
        let (u_before, v_before) = (u.clone(), v.clone());
        let a = DiagnosticsRecord::evaluate(0.0, 0.0, &u, &v, &params, &grid, &derived, &monitors).unwrap();
        let b = DiagnosticsRecord::evaluate(0.0, 0.0, &u, &v, &params, &grid, &derived, &monitors).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(u, u_before);
        prop_assert_eq!(v, v_before);
    }
}
