//! Small quadrature helpers.

const GL8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_361_8),
    (0.525_532_409_916_329, 0.313_706_645_877_887_05),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_34),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_69),
];

/// 8-point Gauss–Legendre rule on `[a, b]`; exact for polynomials of degree ≤ 15.
pub fn gauss_legendre8(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    GL8.iter()
        .map(|&(x, w)| w * (f(mid - half * x) + f(mid + half * x)))
        .sum::<f64>()
        * half
}

/// `∫_a^b s^p ds` for `0 ≤ a ≤ b`, including `p = −1`.
pub fn power_integral(a: f64, b: f64, p: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if (p + 1.0).abs() < 1e-12 {
        (b / a).ln()
    } else {
        let q = p + 1.0;
        (b.powf(q) - a.powf(q)) / q
    }
}
