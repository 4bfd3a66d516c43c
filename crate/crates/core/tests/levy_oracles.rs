//! Characteristic exponent against closed forms, plus structural invariants.

use proptest::prelude::*;
use statrs::function::gamma::{gamma, gamma_ur};

use spemm::levy::{Complex64, JumpDensity, LevyMeasure, LevyTriplet, DEFAULT_TOL};

/// `Γ(a, x)` for `a > -1`, `a != 0`, through `Γ(a, x) = (Γ(a + 1, x) − x^a e^{−x})/a`.
fn upper_gamma(a: f64, x: f64) -> f64 {
    if a > 0.0 {
        gamma(a) * gamma_ur(a, x)
    } else {
        (upper_gamma(a + 1.0, x) - x.powf(a) * (-x).exp()) / a
    }
}

/// Tempered-stable exponent, compensated with `x 1{|x| <= 1}`.
fn cgmy_exponent(b: f64, c: f64, cc: f64, g: f64, m: f64, y: f64, u: f64) -> Complex64 {
    let iu = Complex64::new(0.0, u);
    let m_c = Complex64::new(m, 0.0);
    let g_c = Complex64::new(g, 0.0);
    let compensated = cc
        * gamma(-y)
        * ((m_c - iu).powf(y) - m.powf(y) + (g_c + iu).powf(y) - g.powf(y)
            + iu * y * (m.powf(y - 1.0) - g.powf(y - 1.0)));
    let big_jumps =
        cc * (m.powf(y - 1.0) * upper_gamma(1.0 - y, m) - g.powf(y - 1.0) * upper_gamma(1.0 - y, g));
    iu * b - u * u * c / 2.0 + compensated + iu * big_jumps
}

#[test]
fn cgmy_matches_closed_form() {
    for (cc, g, m, y) in [
        (1.0, 5.0, 5.0, 0.5),
        (0.5, 3.0, 8.0, 1.5),
        (2.0, 10.0, 4.0, 0.2),
        (1.0, 1.5, 2.5, 1.9),
    ] {
        let t = LevyTriplet::new(0.03, 0.04, LevyMeasure::cgmy(cc, g, m, y)).unwrap();
        for k in -5..=5 {
            let u = k as f64;
            let num = t.characteristic_exponent(u, DEFAULT_TOL).unwrap();
            let exact = cgmy_exponent(0.03, 0.04, cc, g, m, y, u);
            assert!((num - exact).norm() < 1e-7, "{cc} {g} {m} {y} u={u}: {num} vs {exact}");
        }
    }
}

#[test]
fn merton_matches_closed_form() {
    // λ(e^{iuμ − σ²u²/2} − 1) − iu ∫_{|x|<=1} x F(dx), the last term by
    // the normal partial expectation.
    let (lambda, mean, std) = (0.7, -0.2, 0.3);
    let m = LevyMeasure::CompoundPoisson {
        intensity: lambda,
        jumps: JumpDensity::Normal { mean, std },
    };
    let t = LevyTriplet::new(0.0, 0.0, m).unwrap();
    let normal = statrs::distribution::Normal::new(mean, std).unwrap();
    use statrs::distribution::{Continuous, ContinuousCDF};
    // ∫_{-1}^{1} x φ(x) dx = μ(Φ(1) − Φ(−1)) − σ²(φ(1) − φ(−1)).
    let small = mean * (normal.cdf(1.0) - normal.cdf(-1.0))
        - std * std * (normal.pdf(1.0) - normal.pdf(-1.0));
    for k in -5..=5 {
        let u = k as f64;
        let iu = Complex64::new(0.0, u);
        let exact = lambda * ((iu * mean - u * u * std * std / 2.0).exp() - 1.0) - iu * lambda * small;
        let num = t.characteristic_exponent(u, DEFAULT_TOL).unwrap();
        assert!((num - exact).norm() < 1e-9, "u={u}: {num} vs {exact}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exponent_is_hermitian_and_dissipative(
        cc in 0.1f64..2.0, g in 1.0f64..10.0, m in 1.0f64..10.0, y in 0.05f64..1.95,
        b in -0.5f64..0.5, c in 0.0f64..0.3, u in -8.0f64..8.0,
    ) {
        prop_assume!((y - 1.0).abs() > 1e-3);
        let t = LevyTriplet::new(b, c, LevyMeasure::cgmy(cc, g, m, y)).unwrap();
        let p = t.characteristic_exponent(u, DEFAULT_TOL).unwrap();
        let q = t.characteristic_exponent(-u, DEFAULT_TOL).unwrap();
        prop_assert!((p - q.conj()).norm() < 1e-9 * (1.0 + p.norm()));
        prop_assert!(p.re <= 1e-12);
        prop_assert_eq!(t.characteristic_exponent(0.0, DEFAULT_TOL).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn exponent_at_minus_i_is_the_compensator_rate(
        cc in 0.1f64..2.0, g in 1.0f64..10.0, m in 1.5f64..10.0, y in 0.05f64..0.95,
        b in -0.5f64..0.5, c in 0.0f64..0.3,
    ) {
        let t = LevyTriplet::new(b, c, LevyMeasure::cgmy(cc, g, m, y)).unwrap();
        let psi = t.exponent_at(Complex64::new(0.0, -1.0), DEFAULT_TOL).unwrap();
        let kappa = t.exponential_compensator_rate(DEFAULT_TOL).unwrap();
        prop_assert!((psi.re - kappa).abs() < 1e-9 && psi.im.abs() < 1e-9);
    }

    #[test]
    fn atomic_exponent_is_a_finite_sum(
        x1 in -3.0f64..3.0, m1 in 0.01f64..3.0, x2 in -3.0f64..3.0, m2 in 0.01f64..3.0,
        u in -6.0f64..6.0,
    ) {
        prop_assume!(x1 != 0.0 && x2 != 0.0);
        let t = LevyTriplet::new(0.0, 0.0, LevyMeasure::atomic(&[(x1, m1), (x2, m2)])).unwrap();
        let iu = Complex64::new(0.0, u);
        let term = |x: f64, m: f64| {
            let h = if x.abs() <= 1.0 { x } else { 0.0 };
            m * ((iu * x).exp() - 1.0 - iu * h)
        };
        let exact = term(x1, m1) + term(x2, m2);
        let num = t.characteristic_exponent(u, DEFAULT_TOL).unwrap();
        prop_assert!((num - exact).norm() < 1e-12);
    }
}
