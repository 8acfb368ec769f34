use lane_emden::manifold::{
    check_hp4, check_hp5, comparison_profile, critical_exponents, curvature, volume, Shape,
};
use lane_emden::ModelFunction;
use proptest::prelude::*;

fn bundled(alpha: f64) -> Vec<ModelFunction> {
    vec![
        ModelFunction::shifted_power(alpha).unwrap(),
        ModelFunction::arctan_family(alpha).unwrap(),
        ModelFunction::f_family(alpha, Shape::Tanh).unwrap(),
        ModelFunction::f_family(alpha, Shape::Arctan).unwrap(),
    ]
}

#[test]
fn documented_values() {
    assert!((ModelFunction::hyperbolic().psi(1.0) - 1.1752011936438014).abs() < 1e-14);
    assert_eq!(ModelFunction::shifted_power(2.0).unwrap().psi(1.0), 1.5);
    let (sec, ric) = curvature(&ModelFunction::shifted_power(2.0).unwrap(), 3, 1.0).unwrap();
    assert!((sec + 2.0 / 3.0).abs() < 1e-14 && (ric + 4.0 / 3.0).abs() < 1e-14);
    assert!((curvature(&ModelFunction::hyperbolic(), 3, 2.5).unwrap().0 + 1.0).abs() < 1e-12);
    assert!((volume(&ModelFunction::hyperbolic(), 2, 1.0).unwrap() - (1f64.cosh() - 1.0)).abs() < 1e-12);
    let t = critical_exponents(2, 3.0).unwrap();
    assert_eq!((t.tilde, t.star_alpha), (2.0, 4.0));
    assert!(t.star.is_infinite());
}

#[test]
fn shifted_power_volume_matches_antiderivative() {
    // ∫₀² ((1+r)² − 1)²/4 dr with x = 1 + r: ∫₁³ (x⁴ − 2x² + 1)/4 dx
    let anti = |x: f64| (x.powi(5) / 5.0 - 2.0 * x.powi(3) / 3.0 + x) / 4.0;
    let v = volume(&ModelFunction::shifted_power(2.0).unwrap(), 3, 2.0).unwrap();
    assert!((v / (anti(3.0) - anti(1.0)) - 1.0).abs() < 1e-10);
}

#[test]
fn hyperbolic_violates_hp4_and_supercritical_fails_at_pole() {
    assert!(!check_hp4(&ModelFunction::hyperbolic(), 3, 2.0, 20.0, 4096).unwrap().holds);
    // q + 1 ≥ 2* = 6 makes the pole limit (n−1)/n exceed 1/2 + 1/(q+1)
    let r = check_hp4(&ModelFunction::euclidean(), 3, 6.0, 1.0, 4096).unwrap();
    assert!(!r.holds && r.margin < 0.0);
}

#[test]
fn volume_growth_order() {
    let psi = ModelFunction::shifted_power(2.0).unwrap();
    let ratio = |r: f64| volume(&psi, 3, r).unwrap() / r.powi(5);
    // V(R)/R⁵ = 1/20 + 1/(4R) + 1/(3R²)
    for r in [1e2, 1e3, 1e4, 2e4] {
        let exact = 0.05 + 0.25 / r + 1.0 / (3.0 * r * r);
        assert!((ratio(r) / exact - 1.0).abs() < 1e-9);
    }
    assert!((ratio(1e4) / ratio(2e4) - 1.0).abs() < 3e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pole_normalization(alpha in 1.2f64..4.0) {
        let h = 1e-4;
        for psi in bundled(alpha).into_iter().skip(1) {
            prop_assert!((psi.psi(h) / h - 1.0).abs() < 1e-6, "{:?}", psi.family());
        }
        // ψ″(0) = α − 1 for the shifted power, so the first correction is linear in h
        let s = ModelFunction::shifted_power(alpha).unwrap();
        prop_assert!((s.psi(h) / h - 1.0 - 0.5 * (alpha - 1.0) * h).abs() < 1e-8);
    }

    #[test]
    fn declared_tail_order_is_reached(alpha in 1.2f64..4.0) {
        for psi in bundled(alpha) {
            let e = psi.tail_exponent(1e6);
            prop_assert!((e / alpha - 1.0).abs() < 1e-2, "{:?} exponent {e}", psi.family());
        }
    }

    #[test]
    fn hp5_implies_hp4(alpha in 1.2f64..4.0, n in 2u32..6, frac in 0.01f64..1.0) {
        let t = critical_exponents(n, alpha).unwrap();
        let q = 1.0 + frac * (t.star_alpha - 2.0);
        for psi in bundled(alpha) {
            let hp5 = check_hp5(&psi, 100.0, 4096).unwrap();
            if hp5.holds {
                let hp4 = check_hp4(&psi, n, q, 100.0, 4096).unwrap();
                prop_assert!(hp4.holds, "{:?} alpha {alpha} q {q} margin {}", psi.family(), hp4.margin);
            }
        }
    }

    #[test]
    fn comparison_profile_is_convex(q_tail in 0.5f64..12.0, r_o in 0.3f64..3.0, extra in 1.0f64..4.0) {
        let k = extra * q_tail / (r_o * r_o);
        let psi = comparison_profile(q_tail, r_o, k).unwrap();
        for i in 1..400 {
            let r = 6.0 * r_o * i as f64 / 400.0;
            let h = 1e-3 * r_o;
            let dd = psi.psi(r + h) - 2.0 * psi.psi(r) + psi.psi(r - h);
            prop_assert!(dd >= -1e-12 * psi.psi(r), "r {r} dd {dd}");
        }
        let m = (1.0 + (1.0 + 4.0 * q_tail).sqrt()) / 2.0;
        prop_assert!((psi.tail_exponent(1e4) / m - 1.0).abs() < 1e-4);
    }
}
