use lane_emden::diagnostics::{pohozaev, pohozaev_rate_identity};
use lane_emden::manifold::check_hp4;
use lane_emden::shooting::{first_zero_with, integrate, CauchyProblem, Event, ShootOptions};
use lane_emden::ModelFunction;
use proptest::prelude::*;

fn family(k: usize) -> ModelFunction {
    match k {
        0 => ModelFunction::euclidean(),
        1 => ModelFunction::hyperbolic(),
        _ => ModelFunction::shifted_power(2.0).unwrap(),
    }
}

#[test]
fn series_start_consistency() {
    let p = CauchyProblem::new(ModelFunction::euclidean(), 3, 2.0, 1.0).unwrap();
    let at = |eps0: f64| {
        let o = ShootOptions { r_max: 2.0, eps0, rtol: 1e-12, atol: 1e-14, ..ShootOptions::default() };
        integrate(&p, &o).unwrap().eval(1.0)[0]
    };
    let (a, b) = (at(1e-6), at(1e-7));
    assert!((a / b - 1.0).abs() < 1e-8);
}

#[test]
fn short_range_stops_before_the_zero() {
    let p = CauchyProblem::new(ModelFunction::euclidean(), 3, 2.0, 1.0).unwrap();
    let t = integrate(&p, &ShootOptions { r_max: 1.0, ..ShootOptions::default() }).unwrap();
    assert_eq!(t.event, Event::ReachedRMax { r: 1.0 });
}

#[test]
fn pohozaev_vanishes_at_pole() {
    let p = CauchyProblem::new(ModelFunction::shifted_power(2.0).unwrap(), 3, 2.0, 1.0).unwrap();
    let tr = pohozaev(&integrate(&p, &ShootOptions::default()).unwrap()).unwrap();
    assert!(tr.p[0].abs() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decreasing_while_positive(k in 0usize..3, q in 1.5f64..4.5, a in 0.1f64..10.0) {
        let p = CauchyProblem::new(family(k), 3, q, a).unwrap();
        let t = integrate(&p, &ShootOptions { r_max: 60.0, ..ShootOptions::default() }).unwrap();
        prop_assert!(t.monotone_while_positive());
    }

    #[test]
    fn euclidean_scaling_law(q in 1.5f64..4.5, a in 0.2f64..5.0) {
        // u_λ(r) = λ^{2/(q−1)} u(λr), so ρ(a)·a^{(q−1)/2} does not depend on a
        let o = ShootOptions { r_max: 500.0, ..ShootOptions::default() };
        let rho = |h: f64| first_zero_with(&CauchyProblem::new(ModelFunction::euclidean(), 3, q, h).unwrap(), &o)
            .unwrap()
            .unwrap();
        let e = (q - 1.0) / 2.0;
        let (x, y) = (rho(1.0), rho(a) * a.powf(e));
        prop_assert!((x / y - 1.0).abs() < 1e-7, "{x} vs {y}");
    }

    #[test]
    fn tolerance_convergence(k in 0usize..3, q in 1.5f64..4.0, a in 0.5f64..5.0) {
        let p = CauchyProblem::new(family(k), 3, q, a).unwrap();
        let at = |rtol: f64| first_zero_with(&p, &ShootOptions { r_max: 200.0, rtol, atol: 1e-2 * rtol, ..ShootOptions::default() }).unwrap();
        if let (Some(x), Some(y)) = (at(1e-9), at(5e-10)) {
            prop_assert!((x - y).abs() < 10.0 * 1e-9 * x, "{x} vs {y}");
        }
    }

    #[test]
    fn rate_identity_holds(k in 0usize..3, q in 1.5f64..4.5, a in 0.2f64..5.0) {
        // P cancels terms of size ψ^{n−1}, so exponential weights need tighter integration
        let p = CauchyProblem::new(family(k), 3, q, a).unwrap();
        let t = integrate(&p, &ShootOptions::new(40.0, 1e-12, 1e-14)).unwrap();
        let e = pohozaev_rate_identity(&pohozaev(&t).unwrap()).unwrap();
        prop_assert!(e < 1e-4, "identity error {e}");
    }

    #[test]
    fn pohozaev_nondecreasing_under_hp4(q in 1.2f64..2.3, a in 0.1f64..10.0) {
        let psi = ModelFunction::shifted_power(2.0).unwrap();
        let o = ShootOptions { r_max: 100.0, ..ShootOptions::default() };
        let t = integrate(&CauchyProblem::new(psi.clone(), 3, q, a).unwrap(), &o).unwrap();
        let hp4 = check_hp4(&psi, 3, q, t.r_end(), 4096).unwrap();
        prop_assert!(hp4.holds);
        let tr = pohozaev(&t).unwrap();
        prop_assert!(tr.is_nondecreasing(), "min increment {}", tr.min_increment());
    }
}
