use lane_emden::dirichlet::{
    branch_claims_report, branch_trace, bracket_for_radius, detect_nonuniqueness, dirichlet_solution,
};
use lane_emden::manifold::critical_exponents;
use lane_emden::shooting::{first_zero_with, CauchyProblem, ShootOptions};
use lane_emden::sobolev::{compare_i_alpha, embedding_report, linear_then_power, rayleigh_minimize, Verdict};
use lane_emden::ModelFunction;
use proptest::prelude::*;

#[test]
fn minimizers_are_nonnegative_and_stationary() {
    for (psi, q, r) in [
        (ModelFunction::hyperbolic(), 2.0, 1.0),
        (ModelFunction::shifted_power(2.0).unwrap(), 3.0, 4.0),
        (ModelFunction::euclidean(), 1.5, 2.0),
    ] {
        let res = rayleigh_minimize(&psi, 3, q, r, 400).unwrap();
        assert!(res.converged);
        assert!(res.minimizer.iter().all(|&f| f >= 0.0));
        assert_eq!(*res.minimizer.last().unwrap(), 0.0);
        assert!(res.el_residual < 1e-3, "residual {}", res.el_residual);
        // the rescaled minimizer solves −Δf = f^q, so λ = 1
        assert!((res.lambda - 1.0).abs() < 1e-6);
    }
}

#[test]
fn quotient_decreases_with_radius() {
    let psi = ModelFunction::hyperbolic();
    let i: Vec<f64> = [0.5, 1.0, 2.0, 4.0].iter().map(|&r| rayleigh_minimize(&psi, 3, 2.0, r, 400).unwrap().i_r).collect();
    assert!(i.windows(2).all(|w| w[1] < w[0]), "{i:?}");
}

#[test]
fn mass_quotient_identity_on_shifted_power() {
    let psi = ModelFunction::shifted_power(2.0).unwrap();
    let o = ShootOptions { r_max: 10.0, ..ShootOptions::default() };
    let s = dirichlet_solution(&psi, 3, 2.0, 2.0, bracket_for_radius(&psi, 3, 2.0, 2.0, &o).unwrap()).unwrap();
    let q = rayleigh_minimize(&psi, 3, 2.0, 2.0, 400).unwrap();
    assert!((s.mass / q.i_r.powi(6) - 1.0).abs() < 0.02);
    // the quotient of the ball solution itself is the minimal one
    assert!((s.sobolev_quotient / q.i_r - 1.0).abs() < 1e-3);
}

#[test]
fn critical_comparison_with_pure_power() {
    // ψ = r near the pole and κ r^α beyond r₀ has a smaller quotient than κ r^α at q = 2*_α − 1
    let (n, alpha) = (3, 2.0);
    let q = critical_exponents(n, alpha).unwrap().star_alpha - 1.0;
    let psi = linear_then_power(1.0, alpha).unwrap();
    let kappa = psi.asymptotics().unwrap().kappa;
    let c = compare_i_alpha(&psi, n, alpha, kappa, q, 4.0, 200).unwrap();
    assert!(c.i_psi < c.i_alpha, "{c:?}");
    assert!(compare_i_alpha(&psi, n, alpha, kappa, 2.0, 4.0, 200).is_err());
}

#[test]
fn monotone_branch_has_no_witnesses() {
    let psi = ModelFunction::shifted_power(2.0).unwrap();
    let b = branch_trace(&psi, 3, 2.0, 0.1, 100.0, 24, 200.0).unwrap();
    assert!(b.monotone_violations.is_empty());
    assert!(detect_nonuniqueness(&b).unwrap().triples.is_empty());
    for (i, rho) in b.rho.iter().enumerate() {
        let rho = rho.unwrap();
        assert!(b.root_residual[i].unwrap() <= 1e-10 * b.a[i], "residual at a = {}", b.a[i]);
        assert!(rho > 0.0);
    }
    // A(R) reverses the order of ρ
    let present: Vec<f64> = b.rho.iter().flatten().copied().collect();
    let mut radii: Vec<f64> = present.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    radii.sort_by(f64::total_cmp);
    let heights: Vec<f64> = radii.iter().map(|&r| b.invert(r)[0]).collect();
    assert!(heights.windows(2).all(|w| w[1] < w[0]));

    let rep = branch_claims_report(&b, &[1.0, 2.0, 4.0, 8.0], 200).unwrap();
    assert!(rep.quotient_increases.is_empty() && rep.non_injective.is_empty() && rep.height_increases.is_empty());
    assert!(rep.height_slope < 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn inverse_consistency(a in 0.5f64..20.0) {
        let psi = ModelFunction::shifted_power(2.0).unwrap();
        let o = ShootOptions { r_max: 100.0, ..ShootOptions::default() };
        let rho = first_zero_with(&CauchyProblem::new(psi.clone(), 3, 2.0, a).unwrap(), &o).unwrap().unwrap();
        let s = dirichlet_solution(&psi, 3, 2.0, rho, (0.9 * a, 1.1 * a)).unwrap();
        prop_assert!((s.a / a - 1.0).abs() < 1e-8, "{} vs {a}", s.a);
    }

    #[test]
    fn embedding_verdicts_match_limits(p in 2.2f64..6.0) {
        let rep = embedding_report(&ModelFunction::shifted_power(2.0).unwrap(), 3, p).unwrap();
        match rep.verdict {
            Verdict::NotContinuous => prop_assert!(rep.sup_b.is_none()),
            Verdict::ContinuousNotCompact => {
                let sup = rep.sup_b.unwrap();
                prop_assert!(sup.is_finite());
                prop_assert!(rep.limit_0 >= 1e-3 * sup || rep.limit_inf >= 1e-3 * sup);
            }
            Verdict::ContinuousAndCompact => {
                prop_assert!(rep.sup_b.unwrap().is_finite());
                prop_assert!(rep.limit_0 == 0.0 && rep.limit_inf == 0.0);
            }
        }
        // α = 2, n = 3: B ~ r^{3/p − 1/2} at 0 and r^{5/p − 3/2} at ∞
        let (s0, s_inf) = (3.0 / p - 0.5, 5.0 / p - 1.5);
        if s_inf > 0.05 {
            prop_assert_eq!(rep.verdict, Verdict::NotContinuous);
        } else if s_inf < -0.05 && s0 > 0.05 {
            prop_assert_eq!(rep.verdict, Verdict::ContinuousAndCompact);
        }
    }
}
