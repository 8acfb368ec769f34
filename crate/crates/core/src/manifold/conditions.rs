use super::ModelFunction;
use crate::error::{precondition, Result};
use crate::quad;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub condition: String,
    pub holds: bool,
    pub worst_r: f64,
    /// Minimum of (right side − left side); nonnegative means satisfied.
    pub margin: f64,
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

fn report(id: &str, margins: impl Iterator<Item = (f64, f64)>) -> ConditionReport {
    let (worst_r, margin) = margins.fold((0.0, f64::INFINITY), |acc, (r, m)| if m < acc.1 { (r, m) } else { acc });
    ConditionReport { condition: id.to_string(), holds: margin >= 0.0, worst_r, margin }
}

/// (n−1) ψ′/ψⁿ ∫₀ʳ ψ^{n−1} ≤ 1/2 + 1/(q+1) on a log grid of `grid_density` points.
pub fn check_hp4(psi: &ModelFunction, n: u32, q: f64, r_max: f64, grid_density: usize) -> Result<ConditionReport> {
    if !(r_max > 1e-4) {
        return Err(precondition("r_max must exceed the grid start 1e-4"));
    }
    let k = n as i32 - 1;
    let nf = n as f64;
    let rhs = 0.5 + 1.0 / (q + 1.0);
    let grid = log_grid(1e-4, r_max, grid_density.max(16));
    let w = |s: f64| psi.psi(s).powi(k);
    let v0 = quad::gauss_legendre8(w, 0.0, grid[0]);
    let vol = quad::cumulative_gl8(&w, &grid, v0);
    let at_pole = std::iter::once((0.0, rhs - (nf - 1.0) / nf));
    let along = grid.iter().zip(&vol).map(|(&r, &v)| {
        let lhs = (nf - 1.0) * psi.log_derivative(r) * v / psi.psi(r).powi(k);
        (r, rhs - lhs)
    });
    Ok(report("hp4", at_pole.chain(along)))
}

/// ψψ″ ≤ (α−1)/α (ψ′)², with α taken from the profile's declared tail.
///
/// The margin is (α−1)/α − ψψ″/(ψ′)²; values above −1e−9 count as satisfied.
pub fn check_hp5(psi: &ModelFunction, r_max: f64, grid_density: usize) -> Result<ConditionReport> {
    let alpha = match psi.alpha() {
        Some(a) if a > 1.0 => a,
        _ => return Err(precondition("hp5 needs a declared tail order α > 1")),
    };
    if !(r_max > 1e-4) {
        return Err(precondition("r_max must exceed the grid start 1e-4"));
    }
    let c = (alpha - 1.0) / alpha;
    let grid = log_grid(1e-4, r_max, grid_density.max(16));
    let pts = std::iter::once(0.0).chain(grid);
    let mut rep = report(
        "hp5",
        pts.map(|r| {
            let [p, dp, ddp] = psi.eval(r);
            (r, c - p * ddp / (dp * dp))
        }),
    );
    rep.holds = rep.margin >= -1e-9;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Shape;

    #[test]
    fn shifted_power_satisfies_both() {
        let s = ModelFunction::shifted_power(2.0).unwrap();
        assert!(check_hp5(&s, 50.0, 4096).unwrap().holds);
        assert!(check_hp4(&s, 3, 2.0, 50.0, 4096).unwrap().holds);
    }

    #[test]
    fn hyperbolic_fails_hp4() {
        let r = check_hp4(&ModelFunction::hyperbolic(), 3, 2.0, 20.0, 4096).unwrap();
        assert!(!r.holds);
        assert!(r.worst_r > 1.0);
    }

    #[test]
    fn large_exponent_fails_in_the_tail() {
        // the left side tends to (n−1)α/(α(n−1)+1) = 4/5 > 1/2 + 1/5
        let s = ModelFunction::shifted_power(2.0).unwrap();
        let r = check_hp4(&s, 3, 4.0, 10.0, 4096).unwrap();
        assert!(!r.holds && r.worst_r > 9.0);
        assert!(check_hp4(&s, 3, 1.5, 10.0, 4096).unwrap().holds);
    }

    #[test]
    fn hp5_guard_and_families() {
        assert!(check_hp5(&ModelFunction::euclidean(), 10.0, 512).is_err());
        let a = ModelFunction::arctan_family(2.0).unwrap();
        assert!(check_hp5(&a, 100.0, 4096).unwrap().holds);
        let t = ModelFunction::f_family(3.0, Shape::Tanh).unwrap();
        assert!(check_hp5(&t, 100.0, 4096).unwrap().holds);
    }

    #[test]
    fn hp4_limit_at_pole() {
        // for the flat metric the left side is identically (n−1)/n
        let e = ModelFunction::euclidean();
        let r = check_hp4(&e, 4, 3.0, 10.0, 256).unwrap();
        assert!((r.margin - (0.5 + 0.25 - 0.75)).abs() < 1e-10);
    }
}
