use crate::error::{invalid, precondition, Error, Result};
use crate::manifold::{critical_exponents, log_grid, ModelFunction};
use serde::Serialize;

/// Verification range and density.
const VERIFY_RANGE: (f64, f64) = (1e-4, 1e4);
const VERIFY_POINTS: usize = 8001;
const MAX_ROUNDS: usize = 5;

/// w(r) = A/(B + r²)^{1/(q−1)} together with the splitting data used to pick A and B.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Supersolution {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub eps: f64,
    pub r_eps: f64,
    pub n: u32,
    pub alpha: f64,
    pub q: f64,
    /// Upper bound for A^{q−1} from the outer region.
    pub bound_outer: f64,
    /// Smallest B compatible with the inner region for the chosen A.
    pub b_min: f64,
    /// Minimum of the scaled residual over the verification grid.
    pub min_residual: f64,
    pub worst_r: f64,
    pub rounds: usize,
}

impl Supersolution {
    pub fn w(&self, r: f64) -> f64 {
        self.a / (self.b + r * r).powf(1.0 / (self.q - 1.0))
    }

    /// (−w″ − (n−1)(ψ′/ψ)w′ − w^q)·(B + r²)^{q/(q−1)}/A, written without the common factor.
    pub fn scaled_residual(&self, psi: &ModelFunction, r: f64) -> f64 {
        let (q, b) = (self.q, self.b);
        let m = q - 1.0;
        let s = r * r / (b + r * r);
        let drift = (self.n as f64 - 1.0) * r * psi.log_derivative(r);
        2.0 / m - 4.0 * q / (m * m) * s + 2.0 / m * drift - self.a.powf(m)
    }

    /// Same rule with A multiplied by `factor`, left unverified.
    pub fn with_amplitude(&self, factor: f64) -> Supersolution {
        Supersolution { a: self.a * factor, ..self.clone() }
    }

    /// Minimum scaled residual and its location on [1e−4, 1e4].
    pub fn verify(&self, psi: &ModelFunction) -> (f64, f64) {
        log_grid(VERIFY_RANGE.0, VERIFY_RANGE.1, VERIFY_POINTS)
            .into_iter()
            .map(|r| (self.scaled_residual(psi, r), r))
            .fold((f64::INFINITY, 0.0), |acc, x| if x.0 < acc.0 { x } else { acc })
    }
}

/// Builds A and B from the outer and inner inequalities with 10% slack and verifies on a grid.
///
/// `eps` defaults to half of the largest admissible value.
pub fn build_supersolution(psi: &ModelFunction, n: u32, alpha: f64, q: f64, eps: Option<f64>) -> Result<Supersolution> {
    let th = critical_exponents(n, alpha)?;
    if !(q > th.tilde) {
        return Err(precondition(format!(
            "supersolutions need q > 2̃_α = {}; got q = {q}",
            th.tilde
        )));
    }
    let nf = n as f64 - 1.0;
    let m = q - 1.0;
    let eps_max = alpha + (1.0 - 2.0 * q / m) / nf;
    let eps = eps.unwrap_or(0.5 * eps_max);
    if !(eps > 0.0 && eps < eps_max) {
        return Err(invalid(format!("ε must lie in (0, {eps_max}), got {eps}")));
    }
    let grid = log_grid(VERIFY_RANGE.0, 1e6, 4001);
    if let Some(r) = grid.iter().find(|&&r| psi.eval(r)[1] < 0.0) {
        return Err(precondition(format!("ψ′({r}) < 0")));
    }
    // smallest grid radius past which rψ′/ψ stays above α − ε
    let last_bad = grid.iter().rposition(|&r| psi.tail_exponent(r) < alpha - eps);
    let r_eps = match last_bad {
        None => grid[0],
        Some(i) if i + 1 < grid.len() => grid[i + 1],
        Some(_) => {
            return Err(precondition(format!(
                "rψ′/ψ stays below α − ε = {} up to r = 1e6",
                alpha - eps
            )))
        }
    };
    let bound_outer = 2.0 / m * (1.0 - 2.0 * q / m + (alpha - eps) * nf);
    let mut s = 0.9 * bound_outer.min(2.0 / m);
    let mut last = None;
    for round in 0..MAX_ROUNDS {
        let theta = (2.0 / m - s) * m * m / (4.0 * q);
        let b_min = if theta >= 1.0 { 0.0 } else { r_eps * r_eps * (1.0 / theta - 1.0) };
        let b = if b_min > 0.0 { 1.1 * b_min } else { 1.0 };
        let mut sup = Supersolution {
            a: s.powf(1.0 / m),
            b: b * 2f64.powi(round as i32),
            eps,
            r_eps,
            n,
            alpha,
            q,
            bound_outer,
            b_min,
            min_residual: 0.0,
            worst_r: 0.0,
            rounds: round + 1,
        };
        let (min, at) = sup.verify(psi);
        sup.min_residual = min;
        sup.worst_r = at;
        if min >= 0.0 {
            return Ok(sup);
        }
        last = Some(sup);
        s *= 0.5;
    }
    let sup = last.unwrap();
    Err(Error::Verification(format!(
        "supersolution residual {} at r = {} after {MAX_ROUNDS} rounds",
        sup.min_residual, sup.worst_r
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifted_power_constants() {
        let s = ModelFunction::shifted_power(2.0).unwrap();
        let sup = build_supersolution(&s, 3, 2.0, 2.0, None).unwrap();
        assert_eq!(sup.eps, 0.25);
        assert!((sup.bound_outer - 1.0).abs() < 1e-15);
        assert!((sup.a - 0.9).abs() < 1e-15);
        assert!(sup.min_residual >= 0.0);
        // the scaled residual is the raw one times (B + r²)^{q/(q−1)}/A
        let r = 3.7;
        let h = 1e-4;
        let w = |x: f64| sup.w(x);
        let d1 = (w(r + h) - w(r - h)) / (2.0 * h);
        let d2 = (w(r + h) - 2.0 * w(r) + w(r - h)) / (h * h);
        let raw = -d2 - 2.0 * s.log_derivative(r) * d1 - w(r).powi(2);
        let scaled = raw * (sup.b + r * r).powi(2) / sup.a;
        assert!((scaled / sup.scaled_residual(&s, r) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn rejects_threshold_and_inflated_amplitude() {
        let s = ModelFunction::shifted_power(2.0).unwrap();
        assert!(matches!(build_supersolution(&s, 3, 2.0, 5.0 / 3.0, None), Err(Error::Precondition(_))));
        let sup = build_supersolution(&s, 3, 2.0, 2.0, None).unwrap();
        let (min, at) = sup.with_amplitude(4.0).verify(&s);
        assert!(min < 0.0 && at > 10.0);
    }
}
