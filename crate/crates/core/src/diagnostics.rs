//! Energy and Pohozaev functions along trajectories, and tail amplitude estimates.

use crate::error::{invalid, precondition, Result};
use crate::fit;
use crate::manifold::{critical_exponents, log_grid};
use crate::quad;
use crate::shooting::{fmt, Event, Trajectory};
use serde::Serialize;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    Integrator,
    Synthetic,
}

/// F, P and the rate multiplier of |u′|² in P′ sampled along a trajectory.
#[derive(Debug, Clone)]
pub struct PohozaevTrace {
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    /// ψ^{n−1}
    pub weight: Vec<f64>,
    pub energy: Vec<f64>,
    pub p: Vec<f64>,
    pub rate: Vec<f64>,
    pub cumvol: Vec<f64>,
    pub n: u32,
    pub q: f64,
    source: Source,
}

/// Sub-samples per integrator step used by [`pohozaev`].
pub const DEFAULT_SUBSAMPLES: usize = 8;

pub fn pohozaev(t: &Trajectory) -> Result<PohozaevTrace> {
    pohozaev_with(t, DEFAULT_SUBSAMPLES)
}

/// Evaluates the trace on `per_step` equally spaced points inside every integrator step.
pub fn pohozaev_with(t: &Trajectory, per_step: usize) -> Result<PohozaevTrace> {
    if t.steps().is_empty() {
        return Err(precondition("trajectory has no integration steps"));
    }
    let per_step = per_step.max(1);
    let mut r = vec![t.eps0()];
    for s in t.steps() {
        for k in 1..=per_step {
            r.push(s.t0 + s.h * k as f64 / per_step as f64);
        }
    }
    // the final step may have been cut at the first zero
    let end = t.r_end();
    r.retain(|&x| x <= end);
    if *r.last().unwrap() < end {
        r.push(end);
    }
    let (u, du): (Vec<f64>, Vec<f64>) = r.iter().map(|&x| t.eval(x)).map(|y| (y[0], y[1])).unzip();
    let p = &t.problem;
    let k = p.n as i32 - 1;
    let w = |s: f64| p.psi.psi(s).powi(k);
    // ψ(s) = s + O(s³) below the start radius
    let v0 = r[0].powi(p.n as i32) / p.n as f64;
    let cumvol = quad::cumulative_gl8(&w, &r, v0);
    let weight: Vec<f64> = r.iter().map(|&x| w(x)).collect();
    let mut tr = assemble(r, u, du, weight, cumvol, p.n, p.q, |x| p.psi.log_derivative(x));
    tr.source = Source::Integrator;
    Ok(tr)
}

fn assemble(
    r: Vec<f64>,
    u: Vec<f64>,
    du: Vec<f64>,
    weight: Vec<f64>,
    cumvol: Vec<f64>,
    n: u32,
    q: f64,
    log_derivative: impl Fn(f64) -> f64,
) -> PohozaevTrace {
    let c = 0.5 + 1.0 / (q + 1.0);
    let k = n as f64 - 1.0;
    let m = r.len();
    let mut energy = Vec::with_capacity(m);
    let mut p = Vec::with_capacity(m);
    let mut rate = Vec::with_capacity(m);
    for i in 0..m {
        let e = 0.5 * du[i] * du[i] + u[i].abs().powf(q + 1.0) / (q + 1.0);
        energy.push(e);
        p.push(cumvol[i] * e + weight[i] * u[i] * du[i] / (q + 1.0));
        // (n−1) ψ′/ψⁿ V = (n−1)(ψ′/ψ) V / ψ^{n−1}
        rate.push(weight[i] * c - k * log_derivative(r[i]) * cumvol[i]);
    }
    PohozaevTrace { r, u, du, weight, energy, p, rate, cumvol, n, q, source: Source::Synthetic }
}

impl PohozaevTrace {
    /// A trace built from externally supplied samples; it is refused by [`pohozaev_rate_identity`].
    #[allow(clippy::too_many_arguments)]
    pub fn from_samples(
        r: Vec<f64>,
        u: Vec<f64>,
        du: Vec<f64>,
        weight: Vec<f64>,
        cumvol: Vec<f64>,
        log_derivative: Vec<f64>,
        n: u32,
        q: f64,
    ) -> Result<PohozaevTrace> {
        let m = r.len();
        if [u.len(), du.len(), weight.len(), cumvol.len(), log_derivative.len()].iter().any(|&l| l != m) {
            return Err(invalid("sample columns differ in length"));
        }
        let ld = |x: f64| log_derivative[r.iter().position(|&y| y == x).unwrap()];
        let rr = r.clone();
        Ok(assemble(rr, u, du, weight, cumvol, n, q, ld))
    }

    pub fn from_integrator(&self) -> bool {
        self.source == Source::Integrator
    }

    pub fn max_abs_p(&self) -> f64 {
        self.p.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Smallest consecutive difference P(r_{i+1}) − P(r_i).
    pub fn min_increment(&self) -> f64 {
        self.p.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    /// P nondecreasing up to 1e−8·max|P|.
    pub fn is_nondecreasing(&self) -> bool {
        self.min_increment() >= -1e-8 * self.max_abs_p()
    }

    /// Log-log slopes of V|u′|², V u^{q+1} and ψ^{n−1} u|u′| over `window`.
    pub fn summand_exponents(&self, window: (f64, f64)) -> Result<[f64; 3]> {
        let mut cols: [Vec<f64>; 3] = Default::default();
        let mut x = Vec::new();
        for i in 0..self.r.len() {
            if self.r[i] < window.0 || self.r[i] > window.1 {
                continue;
            }
            if !(self.u[i] > 0.0) {
                return Err(precondition(format!("u({}) is not positive", self.r[i])));
            }
            x.push(self.r[i]);
            cols[0].push(self.cumvol[i] * self.du[i] * self.du[i]);
            cols[1].push(self.cumvol[i] * self.u[i].powf(self.q + 1.0));
            cols[2].push(self.weight[i] * self.u[i] * self.du[i].abs());
        }
        if x.len() < 3 {
            return Err(precondition("summand window holds fewer than three samples"));
        }
        Ok([0, 1, 2].map(|j| fit::loglog(&x, &cols[j]).slope))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["r", "F", "P", "rate"])?;
        for i in 0..self.r.len() {
            w.write_record([fmt(self.r[i]), fmt(self.energy[i]), fmt(self.p[i]), fmt(self.rate[i])])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Derivative at x[k] of the polynomial interpolating (x, y).
fn lagrange_slope(x: &[f64], y: &[f64], k: usize) -> f64 {
    let xk = x[k];
    let mut d = 0.0;
    for j in 0..x.len() {
        let w = if j == k {
            (0..x.len()).filter(|&m| m != k).map(|m| 1.0 / (xk - x[m])).sum()
        } else {
            let num: f64 = (0..x.len()).filter(|&m| m != j && m != k).map(|m| xk - x[m]).product();
            let den: f64 = (0..x.len()).filter(|&m| m != j).map(|m| x[j] - x[m]).product();
            num / den
        };
        d += w * y[j];
    }
    d
}

/// Max over interior points of |P′ − rate·|u′|²| / max(1, |P|), P′ from the five-point
/// interpolating polynomial around each sample.
pub fn pohozaev_rate_identity(tr: &PohozaevTrace) -> Result<f64> {
    if !tr.from_integrator() {
        return Err(precondition("rate identity is only checked on traces computed from a trajectory"));
    }
    if tr.r.len() < 9 {
        return Err(precondition(format!("rate identity needs at least 9 points, got {}", tr.r.len())));
    }
    let (r, p) = (&tr.r, &tr.p);
    let mut worst: f64 = 0.0;
    for i in 1..r.len() - 1 {
        let (h0, h1) = (r[i] - r[i - 1], r[i + 1] - r[i]);
        if h0 <= 0.0 || h1 <= 0.0 {
            continue;
        }
        let lo = i.saturating_sub(2).min(r.len() - 5);
        let window = &r[lo..lo + 5];
        let dp = if window.windows(2).all(|w| w[1] > w[0]) {
            lagrange_slope(window, &p[lo..lo + 5], i - lo)
        } else {
            lagrange_slope(&r[i - 1..=i + 1], &p[i - 1..=i + 1], 1)
        };
        let err = (dp - tr.rate[i] * tr.du[i] * tr.du[i]).abs() / p[i].abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmplitudeLimit {
    /// tail mean of r^{(α(n−1)−1)/2} u
    pub l: f64,
    /// tail mean of r^{(α(n−1)+1)/2} |u′|
    pub l_prime: f64,
    /// |L^{2*_α−2} − ((α(n−1)−1)/2)²|
    pub critical_residual: f64,
}

/// Tail averages over the last decade of a global positive trajectory reaching r ≥ 100.
pub fn amplitude_limit(t: &Trajectory, alpha: f64) -> Result<AmplitudeLimit> {
    if t.problem.psi.alpha().is_none() {
        return Err(precondition("amplitude limits need a profile with a declared power tail"));
    }
    if matches!(t.event, Event::FirstZero { .. }) {
        return Err(precondition("trajectory changes sign"));
    }
    let end = t.r_end();
    if end < 100.0 {
        return Err(precondition(format!("trajectory ends at r = {end}, needs at least 100")));
    }
    let r = log_grid(end / 10.0, end, 400);
    let (u, du): (Vec<f64>, Vec<f64>) = r.iter().map(|&x| t.eval(x)).map(|y| (y[0], y[1])).unzip();
    amplitude_limit_samples(&r, &u, &du, t.problem.n, alpha)
}

/// Same as [`amplitude_limit`] on explicit last-decade samples.
pub fn amplitude_limit_samples(r: &[f64], u: &[f64], du: &[f64], n: u32, alpha: f64) -> Result<AmplitudeLimit> {
    let th = critical_exponents(n, alpha)?;
    let a = alpha * (n as f64 - 1.0);
    let mut lv = Vec::with_capacity(r.len());
    let mut lp = Vec::with_capacity(r.len());
    for i in 0..r.len() {
        if !(u[i] > 0.0) {
            return Err(precondition(format!("negative sample u({}) = {} in the tail", r[i], u[i])));
        }
        lv.push(r[i].powf(0.5 * (a - 1.0)) * u[i]);
        lp.push(r[i].powf(0.5 * (a + 1.0)) * du[i].abs());
    }
    let l = trimmed_geometric_mean(lv);
    let l_prime = trimmed_geometric_mean(lp);
    let critical_residual = (l.powf(th.star_alpha - 2.0) - (0.5 * (a - 1.0)).powi(2)).abs();
    Ok(AmplitudeLimit { l, l_prime, critical_residual })
}

/// Geometric mean after dropping the top and bottom 5%.
fn trimmed_geometric_mean(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let cut = v.len() / 20;
    let kept = &v[cut..v.len() - cut];
    if kept.iter().any(|&x| x <= 0.0) {
        return 0.0;
    }
    (kept.iter().map(|x| x.ln()).sum::<f64>() / kept.len() as f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shooting::{integrate_cauchy, CauchyProblem};
    use crate::ModelFunction;

    fn trace(psi: ModelFunction, q: f64, r_max: f64) -> PohozaevTrace {
        let p = CauchyProblem::new(psi, 3, q, 1.0).unwrap();
        pohozaev(&integrate_cauchy(&p, r_max, 1e-10, 1e-12).unwrap()).unwrap()
    }

    #[test]
    fn vanishes_at_pole() {
        let tr = trace(ModelFunction::euclidean(), 3.0, 20.0);
        assert!(tr.p[0].abs() < 1e-10);
    }

    #[test]
    fn flat_identity() {
        let tr = trace(ModelFunction::euclidean(), 3.0, 20.0);
        assert!(pohozaev_rate_identity(&tr).unwrap() < 1e-4);
    }

    #[test]
    fn shifted_power_nondecreasing() {
        let tr = trace(ModelFunction::shifted_power(2.0).unwrap(), 2.0, 30.0);
        assert!(tr.is_nondecreasing());
        let e = pohozaev_rate_identity(&tr).unwrap();
        assert!(e < 1e-4, "{e}");
    }

    #[test]
    fn synthetic_trace_refused() {
        let r: Vec<f64> = (1..20).map(|i| i as f64).collect();
        let one = vec![1.0; r.len()];
        let zero = vec![0.0; r.len()];
        let tr = PohozaevTrace::from_samples(r.clone(), one.clone(), zero, one.clone(), r.clone(), one, 3, 2.0)
            .unwrap();
        assert!(tr.rate.iter().all(|x| x.is_finite()));
        assert!(pohozaev_rate_identity(&tr).is_err());
    }

    #[test]
    fn synthetic_amplitude() {
        // α = 2, n = 3: u = r^{−3/2}
        let r = log_grid(100.0, 1000.0, 200);
        let u: Vec<f64> = r.iter().map(|x| x.powf(-1.5)).collect();
        let du: Vec<f64> = r.iter().map(|x| -1.5 * x.powf(-2.5)).collect();
        let a = amplitude_limit_samples(&r, &u, &du, 3, 2.0).unwrap();
        assert!((a.l - 1.0).abs() < 1e-12 && (a.l_prime - 1.5).abs() < 1e-12);
    }

    #[test]
    fn hyperbolic_refused() {
        let p = CauchyProblem::new(ModelFunction::hyperbolic(), 3, 2.0, 0.01).unwrap();
        let t = integrate_cauchy(&p, 5.0, 1e-10, 1e-12).unwrap();
        assert!(amplitude_limit(&t, 2.0).is_err());
    }
}
