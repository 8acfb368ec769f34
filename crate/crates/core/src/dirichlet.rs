//! First-zero branch a ↦ ρ(a), its inversion and the Dirichlet problem on balls.

use crate::error::{invalid, precondition, Error, Result};
use crate::fit;
use crate::manifold::{log_grid, ModelFunction};
use crate::shooting::{self, fmt, CauchyProblem, ShootOptions, Trajectory};
use crate::sobolev;
use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;

/// Sampled first-zero map; absent zeros count as ρ = +∞.
#[derive(Debug, Clone)]
pub struct DirichletBranch {
    pub psi: ModelFunction,
    pub n: u32,
    pub q: f64,
    pub a: Vec<f64>,
    pub rho: Vec<Option<f64>>,
    /// |u_a(ρ)| for every present zero.
    pub root_residual: Vec<Option<f64>>,
    /// Consecutive index pairs (i, i+1) with ρ(a_i) ≤ ρ(a_{i+1}).
    pub monotone_violations: Vec<(usize, usize)>,
    pub options: ShootOptions,
}

fn key(rho: Option<f64>) -> f64 {
    rho.unwrap_or(f64::INFINITY)
}

fn violations(rho: &[Option<f64>]) -> Vec<(usize, usize)> {
    (0..rho.len().saturating_sub(1))
        .filter(|&i| match (rho[i], rho[i + 1]) {
            (None, None) => false,
            (a, b) => key(a) <= key(b),
        })
        .map(|i| (i, i + 1))
        .collect()
}

/// Integrates every a on a log grid of `count` points in [a_min, a_max], in parallel.
pub fn branch_trace(
    psi: &ModelFunction,
    n: u32,
    q: f64,
    a_min: f64,
    a_max: f64,
    count: usize,
    r_max: f64,
) -> Result<DirichletBranch> {
    branch_trace_with(psi, n, q, a_min, a_max, count, &ShootOptions { r_max, ..ShootOptions::default() })
}

pub fn branch_trace_with(
    psi: &ModelFunction,
    n: u32,
    q: f64,
    a_min: f64,
    a_max: f64,
    count: usize,
    o: &ShootOptions,
) -> Result<DirichletBranch> {
    if !(a_min > 0.0 && a_max > a_min) {
        return Err(invalid(format!("need 0 < a_min < a_max, got [{a_min}, {a_max}]")));
    }
    if count < 8 {
        return Err(invalid(format!("branch needs at least 8 points, got {count}")));
    }
    let a = log_grid(a_min, a_max, count);
    let o = ShootOptions { continue_past_zero: false, ..*o };
    let runs: Vec<Result<Trajectory>> =
        a.par_iter().map(|&ai| CauchyProblem::new(psi.clone(), n, q, ai).and_then(|p| shooting::integrate(&p, &o))).collect();
    if runs.iter().all(|r| r.is_err()) {
        return Err(runs.into_iter().next().unwrap().unwrap_err());
    }
    let mut rho = Vec::with_capacity(count);
    let mut res = Vec::with_capacity(count);
    for r in runs {
        match r {
            Ok(t) => {
                rho.push(t.event.first_zero());
                res.push(t.root_residual());
            }
            Err(_) => {
                rho.push(None);
                res.push(None);
            }
        }
    }
    let monotone_violations = violations(&rho);
    Ok(DirichletBranch {
        psi: psi.clone(),
        n,
        q,
        a,
        rho,
        root_residual: res,
        monotone_violations,
        options: o,
    })
}

impl DirichletBranch {
    fn problem(&self, a: f64) -> Result<CauchyProblem> {
        CauchyProblem::new(self.psi.clone(), self.n, self.q, a)
    }

    fn rho_at(&self, a: f64) -> Result<Option<f64>> {
        shooting::first_zero_with(&self.problem(a)?, &self.options)
    }

    /// A(R) read off the sampled data: for each R, the grid heights whose ρ brackets R,
    /// linearly interpolated in (log a, ρ).
    pub fn invert(&self, r: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..self.a.len() - 1 {
            let (g0, g1) = (key(self.rho[i]) - r, key(self.rho[i + 1]) - r);
            if g0 == 0.0 {
                out.push(self.a[i]);
            } else if g0 * g1 < 0.0 && g0.is_finite() && g1.is_finite() {
                let t = g0 / (g0 - g1);
                out.push((self.a[i].ln() + t * (self.a[i + 1].ln() - self.a[i].ln())).exp());
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["a", "rho", "u0_check"])?;
        for i in 0..self.a.len() {
            let rho = self.rho[i].map_or("inf".to_string(), fmt);
            let chk = self.root_residual[i].map_or(String::new(), fmt);
            w.write_record([fmt(self.a[i]), rho, chk])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NonUniqueness {
    #[serde(rename = "R")]
    pub r: f64,
    pub a1: f64,
    pub a2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Detection {
    pub triples: Vec<NonUniqueness>,
    pub warnings: Vec<String>,
}

/// Root refinement tolerances, tight enough that ρ(a) is smooth at the 1e−10 level.
fn refine_options(o: &ShootOptions) -> ShootOptions {
    ShootOptions { rtol: o.rtol.min(1e-12), atol: o.atol.min(1e-14), continue_past_zero: false, ..*o }
}

/// Each refined height meets R to within this, so paired zeros differ by less than 1e−8.
const PAIR_TOL: f64 = 2e-9;

/// Illinois iteration in log a on ρ(a) − R, falling back to bisection where ρ is absent.
fn solve_height(branch: &DirichletBranch, r: f64, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)> {
    let g = |a: f64| -> Result<f64> { Ok(key(branch.rho_at(a)?) - r) };
    let (mut x0, mut x1) = (lo.ln(), hi.ln());
    let (mut g0, mut g1) = (g(lo)?, g(hi)?);
    if g0 == 0.0 {
        return Ok((lo, r));
    }
    if g1 == 0.0 {
        return Ok((hi, r));
    }
    if g0.signum() == g1.signum() {
        return Err(precondition(format!("heights [{lo}, {hi}] do not bracket R = {r}")));
    }
    let mut side = 0i8;
    for _ in 0..300 {
        let finite = g0.is_finite() && g1.is_finite();
        let mut x = if finite { x1 - g1 * (x1 - x0) / (g1 - g0) } else { 0.5 * (x0 + x1) };
        if !(x > x0.min(x1) && x < x0.max(x1)) {
            x = 0.5 * (x0 + x1);
        }
        let gx = g(x.exp())?;
        if gx.is_finite() && gx.abs() < tol {
            return Ok((x.exp(), gx + r));
        }
        if (x1 - x0).abs() < 1e-15 * x.abs().max(1.0) {
            break;
        }
        if gx.signum() == g1.signum() {
            x1 = x;
            g1 = gx;
            if side == 1 && g0.is_finite() {
                g0 *= 0.5;
            }
            side = 1;
        } else {
            x0 = x;
            g0 = gx;
            if side == -1 && g1.is_finite() {
                g1 *= 0.5;
            }
            side = -1;
        }
    }
    Err(Error::NonConvergence(format!("no height with ρ(a) = {r} found in [{lo}, {hi}]")))
}

/// Refines every monotonicity violation into two heights sharing the same first zero.
pub fn detect_nonuniqueness(branch: &DirichletBranch) -> Result<Detection> {
    let mut warnings = Vec::new();
    let mut triples: Vec<NonUniqueness> = Vec::new();
    let present: Vec<f64> = branch.rho.iter().flatten().copied().collect();
    if present.len() < 2 {
        warnings.push("fewer than two finite zeros on the branch; nothing to bracket".into());
        return Ok(Detection { triples, warnings });
    }
    let max_rho = present.iter().cloned().fold(f64::MIN, f64::max);
    let fine = DirichletBranch { options: refine_options(&branch.options), ..branch.clone() };
    for &(i, j) in &branch.monotone_violations {
        let Some(lo_rho) = branch.rho[i] else {
            warnings.push(format!("violation ({i}, {j}) starts at an absent zero; cannot bracket"));
            continue;
        };
        let upper = branch.rho[j].unwrap_or(max_rho);
        if !(upper > lo_rho) {
            warnings.push(format!("violation ({i}, {j}) has no finite level above ρ = {lo_rho}"));
            continue;
        }
        let r = 0.5 * (lo_rho + upper);
        // all grid brackets of ρ − R, then refine each
        let mut roots = Vec::new();
        for k in 0..branch.a.len() - 1 {
            let (g0, g1) = (key(branch.rho[k]) - r, key(branch.rho[k + 1]) - r);
            if g0.signum() != g1.signum() {
                if let Ok(root) = solve_height(&fine, r, branch.a[k], branch.a[k + 1], PAIR_TOL) {
                    roots.push((k, root.0));
                }
            }
        }
        let Some(&(_, a1)) = roots.iter().find(|(k, _)| *k == i) else {
            warnings.push(format!("violation ({i}, {j}) did not refine to a finite level"));
            continue;
        };
        let other = roots.iter().filter(|(k, _)| *k != i).min_by(|x, y| (x.1 / a1).ln().abs().total_cmp(&(y.1 / a1).ln().abs()));
        match other {
            Some(&(_, a2)) => {
                if !triples.iter().any(|t| (t.r - r).abs() < 1e-12 * r) {
                    triples.push(NonUniqueness { r, a1: a1.min(a2), a2: a1.max(a2) });
                }
            }
            None => warnings.push(format!("violation ({i}, {j}): no second height reaches R = {r}")),
        }
    }
    Ok(Detection { triples, warnings })
}

/// Heights (a_lo, a_hi) with ρ(a_lo) > R > ρ(a_hi), found by doubling from a = 1.
pub fn bracket_for_radius(psi: &ModelFunction, n: u32, q: f64, r: f64, o: &ShootOptions) -> Result<(f64, f64)> {
    let rho = |a: f64| -> Result<f64> { Ok(key(shooting::first_zero_with(&CauchyProblem::new(psi.clone(), n, q, a)?, o)?)) };
    let mut a = 1.0;
    let above = rho(a)? > r;
    for _ in 0..80 {
        let next = if above { 2.0 * a } else { 0.5 * a };
        let below_next = rho(next)? <= r;
        if above && below_next {
            return Ok((a, next));
        }
        if !above && !below_next {
            return Ok((next, a));
        }
        a = next;
    }
    Err(Error::NonConvergence(format!("no height brackets R = {r} within 2^±80")))
}

/// Positive radial solution of −Δu = u^q in B_R, u = 0 on ∂B_R.
#[derive(Debug, Clone)]
pub struct BallSolution {
    pub r: f64,
    pub a: f64,
    pub trajectory: Trajectory,
    /// ∫₀^R u^{q+1} ψ^{n−1}
    pub mass: f64,
    pub sobolev_quotient: f64,
}

/// Shoots on a until |ρ(a) − R| < 1e−10·R inside a bracket whose ends straddle R.
pub fn dirichlet_solution(psi: &ModelFunction, n: u32, q: f64, r: f64, bracket: (f64, f64)) -> Result<BallSolution> {
    let o = ShootOptions { r_max: (4.0 * r).max(10.0), ..ShootOptions::default() };
    dirichlet_solution_with(psi, n, q, r, bracket, &o)
}

pub fn dirichlet_solution_with(
    psi: &ModelFunction,
    n: u32,
    q: f64,
    r: f64,
    bracket: (f64, f64),
    o: &ShootOptions,
) -> Result<BallSolution> {
    if !(r > 0.0) {
        return Err(invalid(format!("ball radius must be positive, got {r}")));
    }
    let (lo, hi) = (bracket.0.min(bracket.1), bracket.0.max(bracket.1));
    if !(lo > 0.0) || lo == hi {
        return Err(invalid(format!("bracket ({}, {}) is not a positive interval", bracket.0, bracket.1)));
    }
    let o = ShootOptions { r_max: o.r_max.max(1.5 * r), ..refine_options(o) };
    let stub = DirichletBranch {
        psi: psi.clone(),
        n,
        q,
        a: vec![],
        rho: vec![],
        root_residual: vec![],
        monotone_violations: vec![],
        options: o,
    };
    let (a, _) = solve_height(&stub, r, lo, hi, 1e-10 * r).map_err(|e| match e {
        Error::Precondition(m) => Error::InvalidParameter(m),
        e => e,
    })?;
    let p = CauchyProblem::new(psi.clone(), n, q, a)?;
    let t = shooting::integrate(&p, &o)?;
    let k = n as i32 - 1;
    let mass = t.integrate_along(|x, u, _| u.abs().powf(q + 1.0) * psi.psi(x).powi(k));
    let dirichlet = t.integrate_along(|x, _, du| du * du * psi.psi(x).powi(k));
    Ok(BallSolution { r, a, mass, sobolev_quotient: dirichlet.sqrt() / mass.powf(1.0 / (q + 1.0)), trajectory: t })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClaimsRow {
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "I_R")]
    pub i_r: f64,
    /// All heights with ρ(a) = R found on the branch.
    pub heights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClaimsReport {
    pub rows: Vec<ClaimsRow>,
    /// Indices k with I(R_{k+1}) > I(R_k) beyond the relative tolerance.
    pub quotient_increases: Vec<usize>,
    /// Radii where more than one height was found.
    pub non_injective: Vec<f64>,
    /// Indices k where A(R_{k+1}) ≥ A(R_k) for single-valued rows.
    pub height_increases: Vec<usize>,
    /// Log-log slope of A(R) over the sampled radii.
    pub height_slope: f64,
    /// Relative tolerance used for the quotient monotonicity check.
    pub tolerance: f64,
}

/// Tabulates I_R and A(R) and checks monotonicity of both along `radii`.
pub fn branch_claims_report(branch: &DirichletBranch, radii: &[f64], mesh_size: usize) -> Result<ClaimsReport> {
    if radii.len() < 4 || radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("radius list must be increasing with at least 4 entries"));
    }
    let tolerance = 1e-3;
    let (psi, n, q) = (&branch.psi, branch.n, branch.q);
    let rows: Vec<ClaimsRow> = radii
        .par_iter()
        .map(|&r| -> Result<ClaimsRow> {
            let i_r = sobolev::rayleigh_minimize(psi, n, q, r, mesh_size)?.i_r;
            let mut heights = Vec::new();
            for k in 0..branch.a.len() - 1 {
                let (g0, g1) = (key(branch.rho[k]) - r, key(branch.rho[k + 1]) - r);
                if g0.signum() != g1.signum() {
                    if let Ok((a, _)) = solve_height(branch, r, branch.a[k], branch.a[k + 1], 1e-10 * r) {
                        heights.push(a);
                    }
                }
            }
            Ok(ClaimsRow { r, i_r, heights })
        })
        .collect::<Result<_>>()?;
    let quotient_increases =
        (0..rows.len() - 1).filter(|&k| rows[k + 1].i_r > rows[k].i_r * (1.0 + tolerance)).collect();
    let non_injective = rows.iter().filter(|r| r.heights.len() > 1).map(|r| r.r).collect();
    let single: Vec<(usize, f64, f64)> =
        rows.iter().enumerate().filter(|(_, r)| r.heights.len() == 1).map(|(k, r)| (k, r.r, r.heights[0])).collect();
    let height_increases = single.windows(2).filter(|w| w[1].2 >= w[0].2).map(|w| w[0].0).collect();
    let height_slope = if single.len() >= 2 {
        let xs: Vec<f64> = single.iter().map(|s| s.1).collect();
        let ys: Vec<f64> = single.iter().map(|s| s.2).collect();
        fit::loglog(&xs, &ys).slope
    } else {
        f64::NAN
    };
    Ok(ClaimsReport { rows, quotient_increases, non_injective, height_increases, height_slope, tolerance })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn violation_rule() {
        assert!(violations(&[Some(3.0), Some(2.0), Some(1.0)]).is_empty());
        assert_eq!(violations(&[Some(3.0), Some(1.0), Some(2.0)]), vec![(1, 2)]);
        assert_eq!(violations(&[None, None, Some(1.0)]), Vec::<(usize, usize)>::new());
        assert_eq!(violations(&[Some(1.0), None, Some(0.5)]), vec![(0, 1)]);
    }

    #[test]
    fn flat_branch_scaling() {
        let b = branch_trace(&ModelFunction::euclidean(), 3, 3.0, 0.25, 4.0, 9, 200.0).unwrap();
        assert!(b.monotone_violations.is_empty());
        // u ↦ λu(λr) maps solutions to solutions when q = 3, so ρ·a is constant
        let c = b.rho[4].unwrap() * b.a[4];
        for (a, r) in b.a.iter().zip(&b.rho) {
            assert!((r.unwrap() * a / c - 1.0).abs() < 1e-6);
        }
        assert!(b.root_residual.iter().zip(&b.a).all(|(x, a)| x.unwrap() < 1e-10 * a));
        assert!(detect_nonuniqueness(&b).unwrap().triples.is_empty());
    }

    #[test]
    fn inverse_consistency() {
        let e = ModelFunction::euclidean();
        let rho = shooting::first_zero(&CauchyProblem::new(e.clone(), 3, 3.0, 2.0).unwrap(), 50.0).unwrap().unwrap();
        let s = dirichlet_solution(&e, 3, 3.0, rho, (1.0, 4.0)).unwrap();
        assert!((s.a / 2.0 - 1.0).abs() < 1e-8);
        assert!(dirichlet_solution(&e, 3, 3.0, rho, (3.0, 4.0)).is_err());
    }
}
