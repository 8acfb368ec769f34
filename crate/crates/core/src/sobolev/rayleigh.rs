use crate::error::{invalid, precondition, Result};
use crate::fit;
use crate::manifold::{critical_exponents, ModelFunction};
use crate::quad;
use crate::shooting::fmt;
use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RayleighOptions {
    pub max_iterations: usize,
    /// Relative change of the quotient over `window` iterations that counts as converged.
    pub stall_tol: f64,
    pub window: usize,
    /// Geometric growth of element sizes away from both endpoints.
    pub grading: f64,
}

impl Default for RayleighOptions {
    fn default() -> Self {
        RayleighOptions { max_iterations: 100_000, stall_tol: 1e-10, window: 50, grading: 1.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuotientResult {
    pub r: f64,
    /// Optimal quotient (square root of the squared Rayleigh quotient).
    pub i_r: f64,
    pub mesh: Vec<f64>,
    /// Minimizer scaled to solve −Δf = f^q, so that its mass is I_R^{2(q+1)/(q−1)}.
    pub minimizer: Vec<f64>,
    pub mass: f64,
    /// I_R² mass^{(1−q)/(q+1)} for the returned minimizer.
    pub lambda: f64,
    /// Max nodal residual of the discrete Euler–Lagrange equation, relative to the stiffness term.
    pub el_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub seed: &'static str,
    /// |I_R(N) − I_R(2N)|, when a refined mesh was also solved.
    pub error_estimate: Option<f64>,
}

/// Nodes on [0, R] with element sizes growing geometrically away from both ends.
fn graded_mesh(r: f64, elements: usize, ratio: f64) -> Vec<f64> {
    let cap = ratio.powi((elements / 4) as i32);
    let sizes: Vec<f64> = (0..elements).map(|i| ratio.powi(i.min(elements - 1 - i) as i32).min(cap)).collect();
    let total: f64 = sizes.iter().sum();
    let mut x = Vec::with_capacity(elements + 1);
    let mut acc = 0.0;
    x.push(0.0);
    for s in &sizes[..elements - 1] {
        acc += s;
        x.push(r * acc / total);
    }
    x.push(r);
    x
}

/// P1 discretization: stiffness coefficients and weighted quadrature on every element.
struct Discretization {
    x: Vec<f64>,
    /// ∫_e w / h_e²
    stiff: Vec<f64>,
    /// (weight·w(node), t) per element
    quad: Vec<[(f64, f64); 8]>,
    q: f64,
}

impl Discretization {
    fn new(w: &(dyn Fn(f64) -> f64 + Sync), x: Vec<f64>, q: f64) -> Discretization {
        let m = x.len() - 1;
        let mut stiff = Vec::with_capacity(m);
        let mut qd = Vec::with_capacity(m);
        for e in 0..m {
            let (a, b) = (x[e], x[e + 1]);
            let nodes = quad::gauss_legendre8_nodes(a, b);
            let pts = nodes.map(|(s, wt)| (wt * w(s), (s - a) / (b - a)));
            let mass: f64 = pts.iter().map(|p| p.0).sum();
            stiff.push(mass / ((b - a) * (b - a)));
            qd.push(pts);
        }
        Discretization { x, stiff, quad: qd, q }
    }

    /// Free unknowns: every node except the pinned one at R.
    fn dim(&self) -> usize {
        self.x.len() - 1
    }

    fn value(f: &[f64], e: usize) -> (f64, f64) {
        (f[e], if e + 1 < f.len() { f[e + 1] } else { 0.0 })
    }

    fn dirichlet(&self, f: &[f64]) -> f64 {
        (0..self.dim())
            .map(|e| {
                let (a, b) = Self::value(f, e);
                self.stiff[e] * (b - a) * (b - a)
            })
            .sum()
    }

    fn mass(&self, f: &[f64]) -> f64 {
        let p = self.q + 1.0;
        (0..self.dim())
            .map(|e| {
                let (a, b) = Self::value(f, e);
                self.quad[e].iter().map(|&(w, t)| w * (a + (b - a) * t).abs().powf(p)).sum::<f64>()
            })
            .sum()
    }

    /// g_i = ∫ w |f|^{q−1} f φ_i
    fn load(&self, f: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        for e in 0..self.dim() {
            let (a, b) = Self::value(f, e);
            for &(w, t) in &self.quad[e] {
                let v = a + (b - a) * t;
                let s = w * v.abs().powf(self.q - 1.0) * v;
                g[e] += s * (1.0 - t);
                if e + 1 < self.dim() {
                    g[e + 1] += s * t;
                }
            }
        }
        g
    }

    /// Stiffness matrix A with D(f) = fᵀAf, applied to f.
    fn apply(&self, f: &[f64]) -> Vec<f64> {
        let m = self.dim();
        let mut y = vec![0.0; m];
        for e in 0..m {
            let (a, b) = Self::value(f, e);
            let d = self.stiff[e] * (b - a);
            y[e] -= d;
            if e + 1 < m {
                y[e + 1] += d;
            }
        }
        y
    }

    /// Solves A y = g (Thomas algorithm).
    fn solve(&self, g: &[f64]) -> Vec<f64> {
        let m = self.dim();
        let k = &self.stiff;
        let diag = |i: usize| if i == 0 { k[0] } else { k[i - 1] + k[i] };
        let mut c = vec![0.0; m];
        let mut d = vec![0.0; m];
        let mut beta = diag(0);
        c[0] = -k[0] / beta;
        d[0] = g[0] / beta;
        for i in 1..m {
            beta = diag(i) + k[i - 1] * c[i - 1];
            c[i] = if i + 1 < m { -k[i] / beta } else { 0.0 };
            d[i] = (g[i] + k[i - 1] * d[i - 1]) / beta;
        }
        for i in (0..m - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        d
    }

    fn quotient(&self, f: &[f64]) -> (f64, f64, f64) {
        let d = self.dirichlet(f);
        let n = self.mass(f);
        (d / n.powf(2.0 / (self.q + 1.0)), d, n)
    }
}

struct Descent {
    f: Vec<f64>,
    j: f64,
    iterations: usize,
    converged: bool,
}

/// Stiffness-preconditioned projected gradient descent with Armijo backtracking on D/N^{2/(q+1)}.
fn descend(disc: &Discretization, seed: Vec<f64>, o: &RayleighOptions) -> Descent {
    let normalize = |mut f: Vec<f64>| {
        let n = disc.mass(&f);
        let s = n.powf(-1.0 / (disc.q + 1.0));
        f.iter_mut().for_each(|v| *v = v.abs() * s);
        f
    };
    let mut f = normalize(seed);
    let (mut j, mut d_val, _) = disc.quotient(&f);
    let mut history = vec![j];
    let mut converged = false;
    let mut it = 0;
    while it < o.max_iterations {
        it += 1;
        // with N(f) = 1 the preconditioned gradient is 2(f − D A⁻¹g)
        let z = disc.solve(&disc.load(&f));
        let dir: Vec<f64> = f.iter().zip(&z).map(|(a, b)| 2.0 * (a - d_val * b)).collect();
        let slope: f64 = disc.apply(&dir).iter().zip(&dir).map(|(a, b)| a * b).sum();
        if !(slope > 0.0) {
            converged = true;
            break;
        }
        let mut tau = 0.5;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = f.iter().zip(&dir).map(|(a, b)| a - tau * b).collect();
            let (jt, _, nt) = disc.quotient(&trial);
            if nt > 0.0 && jt <= j - 1e-4 * tau * slope {
                accepted = Some(trial);
                break;
            }
            tau *= 0.5;
        }
        let Some(trial) = accepted else {
            converged = true;
            break;
        };
        f = normalize(trial);
        let (jn, dn, _) = disc.quotient(&f);
        j = jn;
        d_val = dn;
        history.push(j);
        if history.len() > o.window {
            let old = history[history.len() - 1 - o.window];
            if (old - j).abs() <= o.stall_tol * j {
                converged = true;
                break;
            }
        }
    }
    Descent { f, j, iterations: it, converged }
}

fn seeds(x: &[f64]) -> [(&'static str, Vec<f64>); 3] {
    let r = *x.last().unwrap();
    let free = &x[..x.len() - 1];
    [
        ("constant", free.iter().map(|_| 1.0).collect()),
        ("linear", free.iter().map(|s| 1.0 - s / r).collect()),
        ("bump", free.iter().map(|s| (std::f64::consts::PI * s / r).sin() + 1e-3).collect()),
    ]
}

/// Minimizes the truncated quotient on [0, R] for the weight `w` (= ψ^{n−1}).
pub fn rayleigh_minimize_weight(
    w: &(dyn Fn(f64) -> f64 + Sync),
    q: f64,
    r: f64,
    mesh_size: usize,
    o: &RayleighOptions,
) -> Result<QuotientResult> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(invalid(format!("truncation radius must be positive, got {r}")));
    }
    if mesh_size < 64 {
        return Err(invalid(format!("mesh size must be at least 64, got {mesh_size}")));
    }
    if !(q > 1.0) {
        return Err(invalid(format!("q must exceed 1, got {q}")));
    }
    let disc = Discretization::new(w, graded_mesh(r, mesh_size, o.grading), q);
    let mut best: Option<(&'static str, Descent)> = None;
    for (name, seed) in seeds(&disc.x) {
        let d = descend(&disc, seed, o);
        if best.as_ref().map_or(true, |(_, b)| d.j < b.j) {
            best = Some((name, d));
        }
    }
    let (seed, d) = best.unwrap();
    let (j, dv, nv) = disc.quotient(&d.f);
    // rescale so that A f = g exactly at the optimum (λ = 1)
    let lambda0 = dv / nv;
    let c = lambda0.powf(1.0 / (q - 1.0));
    let mut f: Vec<f64> = d.f.iter().map(|v| v * c).collect();
    let mass = disc.mass(&f);
    let i_r = j.sqrt();
    let lambda = i_r * i_r * mass.powf((1.0 - q) / (q + 1.0));
    let af = disc.apply(&f);
    let g = disc.load(&f);
    let scale = af.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let el_residual = af.iter().zip(&g).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
    f.push(0.0);
    Ok(QuotientResult {
        r,
        i_r,
        mesh: disc.x,
        minimizer: f,
        mass,
        lambda,
        el_residual,
        iterations: d.iterations,
        converged: d.converged,
        seed,
        error_estimate: None,
    })
}

pub fn rayleigh_minimize(psi: &ModelFunction, n: u32, q: f64, r: f64, mesh_size: usize) -> Result<QuotientResult> {
    let k = n as i32 - 1;
    rayleigh_minimize_weight(&|s| psi.psi(s).powi(k), q, r, mesh_size, &RayleighOptions::default())
}

/// Solves on meshes N and 2N; returns the refined result with |I(N) − I(2N)| as error estimate.
pub fn rayleigh_with_error(
    w: &(dyn Fn(f64) -> f64 + Sync),
    q: f64,
    r: f64,
    mesh_size: usize,
    o: &RayleighOptions,
) -> Result<QuotientResult> {
    let coarse = rayleigh_minimize_weight(w, q, r, mesh_size, o)?;
    let mut fine = rayleigh_minimize_weight(w, q, r, 2 * mesh_size, o)?;
    fine.error_estimate = Some((coarse.i_r - fine.i_r).abs());
    Ok(fine)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub r: f64,
    pub i_r: f64,
    pub mass: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    /// |I(R_last) − I(R_last/2)| / I(R_last), using the entry closest to half the last radius.
    pub last_doubling_change: f64,
    /// Log-log slope of I_R over the upper half of the radii.
    pub decay_exponent: f64,
}

/// Runs [`rayleigh_minimize`] for every radius (in parallel).
pub fn quotient_limit_scan(psi: &ModelFunction, n: u32, q: f64, radii: &[f64], mesh_size: usize) -> Result<ScanReport> {
    if radii.len() < 2 || radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("radius list must be strictly increasing with at least two entries"));
    }
    let rows: Vec<ScanRow> = radii
        .par_iter()
        .map(|&r| {
            rayleigh_minimize(psi, n, q, r, mesh_size).map(|res| ScanRow {
                r,
                i_r: res.i_r,
                mass: res.mass,
                iterations: res.iterations,
                converged: res.converged,
            })
        })
        .collect::<Result<_>>()?;
    let last = rows.last().unwrap();
    let half = rows
        .iter()
        .min_by(|a, b| (a.r - 0.5 * last.r).abs().total_cmp(&(b.r - 0.5 * last.r).abs()))
        .unwrap();
    let last_doubling_change = (last.i_r - half.i_r).abs() / last.i_r;
    let upper: Vec<&ScanRow> = rows.iter().skip(rows.len() / 2).collect();
    let upper = if upper.len() < 2 { rows.iter().collect() } else { upper };
    let xs: Vec<f64> = upper.iter().map(|r| r.r).collect();
    let ys: Vec<f64> = upper.iter().map(|r| r.i_r).collect();
    let decay_exponent = fit::loglog(&xs, &ys).slope;
    Ok(ScanReport { rows, last_doubling_change, decay_exponent })
}

pub fn write_scan_csv(path: &Path, scan: &ScanReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["R", "I_R", "mass", "iterations", "converged"])?;
    for r in &scan.rows {
        w.write_record([fmt(r.r), fmt(r.i_r), fmt(r.mass), r.iterations.to_string(), r.converged.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub i_psi: f64,
    pub i_alpha: f64,
    pub err_psi: f64,
    pub err_alpha: f64,
    /// I_α − I_ψ exceeds three times the combined error estimate.
    pub strict_gap: bool,
}

/// Truncated I_ψ against the pure weight κ^{n−1} r^{α(n−1)} at q = 2*_α − 1.
pub fn compare_i_alpha(
    psi: &ModelFunction,
    n: u32,
    alpha: f64,
    kappa: f64,
    q: f64,
    r: f64,
    mesh_size: usize,
) -> Result<Comparison> {
    let crit = critical_exponents(n, alpha)?.star_alpha - 1.0;
    if (q - crit).abs() > 1e-12 * crit {
        return Err(precondition(format!("comparison is made at q = 2*_α − 1 = {crit}, got {q}")));
    }
    if !(kappa > 0.0) {
        return Err(invalid("κ must be positive"));
    }
    let k = n as i32 - 1;
    let a = alpha * (n as f64 - 1.0);
    let o = RayleighOptions::default();
    let wp = |s: f64| psi.psi(s).powi(k);
    let kk = kappa.powi(k);
    let wa = move |s: f64| kk * s.powf(a);
    let (p, pa) = rayon::join(|| rayleigh_with_error(&wp, q, r, mesh_size, &o), || rayleigh_with_error(&wa, q, r, mesh_size, &o));
    let (p, pa) = (p?, pa?);
    let (ep, ea) = (p.error_estimate.unwrap(), pa.error_estimate.unwrap());
    Ok(Comparison {
        i_psi: p.i_r,
        i_alpha: pa.i_r,
        err_psi: ep,
        err_alpha: ea,
        strict_gap: pa.i_r - p.i_r > 3.0 * (ep + ea),
    })
}

/// ψ = r on [0, r₀], ψ = r^α beyond 2r₀, joined by a quintic bridge; returned as a tabulated profile.
pub fn linear_then_power(r0: f64, alpha: f64) -> Result<ModelFunction> {
    if !(r0 > 0.0) || !(alpha > 1.0) {
        return Err(invalid("needs r₀ > 0 and α > 1"));
    }
    let r1 = 2.0 * r0;
    let left = [r0, 1.0, 0.0];
    let right = [r1.powf(alpha), alpha * r1.powf(alpha - 1.0), alpha * (alpha - 1.0) * r1.powf(alpha - 2.0)];
    let eval = |r: f64| -> [f64; 3] {
        if r <= r0 {
            [r, 1.0, 0.0]
        } else if r >= r1 {
            [r.powf(alpha), alpha * r.powf(alpha - 1.0), alpha * (alpha - 1.0) * r.powf(alpha - 2.0)]
        } else {
            crate::interp::quintic(r0, r1, left, right, r)
        }
    };
    let mut grid = vec![0.0];
    grid.extend(crate::manifold::log_grid(r0 * 1e-3, r0, 200));
    grid.extend((1..=400).map(|i| r0 + r0 * i as f64 / 400.0));
    grid.extend(crate::manifold::log_grid(r1, 1e3 * r1, 600).into_iter().skip(1));
    let values = grid.iter().map(|&r| eval(r)).collect();
    ModelFunction::tabulated(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_solve_inverts_apply() {
        let w = |s: f64| s * s;
        let disc = Discretization::new(&w, graded_mesh(2.0, 64, 1.05), 2.0);
        let f: Vec<f64> = (0..disc.dim()).map(|i| (i as f64 * 0.3).cos()).collect();
        let back = disc.solve(&disc.apply(&f));
        assert!(f.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn mesh_is_graded_and_covers_interval() {
        let x = graded_mesh(3.0, 128, 1.05);
        assert_eq!(x.len(), 129);
        assert_eq!((x[0], x[128]), (0.0, 3.0));
        assert!(x[1] - x[0] < 0.5 * (x[65] - x[64]));
    }

    #[test]
    fn flat_linear_limit_matches_first_eigenvalue() {
        // q close to 1 on a flat 3-ball: I_R² → first Dirichlet eigenvalue π²
        let res = rayleigh_minimize(&ModelFunction::euclidean(), 3, 1.0 + 1e-9, 1.0, 256).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((res.i_r * res.i_r / pi2 - 1.0).abs() < 1e-3, "{}", res.i_r);
        assert!(res.minimizer.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn bridge_profile_is_increasing_model() {
        let p = linear_then_power(10.0, 2.0).unwrap();
        assert!((p.psi(5.0) - 5.0).abs() < 1e-9);
        assert!((p.psi(40.0) / 1600.0 - 1.0).abs() < 1e-9);
        for r in [11.0, 14.0, 17.0, 19.5] {
            assert!(p.eval(r)[0] > 0.0 && p.eval(r)[1] > 0.0);
        }
    }
}
