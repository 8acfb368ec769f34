use super::mollifier;
use crate::dirichlet::{bracket_for_radius, dirichlet_solution_with};
use crate::error::{invalid, precondition, Error, Result};
use crate::fit;
use crate::jet::Jet;
use crate::manifold::{critical_exponents, log_grid, ModelFunction};
use crate::quad;
use crate::shooting::{fmt, ShootOptions, Trajectory};
use serde::Serialize;
use serde_json::json;
use std::path::Path;
use std::sync::Arc;

/// Upper end of the tabulated profiles; beyond it the table continues as a pure power.
const TABLE_END: f64 = 1e5;
const MAX_HALVINGS: usize = 20;

/// c = [2/(q−1)·(α(n−1) − (q+1)/(q−1))]^{1/(q−1)}.
pub fn w2_constant(n: u32, alpha: f64, q: f64) -> Result<f64> {
    if n < 2 || !(q > 1.0) || !(alpha > 0.0) {
        return Err(invalid(format!("w2 needs n ≥ 2, q > 1, α > 0; got n = {n}, q = {q}, α = {alpha}")));
    }
    let m = q - 1.0;
    let base = 2.0 / m * (alpha * (n as f64 - 1.0) - (q + 1.0) / m);
    if !(base > 0.0) {
        return Err(precondition(format!(
            "α(n−1) = {} ≤ (q+1)/(q−1) = {}: the power tail constant is undefined",
            alpha * (n as f64 - 1.0),
            (q + 1.0) / m
        )));
    }
    Ok(base.powf(1.0 / m))
}

/// w₂(r) = c/(r − r₀)^{2/(q−1)}, an exact solution on the cone ψ ∝ (r − r₀)^α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct W2Tail {
    pub n: u32,
    pub alpha: f64,
    pub q: f64,
    pub c: f64,
    pub r0: f64,
}

impl W2Tail {
    pub fn exponent(&self) -> f64 {
        2.0 / (self.q - 1.0)
    }

    /// (w, w′, w″) for r > r₀.
    pub fn eval(&self, r: f64) -> [f64; 3] {
        let p = self.exponent();
        let x = r - self.r0;
        let w = self.c * x.powf(-p);
        [w, -p * w / x, p * (p + 1.0) * w / (x * x)]
    }

    /// |−w″ − (n−1)α w′/(r − r₀) − w^q| / w^q.
    pub fn residual(&self, r: f64) -> f64 {
        let [w, dw, ddw] = self.eval(r);
        let k = (self.n as f64 - 1.0) * self.alpha;
        let wq = w.powf(self.q);
        (-ddw - k * dw / (r - self.r0) - wq).abs() / wq
    }
}

/// Power-tail solution with its self-check at 20 radii.
pub fn w2_tail(n: u32, alpha: f64, q: f64, r0: f64) -> Result<W2Tail> {
    let c = w2_constant(n, alpha, q)?;
    let t = W2Tail { n, alpha, q, c, r0 };
    for x in log_grid(1e-2, 1e3, 20) {
        let res = t.residual(r0 + x);
        if !(res < 1e-10) {
            return Err(Error::Internal(format!("w2 residual {res} at r − r0 = {x}")));
        }
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Lipschitz,
    C1,
    Smooth,
}

/// Matching data at the gluing radius r̄₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tangency {
    /// |w₁ − w₂|.
    pub value_gap: f64,
    /// |w₁′ − w₂′| / |w₁′|.
    pub slope_gap: f64,
    /// w₂″ − w₁″, nonnegative at a tangential contact from above.
    pub second_jump: f64,
    /// ψ̄′(r̄₀⁺) − ψ̄′(r̄₀⁻).
    pub psi_slope_jump: f64,
}

/// Coefficients of F₂ = (A/2)(r − r̄₀)² + B(r − r̄₀) + C and Ã = F₁″(r̄₀).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FCoefficients {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "A_tilde")]
    pub a_tilde: f64,
}

/// Checks on the smooth stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FinalChecks {
    /// Max relative ODE residual of u against the tabulated ψ.
    pub ode_residual: f64,
    /// Min second divided difference of ψ, scaled by spacing² / ψ.
    pub convexity_margin: f64,
    /// Log-log slope of ψ over [1e3, 1e4].
    pub tail_alpha: f64,
    /// Log-log slope of u over [1e3, 1e4].
    pub u_decay: f64,
    /// Log-log slope of (u′)²ψ^{n−1} over [1e3, 1e4].
    pub energy_exponent: f64,
    /// Largest ratio of consecutive energy increments over doublings of R.
    pub energy_increment_ratio: f64,
    /// min (n−1)²ψ″/ψ over the check grid.
    pub min_g: f64,
}

impl FinalChecks {
    pub fn failures(&self, alpha: f64, q: f64) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.ode_residual < 1e-5) {
            out.push(format!("ODE residual {:e}", self.ode_residual));
        }
        if !(self.convexity_margin >= -1e-8) {
            out.push(format!("convexity margin {:e}", self.convexity_margin));
        }
        if !((self.tail_alpha / alpha - 1.0).abs() < 0.02) {
            out.push(format!("tail exponent {}", self.tail_alpha));
        }
        let decay = -2.0 / (q - 1.0);
        if !((self.u_decay / decay - 1.0).abs() < 0.05) {
            out.push(format!("decay exponent {}", self.u_decay));
        }
        if !(self.energy_exponent < -1.05) {
            out.push(format!("energy exponent {}", self.energy_exponent));
        }
        if !(self.energy_increment_ratio < 1.0) {
            out.push(format!("energy increment ratio {}", self.energy_increment_ratio));
        }
        if !(self.min_g > 0.0) {
            out.push(format!("min G {:e}", self.min_g));
        }
        out
    }
}

/// (n−1)²ψ″/ψ written through F = u^{−(q−1)} and its first three derivatives.
pub fn g_functional(n: u32, q: f64, f: [f64; 4]) -> f64 {
    let [f0, f1, f2, f3] = f;
    let nf = n as f64;
    let m = q - 1.0;
    let first = (m * m + nf * f2 * f2 - (nf + 1.0) * m * f2 - (nf - 1.0) * f1 * f3) / (f1 * f1);
    let second = (2.0 * q * f0 + q * (nf - 3.0) / m * f0 * f2 + q / m * (q / m - (nf - 1.0)) * f1 * f1) / (f0 * f0);
    first + second
}

/// ψ′/ψ and its derivative from F.
fn log_derivative_jet(n: u32, q: f64, f: [f64; 4]) -> (f64, f64) {
    let [f0, f1, f2, f3] = f;
    let k = 1.0 / (n as f64 - 1.0);
    let m = q - 1.0;
    let l = k * (m / f1 + q / m * f1 / f0 - f2 / f1);
    let dl = k * (-m * f2 / (f1 * f1) + q / m * (f2 / f0 - f1 * f1 / (f0 * f0)) - f3 / f1 + f2 * f2 / (f1 * f1));
    (l, dl)
}

/// w₁ and its first three derivatives from the hyperbolic ODE.
fn w1_jet(w1: &Trajectory, n: u32, q: f64, r: f64) -> [f64; 4] {
    let [w, dw] = w1.eval(r);
    let k = n as f64 - 1.0;
    let coth = 1.0 / r.tanh();
    let dcoth = -1.0 / (r.sinh() * r.sinh());
    let wq1 = w.abs().powf(q - 1.0);
    let d2 = -k * coth * dw - wq1 * w;
    let d3 = -k * (dcoth * dw + coth * d2) - q * wq1 * dw;
    [w, dw, d2, d3]
}

/// F = u^{−(q−1)} on the three pieces plus the smoothing corrections.
#[derive(Debug)]
struct FModel {
    n: u32,
    q: f64,
    w1: Arc<Trajectory>,
    r_bar: f64,
    coeffs: FCoefficients,
    eps: f64,
    /// (radius, jump of F‴) pairs removed by the smooth stage.
    jumps: Vec<(f64, f64)>,
    h: f64,
    eta: f64,
    /// ψ = sinh and u = w₁ below this radius.
    r_s: f64,
    /// F is quadratic above this radius.
    r_q: f64,
    nodes: Vec<f64>,
    /// ∫_{r_s}^{node} 1/F′.
    cum: Vec<f64>,
    f_s: [f64; 4],
    f_q: [f64; 4],
}

impl FModel {
    fn new(n: u32, q: f64, w1: Arc<Trajectory>, r_bar: f64, coeffs: FCoefficients, eps: f64, smooth: Option<(f64, f64)>) -> FModel {
        let jump_third = -(coeffs.a_tilde - coeffs.a) / eps;
        let (jumps, h, eta) = match smooth {
            Some((h, eta)) => {
                let left = w1_f_jet(&w1, n, q, r_bar)[3];
                (vec![(r_bar, jump_third - left), (r_bar + eps, -jump_third)], h, eta)
            }
            None => (vec![], 0.0, 0.0),
        };
        let r_s = r_bar - eta;
        let r_q = r_bar + eps + eta;
        let mut breaks = vec![r_s, r_bar, r_bar + eps, r_q];
        for &(ri, _) in &jumps {
            breaks.push(ri - h);
            breaks.push(ri + h);
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        let mut nodes = vec![breaks[0]];
        for w in breaks.windows(2) {
            let near_jump = jumps.iter().any(|&(ri, _)| (0.5 * (w[0] + w[1]) - ri).abs() < h);
            let k = if near_jump { 96 } else { 160 };
            for i in 1..=k {
                nodes.push(w[0] + (w[1] - w[0]) * i as f64 / k as f64);
            }
        }
        let mut m = FModel {
            n,
            q,
            w1,
            r_bar,
            coeffs,
            eps,
            jumps,
            h,
            eta,
            r_s,
            r_q,
            nodes,
            cum: vec![],
            f_s: [0.0; 4],
            f_q: [0.0; 4],
        };
        m.f_s = m.f(r_s);
        m.f_q = m.f(r_q);
        let inv = |r: f64| 1.0 / m.f(r)[1];
        m.cum = quad::cumulative_gl8(&inv, &m.nodes, 0.0);
        m
    }

    fn base(&self, r: f64) -> [f64; 4] {
        let FCoefficients { a, b, c, a_tilde } = self.coeffs;
        let s = r - self.r_bar;
        if s <= 0.0 {
            return w1_f_jet(&self.w1, self.n, self.q, r);
        }
        let d = a_tilde - a;
        let e = self.eps;
        // same test as the kink term of the correction
        if r <= self.r_bar + e {
            let k = d / e;
            [
                0.5 * a_tilde * s * s + b * s + c - k * s * s * s / 6.0,
                a_tilde * s + b - 0.5 * k * s * s,
                a_tilde - k * s,
                -k,
            ]
        } else {
            let b2 = b + 0.5 * d * e;
            let c2 = c - d * e * e / 6.0;
            [0.5 * a * s * s + b2 * s + c2, a * s + b2, a, 0.0]
        }
    }

    fn f(&self, r: f64) -> [f64; 4] {
        let mut f = self.base(r);
        for &(ri, j) in &self.jumps {
            let z = mollifier::cubic_correction(r - ri, self.h, self.eta);
            for k in 0..4 {
                f[k] += j * z[k];
            }
        }
        f
    }

    fn integral_inv_df(&self, r: f64) -> f64 {
        if r >= self.r_q {
            let last = *self.cum.last().unwrap();
            return last + (self.f(r)[1] / self.f_q[1]).ln() / self.coeffs.a;
        }
        let i = crate::interp::locate(&self.nodes, r);
        self.cum[i] + quad::gauss_legendre8(|x| 1.0 / self.f(x)[1], self.nodes[i], r)
    }

    /// (u, u′, u″).
    fn u(&self, r: f64) -> [f64; 3] {
        if r < self.r_s {
            let w = w1_jet(&self.w1, self.n, self.q, r.max(1e-8));
            return [w[0], w[1], w[2]];
        }
        let f = self.f(r);
        let u = Jet::new(f[0], f[1], f[2], f[3]).powf(-1.0 / (self.q - 1.0));
        [u.v, u.d1, u.d2]
    }

    /// (ψ, ψ′, ψ″).
    fn psi(&self, r: f64) -> [f64; 3] {
        if r < self.r_s {
            let s = r.sinh();
            return [s, r.cosh(), s];
        }
        let f = self.f(r);
        let (l, dl) = log_derivative_jet(self.n, self.q, f);
        let k = 1.0 / (self.n as f64 - 1.0);
        let m = self.q - 1.0;
        let ln_psi = self.r_s.sinh().ln()
            + k * (m * self.integral_inv_df(r) + self.q / m * (f[0] / self.f_s[0]).ln() - (f[1] / self.f_s[1]).ln());
        let p = ln_psi.exp();
        [p, p * l, p * (dl + l * l)]
    }

    fn g(&self, r: f64) -> f64 {
        if r < self.r_s {
            return (self.n as f64 - 1.0).powi(2);
        }
        g_functional(self.n, self.q, self.f(r))
    }

    /// Table radii: uniform core, the smoothing nodes, then log spacing to the table end.
    fn table_grid(&self) -> Vec<f64> {
        let mut r: Vec<f64> = (0..400).map(|i| self.r_s * i as f64 / 400.0).collect();
        r.extend_from_slice(&self.nodes);
        let decades = (TABLE_END / self.r_q).log10();
        let count = (80.0 * decades).ceil() as usize + 1;
        r.extend(log_grid(self.r_q, TABLE_END, count).into_iter().skip(1));
        r
    }

    fn tabulate(&self) -> Result<ModelFunction> {
        let r = self.table_grid();
        let kinks: Vec<f64> = if self.jumps.is_empty() { vec![self.r_bar, self.r_bar + self.eps] } else { vec![] };
        let values = r
            .iter()
            .map(|&x| {
                if kinks.contains(&x) {
                    let d = 1e-9 * self.eps;
                    let (lo, hi) = (self.psi(x - d), self.psi(x + d));
                    let mid = self.psi(x);
                    [mid[0], mid[1], 0.5 * (lo[2] + hi[2])]
                } else {
                    self.psi(x)
                }
            })
            .collect();
        ModelFunction::tabulated(r, values)
    }
}

/// F₁ jets from w₁.
fn w1_f_jet(w1: &Trajectory, n: u32, q: f64, r: f64) -> [f64; 4] {
    let w = w1_jet(w1, n, q, r);
    let f = Jet::new(w[0], w[1], w[2], w[3]).powf(-(q - 1.0));
    [f.v, f.d1, f.d2, f.d3]
}

/// The glued manifold and solution at each construction stage.
#[derive(Debug, Clone)]
pub struct GluedProfile {
    pub n: u32,
    pub alpha: f64,
    pub q: f64,
    pub stage: Stage,
    pub r_tilde: f64,
    pub r_bar: f64,
    /// Continuity constant of the Lipschitz stage.
    pub kappa: f64,
    pub c: f64,
    /// w₁(0) = ū(0).
    pub u0: f64,
    pub coeffs: FCoefficients,
    pub tangency: Tangency,
    pub eps: Option<f64>,
    pub width: Option<f64>,
    /// Convexity constant of the C¹ stage.
    pub k_conv: Option<f64>,
    pub final_checks: Option<FinalChecks>,
    pub psi_bar: ModelFunction,
    pub psi_eps: Option<ModelFunction>,
    pub psi_final: Option<ModelFunction>,
    w1: Arc<Trajectory>,
    w2: W2Tail,
    f_eps: Option<Arc<FModel>>,
    f_final: Option<Arc<FModel>>,
}

/// min over r ∈ (max(r₀, 0), 1) of w₂(r; r₀) − w₁(r) and its location; +∞ for r₀ ≥ 1.
fn separation(w1: &Trajectory, tail: &W2Tail, r_end: f64) -> (f64, f64) {
    let lo = tail.r0.max(0.0);
    if lo >= r_end {
        return (f64::INFINITY, r_end);
    }
    let m = 4000;
    let xs: Vec<f64> = (0..m).map(|i| lo + (r_end - lo) * (i as f64 + 0.5) / m as f64).collect();
    let gap = |r: f64| tail.eval(r)[0] - w1.eval(r)[0];
    let slope = |r: f64| tail.eval(r)[1] - w1.eval(r)[1];
    let (i, _) = xs
        .iter()
        .map(|&r| gap(r))
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, g)| if g < acc.1 { (i, g) } else { acc });
    let (mut a, mut b) = (xs[i.saturating_sub(1)], xs[(i + 1).min(m - 1)]);
    if slope(a) < 0.0 && slope(b) > 0.0 {
        for _ in 0..200 {
            let c = 0.5 * (a + b);
            if c <= a || c >= b {
                break;
            }
            if slope(c) < 0.0 {
                a = c;
            } else {
                b = c;
            }
        }
        let r = 0.5 * (a + b);
        return (gap(r), r);
    }
    (gap(xs[i]), xs[i])
}

/// Lipschitz stage: hyperbolic unit-ball solution glued tangentially to the power tail.
pub fn glue(n: u32, alpha: f64, q: f64) -> Result<GluedProfile> {
    let th = critical_exponents(n, alpha)?;
    if !(q > th.tilde && q < th.star_alpha - 1.0) {
        return Err(precondition(format!(
            "gluing needs q in ({}, {}), got {q}",
            th.tilde,
            th.star_alpha - 1.0
        )));
    }
    let c = w2_constant(n, alpha, q)?;
    let hyp = ModelFunction::hyperbolic();
    let o = ShootOptions { r_max: 4.0, rtol: 1e-12, atol: 1e-14, ..ShootOptions::default() };
    let bracket = bracket_for_radius(&hyp, n, q, 1.0, &o)?;
    let ball = dirichlet_solution_with(&hyp, n, q, 1.0, bracket, &o)?;
    let w1 = Arc::new(ball.trajectory);
    let r_end = w1.event.first_zero().unwrap_or(1.0);
    let tail = |r0: f64| W2Tail { n, alpha, q, c, r0 };
    let (mut lo, mut hi) = (-50.0, 1.0);
    let s_lo = separation(&w1, &tail(lo), r_end).0;
    if !(s_lo < 0.0) {
        return Err(Error::NonConvergence(format!("w₂ does not cross w₁ at r₀ = −50 (separation {s_lo})")));
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if separation(&w1, &tail(mid), r_end).0 < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r_tilde = hi;
    let w2 = w2_tail(n, alpha, q, r_tilde)?;
    let (gap, r_bar) = separation(&w1, &w2, r_end);
    if !(r_bar > r_tilde.max(0.0)) {
        return Err(Error::Verification(format!("contact point {r_bar} is not beyond max(r̃₀, 0)")));
    }
    let j1 = w1_jet(&w1, n, q, r_bar);
    let e2 = w2.eval(r_bar);
    let kappa = r_bar.sinh() / (r_bar - r_tilde).powf(alpha);
    let psi_bar = ModelFunction::piecewise_sinh_power(r_bar, r_tilde, alpha)?;
    let tangency = Tangency {
        value_gap: gap.abs(),
        slope_gap: (e2[1] - j1[1]).abs() / j1[1].abs(),
        second_jump: e2[2] - j1[2],
        psi_slope_jump: kappa * alpha * (r_bar - r_tilde).powf(alpha - 1.0) - r_bar.cosh(),
    };
    let m = q - 1.0;
    let f1 = w1_f_jet(&w1, n, q, r_bar);
    let coeffs = FCoefficients {
        a: m * m / (alpha * (n as f64 - 1.0) * m - (q + 1.0)),
        b: f1[1],
        c: f1[0],
        a_tilde: f1[2],
    };
    Ok(GluedProfile {
        n,
        alpha,
        q,
        stage: Stage::Lipschitz,
        r_tilde,
        r_bar,
        kappa,
        c,
        u0: ball.a,
        coeffs,
        tangency,
        eps: None,
        width: None,
        k_conv: None,
        final_checks: None,
        psi_bar,
        psi_eps: None,
        psi_final: None,
        w1,
        w2,
        f_eps: None,
        f_final: None,
    })
}

/// Check radii beyond r̄₀: dense across the smoothing window, log spaced to 1e4.
fn tail_check_grid(r_bar: f64, eps: f64) -> Vec<f64> {
    let mut r: Vec<f64> = (1..512).map(|i| r_bar + 2.0 * eps * i as f64 / 512.0).collect();
    r.extend(log_grid(r_bar + 2.0 * eps, 1e4, 600));
    r.retain(|&x| (x - r_bar - eps).abs() > 1e-12);
    r
}

/// C¹ stage: F″ ramps from Ã down to A over [r̄₀, r̄₀ + ε]; ε is halved until ψ_ε is uniformly convex.
pub fn smooth_c1(glued: &GluedProfile, eps: Option<f64>) -> Result<GluedProfile> {
    let mut e = eps.unwrap_or(0.1 * (1.0 - glued.r_bar));
    if !(e > 0.0) {
        return Err(invalid(format!("ε must be positive, got {e}")));
    }
    let (n, q) = (glued.n, glued.q);
    let k2 = (n as f64 - 1.0).powi(2);
    for _ in 0..=MAX_HALVINGS {
        let model = FModel::new(n, q, glued.w1.clone(), glued.r_bar, glued.coeffs, e, None);
        let k = tail_check_grid(glued.r_bar, e)
            .into_iter()
            .map(|r| model.g(r) / k2 * (r * r + 1.0))
            .fold(1.0, f64::min);
        if k > 0.0 {
            let psi_eps = model.tabulate()?;
            return Ok(GluedProfile {
                stage: Stage::C1,
                eps: Some(e),
                k_conv: Some(k),
                psi_eps: Some(psi_eps),
                f_eps: Some(Arc::new(model)),
                ..glued.clone()
            });
        }
        e *= 0.5;
    }
    Err(Error::Verification(format!("ψ_ε is not uniformly convex for any ε down to {e}")))
}

/// Smooth stage: both F‴ jumps replaced by mollified ramps of half-width `width`.
pub fn smooth_cinf(profile: &GluedProfile, width: Option<f64>) -> Result<GluedProfile> {
    let eps = profile.eps.ok_or_else(|| precondition("smooth_cinf needs the C¹ stage"))?;
    let eta = 0.25 * eps;
    let mut h = width.unwrap_or(eps / 8.0);
    if !(h > 0.0 && h < eta) {
        return Err(invalid(format!("width must lie in (0, ε/4 = {eta}), got {h}")));
    }
    let (n, q) = (profile.n, profile.q);
    for _ in 0..=MAX_HALVINGS {
        let model = FModel::new(n, q, profile.w1.clone(), profile.r_bar, profile.coeffs, eps, Some((h, eta)));
        let min_g = model
            .nodes
            .iter()
            .copied()
            .chain(tail_check_grid(profile.r_bar, eps))
            .map(|r| model.g(r))
            .fold(f64::INFINITY, f64::min);
        if min_g > 0.0 {
            let psi_final = model.tabulate()?;
            let mut checks = final_checks(&model, &psi_final, n, q)?;
            checks.min_g = min_g;
            return Ok(GluedProfile {
                stage: Stage::Smooth,
                width: Some(h),
                final_checks: Some(checks),
                psi_final: Some(psi_final),
                f_final: Some(Arc::new(model)),
                ..profile.clone()
            });
        }
        h *= 0.5;
    }
    Err(Error::Verification(format!("G stays nonpositive down to width {h}")))
}

fn final_checks(model: &FModel, psi: &ModelFunction, n: u32, q: f64) -> Result<FinalChecks> {
    let k = n as f64 - 1.0;
    let mut grid = model.table_grid();
    grid.retain(|&r| r > 1e-3 && r <= 1e4);
    // midpoints stress the interpolation between table nodes
    let mids: Vec<f64> = grid.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let ode_residual = grid
        .iter()
        .chain(&mids)
        .map(|&r| {
            let [u, du, ddu] = model.u(r);
            let drift = k * psi.log_derivative(r) * du;
            let uq = u.powf(q);
            (ddu + drift + uq).abs() / (ddu.abs() + drift.abs() + uq)
        })
        .fold(0.0, f64::max);
    let samples: Vec<(f64, f64)> = grid.iter().map(|&r| (r, psi.psi(r))).collect();
    let convexity_margin = samples
        .windows(3)
        .map(|w| {
            let (h0, h1) = (w[1].0 - w[0].0, w[2].0 - w[1].0);
            let d2 = 2.0 * ((w[2].1 - w[1].1) / h1 - (w[1].1 - w[0].1) / h0) / (h0 + h1);
            let hm = 0.5 * (h0 + h1);
            d2 * hm * hm / w[1].1
        })
        .fold(f64::INFINITY, f64::min);
    let decade = log_grid(1e3, 1e4, 101);
    let slope = |f: &dyn Fn(f64) -> f64| {
        let ys: Vec<f64> = decade.iter().map(|&r| f(r)).collect();
        fit::loglog(&decade, &ys).slope
    };
    let energy = |r: f64| {
        let du = model.u(r)[1];
        du * du * psi.psi(r).powi(n as i32 - 1)
    };
    let tail_alpha = slope(&|r| psi.psi(r));
    let u_decay = slope(&|r| model.u(r)[0]);
    let energy_exponent = slope(&energy);
    let radii: Vec<f64> = (0..10).map(|i| 10.0 * 2f64.powi(i)).collect();
    let mut pts: Vec<f64> = model.table_grid().into_iter().filter(|&r| r < radii[0]).collect();
    pts.extend(&radii);
    let cum = quad::cumulative_gl8(&energy, &pts, 0.0);
    let at: Vec<f64> = radii.iter().map(|r| cum[pts.iter().position(|p| p == r).unwrap()]).collect();
    let inc: Vec<f64> = at.windows(2).map(|w| w[1] - w[0]).collect();
    let energy_increment_ratio = inc.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    Ok(FinalChecks {
        ode_residual,
        convexity_margin,
        tail_alpha,
        u_decay,
        energy_exponent,
        energy_increment_ratio,
        min_g: f64::NAN,
    })
}

impl GluedProfile {
    /// Lipschitz-stage solution ū: w₁ up to r̄₀, w₂ beyond; (u, u′, u″).
    pub fn u_bar(&self, r: f64) -> [f64; 3] {
        if r <= self.r_bar {
            let w = w1_jet(&self.w1, self.n, self.q, r.max(1e-8));
            [w[0], w[1], w[2]]
        } else {
            self.w2.eval(r)
        }
    }

    pub fn u_eps(&self, r: f64) -> Option<[f64; 3]> {
        self.f_eps.as_ref().map(|m| m.u(r))
    }

    pub fn u_final(&self, r: f64) -> Option<[f64; 3]> {
        self.f_final.as_ref().map(|m| m.u(r))
    }

    /// Solution of the most advanced stage.
    pub fn u(&self, r: f64) -> [f64; 3] {
        self.u_final(r).or_else(|| self.u_eps(r)).unwrap_or_else(|| self.u_bar(r))
    }

    /// Model function of the most advanced stage.
    pub fn psi(&self) -> &ModelFunction {
        self.psi_final.as_ref().or(self.psi_eps.as_ref()).unwrap_or(&self.psi_bar)
    }

    /// w₂ for the chosen shift r̃₀.
    pub fn w2(&self) -> W2Tail {
        self.w2
    }

    /// (F, F′, F″, F‴) of the C¹ or smooth stage.
    pub fn f_jet(&self, r: f64) -> Option<[f64; 4]> {
        self.f_final.as_ref().or(self.f_eps.as_ref()).map(|m| m.f(r))
    }

    /// F₁ jets read off the hyperbolic ball solution.
    pub fn f1_jet(&self, r: f64) -> [f64; 4] {
        w1_f_jet(&self.w1, self.n, self.q, r)
    }

    /// Largest relative gap between G and (n−1)²((ψ′/ψ)′ + (ψ′/ψ)²), the derivative of ψ′/ψ taken
    /// by a five-point stencil, over the C¹ stage away from its two kinks.
    pub fn g_identity_error(&self) -> Option<f64> {
        let m = self.f_eps.as_ref()?;
        let eps = self.eps?;
        let (n, q) = (self.n, self.q);
        let k2 = (n as f64 - 1.0).powi(2);
        let l = |r: f64| log_derivative_jet(n, q, m.f(r)).0;
        let kinks = [self.r_bar, self.r_bar + eps];
        let mut pts: Vec<f64> = (1..40).map(|i| self.r_bar * (0.1 + 0.9 * i as f64 / 40.0)).collect();
        pts.extend((1..40).map(|i| self.r_bar + eps * i as f64 / 40.0));
        pts.extend(log_grid(self.r_bar + 1.5 * eps, 1e3, 60));
        let worst = pts
            .into_iter()
            .filter(|r| kinks.iter().all(|k| (r - k).abs() > 1e-3 * eps))
            .map(|r| {
                let d = 2e-4 * eps.min(r);
                let dl = (8.0 * (l(r + d) - l(r - d)) - (l(r + 2.0 * d) - l(r - 2.0 * d))) / (12.0 * d);
                let direct = k2 * (dl + l(r) * l(r));
                (m.g(r) - direct).abs() / direct.abs()
            })
            .fold(0.0, f64::max);
        Some(worst)
    }

    /// Largest |u_final − u_eps| outside 2·width of both kinks.
    pub fn locality_gap(&self) -> Option<f64> {
        let (fe, ff) = (self.f_eps.as_ref()?, self.f_final.as_ref()?);
        let h = self.width?;
        let kinks = [self.r_bar, self.r_bar + self.eps?];
        let mut pts: Vec<f64> = ff.nodes.clone();
        pts.extend(log_grid(1e-3, 1e4, 400));
        Some(
            pts.into_iter()
                .filter(|r| kinks.iter().all(|k| (r - k).abs() > 2.0 * h))
                .map(|r| (ff.u(r)[0] - fe.u(r)[0]).abs())
                .fold(0.0, f64::max),
        )
    }

    fn meta(&self) -> serde_json::Value {
        let kappa_tail = |p: &Option<ModelFunction>| p.as_ref().and_then(|m| m.asymptotics()).map(|a| a.kappa);
        json!({
            "stage": self.stage,
            "n": self.n,
            "alpha": self.alpha,
            "q": self.q,
            "r_tilde": self.r_tilde,
            "r_bar": self.r_bar,
            "kappa": self.kappa,
            "kappa_eps": kappa_tail(&self.psi_eps),
            "kappa_final": kappa_tail(&self.psi_final),
            "c": self.c,
            "u0": self.u0,
            "A": self.coeffs.a,
            "B": self.coeffs.b,
            "C": self.coeffs.c,
            "A_tilde": self.coeffs.a_tilde,
            "eps": self.eps,
            "width": self.width,
            "K": self.k_conv,
            "tangency": self.tangency,
            "final_checks": self.final_checks,
        })
    }

    /// Writes psi.csv (r, psi, dpsi, d2psi), u.csv (r, u, du) and meta.json for the current stage.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let grid: Vec<f64> = match self.f_final.as_ref().or(self.f_eps.as_ref()) {
            Some(m) => m.table_grid().into_iter().filter(|&r| r <= 1e4).collect(),
            None => std::iter::once(0.0).chain(log_grid(1e-4, 1e4, 1601)).collect(),
        };
        let mut w = csv::Writer::from_path(dir.join("psi.csv"))?;
        w.write_record(["r", "psi", "dpsi", "d2psi"])?;
        for &r in &grid {
            let [p, dp, ddp] = self.psi().eval(r);
            w.write_record([fmt(r), fmt(p), fmt(dp), fmt(ddp)])?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("u.csv"))?;
        w.write_record(["r", "u", "du"])?;
        for &r in &grid {
            let [u, du, _] = self.u(r.max(1e-8));
            w.write_record([fmt(r), fmt(u), fmt(du)])?;
        }
        w.flush()?;
        std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&self.meta())?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_constants() {
        assert!((w2_constant(3, 2.0, 2.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((w2_constant(2, 3.0, 3.0).unwrap() - 1.0).abs() < 1e-15);
        let near = w2_constant(3, 2.0, 5.0 / 3.0 + 1e-6).unwrap();
        assert!(near > 0.0 && near < 1e-5);
        assert!(w2_constant(3, 2.0, 5.0 / 3.0).is_err());
        let t = w2_tail(3, 2.0, 2.0, -0.7).unwrap();
        assert!(t.residual(3.3) < 1e-14);
    }

    #[test]
    fn g_matches_flat_quadratic() {
        // u = c r^{-2/(q−1)} on ψ = r^α: F = r²/c^{q−1} and ψ″/ψ = α(α−1)/r²
        let (n, q, alpha) = (3, 2.0, 2.0);
        let c = w2_constant(n, alpha, q).unwrap();
        let r = 1.7;
        let a = 1.0 / c.powf(q - 1.0);
        let g = g_functional(n, q, [a * r * r, 2.0 * a * r, 2.0 * a, 0.0]);
        assert!((g / (4.0 * alpha * (alpha - 1.0) / (r * r)) - 1.0).abs() < 1e-13);
    }
}
