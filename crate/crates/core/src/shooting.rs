//! Radial Cauchy problem from the pole, first-zero detection and decay fits.

use crate::error::{invalid, precondition, Error, Result};
use crate::fit;
use crate::manifold::{log_grid, ModelFunction};
use crate::ode::{self, Control, End, Step};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::Path;

/// −u″ − (n−1)(ψ′/ψ)u′ = |u|^{q−1}u with u(0) = a, u′(0) = 0.
#[derive(Debug, Clone)]
pub struct CauchyProblem {
    pub psi: ModelFunction,
    pub n: u32,
    pub q: f64,
    pub a: f64,
}

impl CauchyProblem {
    pub fn new(psi: ModelFunction, n: u32, q: f64, a: f64) -> Result<CauchyProblem> {
        if n < 2 {
            return Err(invalid(format!("dimension must be at least 2, got {n}")));
        }
        if !(q > 1.0) || !q.is_finite() {
            return Err(invalid(format!("q must exceed 1, got {q}")));
        }
        if !(a > 0.0) || !a.is_finite() {
            return Err(invalid(format!("initial value must be positive, got {a}")));
        }
        Ok(CauchyProblem { psi, n, q, a })
    }

    /// Same manifold and exponent, different initial value.
    pub fn with_a(&self, a: f64) -> Result<CauchyProblem> {
        CauchyProblem::new(self.psi.clone(), self.n, self.q, a)
    }

    pub(crate) fn rhs(&self) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] + '_ {
        let k = self.n as f64 - 1.0;
        let q = self.q;
        move |r: f64, y: &[f64; 2]| {
            let u = y[0];
            [y[1], -k * self.psi.log_derivative(r) * y[1] - u.abs().powf(q - 1.0) * u]
        }
    }

    /// Two-term series (u, u′) at a small radius.
    pub fn series(&self, eps: f64) -> [f64; 2] {
        let nf = self.n as f64;
        let aq = self.a.powf(self.q);
        [self.a - aq * eps * eps / (2.0 * nf), -aq * eps / nf]
    }

    fn summary(&self) -> serde_json::Value {
        json!({
            "family": self.psi.family().name(),
            "params": self.psi.params(),
            "n": self.n,
            "q": self.q,
            "a": self.a,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    FirstZero { rho: f64 },
    ReachedRMax { r: f64 },
    BlowUp { r_stop: f64 },
    StepUnderflow { r_stop: f64 },
}

impl Event {
    pub fn first_zero(&self) -> Option<f64> {
        match *self {
            Event::FirstZero { rho } => Some(rho),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootOptions {
    pub r_max: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Starting radius for the series.
    pub eps0: f64,
    /// Keep integrating |u|^{q−1}u after sign changes instead of stopping at the first zero.
    pub continue_past_zero: bool,
    pub blow_up: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for ShootOptions {
    fn default() -> Self {
        ShootOptions {
            r_max: 50.0,
            rtol: 1e-10,
            atol: 1e-12,
            eps0: 1e-6,
            continue_past_zero: false,
            blow_up: 1e12,
            h_min: 1e-14,
            max_steps: 2_000_000,
        }
    }
}

impl ShootOptions {
    pub fn new(r_max: f64, rtol: f64, atol: f64) -> ShootOptions {
        ShootOptions { r_max, rtol, atol, ..ShootOptions::default() }
    }
}

/// A solved Cauchy problem: accepted-step samples plus the dense output of every step.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub event: Event,
    pub problem: CauchyProblem,
    /// All refined sign changes (only one unless integration continued past zeros).
    pub zeros: Vec<f64>,
    options: ShootOptions,
    steps: Vec<Step<2>>,
}

/// Shorthand for [`integrate`] with default start radius and stop-at-first-zero.
pub fn integrate_cauchy(problem: &CauchyProblem, r_max: f64, rtol: f64, atol: f64) -> Result<Trajectory> {
    integrate(problem, &ShootOptions::new(r_max, rtol, atol))
}

pub fn integrate(problem: &CauchyProblem, o: &ShootOptions) -> Result<Trajectory> {
    if !(o.rtol > 0.0 && o.atol > 0.0) {
        return Err(invalid("tolerances must be positive"));
    }
    if !(o.eps0 > 0.0) {
        return Err(invalid("series start radius must be positive"));
    }
    if !(o.r_max > o.eps0) {
        return Err(invalid(format!("r_max = {} must exceed the start radius {}", o.r_max, o.eps0)));
    }
    let f = problem.rhs();
    let y0 = problem.series(o.eps0);
    let opts = ode::Options {
        rtol: o.rtol,
        atol: o.atol,
        h0: None,
        h_min: o.h_min,
        h_max: f64::INFINITY,
        max_steps: o.max_steps,
    };
    let mut r = vec![o.eps0];
    let mut u = vec![y0[0]];
    let mut du = vec![y0[1]];
    let mut steps: Vec<Step<2>> = Vec::new();
    let mut zeros = Vec::new();
    let mut event = None;
    let end = ode::integrate(&f, o.eps0, y0, o.r_max, &opts, |s| {
        let mut st = s.clone();
        if st.y0[0] != 0.0 && st.y0[0].signum() != st.y1[0].signum() || st.y1[0] == 0.0 && st.y0[0] != 0.0 {
            let rho = refine_zero(&f, &st);
            zeros.push(rho);
            if !o.continue_past_zero {
                st = truncate_step(&f, &st, rho);
                steps.push(st);
                r.push(rho);
                u.push(0.0);
                du.push(st.y1[1]);
                event = Some(Event::FirstZero { rho });
                return Control::Stop;
            }
        }
        steps.push(st);
        r.push(st.t1());
        u.push(st.y1[0]);
        du.push(st.y1[1]);
        let big = st.y1[0].abs().max(st.y1[1].abs());
        if !(big <= o.blow_up) {
            event = Some(Event::BlowUp { r_stop: st.t1() });
            return Control::Stop;
        }
        Control::Continue
    })?;
    let event = match (event, end) {
        (Some(e), _) => e,
        (None, End::Reached) => Event::ReachedRMax { r: o.r_max },
        (None, End::Stopped(t)) => Event::ReachedRMax { r: t },
        (None, End::StepUnderflow(t)) | (None, End::StepBudget(t)) => Event::StepUnderflow { r_stop: t },
    };
    Ok(Trajectory { r, u, du, event, problem: problem.clone(), zeros, options: *o, steps })
}

/// Bracketed Illinois iteration on the dense output, then Newton on fresh single steps.
fn refine_zero<F>(f: &F, s: &Step<2>) -> f64
where
    F: Fn(f64, &[f64; 2]) -> [f64; 2],
{
    let (mut lo, mut hi) = (s.t0, s.t1());
    let (mut flo, mut fhi) = (s.y0[0], s.y1[0]);
    if fhi == 0.0 {
        return hi;
    }
    let mut side = 0i8;
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
        let mut x = hi - fhi * (hi - lo) / (fhi - flo);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = s.eval(x)[0];
        if fx == 0.0 {
            lo = x;
            hi = x;
            break;
        }
        if fx.signum() == fhi.signum() {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        } else {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        }
    }
    let mut rho = 0.5 * (lo + hi);
    // the dense interpolant is fourth order; a direct step to ρ is fifth order
    for _ in 0..3 {
        let y = ode::single_step(f, s.t0, &s.y0, rho - s.t0);
        if y[1] == 0.0 {
            break;
        }
        let next = rho - y[0] / y[1];
        if !(next >= s.t0 && next <= s.t1()) || (next - rho).abs() > 1e-6 * s.h {
            break;
        }
        rho = next;
    }
    rho
}

fn truncate_step<F>(f: &F, s: &Step<2>, rho: f64) -> Step<2>
where
    F: Fn(f64, &[f64; 2]) -> [f64; 2],
{
    // keep the original interpolant; only the endpoint is moved
    let mut t = s.clone();
    let y = ode::single_step(f, s.t0, &s.y0, rho - s.t0);
    t.y1 = [0.0, y[1]];
    t
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn options(&self) -> &ShootOptions {
        &self.options
    }

    pub fn steps(&self) -> &[Step<2>] {
        &self.steps
    }

    pub fn r_end(&self) -> f64 {
        *self.r.last().unwrap()
    }

    pub fn eps0(&self) -> f64 {
        self.r[0]
    }

    /// (u, u′) at r from the dense output; below the start radius the series is used.
    pub fn eval(&self, r: f64) -> [f64; 2] {
        if r <= self.r[0] || self.steps.is_empty() {
            return self.problem.series(r);
        }
        let i = self.steps.partition_point(|s| s.t0 <= r).saturating_sub(1);
        let s = &self.steps[i];
        if r >= s.t0 + s.h && i + 1 == self.steps.len() {
            return [*self.u.last().unwrap(), *self.du.last().unwrap()];
        }
        s.eval(r.min(s.t0 + s.h))
    }

    /// Keeps only the first `len` samples; used to exercise guards.
    pub fn truncate(&self, len: usize) -> Trajectory {
        let len = len.min(self.r.len()).max(1);
        let mut t = self.clone();
        t.r.truncate(len);
        t.u.truncate(len);
        t.du.truncate(len);
        t.steps.truncate(len - 1);
        t
    }

    /// |u(ρ)| recomputed by one fresh step from the start of the last step, when a first zero was found.
    pub fn root_residual(&self) -> Option<f64> {
        let rho = self.event.first_zero()?;
        let s = self.steps.last()?;
        let f = self.problem.rhs();
        Some(ode::single_step(&f, s.t0, &s.y0, rho - s.t0)[0].abs())
    }

    /// ∫ g(r, u, u′) dr over the sampled range, eighth-order Gauss rule on every sample interval.
    pub fn integrate_along<G: Fn(f64, f64, f64) -> f64>(&self, g: G) -> f64 {
        self.r
            .windows(2)
            .map(|w| {
                crate::quad::gauss_legendre8(
                    |x| {
                        let [u, du] = self.eval(x);
                        g(x, u, du)
                    },
                    w[0],
                    w[1],
                )
            })
            .sum()
    }

    /// True when every sample with u > 0 past the start radius has u′ < 0.
    pub fn monotone_while_positive(&self) -> bool {
        self.r
            .iter()
            .zip(self.u.iter().zip(&self.du))
            .skip(1)
            .take_while(|(_, (u, _))| **u > 0.0)
            .all(|(_, (_, du))| *du < 0.0)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["r", "u", "du"])?;
        for i in 0..self.r.len() {
            w.write_record([fmt(self.r[i]), fmt(self.u[i]), fmt(self.du[i])])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn sidecar(&self) -> serde_json::Value {
        json!({
            "event": self.event,
            "zeros": self.zeros,
            "problem": self.problem.summary(),
            "tolerances": self.options,
        })
    }

    /// Writes `path` as CSV and the JSON sidecar next to it.
    pub fn export(&self, path: &Path) -> Result<()> {
        self.write_csv(path)?;
        std::fs::write(path.with_extension("json"), serde_json::to_string_pretty(&self.sidecar())?)?;
        Ok(())
    }
}

/// Round-trip float formatting shared by every CSV writer.
pub fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

/// Max normalized equation residual, with u″ from central differences of the dense u′.
pub fn residual(t: &Trajectory) -> Result<f64> {
    if t.r.len() < 5 || t.steps.len() < 4 {
        return Err(precondition(format!("residual needs at least 5 grid points, got {}", t.r.len())));
    }
    let p = &t.problem;
    let k = p.n as f64 - 1.0;
    let mut worst: f64 = 0.0;
    for s in &t.steps {
        let m = s.t0 + 0.5 * s.h;
        // Richardson-combined central differences at step size h/8 and h/16
        let d = |h: f64| (s.eval(m + h)[1] - s.eval(m - h)[1]) / (2.0 * h);
        let h = s.h / 8.0;
        let upp = (4.0 * d(0.5 * h) - d(h)) / 3.0;
        let [u, du] = s.eval(m);
        let res = upp + k * p.psi.log_derivative(m) * du + u.abs().powf(p.q - 1.0) * u;
        worst = worst.max(res.abs() / u.abs().powf(p.q).max(1.0));
    }
    Ok(worst)
}

/// First zero of u up to `r_max` at the default tolerances.
pub fn first_zero(problem: &CauchyProblem, r_max: f64) -> Result<Option<f64>> {
    first_zero_with(problem, &ShootOptions { r_max, ..ShootOptions::default() })
}

pub fn first_zero_with(problem: &CauchyProblem, o: &ShootOptions) -> Result<Option<f64>> {
    let o = ShootOptions { continue_past_zero: false, ..*o };
    Ok(integrate(problem, &o)?.event.first_zero())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent_u: f64,
    pub exponent_du: f64,
    pub window: (f64, f64),
    pub residual: f64,
}

/// Log-log slopes of u and |u′| over `window`, sampled from the dense output.
pub fn decay_fit(t: &Trajectory, window: (f64, f64)) -> Result<DecayFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(invalid(format!("decay window ({lo}, {hi}) is empty")));
    }
    if lo < t.eps0() || hi > t.r_end() {
        return Err(precondition(format!("window ({lo}, {hi}) leaves the trajectory range")));
    }
    let r = log_grid(lo, hi, 200);
    let (u, du): (Vec<f64>, Vec<f64>) = r.iter().map(|&x| t.eval(x)).map(|y| (y[0], y[1])).unzip();
    decay_fit_samples(&r, &u, &du, window)
}

/// Same as [`decay_fit`] on explicit samples; points outside the window are ignored.
pub fn decay_fit_samples(r: &[f64], u: &[f64], du: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(invalid(format!("decay window ({lo}, {hi}) is empty")));
    }
    let mut x = Vec::new();
    let mut yu = Vec::new();
    let mut yd = Vec::new();
    for i in 0..r.len() {
        if r[i] < lo || r[i] > hi {
            continue;
        }
        if !(u[i] > 0.0) || du[i] == 0.0 {
            return Err(Error::Precondition(format!("non-positive sample u({}) = {} in decay window", r[i], u[i])));
        }
        x.push(r[i]);
        yu.push(u[i]);
        yd.push(du[i].abs());
    }
    if x.len() < 2 {
        return Err(precondition("decay window holds fewer than two samples"));
    }
    let a = fit::loglog(&x, &yu);
    let b = fit::loglog(&x, &yd);
    Ok(DecayFit { exponent_u: a.slope, exponent_du: b.slope, window, residual: a.rms.max(b.rms) })
}
