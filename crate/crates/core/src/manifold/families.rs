use super::{Asymptotics, Family, ModelFunction, Params, Profile};
use crate::error::{invalid, precondition, Error, Result};
use crate::fit;
use crate::interp::{self, QuinticTable};
use crate::ode::{self, Control, Options};
use crate::quad::{self, QuadTol};
use std::fmt;
use std::sync::Arc;

fn params(pairs: &[(&str, f64)]) -> Params {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

#[derive(Debug)]
struct Flat;

impl Profile for Flat {
    fn eval(&self, r: f64) -> [f64; 3] {
        [r, 1.0, 0.0]
    }
    fn log_derivative(&self, r: f64) -> f64 {
        1.0 / r
    }
    fn curvature_ratio(&self, _r: f64) -> f64 {
        0.0
    }
}

pub(super) fn euclidean() -> ModelFunction {
    ModelFunction::unchecked(Family::Euclidean, Params::new(), Some(Asymptotics { alpha: 1.0, kappa: 1.0 }), Arc::new(Flat))
}

#[derive(Debug)]
struct Sinh;

impl Profile for Sinh {
    fn eval(&self, r: f64) -> [f64; 3] {
        let s = r.sinh();
        [s, r.cosh(), s]
    }
    fn log_derivative(&self, r: f64) -> f64 {
        1.0 / r.tanh()
    }
    fn curvature_ratio(&self, _r: f64) -> f64 {
        1.0
    }
}

pub(super) fn hyperbolic() -> ModelFunction {
    ModelFunction::unchecked(Family::Hyperbolic, Params::new(), None, Arc::new(Sinh))
}

/// ψ(r) = ((1+r)^α − 1)/α.
#[derive(Debug)]
struct ShiftedPower {
    alpha: f64,
}

impl ShiftedPower {
    fn numer(&self, r: f64) -> f64 {
        (self.alpha * r.ln_1p()).exp_m1()
    }
}

impl Profile for ShiftedPower {
    fn eval(&self, r: f64) -> [f64; 3] {
        let a = self.alpha;
        let p = (1.0 + r).powf(a - 2.0);
        [self.numer(r) / a, p * (1.0 + r), (a - 1.0) * p]
    }
    fn log_derivative(&self, r: f64) -> f64 {
        self.alpha * (1.0 + r).powf(self.alpha - 1.0) / self.numer(r)
    }
    fn curvature_ratio(&self, r: f64) -> f64 {
        let a = self.alpha;
        a * (a - 1.0) * (1.0 + r).powf(a - 2.0) / self.numer(r)
    }
}

pub(super) fn shifted_power(alpha: f64) -> Result<ModelFunction> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(invalid(format!("shifted_power needs α > 1, got {alpha}")));
    }
    Ok(ModelFunction::unchecked(
        Family::ShiftedPower,
        params(&[("alpha", alpha)]),
        Some(Asymptotics { alpha, kappa: 1.0 / alpha }),
        Arc::new(ShiftedPower { alpha }),
    ))
}

/// The function f entering the generalized exponent integral.
pub trait ShapeFunction: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    fn f(&self, s: f64) -> f64;
    /// 1 − f′(s), computed without cancellation.
    fn one_minus_df(&self, s: f64) -> f64;
    /// s − f(s), computed without cancellation.
    fn defect(&self, s: f64) -> f64;
}

/// Bundled choices of f: odd, f′(0) = 1, 0 ≤ f′ ≤ 1, bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Arctan,
    Tanh,
}

impl Shape {
    pub fn parse(s: &str) -> Result<Shape> {
        match s {
            "arctan" => Ok(Shape::Arctan),
            "tanh" => Ok(Shape::Tanh),
            _ => Err(invalid(format!("unknown shape function '{s}' (expected arctan or tanh)"))),
        }
    }
}

impl ShapeFunction for Shape {
    fn name(&self) -> &'static str {
        match self {
            Shape::Arctan => "arctan",
            Shape::Tanh => "tanh",
        }
    }

    fn f(&self, s: f64) -> f64 {
        match self {
            Shape::Arctan => s.atan(),
            Shape::Tanh => s.tanh(),
        }
    }

    fn one_minus_df(&self, s: f64) -> f64 {
        match self {
            Shape::Arctan => s * s / (1.0 + s * s),
            Shape::Tanh => s.tanh().powi(2),
        }
    }

    fn defect(&self, s: f64) -> f64 {
        let s2 = s * s;
        match self {
            Shape::Arctan if s < 0.05 => s * s2 * (1.0 / 3.0 - s2 * (1.0 / 5.0 - s2 * (1.0 / 7.0 - s2 / 9.0))),
            Shape::Tanh if s < 0.05 => {
                s * s2 * (1.0 / 3.0 - s2 * (2.0 / 15.0 - s2 * (17.0 / 315.0 - s2 * 62.0 / 2835.0)))
            }
            _ => s - self.f(s),
        }
    }
}

/// ψ(r) = r·exp[(α−1)E(r)], E(r) = ∫₀^r (s − f)/(s(s + (α−1)f)) ds.
struct ExponentProfile {
    alpha: f64,
    shape: Arc<dyn ShapeFunction>,
    nodes: Vec<f64>,
    e: Vec<f64>,
}

impl fmt::Debug for ExponentProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExponentProfile").field("alpha", &self.alpha).field("shape", &self.shape.name()).finish()
    }
}

impl ExponentProfile {
    fn integrand(alpha: f64, shape: &dyn ShapeFunction, s: f64) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        shape.defect(s) / (s * (s + (alpha - 1.0) * shape.f(s)))
    }

    fn build(alpha: f64, shape: Arc<dyn ShapeFunction>) -> Result<ExponentProfile> {
        let mut nodes = vec![0.0];
        // log-spaced cache on [1e-4, 1e4]
        let per_decade = 200;
        let decades = 8;
        for k in 0..=per_decade * decades {
            nodes.push(1e-4 * 10f64.powf(k as f64 / per_decade as f64));
        }
        let h = |s: f64| Self::integrand(alpha, shape.as_ref(), s);
        let mut e = Vec::with_capacity(nodes.len());
        e.push(0.0);
        let mut acc = 0.0;
        for w in nodes.windows(2) {
            let scale = (w[1] - w[0]) * h(w[1]).abs().max(1e-300);
            acc += quad::adaptive_simpson(&h, w[0], w[1], 1e-12 * scale + 1e-18, 40)?;
            e.push(acc);
        }
        Ok(ExponentProfile { alpha, shape, nodes, e })
    }

    fn exponent(&self, r: f64) -> f64 {
        let h = |s: f64| Self::integrand(self.alpha, self.shape.as_ref(), s);
        let end = *self.nodes.last().unwrap();
        if r <= end {
            let i = interp::locate(&self.nodes, r);
            let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
            interp::cubic(x0, x1, self.e[i], self.e[i + 1], h(x0), h(x1), r).0
        } else {
            // beyond the cache: integrate directly on log-spaced panels
            let mut acc = *self.e.last().unwrap();
            let mut a = end;
            while a < r {
                let b = (2.0 * a).min(r);
                acc += quad::gauss_legendre8(h, a, b);
                a = b;
            }
            acc
        }
    }

    /// lim (E(r) − ln r) as r → ∞.
    fn log_offset(&self) -> Result<f64> {
        let end = *self.nodes.last().unwrap();
        let (a, s) = (self.alpha, &self.shape);
        // H − 1/s = −α f/(s(s + (α−1)f)), integrated with s = end/t
        let tail = quad::integrate(
            |t: f64| {
                if t == 0.0 {
                    return 0.0;
                }
                let x = end / t;
                -a * s.f(x) / (x * (x + (a - 1.0) * s.f(x))) * end / (t * t)
            },
            0.0,
            1.0,
            QuadTol::default(),
        )?;
        Ok(self.e.last().unwrap() - end.ln() + tail)
    }

    fn denom(&self, r: f64) -> f64 {
        r + (self.alpha - 1.0) * self.shape.f(r)
    }
}

impl Profile for ExponentProfile {
    fn eval(&self, r: f64) -> [f64; 3] {
        if r == 0.0 {
            return [0.0, 1.0, 0.0];
        }
        let psi = r * ((self.alpha - 1.0) * self.exponent(r)).exp();
        [psi, psi * self.log_derivative(r), psi * self.curvature_ratio(r)]
    }

    fn log_derivative(&self, r: f64) -> f64 {
        self.alpha / self.denom(r)
    }

    fn curvature_ratio(&self, r: f64) -> f64 {
        let d = self.denom(r);
        self.alpha * (self.alpha - 1.0) * self.shape.one_minus_df(r) / (d * d)
    }
}

pub(super) fn f_family(alpha: f64, shape: Shape, family: Family) -> Result<ModelFunction> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(invalid(format!("{} needs α > 1, got {alpha}", family.name())));
    }
    let prof = ExponentProfile::build(alpha, Arc::new(shape))?;
    let kappa = ((alpha - 1.0) * prof.log_offset()?).exp();
    let mut p = params(&[("alpha", alpha)]);
    if family == Family::FFamily {
        p.insert(
            "shape".into(),
            match shape {
                Shape::Arctan => 0.0,
                Shape::Tanh => 1.0,
            },
        );
    }
    ModelFunction::from_rule(family, p, Some(Asymptotics { alpha, kappa }), Arc::new(prof))
}

/// sinh on [0, r̄], κ(r − r̃)^α beyond.
#[derive(Debug)]
struct SinhPower {
    r_bar: f64,
    r_tilde: f64,
    alpha: f64,
    kappa: f64,
}

impl Profile for SinhPower {
    fn eval(&self, r: f64) -> [f64; 3] {
        if r <= self.r_bar {
            let s = r.sinh();
            return [s, r.cosh(), s];
        }
        let d = r - self.r_tilde;
        let a = self.alpha;
        let p = self.kappa * d.powf(a);
        [p, a * p / d, a * (a - 1.0) * p / (d * d)]
    }
}

pub(super) fn piecewise_sinh_power(r_bar: f64, r_tilde: f64, alpha: f64) -> Result<ModelFunction> {
    if !(r_bar > 0.0 && r_tilde < r_bar && alpha > 1.0) {
        return Err(invalid("piecewise_sinh_power needs r̄ > 0, r̃ < r̄ and α > 1"));
    }
    let kappa = r_bar.sinh() / (r_bar - r_tilde).powf(alpha);
    ModelFunction::from_rule(
        Family::PiecewiseSinhPower,
        params(&[("r_bar", r_bar), ("r_tilde", r_tilde), ("alpha", alpha), ("kappa", kappa)]),
        Some(Asymptotics { alpha, kappa }),
        Arc::new(SinhPower { r_bar, r_tilde, alpha, kappa }),
    )
}

/// Quintic Hermite table with a power-law continuation past the last node.
#[derive(Debug)]
pub struct TabulatedRule {
    table: QuinticTable,
}

impl TabulatedRule {
    pub fn new(r: Vec<f64>, values: Vec<[f64; 3]>) -> Result<TabulatedRule> {
        if r.len() < 4 {
            return Err(invalid("tabulated profile needs at least 4 nodes"));
        }
        if r[0] != 0.0 {
            return Err(invalid("tabulated profile must start at r = 0"));
        }
        if r.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("tabulated radii must be strictly increasing"));
        }
        Ok(TabulatedRule { table: QuinticTable::new(r, values) })
    }

    pub fn nodes(&self) -> (&[f64], &[[f64; 3]]) {
        (&self.table.x, &self.table.y)
    }
}

impl Profile for TabulatedRule {
    fn eval(&self, r: f64) -> [f64; 3] {
        let end = self.table.x_max();
        if r <= end {
            return self.table.eval(r);
        }
        let last = *self.table.y.last().unwrap();
        let p = end * last[1] / last[0];
        let v = last[0] * (r / end).powf(p);
        [v, p * v / r, p * (p - 1.0) * v / (r * r)]
    }
}

/// Log-log regression of ψ over the last decade of a grid.
pub(crate) fn estimate_tail(r: &[f64], psi: &[f64]) -> Option<Asymptotics> {
    let end = *r.last()?;
    let lo = if end / 10.0 > r[1] { end / 10.0 } else { end.sqrt() };
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        r.iter().zip(psi).filter(|(x, _)| **x >= lo && **x > 0.0).map(|(x, y)| (*x, *y)).unzip();
    if xs.len() < 3 {
        return None;
    }
    let l = fit::loglog(&xs, &ys);
    Some(Asymptotics { alpha: l.slope, kappa: l.intercept.exp() })
}

pub(super) fn tabulated(r: Vec<f64>, values: Vec<[f64; 3]>) -> Result<ModelFunction> {
    let psi: Vec<f64> = values.iter().map(|v| v[0]).collect();
    let asym = estimate_tail(&r, &psi);
    let rule = TabulatedRule::new(r, values)?;
    let mut p = Params::new();
    if let Some(a) = asym {
        p.insert("alpha".into(), a.alpha);
        p.insert("kappa".into(), a.kappa);
    }
    ModelFunction::from_rule(Family::Tabulated, p, asym.filter(|a| a.alpha > 1.0), Arc::new(rule))
}

/// Solution of ψ″ = Gψ: integrated table up to 2r_o, exact power tail beyond.
#[derive(Debug)]
struct ComparisonRule {
    table: QuinticTable,
    r_join: f64,
    m: [f64; 2],
    a: [f64; 2],
}

impl Profile for ComparisonRule {
    fn eval(&self, r: f64) -> [f64; 3] {
        if r <= self.r_join {
            return self.table.eval(r);
        }
        let [m1, m2] = self.m;
        let [a1, a2] = self.a;
        let t1 = a1 * r.powf(m1);
        let t2 = a2 * r.powf(m2);
        [t1 + t2, (m1 * t1 + m2 * t2) / r, (m1 * (m1 - 1.0) * t1 + m2 * (m2 - 1.0) * t2) / (r * r)]
    }
}

/// Convex comparison profile with Q/r² tail curvature.
pub fn comparison_profile(q_tail: f64, r_o: f64, k_core: f64) -> Result<ModelFunction> {
    if !(q_tail > 0.0 && r_o > 0.0) {
        return Err(precondition("comparison profile needs Q > 0 and r_o > 0"));
    }
    if k_core < q_tail / (r_o * r_o) {
        return Err(precondition(format!("K = {k_core} must be at least Q/r_o² = {}", q_tail / (r_o * r_o))));
    }
    let g = move |r: f64| {
        if r <= r_o {
            k_core
        } else if r < 2.0 * r_o {
            q_tail / (4.0 * r_o.powi(3)) * (r - r_o) + k_core / r_o * (2.0 * r_o - r)
        } else {
            q_tail / (r * r)
        }
    };
    let rhs = |r: f64, y: &[f64; 2]| [y[1], g(r) * y[0]];
    let opts = Options { rtol: 1e-13, atol: 1e-16, h_max: r_o / 64.0, ..Options::default() };
    let mut xs = vec![0.0];
    let mut ys = vec![[0.0, 1.0, 0.0]];
    let mut y = [0.0, 1.0];
    for (a, b) in [(0.0, r_o), (r_o, 2.0 * r_o)] {
        let mut last = y;
        ode::integrate(rhs, a, y, b, &opts, |s| {
            let t = s.t1();
            xs.push(t);
            ys.push([s.y1[0], s.y1[1], g(t) * s.y1[0]]);
            last = s.y1;
            Control::Continue
        })?;
        y = last;
    }
    let r_join = 2.0 * r_o;
    let disc = (1.0 + 4.0 * q_tail).sqrt();
    let m = [(1.0 + disc) / 2.0, (1.0 - disc) / 2.0];
    // match value and slope at the join
    let (p, dp) = (y[0], y[1]);
    let det = r_join.powf(m[0]) * m[1] * r_join.powf(m[1] - 1.0) - r_join.powf(m[1]) * m[0] * r_join.powf(m[0] - 1.0);
    let a1 = (p * m[1] * r_join.powf(m[1] - 1.0) - r_join.powf(m[1]) * dp) / det;
    let a2 = (r_join.powf(m[0]) * dp - p * m[0] * r_join.powf(m[0] - 1.0)) / det;

    // validate the closed-form tail against continued integration
    let r_fit = 40.0 * r_o;
    let mut samples: Vec<(f64, f64)> = Vec::new();
    let tail_opts = Options { h_max: r_o / 4.0, ..opts };
    ode::integrate(rhs, r_join, y, r_fit, &tail_opts, |s| {
        samples.push((s.t1(), s.y1[0]));
        Control::Continue
    })?;
    let b1: Vec<f64> = samples.iter().map(|(r, _)| r.powf(m[0])).collect();
    let b2: Vec<f64> = samples.iter().map(|(r, _)| r.powf(m[1])).collect();
    let yv: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let (coef, residual) = fit::two_basis(&b1, &b2, &yv);
    if !(residual < 1e-6) {
        return Err(Error::Verification(format!("comparison tail fit residual {residual:e} exceeds 1e-6")));
    }
    let rule = ComparisonRule { table: QuinticTable::new(xs, ys), r_join, m, a: [a1, a2] };
    ModelFunction::from_rule(
        Family::Comparison,
        params(&[
            ("Q", q_tail),
            ("r_o", r_o),
            ("K", k_core),
            ("tail_exponent", m[0]),
            ("a1", coef[0]),
            ("a2", coef[1]),
            ("fit_residual", residual),
        ]),
        Some(Asymptotics { alpha: m[0], kappa: a1 }),
        Arc::new(rule),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arctan_family_log_derivative_identity() {
        // (ψ/ψ′)′ = 1/α + (α−1)/α f′ checked by central differences
        let m = f_family(2.0, Shape::Arctan, Family::ArctanFamily).unwrap();
        for r in [0.01f64, 0.5, 3.0, 40.0] {
            let h = 1e-4 * r.max(1.0);
            let q = |x: f64| 1.0 / m.log_derivative(x);
            let d = (q(r + h) - q(r - h)) / (2.0 * h);
            let expect = 0.5 + 0.5 / (1.0 + r * r);
            assert!((d - expect).abs() < 1e-7, "r={r}: {d} vs {expect}");
        }
    }

    #[test]
    fn arctan_family_psi_consistent_with_log_derivative() {
        let m = f_family(3.0, Shape::Arctan, Family::ArctanFamily).unwrap();
        for r in [0.2, 2.0, 30.0, 2e4] {
            let h = 1e-5 * r;
            let d = (m.psi(r + h).ln() - m.psi(r - h).ln()) / (2.0 * h);
            assert!((d / m.log_derivative(r) - 1.0).abs() < 1e-7, "r={r}");
        }
    }

    #[test]
    fn arctan_family_kappa_matches_tail() {
        let m = f_family(2.0, Shape::Arctan, Family::ArctanFamily).unwrap();
        let a = m.asymptotics().unwrap();
        let r = 1e7;
        // ψ/(κ r^α) → 1 with O(1/r) corrections
        assert!((m.psi(r) / (a.kappa * r * r) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn tanh_shape_is_valid_model() {
        let m = f_family(2.5, Shape::Tanh, Family::FFamily).unwrap();
        assert!(m.validate(1e3, 1e-8).is_ok());
        assert!((m.tail_exponent(1e6) - 2.5).abs() < 1e-4);
    }

    #[test]
    fn comparison_tail_exponents() {
        let m = comparison_profile(2.0, 1.0, 2.0).unwrap();
        assert!((m.params()["tail_exponent"] - 2.0).abs() < 1e-14);
        assert!(m.params()["a1"] > 0.0);
        assert!(m.params()["fit_residual"] < 1e-6);
        let m6 = comparison_profile(6.0, 1.0, 6.0).unwrap();
        assert!((m6.params()["tail_exponent"] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn comparison_rejects_small_core_curvature() {
        assert!(comparison_profile(2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn sinh_power_is_continuous() {
        let m = piecewise_sinh_power(0.5, -0.3, 2.0).unwrap();
        let a = m.eval(0.5 - 1e-12);
        let b = m.eval(0.5 + 1e-12);
        assert!((a[0] - b[0]).abs() < 1e-10);
    }
}
