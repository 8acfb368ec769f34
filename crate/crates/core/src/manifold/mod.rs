//! Model functions ψ, their geometry, critical exponents and structural conditions.

mod conditions;
mod exponents;
mod families;
mod io;

pub use conditions::{check_hp4, check_hp5, log_grid, ConditionReport};
pub use exponents::{classify_regime, critical_exponents, Regime, RegimeLabel, Thresholds, VerdictRow};
pub use families::{comparison_profile, Shape, ShapeFunction, TabulatedRule};
pub use io::{load_profile_file, load_tabulated_csv, write_tabulated_csv, ProfileSpec, Validation};

use crate::error::{invalid, precondition, Result};
use crate::quad::{self, QuadTol};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// Family tag of a model function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Euclidean,
    Hyperbolic,
    ShiftedPower,
    ArctanFamily,
    FFamily,
    PiecewiseSinhPower,
    Comparison,
    Tabulated,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Euclidean => "euclidean",
            Family::Hyperbolic => "hyperbolic",
            Family::ShiftedPower => "shifted_power",
            Family::ArctanFamily => "arctan_family",
            Family::FFamily => "f_family",
            Family::PiecewiseSinhPower => "piecewise_sinh_power",
            Family::Comparison => "comparison",
            Family::Tabulated => "tabulated",
        }
    }

    pub fn parse(s: &str) -> Result<Family> {
        let f = match s {
            "euclidean" => Family::Euclidean,
            "hyperbolic" => Family::Hyperbolic,
            "shifted_power" => Family::ShiftedPower,
            "arctan_family" | "arctan" => Family::ArctanFamily,
            "f_family" => Family::FFamily,
            "piecewise_sinh_power" => Family::PiecewiseSinhPower,
            "comparison" => Family::Comparison,
            "tabulated" => Family::Tabulated,
            _ => return Err(invalid(format!("unknown profile family '{s}'"))),
        };
        Ok(f)
    }
}

/// Power-law tail ψ(r) ≈ κ r^α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Asymptotics {
    pub alpha: f64,
    pub kappa: f64,
}

/// Evaluation rule for ψ and its first two derivatives.
pub trait Profile: Send + Sync + fmt::Debug {
    /// (ψ(r), ψ′(r), ψ″(r)) for r ≥ 0.
    fn eval(&self, r: f64) -> [f64; 3];

    /// ψ′/ψ for r > 0.
    fn log_derivative(&self, r: f64) -> f64 {
        let e = self.eval(r);
        e[1] / e[0]
    }

    /// ψ″/ψ for r > 0.
    fn curvature_ratio(&self, r: f64) -> f64 {
        let e = self.eval(r);
        e[2] / e[0]
    }
}

pub type Params = BTreeMap<String, f64>;

/// A radial weight profile together with its family tag and declared tail.
#[derive(Clone)]
pub struct ModelFunction {
    family: Family,
    params: Params,
    asymptotics: Option<Asymptotics>,
    rule: Arc<dyn Profile>,
}

impl fmt::Debug for ModelFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelFunction")
            .field("family", &self.family)
            .field("params", &self.params)
            .field("asymptotics", &self.asymptotics)
            .finish()
    }
}

pub(crate) fn param(params: &Params, key: &str) -> Result<f64> {
    params.get(key).copied().ok_or_else(|| invalid(format!("missing parameter '{key}'")))
}

impl ModelFunction {
    /// Wraps an arbitrary rule; invariants are checked on a default validation grid.
    pub fn from_rule(
        family: Family,
        params: Params,
        asymptotics: Option<Asymptotics>,
        rule: Arc<dyn Profile>,
    ) -> Result<ModelFunction> {
        let m = ModelFunction { family, params, asymptotics, rule };
        m.validate(100.0, 1e-6)?;
        Ok(m)
    }

    pub(crate) fn unchecked(
        family: Family,
        params: Params,
        asymptotics: Option<Asymptotics>,
        rule: Arc<dyn Profile>,
    ) -> ModelFunction {
        ModelFunction { family, params, asymptotics, rule }
    }

    pub fn euclidean() -> ModelFunction {
        families::euclidean()
    }

    pub fn hyperbolic() -> ModelFunction {
        families::hyperbolic()
    }

    pub fn shifted_power(alpha: f64) -> Result<ModelFunction> {
        families::shifted_power(alpha)
    }

    pub fn arctan_family(alpha: f64) -> Result<ModelFunction> {
        families::f_family(alpha, Shape::Arctan, Family::ArctanFamily)
    }

    pub fn f_family(alpha: f64, shape: Shape) -> Result<ModelFunction> {
        families::f_family(alpha, shape, Family::FFamily)
    }

    pub fn piecewise_sinh_power(r_bar: f64, r_tilde: f64, alpha: f64) -> Result<ModelFunction> {
        families::piecewise_sinh_power(r_bar, r_tilde, alpha)
    }

    pub fn tabulated(r: Vec<f64>, values: Vec<[f64; 3]>) -> Result<ModelFunction> {
        families::tabulated(r, values)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn asymptotics(&self) -> Option<Asymptotics> {
        self.asymptotics
    }

    pub fn alpha(&self) -> Option<f64> {
        self.asymptotics.map(|a| a.alpha)
    }

    pub fn rule(&self) -> &Arc<dyn Profile> {
        &self.rule
    }

    pub fn eval(&self, r: f64) -> [f64; 3] {
        self.rule.eval(r)
    }

    pub fn psi(&self, r: f64) -> f64 {
        self.rule.eval(r)[0]
    }

    pub fn log_derivative(&self, r: f64) -> f64 {
        self.rule.log_derivative(r)
    }

    pub fn curvature_ratio(&self, r: f64) -> f64 {
        self.rule.curvature_ratio(r)
    }

    /// Checks ψ(0) = 0, ψ′(0) = 1 and positivity on a log grid up to `r_max`.
    pub fn validate(&self, r_max: f64, tol: f64) -> Result<()> {
        let e0 = self.eval(0.0);
        if e0[0].abs() > tol || (e0[1] - 1.0).abs() > tol {
            return Err(invalid(format!(
                "{}: ψ(0) = {}, ψ′(0) = {} violate the pole conditions",
                self.family.name(),
                e0[0],
                e0[1]
            )));
        }
        for r in log_grid(1e-4, r_max, 256) {
            let p = self.psi(r);
            if !(p > 0.0) || !p.is_finite() {
                return Err(invalid(format!("{}: ψ({r}) = {p} is not positive", self.family.name())));
            }
        }
        Ok(())
    }

    /// Local tail exponent r ψ′(r)/ψ(r).
    pub fn tail_exponent(&self, r: f64) -> f64 {
        r * self.log_derivative(r)
    }
}

/// Sectional and Ricci curvature in the radial direction.
pub fn curvature(psi: &ModelFunction, n: u32, r: f64) -> Result<(f64, f64)> {
    if !(r > 0.0) {
        return Err(precondition("curvature is evaluated only for r > 0"));
    }
    let sec = -psi.curvature_ratio(r);
    Ok((sec, (n as f64 - 1.0) * sec))
}

/// ∫₀^R ψ^{n−1} dr.
pub fn volume(psi: &ModelFunction, n: u32, r: f64) -> Result<f64> {
    volume_tol(psi, n, r, 1e-10)
}

pub fn volume_tol(psi: &ModelFunction, n: u32, r: f64, rtol: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(precondition("volume radius must be positive"));
    }
    let k = n as i32 - 1;
    let tol = QuadTol { rel: rtol, ..QuadTol::default() };
    // split on a geometric grid so fast-growing weights are resolved
    let mut edges = vec![0.0];
    let mut x = r.min(1.0);
    edges.push(x);
    while x < r {
        x = (2.0 * x).min(r);
        edges.push(x);
    }
    let mut acc = 0.0;
    for w in edges.windows(2) {
        acc += quad::integrate(|s| psi.psi(s).powi(k), w[0], w[1], tol)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_and_hyperbolic_values() {
        let e = ModelFunction::euclidean();
        assert_eq!(e.eval(2.5), [2.5, 1.0, 0.0]);
        let h = ModelFunction::hyperbolic();
        assert!((h.psi(1.0) - 1.175_201_193_643_801_4).abs() < 1e-14);
    }

    #[test]
    fn shifted_power_value() {
        let s = ModelFunction::shifted_power(2.0).unwrap();
        assert!((s.psi(1.0) - 1.5).abs() < 1e-14);
        let (sec, ric) = curvature(&s, 3, 1.0).unwrap();
        assert!((sec + 2.0 / 3.0).abs() < 1e-14);
        assert!((ric + 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn curvature_refuses_pole() {
        assert!(curvature(&ModelFunction::hyperbolic(), 3, 0.0).is_err());
        let (s, _) = curvature(&ModelFunction::hyperbolic(), 3, 2.0).unwrap();
        assert!((s + 1.0).abs() < 1e-14);
    }

    #[test]
    fn volume_closed_forms() {
        assert!((volume(&ModelFunction::euclidean(), 3, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-13);
        let v = volume(&ModelFunction::hyperbolic(), 2, 1.0).unwrap();
        assert!((v - (1f64.cosh() - 1.0)).abs() < 1e-12);
        // ((1+r)^2 - 1)^2 / 4 = (r^2 + 2r)^2 / 4, antiderivative r^5/20 + r^4/4 + r^3/3
        let s = ModelFunction::shifted_power(2.0).unwrap();
        let r: f64 = 2.0;
        let exact = r.powi(5) / 20.0 + r.powi(4) / 4.0 + r.powi(3) / 3.0;
        assert!((volume(&s, 3, r).unwrap() / exact - 1.0).abs() < 1e-11);
    }
}
