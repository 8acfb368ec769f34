use super::{comparison_profile, param, Family, ModelFunction, Params, Shape};
use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub r_max: f64,
    pub tol: f64,
}

impl Default for Validation {
    fn default() -> Self {
        Validation { r_max: 100.0, tol: 1e-6 }
    }
}

/// Profile-definition file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub family: Family,
    #[serde(default)]
    pub params: Params,
    /// Name of f for `f_family` (arctan or tanh).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<String>,
    /// CSV file for `tabulated`, relative to the definition file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub validation: Validation,
}

impl ProfileSpec {
    pub fn new(family: Family) -> ProfileSpec {
        ProfileSpec { family, params: Params::new(), shape: None, path: None, validation: Validation::default() }
    }

    pub fn with(mut self, key: &str, value: f64) -> ProfileSpec {
        self.params.insert(key.to_string(), value);
        self
    }

    /// Builds and validates the model function.
    pub fn build(&self) -> Result<ModelFunction> {
        let p = &self.params;
        let m = match self.family {
            Family::Euclidean => ModelFunction::euclidean(),
            Family::Hyperbolic => ModelFunction::hyperbolic(),
            Family::ShiftedPower => ModelFunction::shifted_power(param(p, "alpha")?)?,
            Family::ArctanFamily => ModelFunction::arctan_family(param(p, "alpha")?)?,
            Family::FFamily => {
                let shape = Shape::parse(self.shape.as_deref().unwrap_or("tanh"))?;
                ModelFunction::f_family(param(p, "alpha")?, shape)?
            }
            Family::PiecewiseSinhPower => {
                ModelFunction::piecewise_sinh_power(param(p, "r_bar")?, param(p, "r_tilde")?, param(p, "alpha")?)?
            }
            Family::Comparison => comparison_profile(param(p, "Q")?, param(p, "r_o")?, param(p, "K")?)?,
            Family::Tabulated => {
                let path = self.path.as_ref().ok_or_else(|| invalid("tabulated profile needs a CSV path"))?;
                load_tabulated_csv(path)?
            }
        };
        m.validate(self.validation.r_max, self.validation.tol)?;
        Ok(m)
    }
}

/// Reads a profile-definition JSON file; tabulated paths resolve against its directory.
pub fn load_profile_file(path: &Path) -> Result<ModelFunction> {
    let text = std::fs::read_to_string(path)?;
    let mut spec: ProfileSpec = serde_json::from_str(&text)?;
    if let (Some(rel), Some(dir)) = (spec.path.clone(), path.parent()) {
        if rel.is_relative() {
            spec.path = Some(dir.join(rel));
        }
    }
    spec.build()
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    r: f64,
    psi: f64,
    dpsi: f64,
    ddpsi: f64,
}

pub fn load_tabulated_csv(path: &Path) -> Result<ModelFunction> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut r = Vec::new();
    let mut v = Vec::new();
    for row in rdr.deserialize() {
        let row: Row = row?;
        r.push(row.r);
        v.push([row.psi, row.dpsi, row.ddpsi]);
    }
    ModelFunction::tabulated(r, v)
}

/// Writes ψ, ψ′, ψ″ sampled on `grid`.
pub fn write_tabulated_csv(path: &Path, psi: &ModelFunction, grid: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for &r in grid {
        let [p, dp, ddp] = psi.eval(r);
        w.serialize(Row { r, psi: p, dpsi: dp, ddpsi: ddp })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip_and_build() {
        let spec = ProfileSpec::new(Family::ShiftedPower).with("alpha", 2.0);
        let text = serde_json::to_string(&spec).unwrap();
        let back: ProfileSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        assert!((back.build().unwrap().psi(1.0) - 1.5).abs() < 1e-14);
    }

    #[test]
    fn missing_parameter_is_input_error() {
        let e = ProfileSpec::new(Family::ShiftedPower).build().unwrap_err();
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn tabulated_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("psi.csv");
        let src = ModelFunction::shifted_power(2.0).unwrap();
        let mut grid = vec![0.0];
        grid.extend(super::super::log_grid(1e-3, 200.0, 600));
        write_tabulated_csv(&p, &src, &grid).unwrap();
        let tab = load_tabulated_csv(&p).unwrap();
        for r in [0.05, 1.3, 77.0] {
            assert!((tab.psi(r) / src.psi(r) - 1.0).abs() < 1e-9);
        }
        assert!((tab.alpha().unwrap() - 2.0).abs() < 0.05);
    }
}
