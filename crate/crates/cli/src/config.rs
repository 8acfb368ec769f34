use clap::{Args, Parser, Subcommand};
use lane_emden::constructions::{glue, smooth_c1, smooth_cinf};
use lane_emden::manifold::{load_profile_file, ProfileSpec};
use lane_emden::shooting::ShootOptions;
use lane_emden::{Error, Family, ModelFunction, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "lelab", version, about = "Radial Lane-Emden experiments on model manifolds")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every command; a JSON config file may supply any of them.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalArgs {
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub rtol: Option<f64>,
    #[arg(long, global = true)]
    pub atol: Option<f64>,
    /// Integration range for shooting
    #[arg(long, global = true)]
    pub rmax: Option<f64>,
    /// Worker threads (default: logical cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Family name, profile-definition JSON file, or `glued`
    #[arg(long, global = true)]
    pub profile: Option<String>,
    /// Recorded in the manifest; every computation is deterministic
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub n: Option<u32>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub q: Option<f64>,
    /// Extra family parameter, e.g. --param r_o=1
    #[arg(long = "param", global = true, value_parser = parse_param)]
    #[serde(skip)]
    pub param_list: Vec<(String, f64)>,
    #[arg(skip)]
    pub params: BTreeMap<String, f64>,
    /// Shape for f_family (arctan or tanh)
    #[arg(long, global = true)]
    pub shape: Option<String>,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Command {
    /// Critical exponents and the regime of q
    Classify,
    /// Integrate the Cauchy problem from u(0) = a
    Shoot {
        #[arg(long)]
        a: f64,
    },
    /// Pohozaev function along the trajectory from u(0) = a
    Pohozaev {
        #[arg(long)]
        a: f64,
    },
    /// First-zero branch a -> rho(a) and its non-uniqueness witnesses
    Branch {
        #[arg(long)]
        a_min: Option<f64>,
        #[arg(long)]
        a_max: Option<f64>,
        #[arg(long, default_value_t = 64)]
        count: usize,
        /// Comma-separated radii for the I_R / A(R) claims table
        #[arg(long, value_delimiter = ',')]
        claims: Vec<f64>,
        #[arg(long, default_value_t = 400)]
        mesh: usize,
    },
    /// Positive solution in the ball of radius R
    Dirichlet {
        #[arg(long)]
        radius: f64,
        /// Heights lo:hi straddling R
        #[arg(long)]
        bracket: Option<String>,
    },
    /// Truncated Sobolev quotient I_R by Rayleigh minimization
    Sobolev {
        #[arg(long, value_delimiter = ',', required = true)]
        radii: Vec<f64>,
        #[arg(long, default_value_t = 400)]
        mesh: usize,
    },
    /// Kufner-Opic functional and embedding verdict
    Embed {
        #[arg(long)]
        p: f64,
    },
    /// Glued manifold carrying a global positive solution
    Glue {
        #[arg(long, value_enum, default_value_t = StageArg::Smooth)]
        stage: StageArg,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        width: Option<f64>,
    },
    /// Explicit supersolution A/(B+r^2)^{1/(q-1)}
    Supersol {
        #[arg(long)]
        eps: Option<f64>,
        /// Also verify the supersolution with A multiplied by this factor
        #[arg(long)]
        inflate: Option<f64>,
    },
    /// Shooting verdicts over a grid of (alpha, q, a)
    Sweep {
        /// lo:hi:step or lo:hi:logN
        #[arg(long)]
        alpha_range: Option<String>,
        #[arg(long)]
        q_range: String,
        #[arg(long)]
        a_range: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StageArg {
    Lipschitz,
    C1,
    Smooth,
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got '{s}'"))?;
    let v: f64 = v.parse().map_err(|_| format!("'{v}' is not a number"))?;
    Ok((k.to_string(), v))
}

fn input(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub out: PathBuf,
    pub rtol: f64,
    pub atol: f64,
    pub rmax: Option<f64>,
    pub threads: Option<usize>,
    pub profile: Option<String>,
    pub seed: u64,
    pub n: u32,
    pub alpha: Option<f64>,
    pub q: Option<f64>,
    pub params: BTreeMap<String, f64>,
    pub shape: Option<String>,
}

macro_rules! merge {
    ($flags:ident, $file:ident, $($f:ident),*) => {
        $( if $flags.$f.is_none() { $flags.$f = $file.$f.clone(); } )*
    };
}

impl GlobalArgs {
    /// Fills unset flags from the config file; flags always win.
    pub fn merged(mut self) -> Result<GlobalArgs> {
        let mut params = BTreeMap::new();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)?;
            let file: GlobalArgs = serde_json::from_str(&text)?;
            merge!(self, file, out, rtol, atol, rmax, threads, profile, seed, n, alpha, q, shape);
            params = file.params;
        }
        params.extend(self.param_list.drain(..));
        self.params = params;
        Ok(self)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

impl RunConfig {
    pub fn new(g: GlobalArgs, command: Command) -> Result<RunConfig> {
        let c = RunConfig {
            command,
            out: g.out_dir(),
            rtol: g.rtol.unwrap_or(ShootOptions::default().rtol),
            atol: g.atol.unwrap_or(ShootOptions::default().atol),
            rmax: g.rmax,
            threads: g.threads,
            profile: g.profile,
            seed: g.seed.unwrap_or(0),
            n: g.n.unwrap_or(3),
            alpha: g.alpha,
            q: g.q,
            params: g.params,
            shape: g.shape,
        };
        if !(c.rtol > 0.0 && c.atol > 0.0) {
            return Err(input("tolerances must be positive"));
        }
        if let Some(r) = c.rmax {
            if !(r > 0.0) {
                return Err(input("--rmax must be positive"));
            }
        }
        if c.threads == Some(0) {
            return Err(input("--threads must be at least 1"));
        }
        Ok(c)
    }

    pub fn alpha(&self) -> Result<f64> {
        self.alpha.ok_or_else(|| input("missing --alpha (usage: --n N --alpha A)"))
    }

    pub fn q(&self) -> Result<f64> {
        self.q.ok_or_else(|| input("missing --q (usage: --q Q)"))
    }

    pub fn shoot_options(&self, default_rmax: f64) -> ShootOptions {
        ShootOptions::new(self.rmax.unwrap_or(default_rmax), self.rtol, self.atol)
    }

    fn param(&self, key: &str) -> Result<f64> {
        match key {
            "alpha" => self.alpha(),
            _ => self.params.get(key).copied().ok_or_else(|| input(format!("missing --param {key}=VALUE"))),
        }
    }

    /// Profile from a family name, a definition file, or the smoothed glued manifold.
    pub fn model(&self) -> Result<ModelFunction> {
        self.model_with_alpha(self.alpha)
    }

    pub fn model_with_alpha(&self, alpha: Option<f64>) -> Result<ModelFunction> {
        let name = self.profile.as_deref().ok_or_else(|| input("missing --profile NAME|FILE"))?;
        if name == "glued" {
            let alpha = alpha.ok_or_else(|| input("glued profile needs --alpha"))?;
            let g = glue(self.n, alpha, self.q()?)?;
            return Ok(smooth_cinf(&smooth_c1(&g, None)?, None)?.psi().clone());
        }
        let path = Path::new(name);
        if path.extension().is_some_and(|e| e == "json") || path.is_file() {
            return load_profile_file(path);
        }
        let family = Family::parse(name)?;
        let mut spec = ProfileSpec::new(family);
        let keys: &[&str] = match family {
            Family::ShiftedPower | Family::ArctanFamily | Family::FFamily => &["alpha"],
            Family::PiecewiseSinhPower => &["r_bar", "r_tilde", "alpha"],
            Family::Comparison => &["Q", "r_o", "K"],
            Family::Tabulated => return Err(input("tabulated profiles are loaded from a definition file")),
            Family::Euclidean | Family::Hyperbolic => &[],
        };
        for k in keys {
            let v = match (k, alpha) {
                (&"alpha", Some(a)) => a,
                _ => self.param(k)?,
            };
            spec = spec.with(k, v);
        }
        spec.shape = self.shape.clone();
        spec.build()
    }
}

/// Parses lo:hi:step (linear) or lo:hi:logN (N log-spaced points).
pub fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || input(format!("range '{s}' must be lo:hi:step or lo:hi:logN"));
    if parts.len() == 1 {
        return parts[0].parse::<f64>().map(|v| vec![v]).map_err(|_| bad());
    }
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    if !(hi >= lo) {
        return Err(bad());
    }
    if let Some(count) = parts[2].strip_prefix("log") {
        let count: usize = count.parse().map_err(|_| bad())?;
        if count < 2 || !(lo > 0.0) || hi == lo {
            return Err(bad());
        }
        return Ok(lane_emden::manifold::log_grid(lo, hi, count));
    }
    let step: f64 = parts[2].parse().map_err(|_| bad())?;
    if !(step > 0.0) {
        return Err(bad());
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| lo + step * i as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        let v = parse_range("1.7:2.3:0.1").unwrap();
        assert_eq!(v.len(), 7);
        assert!((v[6] - 2.3).abs() < 1e-12);
        let v = parse_range("0.1:10:log8").unwrap();
        assert_eq!(v.len(), 8);
        assert!((v[7] - 10.0).abs() < 1e-12);
        assert_eq!(parse_range("2").unwrap(), vec![2.0]);
        assert!(parse_range("3:1:0.1").is_err());
        assert!(parse_range("0:1:log4").is_err());
    }

    #[test]
    fn params() {
        assert_eq!(parse_param("r_o=1.5").unwrap(), ("r_o".to_string(), 1.5));
        assert!(parse_param("r_o").is_err());
    }
}
