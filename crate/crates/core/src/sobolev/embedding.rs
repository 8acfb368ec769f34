use crate::error::{invalid, precondition, Result};
use crate::fit;
use crate::manifold::{log_grid, volume, ModelFunction};
use crate::quad::{self, QuadTol};
use serde::Serialize;

/// Cutoff beyond which ψ is replaced by its declared power tail.
pub const R_INF: f64 = 1e4;

/// Slope magnitude below which B counts as flat at an end of the sampled range.
const FLAT: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ContinuousAndCompact,
    ContinuousNotCompact,
    NotContinuous,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::ContinuousAndCompact => "continuous_and_compact",
            Verdict::ContinuousNotCompact => "continuous_not_compact",
            Verdict::NotContinuous => "not_continuous",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingReport {
    pub p: f64,
    /// Largest sampled B, absent when B is unbounded.
    pub sup_b: Option<f64>,
    pub limit_0: f64,
    pub limit_inf: f64,
    /// Log-log slope of B over the first and last sampled decade.
    pub slope_0: f64,
    pub slope_inf: f64,
    pub verdict: Verdict,
    pub samples: Vec<(f64, f64)>,
}

fn tail_exponent(psi: &ModelFunction, n: u32) -> Result<(f64, f64)> {
    let asym = psi
        .asymptotics()
        .ok_or_else(|| precondition(format!("{} has no declared power tail", psi.family().name())))?;
    let a = asym.alpha * (n as f64 - 1.0);
    if a <= 1.0 {
        return Err(invalid(format!("∫ψ^(1−n) diverges at infinity: α(n−1) = {a} ≤ 1")));
    }
    Ok((a, asym.kappa))
}

/// ∫_r^∞ ψ^{1−n}: quadrature up to a cutoff plus the exact power-tail remainder.
fn tail_integral(psi: &ModelFunction, n: u32, r: f64) -> Result<f64> {
    let (a, kappa) = tail_exponent(psi, n)?;
    let k = 1 - n as i32;
    let cutoff = R_INF.max(100.0 * r);
    let tol = QuadTol { rel: 1e-11, ..QuadTol::default() };
    let mut acc = 0.0;
    let mut lo = r;
    while lo < cutoff {
        let hi = (2.0 * lo).min(cutoff);
        acc += quad::integrate(|s| psi.psi(s).powi(k), lo, hi, tol)?;
        lo = hi;
    }
    Ok(acc + kappa.powi(k) * cutoff.powf(1.0 - a) / (a - 1.0))
}

/// B(r) = (∫₀ʳ ψ^{n−1})^{1/p} (∫ᵣ^∞ ψ^{1−n})^{1/2}.
pub fn ko_functional(psi: &ModelFunction, n: u32, p: f64, r: f64) -> Result<f64> {
    if !(p > 2.0) {
        return Err(invalid(format!("embedding exponent must exceed 2, got {p}")));
    }
    if !(r > 0.0) {
        return Err(invalid("B is evaluated for r > 0"));
    }
    let t = tail_integral(psi, n, r)?;
    let v = volume(psi, n, r)?;
    Ok(v.powf(1.0 / p) * t.sqrt())
}

/// Samples B on [1e−4, 1e4] and classifies the embedding from the end behaviour.
pub fn embedding_report(psi: &ModelFunction, n: u32, p: f64) -> Result<EmbeddingReport> {
    if !(p > 2.0) {
        return Err(invalid(format!("embedding exponent must exceed 2, got {p}")));
    }
    tail_exponent(psi, n)?;
    let per_decade = 20;
    let grid = log_grid(1e-4, R_INF, 8 * per_decade + 1);
    let k = n as i32 - 1;
    let w = |s: f64| psi.psi(s).powi(k);
    let iw = |s: f64| psi.psi(s).powi(-k);
    let vol = quad::cumulative_gl8(&w, &grid, quad::gauss_legendre8(w, 0.0, grid[0]));
    let m = grid.len();
    let mut tail = vec![0.0; m];
    tail[m - 1] = tail_integral(psi, n, grid[m - 1])?;
    for i in (0..m - 1).rev() {
        tail[i] = tail[i + 1] + quad::gauss_legendre8(iw, grid[i], grid[i + 1]);
    }
    let b: Vec<f64> = (0..m).map(|i| vol[i].powf(1.0 / p) * tail[i].sqrt()).collect();
    let head = per_decade + 1;
    let slope_0 = fit::loglog(&grid[..head], &b[..head]).slope;
    let slope_inf = fit::loglog(&grid[m - head..], &b[m - head..]).slope;
    let limit_0 = if slope_0 > FLAT {
        0.0
    } else if slope_0 < -FLAT {
        f64::INFINITY
    } else {
        b[0]
    };
    let limit_inf = if slope_inf < -FLAT {
        0.0
    } else if slope_inf > FLAT {
        f64::INFINITY
    } else {
        b[m - 1]
    };
    let verdict = if limit_0.is_infinite() || limit_inf.is_infinite() {
        Verdict::NotContinuous
    } else if limit_0 == 0.0 && limit_inf == 0.0 {
        Verdict::ContinuousAndCompact
    } else {
        Verdict::ContinuousNotCompact
    };
    let sup_b = match verdict {
        Verdict::NotContinuous => None,
        _ => Some(b.iter().cloned().fold(0.0, f64::max)),
    };
    Ok(EmbeddingReport {
        p,
        sup_b,
        limit_0,
        limit_inf,
        slope_0,
        slope_inf,
        verdict,
        samples: grid.into_iter().zip(b).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_space_at_sobolev_exponent_is_constant() {
        let e = ModelFunction::euclidean();
        let b1 = ko_functional(&e, 3, 6.0, 0.1).unwrap();
        let b2 = ko_functional(&e, 3, 6.0, 30.0).unwrap();
        assert!((b1 / b2 - 1.0).abs() < 1e-8);
        // (r³/3)^{1/6} (1/r)^{1/2} = 3^{−1/6}
        assert!((b1 - 3f64.powf(-1.0 / 6.0)).abs() < 1e-8);
    }

    #[test]
    fn sampled_and_pointwise_agree() {
        let s = ModelFunction::shifted_power(2.0).unwrap();
        let rep = embedding_report(&s, 3, 4.0).unwrap();
        let (r, b) = rep.samples[77];
        assert!((ko_functional(&s, 3, 4.0, r).unwrap() / b - 1.0).abs() < 1e-8);
    }

    #[test]
    fn guards() {
        assert!(ko_functional(&ModelFunction::hyperbolic(), 3, 4.0, 1.0).is_err());
        assert!(ko_functional(&ModelFunction::euclidean(), 2, 4.0, 1.0).is_err());
        assert!(ko_functional(&ModelFunction::euclidean(), 3, 2.0, 1.0).is_err());
    }

    #[test]
    fn shifted_power_verdicts() {
        let s = ModelFunction::shifted_power(2.0).unwrap();
        assert_eq!(embedding_report(&s, 3, 4.0).unwrap().verdict, Verdict::ContinuousAndCompact);
        let e = embedding_report(&s, 3, 10.0 / 3.0).unwrap();
        assert_eq!(e.verdict, Verdict::ContinuousNotCompact);
        assert!(e.limit_inf > 0.0 && e.limit_inf.is_finite() && e.limit_0 == 0.0);
        let e = embedding_report(&s, 3, 3.0).unwrap();
        assert_eq!(e.verdict, Verdict::NotContinuous);
        assert!(e.sup_b.is_none() && e.limit_inf.is_infinite());
    }
}
