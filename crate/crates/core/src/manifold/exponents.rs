use crate::error::{invalid, precondition, Result};
use serde::{Deserialize, Serialize};

/// Critical exponents for dimension n and volume-growth order α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// 2̃_α
    pub tilde: f64,
    /// 2*_α
    pub star_alpha: f64,
    /// Sobolev exponent 2*, +∞ when n = 2.
    pub star: f64,
}

impl Thresholds {
    /// Regime boundaries in q: (2̃_α, 2*_α − 1, 2* − 1).
    pub fn q_bounds(&self) -> (f64, f64, f64) {
        (self.tilde, self.star_alpha - 1.0, self.star - 1.0)
    }
}

/// 2̃_α = (α(n−1)+1)/(α(n−1)−1), 2*_α = 2·2̃_α, 2* = 2n/(n−2).
pub fn critical_exponents(n: u32, alpha: f64) -> Result<Thresholds> {
    if n < 2 {
        return Err(invalid(format!("dimension must be at least 2, got {n}")));
    }
    if !(alpha >= 1.0) || !alpha.is_finite() {
        return Err(invalid(format!("α must be a finite real ≥ 1, got {alpha}")));
    }
    let a = alpha * (n as f64 - 1.0);
    if a <= 1.0 + 1e-9 {
        return Err(invalid(format!("α(n−1) = {a} is too close to the degenerate value 1")));
    }
    let tilde = (a + 1.0) / (a - 1.0);
    let star = if n == 2 { f64::INFINITY } else { 2.0 * n as f64 / (n as f64 - 2.0) };
    Ok(Thresholds { tilde, star_alpha: 2.0 * tilde, star })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeLabel {
    StronglySubcritical,
    Intermediate,
    IntermediateCritical,
    SlightlySubcritical,
    AtOrAboveSobolevCritical,
}

impl RegimeLabel {
    pub fn name(self) -> &'static str {
        match self {
            RegimeLabel::StronglySubcritical => "strongly_subcritical",
            RegimeLabel::Intermediate => "intermediate",
            RegimeLabel::IntermediateCritical => "intermediate_critical",
            RegimeLabel::SlightlySubcritical => "slightly_subcritical",
            RegimeLabel::AtOrAboveSobolevCritical => "at_or_above_sobolev_critical",
        }
    }

    /// Row of the results table: supersolutions, radial solutions, uniqueness in balls.
    pub fn verdict(self) -> Option<VerdictRow> {
        let row = |a, b, c| Some(VerdictRow { supersolutions: a, solutions: b, uniqueness_in_balls: c });
        match self {
            RegimeLabel::StronglySubcritical => row("NO", "NO", "unknown"),
            RegimeLabel::SlightlySubcritical => row("YES", "YES", "unknown"),
            RegimeLabel::IntermediateCritical => row("YES", "both YES and NO depending ψ", "unknown"),
            RegimeLabel::Intermediate => row("YES", "both YES and NO depending ψ", "it fails for some ψ"),
            RegimeLabel::AtOrAboveSobolevCritical => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct VerdictRow {
    pub supersolutions: &'static str,
    pub solutions: &'static str,
    pub uniqueness_in_balls: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Regime {
    pub label: RegimeLabel,
    /// (2̃_α, 2*_α − 1, 2* − 1)
    pub thresholds: (f64, f64, f64),
}

pub fn classify_regime(n: u32, alpha: f64, q: f64) -> Result<Regime> {
    if !(q > 1.0) {
        return Err(precondition(format!("q must exceed 1, got {q}")));
    }
    let t = critical_exponents(n, alpha)?;
    let a = alpha * (n as f64 - 1.0);
    // computed directly so the rounding matches user-supplied rationals like 7/3
    let crit = (a + 3.0) / (a - 1.0);
    let sob = if n == 2 { f64::INFINITY } else { (n as f64 + 2.0) / (n as f64 - 2.0) };
    let label = if q <= t.tilde {
        RegimeLabel::StronglySubcritical
    } else if q < crit {
        RegimeLabel::Intermediate
    } else if q == crit {
        RegimeLabel::IntermediateCritical
    } else if q < sob {
        RegimeLabel::SlightlySubcritical
    } else {
        RegimeLabel::AtOrAboveSobolevCritical
    };
    Ok(Regime { label, thresholds: (t.tilde, crit, sob) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn documented_values() {
        let t = critical_exponents(3, 1.0).unwrap();
        assert_eq!((t.tilde, t.star_alpha, t.star), (3.0, 6.0, 6.0));
        let t = critical_exponents(3, 2.0).unwrap();
        assert!((t.tilde - 5.0 / 3.0).abs() < 1e-15 && (t.star_alpha - 10.0 / 3.0).abs() < 1e-15);
        let t = critical_exponents(2, 3.0).unwrap();
        assert_eq!((t.tilde, t.star_alpha), (2.0, 4.0));
        assert!(t.star.is_infinite());
    }

    #[test]
    fn degenerate_growth_rejected() {
        assert!(critical_exponents(2, 1.0).is_err());
        assert!(critical_exponents(2, 1.0 + 1e-12).is_err());
    }

    #[test]
    fn documented_labels() {
        assert_eq!(classify_regime(3, 2.0, 1.5).unwrap().label, RegimeLabel::StronglySubcritical);
        assert_eq!(classify_regime(3, 2.0, 2.0).unwrap().label, RegimeLabel::Intermediate);
        assert_eq!(classify_regime(3, 2.0, 4.0).unwrap().label, RegimeLabel::SlightlySubcritical);
        assert_eq!(classify_regime(3, 2.0, 7.0 / 3.0).unwrap().label, RegimeLabel::IntermediateCritical);
        assert_eq!(classify_regime(3, 2.0, 5.0).unwrap().label, RegimeLabel::AtOrAboveSobolevCritical);
        assert_eq!(classify_regime(2, 3.0, 1e6).unwrap().label, RegimeLabel::SlightlySubcritical);
    }

    proptest! {
        #[test]
        fn thresholds_strictly_ordered(n in 2u32..12, alpha in 1.0001f64..20.0) {
            if let Ok(t) = critical_exponents(n, alpha) {
                let (a, b, c) = t.q_bounds();
                prop_assert!(a < b && b < c);
            }
        }

        #[test]
        fn labels_switch_at_thresholds(n in 3u32..10, alpha in 1.01f64..10.0) {
            let r = classify_regime(n, alpha, 1.5).map(|r| r.thresholds);
            let (t1, t2, t3) = match r { Ok(t) => t, Err(_) => return Ok(()) };
            let d = 1e-12;
            prop_assert_eq!(classify_regime(n, alpha, t1).unwrap().label, RegimeLabel::StronglySubcritical);
            prop_assert_eq!(classify_regime(n, alpha, t1 + d * t1).unwrap().label, RegimeLabel::Intermediate);
            prop_assert_eq!(classify_regime(n, alpha, t2 - d * t2).unwrap().label, RegimeLabel::Intermediate);
            prop_assert_eq!(classify_regime(n, alpha, t2).unwrap().label, RegimeLabel::IntermediateCritical);
            prop_assert_eq!(classify_regime(n, alpha, t2 + d * t2).unwrap().label, RegimeLabel::SlightlySubcritical);
            prop_assert_eq!(classify_regime(n, alpha, t3 - d * t3).unwrap().label, RegimeLabel::SlightlySubcritical);
            prop_assert_eq!(classify_regime(n, alpha, t3).unwrap().label, RegimeLabel::AtOrAboveSobolevCritical);
        }
    }
}
