//! Compactly supported bump on (−1, 1) and the smoothed cubic ramp built from it.

use crate::quad::{self, QuadTol};
use std::sync::OnceLock;

struct Moments {
    norm: f64,
    m2: f64,
}

fn raw(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

fn moments() -> &'static Moments {
    static M: OnceLock<Moments> = OnceLock::new();
    M.get_or_init(|| {
        let tol = QuadTol { rel: 1e-14, ..QuadTol::default() };
        let norm = 2.0 * quad::integrate(raw, 0.0, 1.0, tol).expect("bump normalisation");
        let m2 = 2.0 * quad::integrate(|t| t * t * raw(t), 0.0, 1.0, tol).expect("bump moment") / norm;
        Moments { norm, m2 }
    })
}

/// Unit-mass bump φ and its first two derivatives.
pub fn phi(t: f64) -> [f64; 3] {
    if t.abs() >= 1.0 {
        return [0.0; 3];
    }
    let s = 1.0 - t * t;
    let v = raw(t) / moments().norm;
    let g1 = -2.0 * t / (s * s);
    let g2 = -2.0 / (s * s) - 8.0 * t * t / (s * s * s);
    [v, g1 * v, (g2 + g1 * g1) * v]
}

/// ∫ t² φ.
pub fn second_moment() -> f64 {
    moments().m2
}

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let tol = QuadTol { rel: 1e-13, abs: 1e-17, max_intervals: 4000 };
    quad::integrate(f, a, b, tol).expect("bump integrals are smooth")
}

/// Smooth step S(t) = ∫_{−1}^t φ.
pub fn step(t: f64) -> f64 {
    if t <= -1.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let half = integrate(|s| phi(s)[0], 0.0, t.abs());
        if t >= 0.0 {
            0.5 + half
        } else {
            0.5 - half
        }
    }
}

/// Derivatives 0..3 of τ = φ ∗ t₊³/6, so τ‴ = S.
pub fn ramp(t: f64) -> [f64; 4] {
    if t <= -1.0 {
        return [0.0; 4];
    }
    let m2 = second_moment();
    if t >= 1.0 {
        return [(t * t * t + 3.0 * t * m2) / 6.0, (t * t + m2) / 2.0, t, 1.0];
    }
    let moment = |k: i32, fact: f64| integrate(|s| phi(s)[0] * (t - s).powi(k), -1.0, t) / fact;
    [moment(3, 6.0), moment(2, 2.0), moment(1, 1.0), step(t)]
}

/// Derivatives 0..3 of a compactly supported correction ζ on [−η, η] such that
/// x₊³/6 + ζ is smooth and ζ‴ = S(x/h) − 1_{x>0} − (μ₂/2)(x S(x/η))‴ with μ₂ = h²∫t²φ.
pub fn cubic_correction(x: f64, h: f64, eta: f64) -> [f64; 4] {
    if x.abs() >= eta {
        return [0.0; 4];
    }
    let t = x / h;
    let r = ramp(t);
    let scaled = [h * h * h * r[0], h * h * r[1], h * r[2], r[3]];
    let xp = x.max(0.0);
    let kink = [xp * xp * xp / 6.0, xp * xp / 2.0, xp, if x > 0.0 { 1.0 } else { 0.0 }];
    let mu = 0.5 * second_moment() * h * h;
    let s = x / eta;
    let st = step(s);
    let [p0, p1, p2] = phi(s);
    let (f1, f2, f3) = (p0 / eta, p1 / (eta * eta), p2 / (eta * eta * eta));
    let lin = [x * st, st + x * f1, 2.0 * f1 + x * f2, 3.0 * f2 + x * f3];
    [0, 1, 2, 3].map(|k| scaled[k] - kink[k] - mu * lin[k])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_mass_and_symmetry() {
        assert!((step(1.0 - 1e-12) - 1.0).abs() < 1e-12);
        assert!((step(0.3) + step(-0.3) - 1.0).abs() < 1e-13);
        let h = 1e-5;
        let t = 0.37;
        assert!(((step(t + h) - step(t - h)) / (2.0 * h) - phi(t)[0]).abs() < 1e-8);
        assert!(((phi(t + h)[0] - phi(t - h)[0]) / (2.0 * h) - phi(t)[1]).abs() < 1e-7);
        assert!(((phi(t + h)[1] - phi(t - h)[1]) / (2.0 * h) - phi(t)[2]).abs() < 1e-6);
    }

    #[test]
    fn ramp_is_continuous_at_the_support_edge() {
        let a = ramp(1.0 - 1e-9);
        let b = ramp(1.0);
        for k in 0..4 {
            assert!((a[k] - b[k]).abs() < 1e-7);
        }
    }

    #[test]
    fn correction_vanishes_outside_and_matches_derivatives() {
        let (h, eta) = (0.01, 0.05);
        for x in [-0.06, -0.05, 0.05, 0.2] {
            assert_eq!(cubic_correction(x, h, eta), [0.0; 4]);
        }
        // continuity at ±η where the support ends
        let near = cubic_correction(eta - 1e-9, h, eta);
        assert!(near.iter().all(|v| v.abs() < 1e-8));
        let d = 1e-6;
        for x in [-0.03, -0.004, 0.0071, 0.02] {
            let c = cubic_correction(x, h, eta);
            let (p, m) = (cubic_correction(x + d, h, eta), cubic_correction(x - d, h, eta));
            for k in 0..3 {
                let fd = (p[k] - m[k]) / (2.0 * d);
                assert!((fd - c[k + 1]).abs() < 1e-6 * (1.0 + c[k + 1].abs()), "x {x} k {k}: {fd} vs {}", c[k + 1]);
            }
        }
    }
}
