//! Forward-mode derivatives up to third order in one variable.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Value and first three derivatives of a scalar function at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl Jet {
    pub const fn new(v: f64, d1: f64, d2: f64, d3: f64) -> Self {
        Jet { v, d1, d2, d3 }
    }

    pub const fn constant(v: f64) -> Self {
        Jet::new(v, 0.0, 0.0, 0.0)
    }

    /// The identity function evaluated at `x`.
    pub const fn var(x: f64) -> Self {
        Jet::new(x, 1.0, 0.0, 0.0)
    }

    /// Chain rule for `h(self)` given `h` and its first three derivatives at `self.v`.
    pub fn compose(self, h0: f64, h1: f64, h2: f64, h3: f64) -> Jet {
        let (f1, f2, f3) = (self.d1, self.d2, self.d3);
        Jet::new(
            h0,
            h1 * f1,
            h2 * f1 * f1 + h1 * f2,
            h3 * f1 * f1 * f1 + 3.0 * h2 * f1 * f2 + h1 * f3,
        )
    }

    pub fn powf(self, p: f64) -> Jet {
        let x = self.v;
        let h0 = x.powf(p);
        let h1 = p * x.powf(p - 1.0);
        let h2 = p * (p - 1.0) * x.powf(p - 2.0);
        let h3 = p * (p - 1.0) * (p - 2.0) * x.powf(p - 3.0);
        self.compose(h0, h1, h2, h3)
    }

    pub fn recip(self) -> Jet {
        let x = self.v;
        let r = 1.0 / x;
        self.compose(r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r)
    }

    pub fn exp(self) -> Jet {
        let e = self.v.exp();
        self.compose(e, e, e, e)
    }

    pub fn ln(self) -> Jet {
        let r = 1.0 / self.v;
        self.compose(self.v.ln(), r, -r * r, 2.0 * r * r * r)
    }

    pub fn scale(self, s: f64) -> Jet {
        Jet::new(s * self.v, s * self.d1, s * self.d2, s * self.d3)
    }

    /// Derivative jet: shifts derivatives down by one order; the top slot is unknown and set to zero.
    pub fn derivative(self) -> Jet {
        Jet::new(self.d1, self.d2, self.d3, 0.0)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet::new(self.v + o.v, self.d1 + o.d1, self.d2 + o.d2, self.d3 + o.d3)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet::new(self.v - o.v, self.d1 - o.d1, self.d2 - o.d2, self.d3 - o.d3)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet::new(
            self.v * o.v,
            self.d1 * o.v + self.v * o.d1,
            self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
            self.d3 * o.v + 3.0 * self.d2 * o.d1 + 3.0 * self.d1 * o.d2 + self.v * o.d3,
        )
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, c: f64) -> Jet {
        Jet::new(self.v + c, self.d1, self.d2, self.d3)
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, c: f64) -> Jet {
        Jet::new(self.v - c, self.d1, self.d2, self.d3)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        self.scale(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_quotient_rules() {
        // f = x^2 / (1 + x) at x = 2
        let x = Jet::var(2.0);
        let f = (x * x) / (x + 1.0);
        // f' = (x^2 + 2x)/(1+x)^2, f'' = 2/(1+x)^3, f''' = -6/(1+x)^4
        assert!((f.v - 4.0 / 3.0).abs() < 1e-14);
        assert!((f.d1 - 8.0 / 9.0).abs() < 1e-14);
        assert!((f.d2 - 2.0 / 27.0).abs() < 1e-14);
        assert!((f.d3 + 6.0 / 81.0).abs() < 1e-14);
    }

    #[test]
    fn powf_matches_closed_form() {
        let f = Jet::var(3.0).powf(-0.5);
        assert!((f.d3 - (-0.5 * -1.5 * -2.5) * 3f64.powf(-3.5)).abs() < 1e-14);
    }

    #[test]
    fn exp_ln_roundtrip() {
        let x = Jet::new(1.3, 0.7, -0.2, 0.4);
        let y = x.ln().exp();
        for (a, b) in [(x.v, y.v), (x.d1, y.d1), (x.d2, y.d2), (x.d3, y.d3)] {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
