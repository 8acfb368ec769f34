//! Piecewise Hermite interpolation on strictly increasing grids.

/// Index `i` with `x[i] <= t < x[i+1]`, clamped to the valid range.
pub fn locate(x: &[f64], t: f64) -> usize {
    let n = x.len();
    if t <= x[0] {
        return 0;
    }
    if t >= x[n - 1] {
        return n - 2;
    }
    match x.binary_search_by(|p| p.partial_cmp(&t).unwrap()) {
        Ok(i) => i.min(n - 2),
        Err(i) => i - 1,
    }
}

/// Cubic Hermite value and slope on one interval.
pub fn cubic(x0: f64, x1: f64, y0: f64, y1: f64, m0: f64, m1: f64, t: f64) -> (f64, f64) {
    let h = x1 - x0;
    let s = (t - x0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let v = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * m0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * m1;
    let d = (6.0 * s2 - 6.0 * s) / h * y0
        + (3.0 * s2 - 4.0 * s + 1.0) * m0
        + (-6.0 * s2 + 6.0 * s) / h * y1
        + (3.0 * s2 - 2.0 * s) * m1;
    (v, d)
}

/// Quintic Hermite value, first and second derivative on one interval.
#[allow(clippy::too_many_arguments)]
pub fn quintic(x0: f64, x1: f64, y0: [f64; 3], y1: [f64; 3], t: f64) -> [f64; 3] {
    let h = x1 - x0;
    let c0 = y0[0];
    let c1 = h * y0[1];
    let c2 = 0.5 * h * h * y0[2];
    let e0 = y1[0] - c0 - c1 - c2;
    let e1 = h * y1[1] - c1 - 2.0 * c2;
    let e2 = h * h * y1[2] - 2.0 * c2;
    let c3 = 10.0 * e0 - 4.0 * e1 + 0.5 * e2;
    let c4 = -15.0 * e0 + 7.0 * e1 - e2;
    let c5 = 6.0 * e0 - 3.0 * e1 + 0.5 * e2;
    let s = (t - x0) / h;
    let v = c0 + s * (c1 + s * (c2 + s * (c3 + s * (c4 + s * c5))));
    let d = c1 + s * (2.0 * c2 + s * (3.0 * c3 + s * (4.0 * c4 + s * 5.0 * c5)));
    let dd = 2.0 * c2 + s * (6.0 * c3 + s * (12.0 * c4 + s * 20.0 * c5));
    [v, d / h, dd / (h * h)]
}

/// Tabulated function with value, first and second derivative at each node.
#[derive(Debug, Clone)]
pub struct QuinticTable {
    pub x: Vec<f64>,
    pub y: Vec<[f64; 3]>,
}

impl QuinticTable {
    pub fn new(x: Vec<f64>, y: Vec<[f64; 3]>) -> Self {
        assert_eq!(x.len(), y.len());
        assert!(x.len() >= 2);
        QuinticTable { x, y }
    }

    pub fn eval(&self, t: f64) -> [f64; 3] {
        let i = locate(&self.x, t);
        quintic(self.x[i], self.x[i + 1], self.y[i], self.y[i + 1], t)
    }

    pub fn x_min(&self) -> f64 {
        self.x[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.x.last().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quintic_reproduces_quintic_polynomials() {
        let p = |x: f64| [x.powi(5) - x * x, 5.0 * x.powi(4) - 2.0 * x, 20.0 * x.powi(3) - 2.0];
        let v = quintic(0.3, 1.1, p(0.3), p(1.1), 0.77);
        let e = p(0.77);
        for k in 0..3 {
            assert!((v[k] - e[k]).abs() < 1e-12, "{k}: {} vs {}", v[k], e[k]);
        }
    }

    #[test]
    fn cubic_reproduces_cubics() {
        let f = |x: f64| x * x * x - 2.0 * x;
        let df = |x: f64| 3.0 * x * x - 2.0;
        let (v, d) = cubic(1.0, 2.0, f(1.0), f(2.0), df(1.0), df(2.0), 1.4);
        assert!((v - f(1.4)).abs() < 1e-13);
        assert!((d - df(1.4)).abs() < 1e-12);
    }

    #[test]
    fn locate_clamps() {
        let x = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(locate(&x, -1.0), 0);
        assert_eq!(locate(&x, 1.0), 1);
        assert_eq!(locate(&x, 2.5), 2);
        assert_eq!(locate(&x, 9.0), 2);
    }
}
