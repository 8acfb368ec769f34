//! Small least-squares helpers.

/// Ordinary least-squares line `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub slope: f64,
    pub intercept: f64,
    pub rms: f64,
}

pub fn line(x: &[f64], y: &[f64]) -> Line {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum::<f64>() / n).sqrt();
    Line { slope, intercept, rms }
}

/// Slope of `ln y` against `ln x`.
pub fn loglog(x: &[f64], y: &[f64]) -> Line {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    line(&lx, &ly)
}

/// Least squares for `y ≈ c1·b1 + c2·b2`; returns the coefficients and the max relative residual.
pub fn two_basis(b1: &[f64], b2: &[f64], y: &[f64]) -> ([f64; 2], f64) {
    let (mut s11, mut s12, mut s22, mut t1, mut t2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..y.len() {
        // weight rows by 1/|y| so the fit is relative
        let w = 1.0 / y[i].abs().max(f64::MIN_POSITIVE);
        let (p, q, v) = (b1[i] * w, b2[i] * w, y[i] * w);
        s11 += p * p;
        s12 += p * q;
        s22 += q * q;
        t1 += p * v;
        t2 += q * v;
    }
    let det = s11 * s22 - s12 * s12;
    let c1 = (t1 * s22 - t2 * s12) / det;
    let c2 = (s11 * t2 - s12 * t1) / det;
    let res = (0..y.len())
        .map(|i| ((c1 * b1[i] + c2 * b2[i] - y[i]) / y[i]).abs())
        .fold(0.0, f64::max);
    ([c1, c2], res)
}
