//! Dormand–Prince 5(4) integrator with continuous (dense) output.

use crate::error::{invalid, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Integrator settings.
#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub rtol: f64,
    pub atol: f64,
    pub h0: Option<f64>,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options { rtol: 1e-10, atol: 1e-12, h0: None, h_min: 1e-14, h_max: f64::INFINITY, max_steps: 2_000_000 }
    }
}

/// One accepted step together with its interpolant.
#[derive(Debug, Clone, Copy)]
pub struct Step<const N: usize> {
    pub t0: f64,
    pub h: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    pub err: f64,
    rc: [[f64; N]; 5],
}

impl<const N: usize> Step<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// Interpolated state at `t` in [t0, t0 + h].
    pub fn eval(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let mut y = [0.0; N];
        for i in 0..N {
            let rc = |k: usize| self.rc[k][i];
            y[i] = self.y0[i] + th * (rc(1) + th1 * (rc(2) + th * (rc(3) + th1 * rc(4))));
        }
        y
    }

    /// Time derivative of the interpolant at `t`.
    pub fn eval_deriv(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let mut d = [0.0; N];
        for i in 0..N {
            let rc = |k: usize| self.rc[k][i];
            let c = rc(3) + th1 * rc(4);
            let b = rc(2) + th * c;
            let a = rc(1) + th1 * b;
            let dc = -rc(4);
            let db = c + th * dc;
            let da = -b + th1 * db;
            d[i] = (a + th * da) / self.h;
        }
        d
    }
}

/// Why integration stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum End {
    Reached,
    Stopped(f64),
    StepUnderflow(f64),
    StepBudget(f64),
}

/// Callback verdict after each accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut s = 0.0;
        for (c, k) in terms {
            s += c * k[i];
        }
        out[i] += h * s;
    }
    out
}

struct Stages<const N: usize> {
    y1: [f64; N],
    k: [[f64; N]; 7],
}

fn stages<F, const N: usize>(f: &F, t: f64, y: &[f64; N], k1: [f64; N], h: f64) -> Stages<N>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let k2 = f(t + C2 * h, &axpy(y, h, &[(A21, &k1)]));
    let k3 = f(t + C3 * h, &axpy(y, h, &[(A31, &k1), (A32, &k2)]));
    let k4 = f(t + C4 * h, &axpy(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(t + C5 * h, &axpy(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = f(t + h, &axpy(y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
    let y1 = axpy(y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = f(t + h, &y1);
    Stages { y1, k: [k1, k2, k3, k4, k5, k6, k7] }
}

/// Fifth-order solution after a single step of size `h`, with no error control.
pub fn single_step<F, const N: usize>(f: &F, t: f64, y: &[f64; N], h: f64) -> [f64; N]
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    stages(f, t, y, f(t, y), h).y1
}

fn error_norm<const N: usize>(s: &Stages<N>, y0: &[f64; N], h: f64, o: &Options) -> f64 {
    let k = &s.k;
    let mut acc = 0.0;
    for i in 0..N {
        let e = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
        let sc = o.atol + o.rtol * y0[i].abs().max(s.y1[i].abs());
        acc += (e / sc) * (e / sc);
    }
    (acc / N as f64).sqrt()
}

fn initial_step<F, const N: usize>(f: &F, t: f64, y: &[f64; N], k1: &[f64; N], o: &Options) -> f64
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let sc: Vec<f64> = y.iter().map(|v| o.atol + o.rtol * v.abs()).collect();
    let norm = |v: &[f64; N]| (v.iter().zip(&sc).map(|(a, s)| (a / s) * (a / s)).sum::<f64>() / N as f64).sqrt();
    let d0 = norm(y);
    let d1 = norm(k1);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1 = axpy(y, h0, &[(1.0, k1)]);
    let k2 = f(t + h0, &y1);
    let mut diff = [0.0; N];
    for i in 0..N {
        diff[i] = k2[i] - k1[i];
    }
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(o.h_max)
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end`, calling `on_step` after every accepted step.
pub fn integrate<F, C, const N: usize>(
    f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    o: &Options,
    mut on_step: C,
) -> Result<End>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    C: FnMut(&Step<N>) -> Control,
{
    if !(o.rtol > 0.0 && o.atol > 0.0) {
        return Err(invalid("tolerances must be positive"));
    }
    if !(t_end > t0) {
        return Err(invalid(format!("integration interval [{t0}, {t_end}] is empty")));
    }
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut h = o.h0.unwrap_or_else(|| initial_step(&f, t, &y, &k1, o)).min(t_end - t);
    let mut rejected = false;
    for _ in 0..o.max_steps {
        if h < o.h_min {
            return Ok(End::StepUnderflow(t));
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let s = stages(&f, t, &y, k1, h);
        let err = error_norm(&s, &y, h, o);
        if !err.is_finite() {
            h *= 0.2;
            rejected = true;
            continue;
        }
        if err <= 1.0 {
            let k = &s.k;
            let mut rc = [[0.0; N]; 5];
            for i in 0..N {
                let ydiff = s.y1[i] - y[i];
                let bspl = h * k[0][i] - ydiff;
                rc[0][i] = y[i];
                rc[1][i] = ydiff;
                rc[2][i] = bspl;
                rc[3][i] = ydiff - h * k[6][i] - bspl;
                rc[4][i] = h
                    * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
            }
            let step = Step { t0: t, h, y0: y, y1: s.y1, err, rc };
            t = if last { t_end } else { t + h };
            y = s.y1;
            k1 = s.k[6];
            if on_step(&step) == Control::Stop {
                return Ok(End::Stopped(t));
            }
            if last {
                return Ok(End::Reached);
            }
            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 10.0);
            if rejected {
                fac = fac.min(1.0);
            }
            rejected = false;
            h = (h * fac).min(o.h_max);
        } else {
            let fac = (0.9 * err.powf(-0.2)).max(0.2);
            h *= fac;
            rejected = true;
        }
    }
    Ok(End::StepBudget(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_with_dense_output() {
        let f = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let mut steps = Vec::new();
        let end = integrate(f, 0.0, [0.0, 1.0], 10.0, &Options::default(), |s| {
            steps.push(*s);
            Control::Continue
        })
        .unwrap();
        assert_eq!(end, End::Reached);
        let last = steps.last().unwrap();
        assert!((last.y1[0] - 10f64.sin()).abs() < 1e-8);
        for s in steps.iter().step_by(7) {
            let tm = s.t0 + 0.37 * s.h;
            let y = s.eval(tm);
            let d = s.eval_deriv(tm);
            assert!((y[0] - tm.sin()).abs() < 1e-8);
            assert!((d[0] - tm.cos()).abs() < 1e-7);
        }
    }

    #[test]
    fn rejects_bad_tolerances() {
        let o = Options { rtol: 0.0, ..Options::default() };
        let r = integrate(|_, y: &[f64; 1]| *y, 0.0, [1.0], 1.0, &o, |_| Control::Continue);
        assert!(r.is_err());
    }

    #[test]
    fn single_step_is_fifth_order() {
        let f = |_t: f64, y: &[f64; 1]| [y[0]];
        let e1 = (single_step(&f, 0.0, &[1.0], 0.1)[0] - 0.1f64.exp()).abs();
        let e2 = (single_step(&f, 0.0, &[1.0], 0.05)[0] - 0.05f64.exp()).abs();
        assert!(e1 / e2 > 40.0);
    }
}
