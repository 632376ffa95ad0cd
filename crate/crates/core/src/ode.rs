//! Adaptive Dormand-Prince 5(4) integrator for small non-stiff systems.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { abs_tol: 1e-12, rel_tol: 1e-12, max_steps: 1_000_000 }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights are the last row of A; these are fifth minus fourth
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t1 >= t0`.
pub fn integrate<F>(f: F, t0: f64, y0: &[f64], t1: f64, opts: &OdeOptions) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    if !(t1 >= t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::Domain(format!("integration interval [{t0}, {t1}] is invalid")));
    }
    let n = y0.len();
    let mut y = y0.to_vec();
    if t1 == t0 {
        return Ok(y);
    }
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut t = t0;
    f(t, &y, &mut k[0]);
    let mut h = initial_step(t1 - t0, &y, &k[0], opts);
    let mut steps = 0;
    while t < t1 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::StepSizeFailure { t });
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        for s in 1..7 {
            for i in 0..n {
                tmp[i] = y[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
            }
            f(t + C[s] * h, &tmp, &mut k[s]);
        }
        // tmp now holds the fifth-order solution (FSAL stage)
        let mut err = 0.0f64;
        for i in 0..n {
            let e = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
            let scale = opts.abs_tol + opts.rel_tol * y[i].abs().max(tmp[i].abs());
            err = err.max((e / scale).abs());
        }
        if !err.is_finite() {
            h *= 0.1;
        } else if err <= 1.0 {
            t = if last { t1 } else { t + h };
            y.copy_from_slice(&tmp);
            k.swap(0, 6);
            let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= grow;
        } else {
            h *= (0.9 * err.powf(-0.2)).max(0.1);
        }
        if h <= 1e-14 * t.abs().max(1.0) && t < t1 {
            return Err(Error::StepSizeFailure { t });
        }
    }
    Ok(y)
}

fn initial_step(span: f64, y: &[f64], dy: &[f64], opts: &OdeOptions) -> f64 {
    let d0 = y.iter().map(|v| (v / (opts.abs_tol + opts.rel_tol * v.abs())).powi(2)).sum::<f64>().sqrt();
    let d1 = y
        .iter()
        .zip(dy)
        .map(|(v, d)| (d / (opts.abs_tol + opts.rel_tol * v.abs())).powi(2))
        .sum::<f64>()
        .sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span)
}
