//! Special functions: modified Bessel `I_n` of integer order, the one-parameter
//! Mittag-Leffler function on the negative axis, harmonic numbers, and
//! Poisson tail bounds used to size truncated sums.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{ensure, Error, Result};
use crate::quad;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesControl {
    pub abs_tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        SeriesControl { abs_tol: 1e-14, max_terms: 10_000 }
    }
}

impl SeriesControl {
    pub fn validate(&self) -> Result<()> {
        ensure(self.abs_tol > 0.0 && self.max_terms >= 1, || format!("bad series control {self:?}"))
    }
}

/// `ln I_n(x)` for `x > 0`, summed with running rescaling so large arguments
/// never overflow. Returns `-inf` at `x = 0` for `n != 0`.
pub fn ln_bessel_i(n: i64, x: f64, ctl: &SeriesControl) -> Result<f64> {
    ctl.validate()?;
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("Bessel argument must be finite and >= 0, got {x}")));
    }
    let n = n.unsigned_abs() as f64;
    if x == 0.0 {
        return Ok(if n == 0.0 { 0.0 } else { f64::NEG_INFINITY });
    }
    let q = 0.25 * x * x;
    let (mut term, mut sum, mut shift) = (1.0f64, 1.0f64, 0.0f64);
    for k in 0..ctl.max_terms {
        let kf = k as f64;
        term *= q / ((kf + 1.0) * (kf + n + 1.0));
        sum += term;
        if sum > 1e280 {
            sum *= 1e-280;
            term *= 1e-280;
            shift += 280.0 * std::f64::consts::LN_10;
        }
        let decreasing = kf + 1.0 > 0.5 * x;
        if decreasing && term < ctl.abs_tol * sum {
            return Ok(n * (0.5 * x).ln() - ln_gamma(n + 1.0) + sum.ln() + shift);
        }
    }
    Err(Error::SeriesNonConvergence { what: "bessel_i", max_terms: ctl.max_terms })
}

/// Modified Bessel function of the first kind, integer order, `x >= 0`.
pub fn bessel_i(n: i64, x: f64, ctl: &SeriesControl) -> Result<f64> {
    ln_bessel_i(n, x, ctl).map(f64::exp)
}

/// `E_α(z)` for `0 < α <= 1` and `z <= 0`.
///
/// Power series near the origin; otherwise the Laplace-type integral
/// `E_α(-x) = sin(απ)/(απ) ∫₀^∞ exp(-(xs)^{1/α}) / (s² + 2s cos(απ) + 1) ds`,
/// folded onto `[0, 1]` and evaluated by adaptive quadrature.
pub fn mittag_leffler(alpha: f64, z: f64, ctl: &SeriesControl) -> Result<f64> {
    ctl.validate()?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("Mittag-Leffler alpha must lie in (0, 1], got {alpha}")));
    }
    if !(z <= 0.0) {
        return Err(Error::Domain(format!("Mittag-Leffler argument must be <= 0, got {z}")));
    }
    if alpha == 1.0 {
        return Ok(z.exp());
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    if z.is_infinite() {
        return Ok(0.0);
    }
    let x = -z;
    if x <= 1.0 {
        return ml_series(alpha, x, ctl);
    }
    let c = (alpha * std::f64::consts::PI).cos();
    let inv = 1.0 / alpha;
    let near = |s: f64| (-(x * s).powf(inv)).exp() / (s * s + 2.0 * s * c + 1.0);
    let far = |w: f64| {
        if w == 0.0 {
            0.0
        } else {
            (-(x / w).powf(inv)).exp() / (w * w + 2.0 * w * c + 1.0)
        }
    };
    let scale = (alpha * std::f64::consts::PI).sin() / (alpha * std::f64::consts::PI);
    let tol = 0.1 * ctl.abs_tol / scale;
    let i1 = quad::integrate(near, 0.0, 1.0, tol, 1e-13)?;
    let i2 = quad::integrate(far, 0.0, 1.0, tol, 1e-13)?;
    let v = scale * (i1 + i2);
    Ok(v.clamp(0.0, 1.0))
}

fn ml_series(alpha: f64, x: f64, ctl: &SeriesControl) -> Result<f64> {
    let ln_x = x.ln();
    let mut sum = 1.0;
    for k in 1..ctl.max_terms {
        let kf = k as f64;
        let mag = (kf * ln_x - ln_gamma(alpha * kf + 1.0)).exp();
        sum += if k % 2 == 0 { mag } else { -mag };
        if mag < 0.1 * ctl.abs_tol && kf * alpha > 1.0 {
            return Ok(sum);
        }
    }
    Err(Error::SeriesNonConvergence { what: "mittag_leffler", max_terms: ctl.max_terms })
}

/// `H_n = Σ_{k=1}^n 1/k`, exact.
pub fn harmonic_number(n: u32) -> Result<BigRational> {
    ensure(n >= 1, || "harmonic number needs n >= 1".into())?;
    Ok((1..=n).fold(BigRational::zero(), |acc, k| acc + BigRational::new(BigInt::one(), BigInt::from(k))))
}

pub const ALTERNATING_SUM_MAX_N: u32 = 60;

/// `Σ_{k=1}^n C(n,k) (-1)^k / k`, exact for `n <= 60`. Equals `-H_n`.
pub fn alternating_binomial_sum(n: u32) -> Result<BigRational> {
    ensure(n >= 1, || "alternating binomial sum needs n >= 1".into())?;
    if n > ALTERNATING_SUM_MAX_N {
        return Err(Error::Unsupported(format!(
            "exact alternating binomial sum limited to n <= {ALTERNATING_SUM_MAX_N}, got {n}"
        )));
    }
    let mut binom = BigInt::one();
    let mut acc = BigRational::zero();
    for k in 1..=n {
        binom = binom * BigInt::from(n - k + 1) / BigInt::from(k);
        let term = BigRational::new(binom.clone(), BigInt::from(k));
        if k % 2 == 1 {
            acc -= term;
        } else {
            acc += term;
        }
    }
    Ok(acc)
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Upper bound on `P(X > n)` for `X ~ Poisson(lambda)`:
/// `e^{-λ} λ^{n+1}/(n+1)! · (n+2)/(n+2-λ)`, infinite when `n + 2 <= λ`.
pub fn poisson_tail_bound(lambda: f64, n: u64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    let m = n as f64 + 1.0;
    if m + 1.0 <= lambda {
        return f64::INFINITY;
    }
    (-lambda + m * lambda.ln() - ln_gamma(m + 1.0)).exp() * (m + 1.0) / (m + 1.0 - lambda)
}

/// Smallest `n` with `poisson_tail_bound(lambda, n) < eps`.
pub fn poisson_truncation(lambda: f64, eps: f64) -> u64 {
    let mut n = lambda.floor().max(0.0) as u64;
    while poisson_tail_bound(lambda, n) >= eps {
        n += 1;
    }
    n
}
