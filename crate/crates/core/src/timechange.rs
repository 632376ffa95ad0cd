//! Subordinators, their inverses, and processes run on the inverse clock.
//!
//! A subordinator `H` has Laplace exponent `f(x) = a + bx + ∫(1 - e^{-xw}) ν(dw)`;
//! its inverse `L(t) = inf{x : H(x) >= t}` slows a Markov process down and
//! turns its forward equation into one with a convolution-type time derivative.
//! For the stable family on a finite chain the law at `t` is `p0 E_α(Q t^α)`.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix, DVector, Schur};
use rand::Rng;
use rand_distr::{Beta, Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::bdm::{BdmSpec, PureMigrationSpec};
use crate::error::{ensure, ensure_time, Error, Result};
use crate::interact::{InteractingSkellamSpec, SamplingMethod};
use crate::oracle::FiniteGenerator;
use crate::quad::integrate;
use crate::skellam::NhSkellamSpec;
use crate::specfun::{mittag_leffler, SeriesControl};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SubordinatorFamily {
    /// `f(x) = x^α`; `α = 1` is the identity clock.
    Stable { alpha: f64 },
    /// `f(x) = shape · ln(1 + x / rate)`.
    Gamma { shape: f64, rate: f64 },
    /// Lévy density tabulated on `grid`, linear in between, zero outside.
    TabulatedTail { grid: Vec<f64>, density: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernsteinSpec {
    pub family: SubordinatorFamily,
    #[serde(default)]
    pub drift: f64,
    #[serde(default)]
    pub killing: f64,
}

/// Samples of `L(t)` on an increasing time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct InversePath {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InverseControl {
    /// Bracket width at which refinement stops, relative to `t`.
    pub relative_resolution: f64,
}

impl Default for InverseControl {
    fn default() -> Self {
        InverseControl { relative_resolution: 1e-4 }
    }
}

impl BernsteinSpec {
    pub fn stable(alpha: f64) -> Result<Self> {
        let s = BernsteinSpec { family: SubordinatorFamily::Stable { alpha }, drift: 0.0, killing: 0.0 };
        s.validate()?;
        Ok(s)
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        let s = BernsteinSpec { family: SubordinatorFamily::Gamma { shape, rate }, drift: 0.0, killing: 0.0 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.drift >= 0.0 && self.drift.is_finite(), || format!("drift must be >= 0, got {}", self.drift))?;
        ensure(self.killing >= 0.0 && self.killing.is_finite(), || {
            format!("killing must be >= 0, got {}", self.killing)
        })?;
        match &self.family {
            SubordinatorFamily::Stable { alpha } => {
                ensure(*alpha > 0.0 && *alpha <= 1.0, || format!("stable index must lie in (0, 1], got {alpha}"))
            }
            SubordinatorFamily::Gamma { shape, rate } => ensure(*shape > 0.0 && *rate > 0.0, || {
                format!("gamma parameters must be positive, got ({shape}, {rate})")
            }),
            SubordinatorFamily::TabulatedTail { grid, density } => {
                ensure(grid.len() >= 2 && grid.len() == density.len(), || "tabulated tail needs matching grids".into())?;
                ensure(grid[0] > 0.0 && grid.windows(2).all(|w| w[0] < w[1]), || {
                    "tail grid must be positive and increasing".into()
                })?;
                ensure(density.iter().all(|d| *d >= 0.0 && d.is_finite()), || "Lévy density must be >= 0".into())
            }
        }
    }

    /// The stable index when the spec is a pure stable subordinator.
    pub fn pure_stable_alpha(&self) -> Option<f64> {
        match self.family {
            SubordinatorFamily::Stable { alpha } if self.drift == 0.0 && self.killing == 0.0 => Some(alpha),
            _ => None,
        }
    }

    pub fn levy_symbol(&self, x: f64) -> Result<f64> {
        self.validate()?;
        ensure(x >= 0.0 && x.is_finite(), || format!("Laplace argument must be >= 0, got {x}"))?;
        let jumps = match &self.family {
            SubordinatorFamily::Stable { alpha } => x.powf(*alpha),
            SubordinatorFamily::Gamma { shape, rate } => shape * (x / rate).ln_1p(),
            SubordinatorFamily::TabulatedTail { grid, density } => {
                let mut acc = 0.0;
                for (w, d) in grid.windows(2).zip(density.windows(2)) {
                    let slope = (d[1] - d[0]) / (w[1] - w[0]);
                    let g = |s: f64| -(-x * s).exp_m1() * (d[0] + slope * (s - w[0]));
                    acc += integrate(g, w[0], w[1], 1e-14, 1e-12)?;
                }
                acc
            }
        };
        Ok(self.killing + self.drift * x + jumps)
    }

    fn killing_time<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.killing > 0.0 {
            rng.sample::<f64, _>(Exp1) / self.killing
        } else {
            f64::INFINITY
        }
    }

    /// Jump part of `H(x + dx) - H(x)`.
    fn jump_increment<R: Rng + ?Sized>(&self, dx: f64, rng: &mut R) -> Result<f64> {
        if dx <= 0.0 {
            return Ok(0.0);
        }
        match &self.family {
            SubordinatorFamily::Stable { alpha } => Ok(if *alpha == 1.0 {
                dx
            } else {
                dx.powf(1.0 / alpha) * positive_stable(*alpha, rng)
            }),
            SubordinatorFamily::Gamma { shape, rate } => {
                let g = Gamma::new(shape * dx, 1.0 / rate).map_err(|e| Error::InvalidParameter(e.to_string()))?;
                Ok(g.sample(rng))
            }
            SubordinatorFamily::TabulatedTail { .. } => {
                Err(Error::Unsupported("exact sampling of a tabulated Lévy tail".into()))
            }
        }
    }

    /// `H` at the points of an increasing grid (`H(0) = 0`); `+∞` after killing.
    pub fn sample_subordinator<R: Rng + ?Sized>(&self, x_grid: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        self.validate()?;
        ensure(x_grid.iter().all(|x| *x >= 0.0) && x_grid.windows(2).all(|w| w[0] < w[1]), || {
            "grid must be non-negative and increasing".into()
        })?;
        let zeta = self.killing_time(rng);
        let mut prev = 0.0;
        let mut h = 0.0;
        let mut out = Vec::with_capacity(x_grid.len());
        for &x in x_grid {
            h += self.jump_increment(x - prev, rng)? + self.drift * (x - prev);
            prev = x;
            out.push(if x >= zeta { f64::INFINITY } else { h });
        }
        Ok(out)
    }

    /// One draw of `L(t)`.
    ///
    /// Stable: `H(x) = bx + x^{1/α} S` in law for each fixed `x`, increasing in
    /// `x`, so `L(t)` is the root of `bx + x^{1/α} S = t` (exact).
    /// Gamma: double `x` until `H` crosses `t`, then halve the bracket with the
    /// gamma bridge until its width is below `t · relative_resolution`.
    pub fn sample_inverse<R: Rng + ?Sized>(&self, t: f64, rng: &mut R, ctl: &InverseControl) -> Result<f64> {
        self.validate()?;
        ensure_time(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        let zeta = self.killing_time(rng);
        let crossing = match &self.family {
            SubordinatorFamily::Stable { alpha } => {
                let s = if *alpha == 1.0 { 1.0 } else { positive_stable(*alpha, rng) };
                solve_increasing(|x| self.drift * x + x.powf(1.0 / alpha) * s, t)
            }
            SubordinatorFamily::Gamma { shape, rate } => {
                self.gamma_crossing(*shape, *rate, t, zeta, t * ctl.relative_resolution, rng)?
            }
            SubordinatorFamily::TabulatedTail { .. } => {
                return Err(Error::Unsupported("exact sampling of a tabulated Lévy tail".into()))
            }
        };
        Ok(crossing.min(zeta))
    }

    fn gamma_crossing<R: Rng + ?Sized>(
        &self,
        shape: f64,
        rate: f64,
        t: f64,
        zeta: f64,
        delta: f64,
        rng: &mut R,
    ) -> Result<f64> {
        let h = |x: f64, jump: f64| self.drift * x + jump;
        let (mut lo, mut jlo) = (0.0, 0.0);
        let mut hi = (rate / shape * t).max(delta);
        let mut jhi = self.jump_increment(hi, rng)?;
        let mut doublings = 0;
        while h(hi, jhi) < t {
            if hi >= zeta {
                return Ok(zeta);
            }
            lo = hi;
            jlo = jhi;
            jhi += self.jump_increment(hi, rng)?;
            hi *= 2.0;
            doublings += 1;
            if doublings > 200 {
                return Err(Error::SeriesNonConvergence { what: "subordinator crossing search", max_terms: 200 });
            }
        }
        while hi - lo > delta {
            let mid = 0.5 * (lo + hi);
            let half = shape * (mid - lo);
            let frac = Beta::new(half, half).map_err(|e| Error::InvalidParameter(e.to_string()))?.sample(rng);
            let jmid = jlo + (jhi - jlo) * frac;
            if h(mid, jmid) >= t {
                hi = mid;
                jhi = jmid;
            } else {
                lo = mid;
                jlo = jmid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `L` on a time grid from one subordinator path simulated with step `dx`;
    /// each value overestimates the exact first passage by less than `dx`.
    pub fn sample_inverse_path<R: Rng + ?Sized>(&self, grid: &[f64], dx: f64, rng: &mut R) -> Result<InversePath> {
        self.validate()?;
        ensure(dx > 0.0, || "step must be positive".into())?;
        ensure(grid.iter().all(|t| *t >= 0.0) && grid.windows(2).all(|w| w[0] <= w[1]), || {
            "time grid must be non-negative and non-decreasing".into()
        })?;
        let zeta = self.killing_time(rng);
        let (mut x, mut h) = (0.0, 0.0);
        let mut values = Vec::with_capacity(grid.len());
        for &t in grid {
            while h < t && x < zeta {
                h += self.jump_increment(dx, rng)? + self.drift * dx;
                x += dx;
            }
            values.push(x.min(zeta));
        }
        Ok(InversePath { grid: grid.to_vec(), values })
    }

    /// `E e^{-y L(t)} = E_α(-y t^α)` for a pure stable subordinator.
    pub fn laplace_of_inverse(&self, t: f64, y: f64) -> Result<f64> {
        let alpha = self
            .pure_stable_alpha()
            .ok_or_else(|| Error::Unsupported("closed-form Laplace transform needs a pure stable subordinator".into()))?;
        ensure_time(t)?;
        ensure(y >= 0.0, || format!("y must be >= 0, got {y}"))?;
        mittag_leffler(alpha, -y * t.powf(alpha), &SeriesControl::default())
    }

    /// `P{J > t}` for the first waiting time of a rate-`λ̄` Poisson stream on the inverse clock.
    pub fn renewal_waiting_survival(&self, lambda_bar: f64, t: f64) -> Result<f64> {
        ensure(lambda_bar > 0.0, || format!("rate must be positive, got {lambda_bar}"))?;
        self.laplace_of_inverse(t, lambda_bar)
    }

    /// Runs `base` to the random horizon `L(t)`.
    pub fn time_changed_sample<B, R>(&self, base: &B, t: f64, rng: &mut R) -> Result<B::State>
    where
        B: HomogeneousSampler + ?Sized,
        R: Rng + ?Sized,
    {
        base.check_homogeneous()?;
        let tau = self.sample_inverse(t, rng, &InverseControl::default())?;
        Ok(base.endpoint(tau, rng))
    }
}

/// Chambers-Mallows-Stuck draw with `E e^{-λS} = e^{-λ^α}`.
pub fn positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u = PI * rng.random::<f64>();
    let e: f64 = rng.sample(Exp1);
    let a = (alpha * u).sin() / u.sin().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * u).sin() / e).powf((1.0 - alpha) / alpha);
    a * b
}

/// Root of an increasing `g` with `g(0) = 0` at level `t > 0`.
fn solve_increasing(g: impl Fn(f64) -> f64, t: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while g(hi) < t {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return f64::INFINITY;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if g(mid) < t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// A sampler whose dynamics do not depend on time, so it may be composed with
/// an independent inverse subordinator.
pub trait HomogeneousSampler {
    type State;

    fn check_homogeneous(&self) -> Result<()>;

    fn endpoint<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> Self::State;
}

impl HomogeneousSampler for InteractingSkellamSpec {
    type State = [i64; 2];

    fn check_homogeneous(&self) -> Result<()> {
        if self.is_homogeneous() {
            Ok(())
        } else {
            Err(Error::NotHomogeneous("time change of an interacting Skellam process".into()))
        }
    }

    fn endpoint<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> [i64; 2] {
        self.sample_endpoint(horizon, rng, SamplingMethod::Direct)
    }
}

impl HomogeneousSampler for NhSkellamSpec {
    type State = i64;

    fn check_homogeneous(&self) -> Result<()> {
        if self.rate_up.as_constant().is_some() && self.rate_down.as_constant().is_some() {
            Ok(())
        } else {
            Err(Error::NotHomogeneous("time change of a Skellam process".into()))
        }
    }

    fn endpoint<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> i64 {
        self.sample_endpoint(horizon, rng)
    }
}

impl HomogeneousSampler for BdmSpec {
    type State = [u64; 2];

    fn check_homogeneous(&self) -> Result<()> {
        self.validate()
    }

    fn endpoint<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> [u64; 2] {
        self.sample_endpoint(horizon, rng)
    }
}

impl HomogeneousSampler for PureMigrationSpec {
    type State = u64;

    fn check_homogeneous(&self) -> Result<()> {
        self.validate()
    }

    fn endpoint<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> u64 {
        self.sample_endpoint(horizon, rng)
    }
}

/// `p(x) = Σ_j c_j e^{θ_j x}` for the classical chain, so that the
/// inverse-stable law is `q(t) = Σ_j c_j E_α(θ_j t^α)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FractionalStateDistribution {
    pub states: Vec<Vec<i64>>,
    pub coefficients: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

pub const MAX_CONDITION: f64 = 1e8;

impl FractionalStateDistribution {
    /// Spectral decomposition of `p0 e^{Qx}` via a real Schur form.
    pub fn new(gen: &FiniteGenerator, p0: &[f64]) -> Result<Self> {
        let q = gen.matrix().clone();
        let n = q.nrows();
        ensure(p0.len() == n, || "initial law has the wrong length".into())?;
        let norm = q.amax().max(1.0);
        let (u, t) = Schur::new(q).unpack();
        for i in 1..n {
            if t[(i, i - 1)].abs() > 1e-10 * norm {
                return Err(Error::IllConditioned { condition: f64::INFINITY });
            }
        }
        // right eigenvectors of the triangular factor by back substitution
        let mut y = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            y[(j, j)] = 1.0;
            for i in (0..j).rev() {
                let s: f64 = (i + 1..=j).map(|k| t[(i, k)] * y[(k, j)]).sum();
                let mut d = t[(i, i)] - t[(j, j)];
                if d.abs() < f64::EPSILON * norm {
                    d = f64::EPSILON * norm;
                }
                y[(i, j)] = -s / d;
            }
        }
        let v = &u * y;
        let w = v.clone().try_inverse().ok_or(Error::IllConditioned { condition: f64::INFINITY })?;
        let condition = v.norm() * w.norm();
        if !condition.is_finite() || condition > MAX_CONDITION {
            return Err(Error::IllConditioned { condition });
        }
        let p = DVector::from_column_slice(p0);
        let weights = v.tr_mul(&p);
        let mut eigenvalues = Vec::with_capacity(n);
        let mut coefficients = Vec::with_capacity(n);
        for j in 0..n {
            let theta = t[(j, j)];
            if theta > 1e-9 * norm {
                return Err(Error::Domain(format!("generator has a positive eigenvalue {theta}")));
            }
            eigenvalues.push(theta.min(0.0));
            coefficients.push(w.row(j).iter().map(|x| x * weights[j]).collect());
        }
        Ok(FractionalStateDistribution { states: gen.states().to_vec(), coefficients, eigenvalues })
    }

    fn combine(&self, weight: impl Fn(f64) -> Result<f64>) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.states.len()];
        for (c, &theta) in self.coefficients.iter().zip(&self.eigenvalues) {
            let w = weight(theta)?;
            for (o, x) in out.iter_mut().zip(c) {
                *o += w * x;
            }
        }
        Ok(out)
    }

    /// Classical law `p(x)`.
    pub fn classical(&self, x: f64) -> Result<Vec<f64>> {
        ensure_time(x)?;
        self.combine(|theta| Ok((theta * x).exp()))
    }

    /// `q(t)`, with entries clipped at zero.
    pub fn pmf(&self, alpha: f64, t: f64) -> Result<Vec<f64>> {
        ensure_time(t)?;
        Ok(self.raw_pmf(alpha, t)?.into_iter().map(|x| x.max(0.0)).collect())
    }

    fn raw_pmf(&self, alpha: f64, t: f64) -> Result<Vec<f64>> {
        let ctl = SeriesControl::default();
        let ta = t.powf(alpha);
        self.combine(|theta| mittag_leffler(alpha, theta * ta, &ctl))
    }

    /// `max_i |D^α q_i(t) - (q(t) Q)_i|` with `D^α q` taken term-wise from
    /// `D^α E_α(θ t^α) = θ E_α(θ t^α)`.
    pub fn master_residual(&self, gen: &FiniteGenerator, alpha: f64, t: f64) -> Result<f64> {
        let ctl = SeriesControl::default();
        let ta = t.powf(alpha);
        let lhs = self.combine(|theta| Ok(theta * mittag_leffler(alpha, theta * ta, &ctl)?))?;
        let q = DVector::from_vec(self.raw_pmf(alpha, t)?);
        let rhs = gen.matrix().tr_mul(&q);
        Ok(lhs.iter().zip(rhs.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FractionalMethod {
    Spectral,
    LaplaceInversion,
}

/// Law at `t` of a finite chain run on the inverse `α`-stable clock.
pub fn fractional_distribution(
    gen: &FiniteGenerator,
    alpha: f64,
    t: f64,
    initial: &[i64],
) -> Result<(Vec<f64>, FractionalMethod)> {
    ensure(alpha > 0.0 && alpha <= 1.0, || format!("α must lie in (0, 1], got {alpha}"))?;
    ensure_time(t)?;
    let p0 = gen.point_mass(initial)?;
    match FractionalStateDistribution::new(gen, &p0) {
        Ok(d) => Ok((d.pmf(alpha, t)?, FractionalMethod::Spectral)),
        Err(Error::IllConditioned { .. }) => Ok((talbot_pmf(gen, &p0, alpha, t)?, FractionalMethod::LaplaceInversion)),
        Err(e) => Err(e),
    }
}

const TALBOT_NODES: usize = 32;

/// Fixed-Talbot inversion of `s^{α-1} p0 (s^α I - Q)^{-1}`.
pub fn talbot_pmf(gen: &FiniteGenerator, p0: &[f64], alpha: f64, t: f64) -> Result<Vec<f64>> {
    ensure_time(t)?;
    if t == 0.0 {
        return Ok(p0.to_vec());
    }
    let n = gen.len();
    let qt: DMatrix<Complex<f64>> = gen.matrix().transpose().map(|x| Complex::new(x, 0.0));
    let rhs: DVector<Complex<f64>> = DVector::from_iterator(n, p0.iter().map(|&x| Complex::new(x, 0.0)));
    let transform = |s: Complex<f64>| -> Result<DVector<Complex<f64>>> {
        let sa = s.powf(alpha);
        let m = DMatrix::from_diagonal_element(n, n, sa) - &qt;
        let x = m.lu().solve(&rhs).ok_or(Error::IllConditioned { condition: f64::INFINITY })?;
        Ok(x * s.powf(alpha - 1.0))
    };
    let m = TALBOT_NODES as f64;
    let r = 2.0 * m / (5.0 * t);
    let mut acc: Vec<f64> = transform(Complex::new(r, 0.0))?.iter().map(|z| 0.5 * (z * (r * t).exp()).re).collect();
    for k in 1..TALBOT_NODES {
        let theta = k as f64 * PI / m;
        let cot = theta.cos() / theta.sin();
        let s = Complex::new(r * theta * cot, r * theta);
        let sigma = theta + (theta * cot - 1.0) * cot;
        let factor = (s * t).exp() * Complex::new(1.0, sigma);
        for (a, z) in acc.iter_mut().zip(transform(s)?.iter()) {
            *a += (z * factor).re;
        }
    }
    Ok(acc.into_iter().map(|x| (x * r / m).max(0.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::{replicate, replicate_rng};
    use crate::oracle::{build_death_migration_generator, build_pure_migration_generator};
    use crate::stats::{chi_square_gof, histogram, mean_estimate};

    const FRACTIONAL_PM: [f64; 4] = [
        0.03212299754907119586114397,
        0.2106848072481762903606021,
        0.4822613928564338316953638,
        0.2749308023463186820828901,
    ];
    const MEAN_L1_ALPHA07: f64 = 1.100547405523665712634281;

    #[test]
    fn symbols() {
        assert_eq!(BernsteinSpec::stable(0.5).unwrap().levy_symbol(4.0).unwrap(), 2.0);
        let mut s = BernsteinSpec::stable(0.5).unwrap();
        s.killing = 0.3;
        assert_eq!(s.levy_symbol(0.0).unwrap(), 0.3);
        let g = BernsteinSpec::gamma(1.0, 1.0).unwrap();
        assert!((g.levy_symbol(std::f64::consts::E - 1.0).unwrap() - 1.0).abs() < 1e-15);
        // tabulated ν(w) = e^{-w} on [1e-9, 60] approximates gamma(1, 1)
        let grid: Vec<f64> = (0..=6000).map(|i| 1e-9 + i as f64 * 0.01).collect();
        let density: Vec<f64> = grid.iter().map(|w| (-w).exp() / w).collect();
        let tab = BernsteinSpec {
            family: SubordinatorFamily::TabulatedTail { grid, density },
            drift: 0.0,
            killing: 0.0,
        };
        assert!(tab.levy_symbol(0.0).unwrap().abs() < 1e-15);
        assert!(tab.sample_inverse(1.0, &mut replicate_rng(0, 0), &InverseControl::default()).is_err());
        assert!(BernsteinSpec::stable(1.5).is_err());
        assert!(BernsteinSpec::gamma(0.0, 1.0).is_err());
    }

    #[test]
    fn pure_drift() {
        let s = BernsteinSpec { family: SubordinatorFamily::Stable { alpha: 1.0 }, drift: 0.0, killing: 0.0 };
        let mut rng = replicate_rng(2, 0);
        let h = s.sample_subordinator(&[0.5, 1.0, 2.5], &mut rng).unwrap();
        assert_eq!(h, vec![0.5, 1.0, 2.5]);
        let l = s.sample_inverse(1.7, &mut rng, &InverseControl::default()).unwrap();
        assert!((l - 1.7).abs() < 1e-12);
        assert_eq!(s.sample_inverse(0.0, &mut rng, &InverseControl::default()).unwrap(), 0.0);
        assert!((s.laplace_of_inverse(2.0, 0.7).unwrap() - (-1.4f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn stable_subordinator_laplace() {
        let s = BernsteinSpec::stable(0.6).unwrap();
        let xs = replicate(3, 100_000, |rng, _| (-s.sample_subordinator(&[1.0], rng).unwrap()[0]).exp());
        assert!(mean_estimate(&xs).within((-1f64).exp(), 3.0));
        let paths = replicate(4, 200, |rng, _| s.sample_subordinator(&[0.1, 0.2, 0.5, 0.9, 2.0], rng).unwrap());
        assert!(paths.iter().all(|p| p.windows(2).all(|w| w[0] <= w[1]) && p[0] >= 0.0));
    }

    #[test]
    fn inverse_mean_and_laplace() {
        let s = BernsteinSpec::stable(0.7).unwrap();
        let ls = replicate(5, 100_000, |rng, _| s.sample_inverse(1.0, rng, &InverseControl::default()).unwrap());
        assert!(mean_estimate(&ls).within(MEAN_L1_ALPHA07, 3.0));
        let lt: Vec<f64> = ls.iter().map(|l| (-2.0 * l).exp()).collect();
        assert!(mean_estimate(&lt).within(s.laplace_of_inverse(1.0, 2.0).unwrap(), 3.0));
        assert_eq!(s.laplace_of_inverse(1.3, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn gamma_inverse_matches_path_inverse() {
        let g = BernsteinSpec { family: SubordinatorFamily::Gamma { shape: 2.0, rate: 1.5 }, drift: 0.2, killing: 0.0 };
        let n = 20_000;
        let a = replicate(6, n, |rng, _| g.sample_inverse(1.5, rng, &InverseControl::default()).unwrap());
        let b = replicate(7, n, |rng, _| g.sample_inverse_path(&[1.5], 1e-3, rng).unwrap().values[0]);
        let (ma, mb) = (mean_estimate(&a), mean_estimate(&b));
        let se = (ma.std_error.powi(2) + mb.std_error.powi(2)).sqrt();
        assert!((ma.mean - mb.mean).abs() < 3.0 * se + 1e-3, "{ma:?} {mb:?}");
        // P{L(t) > x} = P{H(x) < t}
        let x = 0.8;
        let below = replicate(8, n, |rng, _| (g.sample_subordinator(&[x], rng).unwrap()[0] < 1.5) as u8 as f64);
        let above: Vec<f64> = a.iter().map(|l| (*l > x) as u8 as f64).collect();
        let (p, q) = (mean_estimate(&below), mean_estimate(&above));
        assert!((p.mean - q.mean).abs() < 3.0 * (p.std_error.powi(2) + q.std_error.powi(2)).sqrt() + 1e-3);
    }

    #[test]
    fn killing_caps_inverse() {
        let s = BernsteinSpec { family: SubordinatorFamily::Stable { alpha: 0.5 }, drift: 0.0, killing: 2.0 };
        let xs = replicate(9, 50_000, |rng, _| s.sample_inverse(1e6, rng, &InverseControl::default()).unwrap());
        assert!(mean_estimate(&xs).within(0.5, 3.0));
    }

    #[test]
    fn inverse_paths_monotone() {
        let s = BernsteinSpec::stable(0.5).unwrap();
        let grid: Vec<f64> = (0..50).map(|i| i as f64 * 0.05).collect();
        for i in 0..50 {
            let p = s.sample_inverse_path(&grid, 1e-3, &mut replicate_rng(10, i)).unwrap();
            assert_eq!(p.values[0], 0.0);
            assert!(p.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn renewal() {
        let one = BernsteinSpec { family: SubordinatorFamily::Stable { alpha: 1.0 }, drift: 0.0, killing: 0.0 };
        assert!((one.renewal_waiting_survival(2.0, 0.4).unwrap() - (-0.8f64).exp()).abs() < 1e-15);
        let s = BernsteinSpec::stable(0.6).unwrap();
        assert_eq!(s.renewal_waiting_survival(2.0, 0.0).unwrap(), 1.0);
        assert!(s.renewal_waiting_survival(0.0, 1.0).is_err());
        let g = BernsteinSpec::gamma(1.0, 1.0).unwrap();
        assert!(matches!(g.laplace_of_inverse(1.0, 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn time_change_composition() {
        let one = BernsteinSpec { family: SubordinatorFamily::Stable { alpha: 1.0 }, drift: 0.0, killing: 0.0 };
        let base = InteractingSkellamSpec::constant([1.0, 0.5, 0.3, 0.8, 0.2, 0.4, 0.6, 0.1], [2, 1]).unwrap();
        let a = one.time_changed_sample(&base, 1.3, &mut replicate_rng(11, 0)).unwrap();
        let b = base.sample_endpoint(1.3, &mut replicate_rng(11, 0), SamplingMethod::Direct);
        assert_eq!(a, b);
        let s = BernsteinSpec::stable(0.5).unwrap();
        assert_eq!(s.time_changed_sample(&base, 0.0, &mut replicate_rng(11, 1)).unwrap(), [2, 1]);
        let mut nh = base.clone();
        nh.lambda1 = crate::ratefn::RateFunction::piecewise(vec![0.0, 1.0], vec![1.0, 2.0]).unwrap();
        assert!(matches!(s.time_changed_sample(&nh, 1.0, &mut replicate_rng(11, 2)), Err(Error::NotHomogeneous(_))));
    }

    #[test]
    fn fractional_pure_migration() {
        let pm = PureMigrationSpec::new(1.0, 2.0, [2, 1]).unwrap();
        let g = build_pure_migration_generator(&pm).unwrap();
        let (q, method) = fractional_distribution(&g, 0.6, 1.0, &[2]).unwrap();
        assert_eq!(method, FractionalMethod::Spectral);
        for (a, b) in q.iter().zip(FRACTIONAL_PM) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let d = FractionalStateDistribution::new(&g, &g.point_mass(&[2]).unwrap()).unwrap();
        assert!(d.master_residual(&g, 0.6, 1.0).unwrap() < 1e-8);
        let z = d.pmf(0.6, 0.0).unwrap();
        assert!((z[2] - 1.0).abs() < 1e-12 && z.iter().sum::<f64>() - 1.0 < 1e-12);
        let talbot = talbot_pmf(&g, &g.point_mass(&[2]).unwrap(), 0.6, 1.0).unwrap();
        for (a, b) in talbot.iter().zip(FRACTIONAL_PM) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn alpha_one_is_classical() {
        let s = BdmSpec::death_migration([1.0, 2.0], [0.5, 0.25], [3, 2]).unwrap();
        let g = build_death_migration_generator(&s).unwrap();
        let (q, _) = fractional_distribution(&g, 1.0, 0.7, &[3, 2]).unwrap();
        let u = g.transient_pmf(&[3, 2], 0.7).unwrap();
        assert!(q.iter().zip(&u).all(|(a, b)| (a - b).abs() < 1e-10));
        let d = FractionalStateDistribution::new(&g, &g.point_mass(&[3, 2]).unwrap()).unwrap();
        let c = d.classical(0.7).unwrap();
        assert!(c.iter().zip(&u).all(|(a, b)| (a - b).abs() < 1e-10));
        for alpha in [0.3, 0.55, 0.8] {
            let q = d.pmf(alpha, 1.2).unwrap();
            assert!(q.iter().all(|x| *x >= 0.0));
            assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert!(d.master_residual(&g, alpha, 1.2).unwrap() < 1e-8);
        }
    }

    #[test]
    fn fractional_mean_is_continuous_in_alpha() {
        let pm = PureMigrationSpec::new(1.0, 2.0, [0, 3]).unwrap();
        let g = build_pure_migration_generator(&pm).unwrap();
        let d = FractionalStateDistribution::new(&g, &g.point_mass(&[0]).unwrap()).unwrap();
        let mean = |alpha: f64| d.pmf(alpha, 1.0).unwrap().iter().enumerate().map(|(k, p)| k as f64 * p).sum::<f64>();
        let classical: f64 = pm.pmf_table(1.0).unwrap().iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        assert!((mean(1.0) - classical).abs() < 1e-10);
        let values: Vec<f64> = (20..=100).map(|i| mean(i as f64 * 0.01)).collect();
        let steps: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
        for w in steps.windows(2) {
            assert!((w[1] - w[0]).abs() < 1e-3, "{w:?}");
        }
    }

    #[test]
    fn time_changed_migration_matches_spectral_law() {
        let pm = PureMigrationSpec::new(1.0, 2.0, [2, 1]).unwrap();
        let s = BernsteinSpec::stable(0.6).unwrap();
        let n = 50_000;
        let ends = replicate(12, n, |rng, _| s.time_changed_sample(&pm, 1.0, rng).unwrap());
        let h = histogram(ends);
        let cells: Vec<(u64, f64)> = FRACTIONAL_PM.iter().enumerate().map(|(k, p)| (*h.get(&(k as u64)).unwrap_or(&0), *p)).collect();
        assert!(chi_square_gof(&cells, n).p_value > 1e-3);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let specs = [
            BernsteinSpec::stable(0.4).unwrap(),
            BernsteinSpec { family: SubordinatorFamily::Gamma { shape: 2.0, rate: 0.5 }, drift: 0.1, killing: 0.2 },
            BernsteinSpec {
                family: SubordinatorFamily::TabulatedTail { grid: vec![0.1, 1.0], density: vec![2.0, 0.5] },
                drift: 0.0,
                killing: 0.0,
            },
        ];
        for s in specs {
            let text = serde_json::to_string(&s).unwrap();
            assert_eq!(serde_json::from_str::<BernsteinSpec>(&text).unwrap(), s);
        }
        let parsed: BernsteinSpec = serde_json::from_str(r#"{"family": {"kind": "stable", "alpha": 0.5}}"#).unwrap();
        assert_eq!(parsed, BernsteinSpec::stable(0.5).unwrap());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn fractional_pmf_is_a_probability_vector(
            alpha in 0.05f64..=1.0,
            t in 0.0f64..5.0,
            eta1 in 0.1f64..3.0,
            eta2 in 0.1f64..3.0,
            n1 in 0u64..4,
            n2 in 0u64..4,
        ) {
            let pm = PureMigrationSpec::new(eta1, eta2, [n1, n2]).unwrap();
            let g = build_pure_migration_generator(&pm).unwrap();
            let (q, _) = fractional_distribution(&g, alpha, t, &[n1 as i64]).unwrap();
            proptest::prop_assert!(q.iter().all(|x| *x >= 0.0));
            proptest::prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn inverse_laplace_transform_is_monotone(alpha in 0.05f64..=1.0, y in 0.0f64..5.0, t in 0.0f64..4.0, dt in 0.0f64..1.0) {
            let s = BernsteinSpec::stable(alpha).unwrap();
            let a = s.laplace_of_inverse(t, y).unwrap();
            let b = s.laplace_of_inverse(t + dt, y).unwrap();
            proptest::prop_assert!(a > 0.0 && a <= 1.0);
            proptest::prop_assert!(b <= a + 1e-13);
        }

        #[test]
        fn levy_symbol_is_non_decreasing(x in 0.0f64..50.0, dx in 0.0f64..5.0, shape in 0.1f64..4.0, rate in 0.1f64..4.0) {
            let g = BernsteinSpec { family: SubordinatorFamily::Gamma { shape, rate }, drift: 0.3, killing: 0.1 };
            proptest::prop_assert!(g.levy_symbol(x + dx).unwrap() >= g.levy_symbol(x).unwrap());
        }
    }
}
