//! Non-homogeneous Poisson and Skellam processes.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{ensure, ensure_time, Error, Result};
use crate::ratefn::RateFunction;
use crate::specfun::{ln_bessel_i, SeriesControl};

/// `ln` of the smallest positive double; pmfs below this are reported as 0.
pub const LN_UNDERFLOW: f64 = -745.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NhPoissonSpec {
    pub rate: RateFunction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NhSkellamSpec {
    pub rate_up: RateFunction,
    pub rate_down: RateFunction,
    #[serde(default)]
    pub initial: i64,
}

/// `S(t) = initial + Σ_i i N_i(t)` with independent Poisson `N_i`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedSkellamSpec {
    pub rates: BTreeMap<i64, RateFunction>,
    #[serde(default)]
    pub initial: i64,
}

/// Event times with their jump vectors; `dim` components per event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub dim: usize,
    pub initial: Vec<i64>,
    pub horizon: f64,
    pub times: Vec<f64>,
    jumps: Vec<i64>,
}

impl SamplePath {
    pub fn new(initial: Vec<i64>, horizon: f64) -> Self {
        SamplePath { dim: initial.len(), initial, horizon, times: Vec::new(), jumps: Vec::new() }
    }

    pub fn push(&mut self, time: f64, jump: &[i64]) {
        debug_assert_eq!(jump.len(), self.dim);
        debug_assert!(self.times.last().is_none_or(|&t| t < time) && time <= self.horizon);
        self.times.push(time);
        self.jumps.extend_from_slice(jump);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn jump(&self, i: usize) -> &[i64] {
        &self.jumps[i * self.dim..(i + 1) * self.dim]
    }

    pub fn events(&self) -> impl Iterator<Item = (f64, &[i64])> + '_ {
        self.times.iter().copied().zip(self.jumps.chunks(self.dim.max(1)))
    }

    /// State just after all events at times `<= t`.
    pub fn state_at(&self, t: f64) -> Vec<i64> {
        let mut s = self.initial.clone();
        for (_, j) in self.events().take_while(|(time, _)| *time <= t) {
            s.iter_mut().zip(j).for_each(|(x, d)| *x += d);
        }
        s
    }

    pub fn endpoint(&self) -> Vec<i64> {
        self.state_at(f64::INFINITY)
    }

    /// Interleaves several paths of the same dimension in time order.
    pub fn merge(initial: Vec<i64>, horizon: f64, parts: &[SamplePath]) -> SamplePath {
        let mut events: Vec<(f64, &[i64])> = parts.iter().flat_map(|p| p.events()).collect();
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out = SamplePath::new(initial, horizon);
        for (t, j) in events {
            out.times.push(t);
            out.jumps.extend_from_slice(j);
        }
        out
    }
}

pub fn poisson_ln_pmf(lambda: f64, k: u64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    -lambda + k as f64 * lambda.ln() - ln_factorial(k)
}

fn floor_exp(ln_p: f64) -> f64 {
    if ln_p < LN_UNDERFLOW {
        0.0
    } else {
        ln_p.exp()
    }
}

/// `P(X = k)` for `X ~ Poisson(lambda)`.
pub fn poisson_pmf_value(lambda: f64, k: i64) -> Result<f64> {
    ensure(k >= 0, || format!("count must be >= 0, got {k}"))?;
    Ok(floor_exp(poisson_ln_pmf(lambda, k as u64)))
}

/// `P(N_up - N_down = d)` for independent Poisson means `up`, `down`.
pub fn skellam_pmf_value(up: f64, down: f64, d: i64, ctl: &SeriesControl) -> Result<f64> {
    if down == 0.0 {
        return Ok(if d < 0 { 0.0 } else { floor_exp(poisson_ln_pmf(up, d as u64)) });
    }
    if up == 0.0 {
        return Ok(if d > 0 { 0.0 } else { floor_exp(poisson_ln_pmf(down, d.unsigned_abs())) });
    }
    let ln_p = -(up + down) + 0.5 * d as f64 * (up.ln() - down.ln()) + ln_bessel_i(d, 2.0 * (up * down).sqrt(), ctl)?;
    Ok(floor_exp(ln_p).min(1.0))
}

pub fn skellam_pgf_value(up: f64, down: f64, u: f64) -> f64 {
    (-(up * (1.0 - u)) - down * (1.0 - 1.0 / u)).exp()
}

fn check_unit(u: f64) -> Result<()> {
    if u > 0.0 && u <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("generating-function argument must lie in (0, 1], got {u}")))
    }
}

impl NhPoissonSpec {
    pub fn new(rate: RateFunction) -> Result<Self> {
        rate.validate()?;
        Ok(NhPoissonSpec { rate })
    }

    pub fn pmf(&self, t: f64, k: i64) -> Result<f64> {
        poisson_pmf_value(self.rate.cumulative(t)?, k)
    }

    pub fn sample<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> Result<SamplePath> {
        check_horizon(horizon)?;
        let mut path = SamplePath::new(vec![0], horizon);
        thin(&self.rate, 0.0, horizon, rng, |t| path.push(t, &[1]));
        Ok(path)
    }
}

impl NhSkellamSpec {
    pub fn new(rate_up: RateFunction, rate_down: RateFunction, initial: i64) -> Result<Self> {
        let s = NhSkellamSpec { rate_up, rate_down, initial };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(up: f64, down: f64, initial: i64) -> Result<Self> {
        Self::new(RateFunction::constant(up), RateFunction::constant(down), initial)
    }

    pub fn validate(&self) -> Result<()> {
        self.rate_up.validate()?;
        self.rate_down.validate()
    }

    /// `(Λ_up(t), Λ_down(t))`.
    pub fn cumulatives(&self, t: f64) -> Result<(f64, f64)> {
        Ok((self.rate_up.cumulative(t)?, self.rate_down.cumulative(t)?))
    }

    /// `P(S(t) = n)`.
    pub fn pmf(&self, t: f64, n: i64) -> Result<f64> {
        let (up, down) = self.cumulatives(t)?;
        skellam_pmf_value(up, down, n - self.initial, &SeriesControl::default())
    }

    /// `E u^{S(t)}`, finite for every `u > 0`.
    pub fn pgf(&self, t: f64, u: f64) -> Result<f64> {
        if !(u > 0.0 && u.is_finite()) {
            return Err(Error::Domain(format!("generating-function argument must be positive, got {u}")));
        }
        let (up, down) = self.cumulatives(t)?;
        Ok(u.powi(self.initial as i32) * skellam_pgf_value(up, down, u))
    }

    pub fn mean(&self, t: f64) -> Result<f64> {
        let (up, down) = self.cumulatives(t)?;
        Ok(self.initial as f64 + up - down)
    }

    pub fn sample<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> Result<SamplePath> {
        check_horizon(horizon)?;
        let mut up = SamplePath::new(vec![0], horizon);
        thin(&self.rate_up, 0.0, horizon, rng, |t| up.push(t, &[1]));
        let mut down = SamplePath::new(vec![0], horizon);
        thin(&self.rate_down, 0.0, horizon, rng, |t| down.push(t, &[-1]));
        Ok(SamplePath::merge(vec![self.initial], horizon, &[up, down]))
    }

    /// Endpoint `S(horizon)` without building the path.
    pub fn sample_endpoint<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> i64 {
        let mut s = self.initial;
        thin(&self.rate_up, 0.0, horizon, rng, |_| s += 1);
        thin(&self.rate_down, 0.0, horizon, rng, |_| s -= 1);
        s
    }
}

impl GeneralizedSkellamSpec {
    pub fn new(rates: BTreeMap<i64, RateFunction>, initial: i64) -> Result<Self> {
        let s = GeneralizedSkellamSpec { rates, initial };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(!self.rates.contains_key(&0), || "jump size 0 is not allowed".into())?;
        self.rates.values().try_for_each(RateFunction::validate)
    }

    pub fn jumps(&self) -> impl Iterator<Item = i64> + '_ {
        self.rates.keys().copied()
    }

    /// `E u^{S(t)} = u^{initial} exp(-Σ_i Λ_i(t)(1 - u^i))`.
    pub fn pgf(&self, t: f64, u: f64) -> Result<f64> {
        check_unit(u)?;
        ensure_time(t)?;
        let exponent: f64 = self
            .rates
            .iter()
            .map(|(&i, r)| r.integral(t) * (1.0 - u.powi(i as i32)))
            .sum();
        Ok(u.powi(self.initial as i32) * (-exponent).exp())
    }

    pub fn mean(&self, t: f64) -> Result<f64> {
        ensure_time(t)?;
        Ok(self.initial as f64 + self.rates.iter().map(|(&i, r)| i as f64 * r.integral(t)).sum::<f64>())
    }

    pub fn sample<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> Result<SamplePath> {
        check_horizon(horizon)?;
        let parts: Vec<SamplePath> = self
            .rates
            .iter()
            .map(|(&i, r)| {
                let mut p = SamplePath::new(vec![0], horizon);
                thin(r, 0.0, horizon, rng, |t| p.push(t, &[i]));
                p
            })
            .collect();
        Ok(SamplePath::merge(vec![self.initial], horizon, &parts))
    }
}

pub(crate) fn check_horizon(horizon: f64) -> Result<()> {
    if horizon > 0.0 && horizon.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("horizon must be positive and finite, got {horizon}")))
    }
}

/// Interval-wise thinning: on each stretch between breakpoints of `rate`,
/// propose from a homogeneous stream at the majorant and keep a point at `s`
/// with probability `rate(s) / majorant`.
pub(crate) fn thin<R: Rng + ?Sized>(rate: &RateFunction, t0: f64, t1: f64, rng: &mut R, mut on_event: impl FnMut(f64)) {
    let mut cuts: Vec<f64> = rate.breakpoints().into_iter().filter(|&b| b > t0 && b < t1).collect();
    cuts.insert(0, t0);
    cuts.push(t1);
    let exact = rate.as_constant().is_some() || matches!(rate, RateFunction::Piecewise { .. });
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        // piecewise rates are constant on [a, b)
        let m = if exact { rate.rate_at(a) } else { rate.majorant(a, b) };
        if m <= 0.0 {
            continue;
        }
        let mut t = a;
        loop {
            t += rng.sample::<f64, _>(Exp1) / m;
            if t >= b {
                break;
            }
            if exact || rng.random::<f64>() * m < rate.rate_at(t) {
                on_event(t);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::{replicate, replicate_rng};
    use crate::specfun::poisson_truncation;
    use crate::stats::{chi_square_gof, histogram, mean_estimate};

    fn ctl() -> SeriesControl {
        SeriesControl::default()
    }

    fn pois(c: f64) -> NhPoissonSpec {
        NhPoissonSpec::new(RateFunction::constant(c)).unwrap()
    }

    #[test]
    fn poisson_pmf_examples() {
        assert_eq!(pois(1.0).pmf(0.0, 0).unwrap(), 1.0);
        assert!((pois(2.0).pmf(1.0, 0).unwrap() - (-2f64).exp()).abs() < 1e-16);
        let total: f64 = (0..=60).map(|k| pois(2.0).pmf(1.0, k).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(pois(2.0).pmf(1.0, -1).is_err());
    }

    #[test]
    fn skellam_pmf_examples() {
        let s = NhSkellamSpec::constant(1.0, 1.0, 0).unwrap();
        assert!((s.pmf(1.0, 0).unwrap() - 0.3085083225536710395333843).abs() < 1e-15);
        for n in 1..10 {
            assert_eq!(s.pmf(2.0, n).unwrap(), s.pmf(2.0, -n).unwrap());
        }
        let shifted = NhSkellamSpec::constant(1.0, 2.0, 4).unwrap();
        assert_eq!(shifted.pmf(0.0, 4).unwrap(), 1.0);
        assert_eq!(shifted.pmf(0.0, 5).unwrap(), 0.0);
    }

    #[test]
    fn skellam_degenerate_branches_are_poisson() {
        let up_only = NhSkellamSpec::constant(1.5, 0.0, 2).unwrap();
        assert!((up_only.pmf(1.0, 4).unwrap() - 1.5f64.powi(2) / 2.0 * (-1.5f64).exp()).abs() < 1e-15);
        assert_eq!(up_only.pmf(1.0, 1).unwrap(), 0.0);
        let down_only = NhSkellamSpec::constant(0.0, 1.5, 2).unwrap();
        assert!((down_only.pmf(1.0, 1).unwrap() - 1.5 * (-1.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn skellam_matches_poisson_convolution() {
        let (a, b) = (2.3, 0.7);
        for d in -6..=8i64 {
            let conv: f64 = (0..80u64)
                .filter(|&k| k as i64 + d >= 0)
                .map(|k| poisson_pmf_value(a, k as i64 + d).unwrap() * poisson_pmf_value(b, k as i64).unwrap())
                .sum();
            assert!((skellam_pmf_value(a, b, d, &ctl()).unwrap() - conv).abs() < 1e-15);
        }
    }

    #[test]
    fn large_means_do_not_overflow() {
        let p = skellam_pmf_value(900.0, 850.0, 50, &ctl()).unwrap();
        assert!(p > 0.0 && p < 1.0);
        assert_eq!(skellam_pmf_value(900.0, 850.0, -2000, &ctl()).unwrap(), 0.0);
    }

    #[test]
    fn generalized_pgf_examples() {
        let mut rates = BTreeMap::new();
        rates.insert(1, RateFunction::constant(1.0));
        rates.insert(-1, RateFunction::constant(1.0));
        let g = GeneralizedSkellamSpec::new(rates, 0).unwrap();
        assert_eq!(g.pgf(3.0, 1.0).unwrap(), 1.0);
        assert_eq!(g.pgf(0.0, 0.3).unwrap(), 1.0);
        assert!((g.pgf(1.0, 0.5).unwrap() - 0.5f64.exp()).abs() < 1e-15);
        assert!(g.pgf(1.0, 0.0).is_err());
        let mut bad = BTreeMap::new();
        bad.insert(0, RateFunction::constant(1.0));
        assert!(GeneralizedSkellamSpec::new(bad, 0).is_err());
    }

    #[test]
    fn generalized_pgf_mc_mean() {
        let mut rates = BTreeMap::new();
        rates.insert(1, RateFunction::constant(1.0));
        rates.insert(-1, RateFunction::constant(1.0));
        let g = GeneralizedSkellamSpec::new(rates, 0).unwrap();
        let draws = replicate(11, 100_000, |rng, _| 0.5f64.powi(g.sample(1.0, rng).unwrap().endpoint()[0] as i32));
        assert!(mean_estimate(&draws).within(g.pgf(1.0, 0.5).unwrap(), 3.0));
    }

    #[test]
    fn sampler_trivial_cases() {
        let mut rng = replicate_rng(1, 0);
        assert!(pois(0.0).sample(5.0, &mut rng).unwrap().is_empty());
        let gated = NhPoissonSpec::new(RateFunction::piecewise(vec![0.0, 1.0], vec![0.0, 5.0]).unwrap()).unwrap();
        for _ in 0..100 {
            assert!(gated.sample(1.0, &mut rng).unwrap().is_empty());
        }
        let s = NhSkellamSpec::constant(2.0, 0.0, 3).unwrap();
        let p = s.sample(4.0, &mut rng).unwrap();
        assert!(p.events().all(|(_, j)| j == [1]));
        assert!(p.times.windows(2).all(|w| w[0] < w[1]));
        assert!(pois(1.0).sample(0.0, &mut rng).is_err());
    }

    #[test]
    fn thinning_count_mean() {
        let spec = pois(3.0);
        let counts = replicate(5, 100_000, |rng, _| spec.sample(2.0, rng).unwrap().len() as f64);
        assert!(mean_estimate(&counts).within(6.0, 3.0));
    }

    #[test]
    fn thinning_tabulated_endpoint_gof() {
        let rate = RateFunction::tabulated(vec![0.0, 1.0, 2.0], vec![0.5, 4.0, 1.0]).unwrap();
        let spec = NhPoissonSpec::new(rate).unwrap();
        let n = 100_000;
        let counts = replicate(9, n, |rng, _| spec.sample(2.5, rng).unwrap().len() as i64);
        let h = histogram(counts);
        let k_max = poisson_truncation(spec.rate.cumulative(2.5).unwrap(), 1e-12) as i64;
        let cells: Vec<(u64, f64)> = (0..=k_max)
            .map(|k| (*h.get(&k).unwrap_or(&0), spec.pmf(2.5, k).unwrap()))
            .collect();
        assert!(chi_square_gof(&cells, n).p_value > 1e-3);
    }

    #[test]
    fn skellam_sampler_gof_and_drift() {
        let s = NhSkellamSpec::new(
            RateFunction::piecewise(vec![0.0, 0.5], vec![1.0, 3.0]).unwrap(),
            RateFunction::tabulated(vec![0.0, 1.0], vec![2.0, 0.5]).unwrap(),
            -2,
        )
        .unwrap();
        let n = 100_000;
        let ends = replicate(21, n, |rng, _| s.sample(1.0, rng).unwrap().endpoint()[0]);
        let h = histogram(ends.iter().copied());
        let cells: Vec<(u64, f64)> = (-20..=20).map(|k| (*h.get(&k).unwrap_or(&0), s.pmf(1.0, k).unwrap())).collect();
        assert!(chi_square_gof(&cells, n).p_value > 1e-3);

        let sym = NhSkellamSpec::constant(1.5, 1.5, 7).unwrap();
        let ends: Vec<f64> = replicate(22, n, |rng, _| sym.sample_endpoint(2.0, rng) as f64);
        assert!(mean_estimate(&ends).within(7.0, 3.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn skellam_normalizes(up in 0.0..30.0f64, down in 0.0..30.0f64, init in -5i64..5) {
                let s = NhSkellamSpec::constant(up, down, init).unwrap();
                let n = poisson_truncation(up, 1e-13).max(poisson_truncation(down, 1e-13)) as i64;
                let total: f64 = (init - n..=init + n).map(|k| s.pmf(1.0, k).unwrap()).sum();
                prop_assert!((total - 1.0).abs() < 1e-10, "{}", total);
            }

            #[test]
            fn pgf_at_one_and_mean(up in 0.0..5.0f64, down in 0.0..5.0f64, two in 0.0..2.0f64, t in 0.0..2.0f64) {
                let mut rates = BTreeMap::new();
                rates.insert(1, RateFunction::constant(up));
                rates.insert(-1, RateFunction::constant(down));
                rates.insert(2, RateFunction::piecewise(vec![0.0, 1.0], vec![two, 0.5]).unwrap());
                let g = GeneralizedSkellamSpec::new(rates, 0).unwrap();
                prop_assert_eq!(g.pgf(t, 1.0).unwrap(), 1.0);
                // second-order one-sided difference at u = 1
                let h = 5e-6;
                let g = |u: f64| g.pgf(t, u).unwrap();
                let slope = (3.0 * g(1.0) - 4.0 * g(1.0 - h) + g(1.0 - 2.0 * h)) / (2.0 * h);
                let mean: f64 = up * t - down * t + 2.0 * (two * t.min(1.0) + 0.5 * (t - 1.0).max(0.0));
                prop_assert!((slope - mean).abs() < 1e-6, "{} vs {}", slope, mean);
            }
        }
    }
}
