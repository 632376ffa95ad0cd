//! Linear birth-death-migration vector processes.
//!
//! Each unit of group `i` gives birth at rate `λi`, dies at rate `μi` and
//! moves to the other group at rate `ηi`. Rates are constant, apart from the
//! fully symmetric death-migration generating function which accepts rate
//! functions.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{ensure, ensure_time, Error, Result};
use crate::ode::{integrate, OdeOptions};
use crate::ratefn::RateFunction;
use crate::skellam::{check_horizon, SamplePath};
use crate::specfun::{harmonic_number, to_f64};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BdmSpec {
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub initial: [u64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmrCoefficients {
    pub l: f64,
    pub m: f64,
    pub r: f64,
}

/// `N1 = X1 + Y1`, `N2 = X2 + Y2` with `(X1, X2) ~ Multinomial(n1, a1, b1)`
/// and `(Y1, Y2) ~ Multinomial(n2, a2, b2)` independent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultinomialPair {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
    pub n1: u64,
    pub n2: u64,
}

/// First and second factorial moments:
/// `E N1, E N2, E N1N2, E N1(N1-1), E N2(N2-1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub means: [f64; 2],
    pub sigma: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

impl Moments {
    pub fn as_array(&self) -> [f64; 5] {
        [self.means[0], self.means[1], self.sigma, self.sigma1, self.sigma2]
    }

    pub fn variances(&self) -> [f64; 2] {
        let [e1, e2] = self.means;
        [self.sigma1 + e1 - e1 * e1, self.sigma2 + e2 - e2 * e2]
    }

    pub fn covariance(&self) -> f64 {
        self.sigma - self.means[0] * self.means[1]
    }
}

pub const DEFAULT_RESONANCE_GUARD: f64 = 1e-8;

/// `sinh(x) / x`, accurate near zero.
fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 + x * x / 6.0 * (1.0 + x * x / 20.0)
    } else {
        x.sinh() / x
    }
}

impl BdmSpec {
    pub fn new(rates: [f64; 6], initial: [u64; 2]) -> Result<Self> {
        let [lambda1, lambda2, mu1, mu2, eta1, eta2] = rates;
        let s = BdmSpec { lambda1, lambda2, mu1, mu2, eta1, eta2, initial };
        s.validate()?;
        Ok(s)
    }

    /// Death-migration spec `(μ1, μ2, η1, η2)`.
    pub fn death_migration(mu: [f64; 2], eta: [f64; 2], initial: [u64; 2]) -> Result<Self> {
        Self::new([0.0, 0.0, mu[0], mu[1], eta[0], eta[1]], initial)
    }

    fn rates(&self) -> [f64; 6] {
        [self.lambda1, self.lambda2, self.mu1, self.mu2, self.eta1, self.eta2]
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.rates().iter().all(|r| r.is_finite() && *r >= 0.0), || {
            format!("rates must be finite and non-negative: {:?}", self.rates())
        })
    }

    pub fn is_death_migration(&self) -> bool {
        self.lambda1 == 0.0 && self.lambda2 == 0.0
    }

    fn require_death_migration(&self) -> Result<()> {
        self.validate()?;
        ensure(self.is_death_migration(), || "birth rates must be zero".into())
    }

    pub fn total(&self) -> u64 {
        self.initial[0] + self.initial[1]
    }

    pub fn lmr(&self) -> LmrCoefficients {
        let d1 = -self.lambda1 + self.mu1 + self.eta1;
        let d2 = -self.lambda2 + self.mu2 + self.eta2;
        let m = d1 - d2;
        LmrCoefficients { l: d1 + d2, m, r: (m * m + 4.0 * self.eta1 * self.eta2).sqrt() }
    }

    pub fn mean_vector(&self, t: f64) -> Result<[f64; 2]> {
        ensure_time(t)?;
        let LmrCoefficients { l, m, r } = self.lmr();
        let (n1, n2) = (self.initial[0] as f64, self.initial[1] as f64);
        let decay = (-l * t / 2.0).exp();
        let (ch, sh) = ((r * t / 2.0).cosh(), t * sinhc(r * t / 2.0));
        Ok([
            decay * (n1 * ch + (n2 * self.eta2 - n1 * m / 2.0) * sh),
            decay * (n2 * ch + (n1 * self.eta1 + n2 * m / 2.0) * sh),
        ])
    }

    /// First and second moments by numerical integration of their linear system.
    pub fn moments_ode(&self, t: f64) -> Result<Moments> {
        self.moments_ode_with(t, &OdeOptions::default())
    }

    pub fn moments_ode_with(&self, t: f64, opts: &OdeOptions) -> Result<Moments> {
        self.validate()?;
        ensure_time(t)?;
        let [l1, l2, m1, m2, e1, e2] = self.rates();
        let (n1, n2) = (self.initial[0] as f64, self.initial[1] as f64);
        let y0 = [n1, n2, n1 * n2, n1 * (n1 - 1.0), n2 * (n2 - 1.0)];
        let rhs = |_: f64, y: &[f64], d: &mut [f64]| {
            d[0] = (l1 - m1 - e1) * y[0] + e2 * y[1];
            d[1] = (l2 - m2 - e2) * y[1] + e1 * y[0];
            d[2] = (l1 - m1 - e1 + l2 - m2 - e2) * y[2] + e1 * y[3] + e2 * y[4];
            d[3] = 2.0 * (l1 - m1 - e1) * y[3] + 2.0 * e2 * y[2] + 2.0 * l1 * y[0];
            d[4] = 2.0 * (l2 - m2 - e2) * y[4] + 2.0 * e1 * y[2] + 2.0 * l2 * y[1];
        };
        let y = integrate(rhs, 0.0, &y0, t, opts)?;
        Ok(Moments { means: [y[0], y[1]], sigma: y[2], sigma1: y[3], sigma2: y[4] })
    }

    /// Closed-form `(σ, σ1, σ2)` when `λ1 - μ1 = λ2 - μ2 = α` and `η1 = η2 = η`.
    /// Fails with [`Error::Resonance`] when `α` is within `guard` of `0`, `±2η`
    /// or `4η`; fall back to [`BdmSpec::moments_ode`] there.
    pub fn second_moments_reduced(&self, t: f64, guard: f64) -> Result<[f64; 3]> {
        self.validate()?;
        ensure_time(t)?;
        let alpha = self.lambda1 - self.mu1;
        let eta = self.eta1;
        ensure((self.lambda2 - self.mu2 - alpha).abs() <= 1e-12 && (self.eta2 - eta).abs() <= 1e-12, || {
            "reduced moments need λ1-μ1 = λ2-μ2 and η1 = η2".into()
        })?;
        for (pole, name) in [(0.0, "0"), (2.0 * eta, "2η"), (4.0 * eta, "4η"), (-2.0 * eta, "-2η")] {
            if (alpha - pole).abs() <= guard {
                return Err(Error::Resonance(format!("α = {alpha} is within {guard} of {name}")));
            }
        }
        let (n1, n2) = (self.initial[0] as f64, self.initial[1] as f64);
        let (l1, l2) = (self.lambda1, self.lambda2);
        let s0 = n1 * (n1 - 1.0) + n2 * (n2 - 1.0);
        let a = (l1 + l2) * (n1 + n2);
        let b = (l1 - l2) * (n1 - n2);
        let big_a = n1 * n2 / 2.0 + s0 / 4.0 + a / (4.0 * alpha) + b / (4.0 * (alpha + 2.0 * eta));
        let big_b = n1 * n2 / 2.0 - s0 / 4.0 - a / (4.0 * (alpha - 4.0 * eta)) - b / (4.0 * (alpha - 2.0 * eta));
        let fa = a * eta / (alpha * (alpha - 4.0 * eta));
        let fb = b * eta / (alpha * alpha - 4.0 * eta * eta);
        let (x1, x2, x3) = ((alpha * t).exp(), ((alpha - 2.0 * eta) * t).exp(), (2.0 * (alpha - eta) * t).exp());
        let sigma = big_a * x1 * x1 + big_b * x2 * x2 + fa * x1 + fb * x2;

        // σi' = 2(α-η)σi + 2ησ + 2λi E Ni; the exponentials of σ and E Ni give
        // the particular solution, the homogeneous part is fixed by σi(0)
        let marginal = |li: f64, ni: f64, nj: f64| {
            let c1 = -(2.0 * eta * fa + li * (ni + nj)) / (alpha - 2.0 * eta);
            let c2 = -(2.0 * eta * fb + li * (ni - nj)) / alpha;
            let k = ni * (ni - 1.0) - big_a + big_b - c1 - c2;
            big_a * x1 * x1 - big_b * x2 * x2 + c1 * x1 + c2 * x2 + k * x3
        };
        Ok([sigma, marginal(l1, n1, n2), marginal(l2, n2, n1)])
    }

    /// Residual of the generating-function equation at `(t, u, v)` for an
    /// evaluator `g`, by central differences of step `h`.
    pub fn pgf_pde_residual(&self, g: impl Fn(f64, f64, f64) -> f64, t: f64, u: f64, v: f64, h: f64) -> f64 {
        let [l1, l2, m1, m2, e1, e2] = self.rates();
        let gt = (g(t + h, u, v) - g(t - h, u, v)) / (2.0 * h);
        let gu = (g(t, u + h, v) - g(t, u - h, v)) / (2.0 * h);
        let gv = (g(t, u, v + h) - g(t, u, v - h)) / (2.0 * h);
        let cu = l1 * u * u - (l1 + m1 + e1) * u + m1 + e1 * v;
        let cv = l2 * v * v - (l2 + m2 + e2) * v + m2 + e2 * u;
        gt - cu * gu - cv * gv
    }

    pub fn multinomial_coefficients(&self, t: f64) -> Result<MultinomialPair> {
        self.require_death_migration()?;
        ensure_time(t)?;
        let LmrCoefficients { l, m, r } = self.lmr();
        let decay = (-l * t / 2.0).exp();
        let (ch, sh) = ((r * t / 2.0).cosh(), t * sinhc(r * t / 2.0));
        let clamp = |x: f64| x.clamp(0.0, 1.0);
        Ok(MultinomialPair {
            a1: clamp(decay * (ch - m / 2.0 * sh)),
            b1: clamp(decay * self.eta1 * sh),
            a2: clamp(decay * self.eta2 * sh),
            b2: clamp(decay * (ch + m / 2.0 * sh)),
            n1: self.initial[0],
            n2: self.initial[1],
        })
    }

    /// Full table `p[m][n]` over the simplex `m + n <= n1 + n2`.
    pub fn death_migration_table(&self, t: f64) -> Result<Vec<Vec<f64>>> {
        let c = self.multinomial_coefficients(t)?;
        let x = multinomial_table(c.n1, c.a1, c.b1);
        let y = multinomial_table(c.n2, c.a2, c.b2);
        let total = self.total() as usize;
        let mut out = vec![vec![0.0; total + 1]; total + 1];
        for (i1, row) in x.iter().enumerate() {
            for (i2, &px) in row.iter().enumerate() {
                if px == 0.0 {
                    continue;
                }
                for (j1, yrow) in y.iter().enumerate() {
                    for (j2, &py) in yrow.iter().enumerate() {
                        out[i1 + j1][i2 + j2] += px * py;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn death_migration_pmf(&self, t: f64, m: i64, n: i64) -> Result<f64> {
        let table = self.death_migration_table(t)?;
        if m < 0 || n < 0 || (m + n) as u64 > self.total() {
            return Ok(0.0);
        }
        Ok(table[m as usize][n as usize])
    }

    pub fn death_migration_pgf(&self, t: f64, u: f64, v: f64) -> Result<f64> {
        let c = self.multinomial_coefficients(t)?;
        Ok(multinomial_pgf(c.n1, c.a1, c.b1, u, v) * multinomial_pgf(c.n2, c.a2, c.b2, u, v))
    }

    /// Generating function written for equal death rates `μ1 = μ2`.
    pub fn symmetric_death_pgf(&self, t: f64, u: f64, v: f64) -> Result<f64> {
        self.require_death_migration()?;
        ensure(self.mu1 == self.mu2, || "symmetric form needs μ1 = μ2".into())?;
        let (e1, e2) = (self.eta1, self.eta2);
        let s = e1 + e2;
        ensure(s > 0.0, || "symmetric form needs η1 + η2 > 0".into())?;
        let d = (-self.mu1 * t).exp() / s;
        let mix = (-s * t).exp();
        let f1 = 1.0 - d * ((1.0 - u) * (e2 + e1 * mix) + (1.0 - v) * e1 * (1.0 - mix));
        let f2 = 1.0 - d * ((1.0 - u) * e2 * (1.0 - mix) + (1.0 - v) * (e1 + e2 * mix));
        Ok(f1.powi(self.initial[0] as i32) * f2.powi(self.initial[1] as i32))
    }

    pub fn covariance_death_migration(&self, t: f64) -> Result<f64> {
        let c = self.multinomial_coefficients(t)?;
        Ok(-(c.n1 as f64) * c.a1 * c.b1 - c.n2 as f64 * c.a2 * c.b2)
    }

    pub fn extinction_probability(&self, t: f64) -> Result<f64> {
        let c = self.multinomial_coefficients(t)?;
        Ok((1.0 - c.a1 - c.b1).max(0.0).powi(c.n1 as i32) * (1.0 - c.a2 - c.b2).max(0.0).powi(c.n2 as i32))
    }

    /// `H_{n1+n2} / μ` for equal death rates.
    pub fn expected_extinction_time(&self) -> Result<f64> {
        self.require_death_migration()?;
        ensure(self.mu1 == self.mu2, || "extinction time needs μ1 = μ2".into())?;
        if self.mu1 <= 0.0 {
            return Err(Error::InvalidParameter("μ = 0: the process never goes extinct".into()));
        }
        let n = self.total();
        if n == 0 {
            return Ok(0.0);
        }
        let n = u32::try_from(n).map_err(|_| Error::InvalidParameter("population too large".into()))?;
        Ok(to_f64(&harmonic_number(n)?) / self.mu1)
    }

    /// Law of `N1(t) + N2(t)`, a sum of two independent binomials.
    pub fn total_population_pmf(&self, t: f64) -> Result<Vec<f64>> {
        let c = self.multinomial_coefficients(t)?;
        let u = binomial_pmf(c.n1, (c.a1 + c.b1).min(1.0));
        let v = binomial_pmf(c.n2, (c.a2 + c.b2).min(1.0));
        let mut out = vec![0.0; u.len() + v.len() - 1];
        for (i, p) in u.iter().enumerate() {
            for (j, q) in v.iter().enumerate() {
                out[i + j] += p * q;
            }
        }
        Ok(out)
    }

    /// `P{T_k > t}` where `T_k` is the first time the total population equals `k`.
    pub fn first_passage_survival(&self, t: f64, k: u64) -> Result<f64> {
        ensure(k <= self.total(), || format!("k = {k} exceeds n1 + n2 = {}", self.total()))?;
        let law = self.total_population_pmf(t)?;
        Ok(law[(k as usize + 1)..].iter().sum::<f64>().min(1.0))
    }

    /// `|Σ_k u^k P{T_k > t} - (1 - G(t, u, u)) / (1 - u)|` for `u != 1`.
    pub fn first_passage_gf_residual(&self, t: f64, u: f64) -> Result<f64> {
        ensure(u != 1.0 && u.abs() <= 1.0, || "need |u| <= 1, u != 1".into())?;
        let lhs: f64 = (0..=self.total())
            .map(|k| Ok(u.powi(k as i32) * self.first_passage_survival(t, k)?))
            .sum::<Result<f64>>()?;
        let rhs = (1.0 - self.death_migration_pgf(t, u, u)?) / (1.0 - u);
        Ok((lhs - rhs).abs())
    }

    /// Next event from `state`: holding time and jump, or `None` when absorbed.
    pub fn gillespie_step<R: Rng + ?Sized>(&self, state: [u64; 2], rng: &mut R) -> Option<(f64, [i64; 2])> {
        let (h, k) = (state[0] as f64, state[1] as f64);
        let menu = [
            (self.lambda1 * h, [1, 0]),
            (self.mu1 * h, [-1, 0]),
            (self.eta1 * h, [-1, 1]),
            (self.lambda2 * k, [0, 1]),
            (self.mu2 * k, [0, -1]),
            (self.eta2 * k, [1, -1]),
        ];
        let total: f64 = menu.iter().map(|m| m.0).sum();
        if total <= 0.0 {
            return None;
        }
        let dt = rng.sample::<f64, _>(Exp1) / total;
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        for (r, jump) in menu {
            acc += r;
            if u < acc && r > 0.0 {
                return Some((dt, jump));
            }
        }
        // rounding left u at the top edge: take the last active event
        menu.iter().rev().find(|m| m.0 > 0.0).map(|m| (dt, m.1))
    }

    pub fn sample_gillespie<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> Result<SamplePath> {
        self.validate()?;
        check_horizon(horizon)?;
        let mut path = SamplePath::new(self.initial.iter().map(|&x| x as i64).collect(), horizon);
        let mut state = self.initial;
        let mut t = 0.0;
        while let Some((dt, jump)) = self.gillespie_step(state, rng) {
            t += dt;
            if t > horizon {
                break;
            }
            state = apply(state, jump);
            path.push(t, &jump);
        }
        Ok(path)
    }

    pub fn sample_endpoint<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> [u64; 2] {
        let mut state = self.initial;
        let mut t = 0.0;
        while let Some((dt, jump)) = self.gillespie_step(state, rng) {
            t += dt;
            if t > horizon {
                break;
            }
            state = apply(state, jump);
        }
        state
    }

    /// Time to reach `(0, 0)`; requires a death-migration spec with positive death rates.
    pub fn sample_extinction_time<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        self.require_death_migration()?;
        ensure(self.mu1 > 0.0 && self.mu2 > 0.0, || "extinction needs positive death rates".into())?;
        let mut state = self.initial;
        let mut t = 0.0;
        while let Some((dt, jump)) = self.gillespie_step(state, rng) {
            t += dt;
            state = apply(state, jump);
        }
        Ok(t)
    }
}

fn apply(state: [u64; 2], jump: [i64; 2]) -> [u64; 2] {
    [(state[0] as i64 + jump[0]) as u64, (state[1] as i64 + jump[1]) as u64]
}

fn multinomial_pgf(n: u64, p: f64, q: f64, u: f64, v: f64) -> f64 {
    (1.0 - p * (1.0 - u) - q * (1.0 - v)).powi(n as i32)
}

fn powi0(x: f64, k: u64) -> f64 {
    if k == 0 {
        1.0
    } else {
        x.powi(k as i32)
    }
}

/// `table[i][j] = P{(X1, X2) = (i, j)}` for `Multinomial(n, p, q)`.
fn multinomial_table(n: u64, p: f64, q: f64) -> Vec<Vec<f64>> {
    let rest = (1.0 - p - q).max(0.0);
    let nn = n as usize;
    let mut out = vec![vec![0.0; nn + 1]; nn + 1];
    for i in 0..=n {
        for j in 0..=(n - i) {
            let r = n - i - j;
            let coef = (ln_factorial(n) - ln_factorial(i) - ln_factorial(j) - ln_factorial(r)).exp();
            out[i as usize][j as usize] = coef * powi0(p, i) * powi0(q, j) * powi0(rest, r);
        }
    }
    out
}

pub(crate) fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    (0..=n)
        .map(|k| {
            let coef = (ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)).exp();
            coef * powi0(p, k) * powi0(1.0 - p, n - k)
        })
        .collect()
}

/// Generating function of the death-migration process with `μ1 = μ2 = μ(t)` and
/// `η1 = η2 = η(t)`.
pub fn pgf_symmetric_nonhomogeneous(
    mu: &RateFunction,
    eta: &RateFunction,
    initial: [u64; 2],
    t: f64,
    u: f64,
    v: f64,
) -> Result<f64> {
    let survive = (-mu.cumulative(t)?).exp();
    let mix = (-2.0 * eta.cumulative(t)?).exp();
    let f1 = 1.0 - survive / 2.0 * ((1.0 - u) * (1.0 + mix) + (1.0 - v) * (1.0 - mix));
    let f2 = 1.0 - survive / 2.0 * ((1.0 - u) * (1.0 - mix) + (1.0 - v) * (1.0 + mix));
    Ok(f1.powi(initial[0] as i32) * f2.powi(initial[1] as i32))
}

/// Extinction CDF of the vector against the maximum of two independent pure
/// deaths started from `n1` and `n2` units: `(lhs, rhs)`.
pub fn max_of_deaths_identity_check(n1: u64, n2: u64, mu: f64, t: f64) -> Result<(f64, f64)> {
    ensure(mu > 0.0, || "μ must be positive".into())?;
    ensure_time(t)?;
    let p = -(-mu * t).exp_m1();
    let lhs = p.powi((n1 + n2) as i32);
    let rhs = p.powi(n1 as i32) * p.powi(n2 as i32);
    Ok((lhs, rhs))
}

/// Death-free migration between two groups; `N2 = n1 + n2 - N1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PureMigrationSpec {
    pub eta1: f64,
    pub eta2: f64,
    pub initial: [u64; 2],
}

impl PureMigrationSpec {
    pub fn new(eta1: f64, eta2: f64, initial: [u64; 2]) -> Result<Self> {
        let s = PureMigrationSpec { eta1, eta2, initial };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.eta1 > 0.0 && self.eta2 > 0.0 && self.eta1.is_finite() && self.eta2.is_finite(), || {
            format!("migration rates must be positive: ({}, {})", self.eta1, self.eta2)
        })
    }

    pub fn total(&self) -> u64 {
        self.initial[0] + self.initial[1]
    }

    pub fn as_bdm(&self) -> BdmSpec {
        BdmSpec { eta1: self.eta1, eta2: self.eta2, initial: self.initial, ..Default::default() }
    }

    /// Probabilities that a unit starting in group 1 (resp. 2) sits in group 1 at `t`.
    pub fn coefficients(&self, t: f64) -> Result<(f64, f64)> {
        ensure_time(t)?;
        let s = self.eta1 + self.eta2;
        let mix = (-s * t).exp();
        Ok(((self.eta2 + self.eta1 * mix) / s, -self.eta2 * (-s * t).exp_m1() / s))
    }

    pub fn pmf_table(&self, t: f64) -> Result<Vec<f64>> {
        self.validate()?;
        let (a1, a2) = self.coefficients(t)?;
        let x = binomial_pmf(self.initial[0], a1);
        let y = binomial_pmf(self.initial[1], a2);
        let mut out = vec![0.0; self.total() as usize + 1];
        for (i, p) in x.iter().enumerate() {
            for (j, q) in y.iter().enumerate() {
                out[i + j] += p * q;
            }
        }
        Ok(out)
    }

    pub fn pmf(&self, t: f64, k: i64) -> Result<f64> {
        let table = self.pmf_table(t)?;
        Ok(usize::try_from(k).ok().and_then(|k| table.get(k).copied()).unwrap_or(0.0))
    }

    pub fn pgf(&self, t: f64, u: f64) -> Result<f64> {
        let (a1, a2) = self.coefficients(t)?;
        Ok((1.0 - (1.0 - u) * a1).powi(self.initial[0] as i32) * (1.0 - (1.0 - u) * a2).powi(self.initial[1] as i32))
    }

    /// Stationary law `Binomial(n, η2 / (η1 + η2))`.
    pub fn stationary(&self) -> Vec<f64> {
        binomial_pmf(self.total(), self.eta2 / (self.eta1 + self.eta2))
    }

    /// Right-hand side of the forward equation for `p_k` given a law `p`.
    pub fn master_rhs(&self, p: &[f64], k: i64) -> f64 {
        let n = self.total() as i64;
        if k < 0 || k > n {
            return 0.0;
        }
        let at = |j: i64| if j < 0 || j > n { 0.0 } else { p[j as usize] };
        let (e1, e2) = (self.eta1, self.eta2);
        let kf = k as f64;
        let nf = n as f64;
        -(e1 * kf + e2 * (nf - kf)) * at(k) + e1 * (kf + 1.0) * at(k + 1) + e2 * (nf - kf + 1.0) * at(k - 1)
    }

    /// `|dp_k/dt - master_rhs|` with the time derivative by central differences.
    pub fn master_residual(&self, t: f64, k: i64, h: f64) -> Result<f64> {
        ensure(t >= h, || "need t >= h for central differences".into())?;
        let dp = (self.pmf(t + h, k)? - self.pmf(t - h, k)?) / (2.0 * h);
        Ok((dp - self.master_rhs(&self.pmf_table(t)?, k)).abs())
    }

    /// Residual of `∂G/∂t = η2 n (u-1) G - (u-1)(η2 u + η1) ∂G/∂u`.
    pub fn pgf_ode_residual(&self, t: f64, u: f64, h: f64) -> Result<f64> {
        ensure(t >= h, || "need t >= h for central differences".into())?;
        let g = |t: f64, u: f64| self.pgf(t, u);
        let gt = (g(t + h, u)? - g(t - h, u)?) / (2.0 * h);
        let gu = (g(t, u + h)? - g(t, u - h)?) / (2.0 * h);
        let n = self.total() as f64;
        Ok((gt - self.eta2 * n * (u - 1.0) * g(t, u)? + (u - 1.0) * (self.eta2 * u + self.eta1) * gu).abs())
    }

    /// One Gillespie path of `N1` recorded as a 1-D path.
    pub fn sample_endpoint<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> u64 {
        self.as_bdm().sample_endpoint(horizon, rng)[0]
    }
}

fn check_bd(lambda: f64, mu: f64) -> Result<()> {
    ensure(lambda > 0.0 && mu > 0.0 && lambda.is_finite() && mu.is_finite(), || {
        format!("birth and death rates must be positive, got ({lambda}, {mu})")
    })?;
    ensure((lambda - mu).abs() > 1e-10, || format!("critical case λ = μ = {lambda} is not supported"))
}

/// `(P{N=0}, P{N=1}, ratio)` of a linear birth-death process from one unit;
/// `P{N=k} = P{N=1} ratio^{k-1}` for `k >= 1`.
fn bd_parts(lambda: f64, mu: f64, t: f64) -> Result<(f64, f64, f64)> {
    check_bd(lambda, mu)?;
    ensure_time(t)?;
    let d = lambda - mu;
    let e = (-d * t).exp();
    let one_minus_e = -(-d * t).exp_m1();
    let denom = lambda - mu * e;
    Ok((mu * one_minus_e / denom, e * d * d / (denom * denom), lambda * one_minus_e / denom))
}

pub fn bd_pmf(lambda: f64, mu: f64, t: f64, k: i64) -> Result<f64> {
    let (p0, p1, r) = bd_parts(lambda, mu, t)?;
    Ok(match k {
        k if k < 0 => 0.0,
        0 => p0,
        k => p1 * powi0(r, (k - 1) as u64),
    })
}

/// `P{N1(t) - N2(t) = k}` for independent linear birth-death processes from one unit each.
pub fn bd_difference_pmf(lambda1: f64, mu1: f64, lambda2: f64, mu2: f64, t: f64, k: i64) -> Result<f64> {
    let (a0, a1, ra) = bd_parts(lambda1, mu1, t)?;
    let (b0, b1, rb) = bd_parts(lambda2, mu2, t)?;
    let geometric = 1.0 - ra * rb;
    if k == 0 {
        return Ok(a0 * b0 + a1 * b1 / geometric);
    }
    if lambda1 == lambda2 && mu1 == mu2 {
        let pk = bd_pmf(lambda1, mu1, t, k.abs())?;
        return Ok(pk * (lambda1 + mu1) * a0 / (mu1 + lambda1 * a0));
    }
    if k > 0 {
        Ok(bd_pmf(lambda1, mu1, t, k)? * (b0 + ra * b1 / geometric))
    } else {
        Ok(bd_pmf(lambda2, mu2, t, -k)? * (a0 + rb * a1 / geometric))
    }
}

/// Geometric ratio governing the tail of the birth-death law.
pub fn bd_ratio(lambda: f64, mu: f64, t: f64) -> Result<f64> {
    Ok(bd_parts(lambda, mu, t)?.2)
}
