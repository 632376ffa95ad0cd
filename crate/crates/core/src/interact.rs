//! Interacting Skellam vector processes.
//!
//! Two groups whose sizes move by at most one unit per instant: each group
//! independently picks "up" (`λ`), "down" (`μ`) or "stay" (`δ`), and units can
//! migrate between the groups (`η₁₂`: from 1 to 2, `η₂₁`: from 2 to 1). The
//! resulting eight jump types make the pair a sum of four independent Skellam
//! processes `S1..S4` with
//!
//! `N1 = n1 + S1 + S3 + S4`, `N2 = n2 + S2 + S3 - S4`.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, ensure_time, Error, Result};
use crate::ratefn::RateFunction;
use crate::skellam::{check_horizon, skellam_pgf_value, skellam_pmf_value, thin, GeneralizedSkellamSpec, NhSkellamSpec, SamplePath};
use crate::specfun::{poisson_tail_bound, poisson_truncation, SeriesControl};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InteractingSkellamSpec {
    pub lambda1: RateFunction,
    pub lambda2: RateFunction,
    pub mu1: RateFunction,
    pub mu2: RateFunction,
    pub delta1: RateFunction,
    pub delta2: RateFunction,
    pub eta12: RateFunction,
    pub eta21: RateFunction,
    pub initial: [i64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkellamDecomposition {
    pub s1: NhSkellamSpec,
    pub s2: NhSkellamSpec,
    pub s3: NhSkellamSpec,
    pub s4: NhSkellamSpec,
}

impl SkellamDecomposition {
    pub fn components(&self) -> [&NhSkellamSpec; 4] {
        [&self.s1, &self.s2, &self.s3, &self.s4]
    }

    /// Effect of a `+1` jump of `S1..S4` on `(N1, N2)`.
    pub const INCIDENCE: [[i64; 2]; 4] = [[1, 0], [0, 1], [1, 1], [1, -1]];
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMethod {
    #[default]
    Direct,
    Decomposition,
}

/// Homogeneous representation as a compound Poisson process.
#[derive(Clone, Debug, PartialEq)]
pub struct CompoundRepresentation {
    pub rate: f64,
    pub jumps: Vec<([i64; 2], f64)>,
}

impl InteractingSkellamSpec {
    /// Constant rates in the order `λ1, λ2, μ1, μ2, δ1, δ2, η12, η21`.
    pub fn constant(rates: [f64; 8], initial: [i64; 2]) -> Result<Self> {
        let c = rates.map(RateFunction::constant);
        let [lambda1, lambda2, mu1, mu2, delta1, delta2, eta12, eta21] = c;
        let s = InteractingSkellamSpec { lambda1, lambda2, mu1, mu2, delta1, delta2, eta12, eta21, initial };
        s.validate()?;
        Ok(s)
    }

    pub fn rates(&self) -> [&RateFunction; 8] {
        [&self.lambda1, &self.lambda2, &self.mu1, &self.mu2, &self.delta1, &self.delta2, &self.eta12, &self.eta21]
    }

    pub fn validate(&self) -> Result<()> {
        self.rates().into_iter().try_for_each(RateFunction::validate)
    }

    pub fn is_homogeneous(&self) -> bool {
        self.rates().iter().all(|r| r.as_constant().is_some())
    }

    /// The eight jump vectors with their instantaneous rates.
    pub fn jump_menu(&self) -> [([i64; 2], RateFunction); 8] {
        let (l1, l2, m1, m2) = (&self.lambda1, &self.lambda2, &self.mu1, &self.mu2);
        let (d1, d2) = (&self.delta1, &self.delta2);
        [
            ([1, 1], l1.mul(l2)),
            ([-1, -1], m1.mul(m2)),
            ([1, -1], l1.mul(m2).add(&self.eta21)),
            ([-1, 1], m1.mul(l2).add(&self.eta12)),
            ([1, 0], l1.mul(d2)),
            ([0, 1], d1.mul(l2)),
            ([-1, 0], m1.mul(d2)),
            ([0, -1], d1.mul(m2)),
        ]
    }

    fn check_uv(u: f64, v: f64) -> Result<()> {
        if u > 0.0 && u <= 1.0 && v > 0.0 && v <= 1.0 {
            Ok(())
        } else {
            Err(Error::Domain(format!("(u, v) must lie in (0, 1]², got ({u}, {v})")))
        }
    }

    fn exponent(&self, s: f64, t: f64, u: f64, v: f64) -> f64 {
        self.jump_menu()
            .iter()
            .map(|([a, b], r)| (r.integral(t) - r.integral(s)) * (1.0 - u.powi(*a as i32) * v.powi(*b as i32)))
            .sum()
    }

    /// `E u^{N1(t)} v^{N2(t)}`.
    pub fn joint_pgf(&self, t: f64, u: f64, v: f64) -> Result<f64> {
        Self::check_uv(u, v)?;
        ensure_time(t)?;
        let [n1, n2] = self.initial;
        Ok(u.powi(n1 as i32) * v.powi(n2 as i32) * (-self.exponent(0.0, t, u, v)).exp())
    }

    /// Generating function of the increment over `(s, t]`.
    pub fn increment_pgf(&self, s: f64, t: f64, u: f64, v: f64) -> Result<f64> {
        Self::check_uv(u, v)?;
        ensure_time(s)?;
        if !(s < t) {
            return Err(Error::Domain(format!("increment needs s < t, got s = {s}, t = {t}")));
        }
        Ok((-self.exponent(s, t, u, v)).exp())
    }

    pub fn decompose(&self) -> SkellamDecomposition {
        let (l1, l2, m1, m2) = (&self.lambda1, &self.lambda2, &self.mu1, &self.mu2);
        let (d1, d2) = (&self.delta1, &self.delta2);
        let [n1, n2] = self.initial;
        SkellamDecomposition {
            s1: NhSkellamSpec { rate_up: l1.mul(d2), rate_down: m1.mul(d2), initial: n1 },
            s2: NhSkellamSpec { rate_up: d1.mul(l2), rate_down: d1.mul(m2), initial: n2 },
            s3: NhSkellamSpec { rate_up: l1.mul(l2), rate_down: m1.mul(m2), initial: 0 },
            s4: NhSkellamSpec {
                rate_up: l1.mul(m2).add(&self.eta21),
                rate_down: m1.mul(l2).add(&self.eta12),
                initial: 0,
            },
        }
    }

    /// Marginal Skellam laws of `N1` and `N2`.
    pub fn marginal_rates(&self) -> (NhSkellamSpec, NhSkellamSpec) {
        let total1 = RateFunction::sum_of([&self.lambda1, &self.mu1, &self.delta1]);
        let total2 = RateFunction::sum_of([&self.lambda2, &self.mu2, &self.delta2]);
        let [n1, n2] = self.initial;
        (
            NhSkellamSpec {
                rate_up: self.lambda1.mul(&total2).add(&self.eta21),
                rate_down: self.mu1.mul(&total2).add(&self.eta12),
                initial: n1,
            },
            NhSkellamSpec {
                rate_up: self.lambda2.mul(&total1).add(&self.eta12),
                rate_down: self.mu2.mul(&total1).add(&self.eta21),
                initial: n2,
            },
        )
    }

    /// `Cov(N1(s), N2(t))` for `s <= t`, which equals `Cov(N1(s), N2(s))`.
    pub fn covariance(&self, s: f64, t: f64) -> Result<f64> {
        ensure_time(s)?;
        if s > t {
            return Err(Error::Domain(format!("covariance needs s <= t, got s = {s}, t = {t}")));
        }
        let c = |r: &RateFunction| r.integral(s);
        let (l1, l2, m1, m2) = (&self.lambda1, &self.lambda2, &self.mu1, &self.mu2);
        Ok(c(&l1.mul(l2)) - c(&l1.mul(m2)) - c(&m1.mul(l2)) + c(&m1.mul(m2)) - c(&self.eta12) - c(&self.eta21))
    }

    /// Rate of the process counting every change of state.
    pub fn event_rate(&self) -> RateFunction {
        let menu = self.jump_menu();
        RateFunction::sum_of(menu.iter().map(|(_, r)| r))
    }

    pub fn compound_representation(&self) -> Result<CompoundRepresentation> {
        if !self.is_homogeneous() {
            return Err(Error::NotHomogeneous("compound Poisson representation".into()));
        }
        let menu: Vec<([i64; 2], f64)> = self
            .jump_menu()
            .into_iter()
            .map(|(j, r)| (j, r.as_constant().expect("homogeneous")))
            .collect();
        let rate: f64 = menu.iter().map(|m| m.1).sum();
        ensure(rate > 0.0, || "all jump rates are zero".into())?;
        Ok(CompoundRepresentation { rate, jumps: menu.into_iter().map(|(j, r)| (j, r / rate)).collect() })
    }

    /// `a N1 + b N2` as a generalized Skellam process.
    pub fn linear_combination(&self, a: i64, b: i64) -> Result<GeneralizedSkellamSpec> {
        ensure(a != 0 || b != 0, || "linear combination needs (a, b) != (0, 0)".into())?;
        let mut rates: BTreeMap<i64, RateFunction> = BTreeMap::new();
        for ([x, y], r) in self.jump_menu() {
            let size = a * x + b * y;
            if size == 0 || r.is_zero() {
                continue;
            }
            let merged = match rates.remove(&size) {
                Some(prev) => prev.add(&r),
                None => r,
            };
            rates.insert(size, merged);
        }
        let [n1, n2] = self.initial;
        Ok(GeneralizedSkellamSpec { rates, initial: a * n1 + b * n2 })
    }

    /// Evaluator for `P(N1(t) = m, N2(t) = n)` truncating each `S_j` at `|S_j| <= truncation`.
    pub fn joint_pmf_evaluator(&self, t: f64, truncation: u64) -> Result<JointPmf> {
        JointPmf::new(&self.decompose(), t, truncation)
    }

    /// Evaluator with the smallest truncation whose neglected mass is below `eps`.
    pub fn joint_pmf_auto(&self, t: f64, eps: f64) -> Result<JointPmf> {
        let d = self.decompose();
        let mut k = 0;
        for s in d.components() {
            let (up, down) = s.cumulatives(t)?;
            k = k.max(poisson_truncation(up.max(down), eps / 8.0));
        }
        JointPmf::new(&d, t, k)
    }

    pub fn joint_pmf(&self, t: f64, m: i64, n: i64, truncation: u64) -> Result<f64> {
        let eval = self.joint_pmf_evaluator(t, truncation)?;
        eval.check(JOINT_PMF_TOLERANCE)?;
        Ok(eval.pmf(m, n))
    }

    pub fn sample_path<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R, method: SamplingMethod) -> Result<SamplePath> {
        check_horizon(horizon)?;
        let initial = self.initial.to_vec();
        match method {
            SamplingMethod::Direct => {
                let mut path = SamplePath::new(initial, horizon);
                simulate_menu(&self.jump_menu(), 0.0, horizon, rng, |t, j| path.push(t, j));
                Ok(path)
            }
            SamplingMethod::Decomposition => {
                let d = self.decompose();
                let parts: Vec<SamplePath> = d
                    .components()
                    .iter()
                    .zip(SkellamDecomposition::INCIDENCE)
                    .flat_map(|(s, e)| {
                        let mut up = SamplePath::new(vec![0, 0], horizon);
                        let mut down = SamplePath::new(vec![0, 0], horizon);
                        thin(&s.rate_up, 0.0, horizon, rng, |t| up.push(t, &e));
                        thin(&s.rate_down, 0.0, horizon, rng, |t| down.push(t, &[-e[0], -e[1]]));
                        [up, down]
                    })
                    .collect();
                Ok(SamplePath::merge(initial, horizon, &parts))
            }
        }
    }

    /// `(N1(horizon), N2(horizon))` without storing the path.
    pub fn sample_endpoint<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R, method: SamplingMethod) -> [i64; 2] {
        let mut state = self.initial;
        match method {
            SamplingMethod::Direct => simulate_menu(&self.jump_menu(), 0.0, horizon, rng, |_, j| {
                state[0] += j[0];
                state[1] += j[1];
            }),
            SamplingMethod::Decomposition => {
                let d = self.decompose();
                for (s, e) in d.components().iter().zip(SkellamDecomposition::INCIDENCE) {
                    let mut k = 0i64;
                    thin(&s.rate_up, 0.0, horizon, rng, |_| k += 1);
                    thin(&s.rate_down, 0.0, horizon, rng, |_| k -= 1);
                    state[0] += e[0] * k;
                    state[1] += e[1] * k;
                }
            }
        }
        state
    }

    /// State and number of changes at `horizon` under the direct sampler.
    pub fn sample_endpoint_with_count<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> ([i64; 2], u64) {
        let (mut state, mut count) = (self.initial, 0);
        simulate_menu(&self.jump_menu(), 0.0, horizon, rng, |_, j| {
            state[0] += j[0];
            state[1] += j[1];
            count += 1;
        });
        (state, count)
    }
}

pub const JOINT_PMF_TOLERANCE: f64 = 1e-12;

/// Tabulated decomposition laws for fast joint pmf evaluation.
#[derive(Clone, Debug)]
pub struct JointPmf {
    initial: [i64; 2],
    truncation: i64,
    tables: [Vec<f64>; 4],
    /// Upper bound on the probability mass neglected by the truncation.
    pub neglected_mass: f64,
}

impl JointPmf {
    fn new(d: &SkellamDecomposition, t: f64, truncation: u64) -> Result<Self> {
        ensure_time(t)?;
        let k = truncation as i64;
        let ctl = SeriesControl::default();
        let mut neglected = 0.0;
        let mut tables: [Vec<f64>; 4] = Default::default();
        for (table, s) in tables.iter_mut().zip(d.components()) {
            let (up, down) = s.cumulatives(t)?;
            neglected += poisson_tail_bound(up, truncation) + poisson_tail_bound(down, truncation);
            *table = (-k..=k).map(|x| skellam_pmf_value(up, down, x, &ctl)).collect::<Result<_>>()?;
        }
        Ok(JointPmf { initial: [d.s1.initial, d.s2.initial], truncation: k, tables, neglected_mass: neglected })
    }

    pub fn check(&self, tolerance: f64) -> Result<()> {
        if self.neglected_mass <= tolerance {
            Ok(())
        } else {
            Err(Error::Truncation { bound: self.neglected_mass, tolerance })
        }
    }

    fn at(&self, j: usize, x: i64) -> f64 {
        if x.abs() > self.truncation {
            0.0
        } else {
            self.tables[j][(x + self.truncation) as usize]
        }
    }

    /// Sums over `S1 = h`, `S2 = k`; `S3 ± S4` is then fixed and only
    /// pairs of matching parity are reachable.
    pub fn pmf(&self, m: i64, n: i64) -> f64 {
        let k = self.truncation;
        let (dm, dn) = (m - self.initial[0], n - self.initial[1]);
        let mut acc = 0.0;
        for h in -k..=k {
            let p1 = self.at(0, h);
            if p1 == 0.0 {
                continue;
            }
            let a = dm - h;
            for kk in -k..=k {
                let b = dn - kk;
                if (a + b).rem_euclid(2) != 0 {
                    continue;
                }
                let p = self.at(1, kk) * self.at(2, (a + b) / 2) * self.at(3, (a - b) / 2);
                acc += p1 * p;
            }
        }
        acc
    }
}

/// Superposes the jump streams of `menu` on `[t0, t1)`: proposals come from
/// one thinned stream at the total rate, and a single uniform either selects
/// a jump type (proportionally to its rate) or rejects.
pub(crate) fn simulate_menu<R: Rng + ?Sized, const D: usize>(
    menu: &[([i64; D], RateFunction)],
    t0: f64,
    t1: f64,
    rng: &mut R,
    mut on_event: impl FnMut(f64, &[i64; D]),
) {
    let total = RateFunction::sum_of(menu.iter().map(|m| &m.1));
    let mut cuts: Vec<f64> = total.breakpoints().into_iter().filter(|&b| b > t0 && b < t1).collect();
    cuts.insert(0, t0);
    cuts.push(t1);
    let flat = matches!(total, RateFunction::Constant { .. } | RateFunction::Piecewise { .. });
    let constants: Option<Vec<f64>> = menu.iter().map(|m| m.1.as_constant()).collect();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let m = if flat { total.rate_at(a) } else { total.majorant(a, b) };
        if m <= 0.0 {
            continue;
        }
        let mut t = a;
        loop {
            t += rng.sample::<f64, _>(Exp1) / m;
            if t >= b {
                break;
            }
            let u = rng.random::<f64>() * m;
            let mut acc = 0.0;
            for (i, (jump, rate)) in menu.iter().enumerate() {
                acc += match &constants {
                    Some(c) => c[i],
                    None => rate.rate_at(t),
                };
                if u < acc {
                    on_event(t, jump);
                    break;
                }
            }
        }
    }
}

/// Unit-jump streams of the generalized two-group model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneralizedInteractSpec {
    /// `λ¹_i`: group 1 changes by `i`, independently of group 2.
    pub jumps1: BTreeMap<i64, RateFunction>,
    /// `λ²_j`.
    pub jumps2: BTreeMap<i64, RateFunction>,
    /// `η¹²_k`: group 1 forwards `k` units to group 2.
    pub migration12: BTreeMap<u64, RateFunction>,
    /// `η²¹_k`.
    pub migration21: BTreeMap<u64, RateFunction>,
    pub delta1: RateFunction,
    pub delta2: RateFunction,
    pub initial: [i64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum StreamKind {
    /// Group 1 moves alone.
    Own1,
    /// Group 2 moves alone.
    Own2,
    /// Both groups move, no migration.
    Joint,
    Migration12,
    Migration21,
}

/// An independent Poisson stream with its 2-D jump.
#[derive(Clone, Debug, PartialEq)]
pub struct PoissonStream {
    pub kind: StreamKind,
    pub jump: [i64; 2],
    pub rate: RateFunction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizedMarginals {
    pub streams: Vec<PoissonStream>,
    pub initial: [i64; 2],
}

impl GeneralizedMarginals {
    /// `(jump size, rate)` terms of marginal `component` (0 or 1).
    pub fn terms(&self, component: usize) -> Vec<(i64, &RateFunction)> {
        self.streams
            .iter()
            .filter(|s| s.jump[component] != 0)
            .map(|s| (s.jump[component], &s.rate))
            .collect()
    }

    /// Marginal as a generalized Skellam process, coincident sizes merged.
    pub fn marginal(&self, component: usize) -> GeneralizedSkellamSpec {
        let mut rates: BTreeMap<i64, RateFunction> = BTreeMap::new();
        for (size, r) in self.terms(component) {
            let merged = rates.remove(&size).map_or_else(|| r.clone(), |prev| prev.add(r));
            rates.insert(size, merged);
        }
        GeneralizedSkellamSpec { rates, initial: self.initial[component] }
    }
}

impl GeneralizedInteractSpec {
    pub fn validate(&self) -> Result<()> {
        ensure(!self.jumps1.contains_key(&0) && !self.jumps2.contains_key(&0), || {
            "jump sets must not contain 0".into()
        })?;
        ensure(!self.migration12.contains_key(&0) && !self.migration21.contains_key(&0), || {
            "migration sizes must be positive".into()
        })?;
        let all = self
            .jumps1
            .values()
            .chain(self.jumps2.values())
            .chain(self.migration12.values())
            .chain(self.migration21.values())
            .chain([&self.delta1, &self.delta2]);
        for r in all {
            r.validate()?;
            ensure(r.is_strictly_positive(), || format!("listed rates must be strictly positive: {r:?}"))?;
        }
        Ok(())
    }

    pub fn marginals(&self) -> Result<GeneralizedMarginals> {
        self.validate()?;
        let mut streams = Vec::new();
        for (&h, l) in &self.jumps1 {
            streams.push(PoissonStream { kind: StreamKind::Own1, jump: [h, 0], rate: l.mul(&self.delta2) });
        }
        for (&k, l) in &self.jumps2 {
            streams.push(PoissonStream { kind: StreamKind::Own2, jump: [0, k], rate: self.delta1.mul(l) });
        }
        for (&h, l1) in &self.jumps1 {
            for (&k, l2) in &self.jumps2 {
                streams.push(PoissonStream { kind: StreamKind::Joint, jump: [h, k], rate: l1.mul(l2) });
            }
        }
        for (&h, e) in &self.migration12 {
            let h = h as i64;
            streams.push(PoissonStream { kind: StreamKind::Migration12, jump: [-h, h], rate: e.clone() });
        }
        for (&k, e) in &self.migration21 {
            let k = k as i64;
            streams.push(PoissonStream { kind: StreamKind::Migration21, jump: [k, -k], rate: e.clone() });
        }
        Ok(GeneralizedMarginals { streams, initial: self.initial })
    }
}

/// Three interacting groups, each moving by at most one unit per instant.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrivariateSpec {
    pub lambda: [RateFunction; 3],
    pub mu: [RateFunction; 3],
    pub delta: [RateFunction; 3],
    /// `eta[g][h]`: migration from group `g` to group `h`; the diagonal is unused.
    pub eta: [[RateFunction; 3]; 3],
    pub initial: [i64; 3],
}

/// A Skellam component moving the groups by `+pattern` (up) or `-pattern` (down).
#[derive(Clone, Debug, PartialEq)]
pub struct PatternComponent {
    pub pattern: [i64; 3],
    pub skellam: NhSkellamSpec,
}

impl TrivariateSpec {
    pub fn validate(&self) -> Result<()> {
        for g in 0..3 {
            self.lambda[g].validate()?;
            self.mu[g].validate()?;
            self.delta[g].validate()?;
            for h in 0..3 {
                self.eta[g][h].validate()?;
            }
            ensure(self.eta[g][g].is_zero(), || "self-migration rates must be zero".into())?;
        }
        Ok(())
    }

    fn group_factor(&self, g: usize, sign: i64) -> &RateFunction {
        match sign {
            1 => &self.lambda[g],
            -1 => &self.mu[g],
            _ => &self.delta[g],
        }
    }

    /// Rate of the simultaneous move `pattern`: each group acts independently,
    /// or one migration `g -> h` happens while the third group acts alone.
    pub fn pattern_rate(&self, pattern: [i64; 3]) -> RateFunction {
        let mut rate = RateFunction::product_of((0..3).map(|g| self.group_factor(g, pattern[g])));
        for g in 0..3 {
            for h in 0..3 {
                if g != h && pattern[g] == -1 && pattern[h] == 1 {
                    let r = 3 - g - h;
                    rate = rate.add(&self.eta[g][h].mul(self.group_factor(r, pattern[r])));
                }
            }
        }
        rate
    }

    /// The 26 non-zero moves.
    pub fn jump_menu(&self) -> Vec<([i64; 3], RateFunction)> {
        all_patterns().into_iter().map(|p| (p, self.pattern_rate(p))).collect()
    }

    /// The 13 independent Skellam components, one per canonical pattern (first
    /// non-zero entry positive). Row `i` of the incidence matrix is `pattern`.
    pub fn decompose(&self) -> Vec<PatternComponent> {
        all_patterns()
            .into_iter()
            .filter(|p| p.iter().find(|&&x| x != 0) == Some(&1))
            .map(|p| PatternComponent {
                pattern: p,
                skellam: NhSkellamSpec {
                    rate_up: self.pattern_rate(p),
                    rate_down: self.pattern_rate(p.map(|x| -x)),
                    initial: 0,
                },
            })
            .collect()
    }

    /// Marginal up and down rates of group `g`.
    pub fn marginal_rates(&self, g: usize) -> (RateFunction, RateFunction) {
        let comps = self.decompose();
        let mut up = RateFunction::zero();
        let mut down = RateFunction::zero();
        for c in &comps {
            match c.pattern[g] {
                1 => {
                    up = up.add(&c.skellam.rate_up);
                    down = down.add(&c.skellam.rate_down);
                }
                -1 => {
                    up = up.add(&c.skellam.rate_down);
                    down = down.add(&c.skellam.rate_up);
                }
                _ => {}
            }
        }
        (up, down)
    }

    pub fn mean(&self, t: f64) -> Result<[f64; 3]> {
        ensure_time(t)?;
        let mut out = self.initial.map(|x| x as f64);
        for c in self.decompose() {
            let drift = c.skellam.rate_up.integral(t) - c.skellam.rate_down.integral(t);
            for g in 0..3 {
                out[g] += c.pattern[g] as f64 * drift;
            }
        }
        Ok(out)
    }

    /// Endpoint by direct simulation of the 26-move menu.
    pub fn sample_endpoint<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> [i64; 3] {
        let mut state = self.initial;
        simulate_menu(&self.jump_menu(), 0.0, horizon, rng, |_, j| {
            for g in 0..3 {
                state[g] += j[g];
            }
        });
        state
    }

    /// Endpoint by independent simulation of the 13 components.
    pub fn sample_endpoint_decomposed<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> [i64; 3] {
        let mut state = self.initial;
        for c in self.decompose() {
            let k = c.skellam.sample_endpoint(horizon, rng);
            for g in 0..3 {
                state[g] += c.pattern[g] * k;
            }
        }
        state
    }
}

fn all_patterns() -> Vec<[i64; 3]> {
    let mut out = Vec::with_capacity(26);
    for a in [1, 0, -1] {
        for b in [1, 0, -1] {
            for c in [1, 0, -1] {
                if (a, b, c) != (0, 0, 0) {
                    out.push([a, b, c]);
                }
            }
        }
    }
    out
}

/// Product of the four Skellam generating functions at `(u, v, uv, u/v)`.
pub fn decomposition_pgf(d: &SkellamDecomposition, t: f64, u: f64, v: f64) -> Result<f64> {
    let args = [u, v, u * v, u / v];
    let mut acc = 1.0;
    for (s, x) in d.components().iter().zip(args) {
        let (up, down) = s.cumulatives(t)?;
        acc *= x.powi(s.initial as i32) * skellam_pgf_value(up, down, x);
    }
    Ok(acc)
}
