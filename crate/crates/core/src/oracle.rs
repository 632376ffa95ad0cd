//! Independent reference engines: uniformization for finite chains and
//! direct Poisson-count convolution for jump menus.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::bdm::{bd_pmf, bd_ratio, BdmSpec, PureMigrationSpec};
use crate::error::{ensure, ensure_time, Error, Result};
use crate::skellam::poisson_pmf_value;
use crate::specfun::{poisson_tail_bound, poisson_truncation};

/// A continuous-time Markov chain on an explicitly enumerated lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteGenerator {
    states: Vec<Vec<i64>>,
    index: BTreeMap<Vec<i64>, usize>,
    q: DMatrix<f64>,
}

pub const UNIFORMIZATION_TAIL: f64 = 1e-15;
/// Largest `Λ* Δt` handled in one uniformization pass.
const MAX_STEP_MASS: f64 = 50.0;

impl FiniteGenerator {
    pub fn new(states: Vec<Vec<i64>>, q: DMatrix<f64>) -> Result<Self> {
        let n = states.len();
        ensure(q.nrows() == n && q.ncols() == n, || format!("generator must be {n}x{n}"))?;
        for i in 0..n {
            let row = q.row(i);
            ensure(row.iter().enumerate().all(|(j, &x)| i == j || x >= 0.0), || {
                format!("negative off-diagonal rate in row {i}")
            })?;
            let scale = row.iter().map(|x| x.abs()).fold(1.0, f64::max);
            ensure(row.sum().abs() <= 1e-12 * scale, || format!("row {i} does not sum to zero"))?;
        }
        let index: BTreeMap<Vec<i64>, usize> = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        ensure(index.len() == n, || "duplicate states".into())?;
        Ok(FiniteGenerator { states, index, q })
    }

    /// Builds `Q` from a transition rule listing `(target, rate)` pairs per state.
    pub fn from_rule(states: Vec<Vec<i64>>, rule: impl Fn(&[i64]) -> Vec<(Vec<i64>, f64)>) -> Result<Self> {
        let n = states.len();
        let index: BTreeMap<&[i64], usize> = states.iter().enumerate().map(|(i, s)| (s.as_slice(), i)).collect();
        let mut q = DMatrix::zeros(n, n);
        for (i, s) in states.iter().enumerate() {
            for (target, rate) in rule(s) {
                if rate == 0.0 {
                    continue;
                }
                let j = *index
                    .get(target.as_slice())
                    .ok_or_else(|| Error::InvalidParameter(format!("transition leaves the state space: {target:?}")))?;
                q[(i, j)] += rate;
                q[(i, i)] -= rate;
            }
        }
        Self::new(states, q)
    }

    pub fn states(&self) -> &[Vec<i64>] {
        &self.states
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, state: &[i64]) -> Option<usize> {
        self.index.get(state).copied()
    }

    pub fn point_mass(&self, state: &[i64]) -> Result<Vec<f64>> {
        let i = self
            .index_of(state)
            .ok_or_else(|| Error::InvalidParameter(format!("{state:?} is not a state of the chain")))?;
        let mut p = vec![0.0; self.len()];
        p[i] = 1.0;
        Ok(p)
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.q.diagonal().iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    /// Law at `t` started from `initial`.
    pub fn transient_pmf(&self, initial: &[i64], t: f64) -> Result<Vec<f64>> {
        self.transient_from(&self.point_mass(initial)?, t, None)
    }

    /// Propagates the row vector `p0` by uniformization at rate `lambda_star`
    /// (default: the largest exit rate).
    pub fn transient_from(&self, p0: &[f64], t: f64, lambda_star: Option<f64>) -> Result<Vec<f64>> {
        ensure_time(t)?;
        ensure(p0.len() == self.len(), || "initial law has the wrong length".into())?;
        let max_rate = self.max_exit_rate();
        let ls = lambda_star.unwrap_or(max_rate);
        ensure(ls >= max_rate, || format!("uniformization rate {ls} is below the largest exit rate {max_rate}"))?;
        if t == 0.0 || ls == 0.0 {
            return Ok(p0.to_vec());
        }
        let n = self.len();
        let p = DMatrix::identity(n, n) + &self.q / ls;
        let steps = (ls * t / MAX_STEP_MASS).ceil().max(1.0) as usize;
        let a = ls * t / steps as f64;
        let k_max = poisson_truncation(a, UNIFORMIZATION_TAIL);
        if k_max > 100_000 {
            return Err(Error::Truncation { bound: poisson_tail_bound(a, 100_000), tolerance: UNIFORMIZATION_TAIL });
        }
        let weights: Vec<f64> = (0..=k_max as i64).map(|k| poisson_pmf_value(a, k)).collect::<Result<_>>()?;
        let mut cur = DVector::from_column_slice(p0);
        for _ in 0..steps {
            let mut v = cur.clone();
            let mut acc = &v * weights[0];
            for w in &weights[1..] {
                v = p.tr_mul(&v);
                acc.axpy(*w, &v, 1.0);
            }
            cur = acc;
        }
        Ok(cur.iter().map(|x| x.max(0.0)).collect())
    }

    /// Solves `π Q = 0`, `Σ π = 1`.
    pub fn stationary(&self) -> Result<Vec<f64>> {
        let n = self.len();
        let mut a = self.q.transpose();
        for j in 0..n {
            a[(n - 1, j)] = 1.0;
        }
        let mut b = DVector::zeros(n);
        b[n - 1] = 1.0;
        let x = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::IllConditioned { condition: f64::INFINITY })?;
        Ok(x.iter().copied().collect())
    }
}

/// Death-migration chain on `{(h, k): h + k <= n1 + n2}`, states in lexicographic order.
pub fn build_death_migration_generator(spec: &BdmSpec) -> Result<FiniteGenerator> {
    spec.validate()?;
    ensure(spec.is_death_migration(), || "birth rates must be zero".into())?;
    let total = spec.total() as i64;
    let states: Vec<Vec<i64>> = (0..=total).flat_map(|h| (0..=total - h).map(move |k| vec![h, k])).collect();
    FiniteGenerator::from_rule(states, |s| {
        let (h, k) = (s[0], s[1]);
        let (hf, kf) = (h as f64, k as f64);
        let mut out = Vec::new();
        if h > 0 {
            out.push((vec![h - 1, k], spec.mu1 * hf));
            out.push((vec![h - 1, k + 1], spec.eta1 * hf));
        }
        if k > 0 {
            out.push((vec![h, k - 1], spec.mu2 * kf));
            out.push((vec![h + 1, k - 1], spec.eta2 * kf));
        }
        out
    })
}

/// Tridiagonal chain of `N1` on `{0, ..., n1 + n2}`.
pub fn build_pure_migration_generator(spec: &PureMigrationSpec) -> Result<FiniteGenerator> {
    spec.validate()?;
    let n = spec.total() as i64;
    FiniteGenerator::from_rule((0..=n).map(|k| vec![k]).collect(), |s| {
        let k = s[0];
        let mut out = Vec::new();
        if k > 0 {
            out.push((vec![k - 1], spec.eta1 * k as f64));
        }
        if k < n {
            out.push((vec![k + 1], spec.eta2 * (n - k) as f64));
        }
        out
    })
}

/// Joint law of `Σ_j jump_j · C_j` with independent `C_j ~ Poisson(Λ_j)`,
/// restricted to a rectangular window.
#[derive(Clone, Debug, PartialEq)]
pub struct PmfTable {
    pub lo: [i64; 2],
    pub hi: [i64; 2],
    values: Vec<f64>,
    /// Bound on the mass dropped by truncating the Poisson counts.
    pub truncation_bound: f64,
}

impl PmfTable {
    fn width(&self) -> usize {
        (self.hi[1] - self.lo[1] + 1) as usize
    }

    pub fn get(&self, m: i64, n: i64) -> f64 {
        if m < self.lo[0] || m > self.hi[0] || n < self.lo[1] || n > self.hi[1] {
            return 0.0;
        }
        self.values[(m - self.lo[0]) as usize * self.width() + (n - self.lo[1]) as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = ((i64, i64), f64)> + '_ {
        let w = self.width();
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &p)| ((self.lo[0] + (i / w) as i64, self.lo[1] + (i % w) as i64), p))
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Dynamic-programming convolution over jump types; each count is truncated
/// where its Poisson tail drops below `tail`. `offset` shifts the result.
pub fn poisson_convolution_pmf(
    jumps: &[([i64; 2], f64)],
    offset: [i64; 2],
    window: ([i64; 2], [i64; 2]),
    tail: f64,
) -> Result<PmfTable> {
    let (lo, hi) = window;
    ensure(lo[0] <= hi[0] && lo[1] <= hi[1], || "empty window".into())?;
    ensure(jumps.iter().all(|j| j.1.is_finite() && j.1 >= 0.0), || "accumulated rates must be finite and >= 0".into())?;
    let mut bound = 0.0;
    let mut dist: BTreeMap<[i64; 2], f64> = BTreeMap::from([(offset, 1.0)]);
    for &(jump, lambda) in jumps {
        if lambda == 0.0 || jump == [0, 0] {
            continue;
        }
        let k_max = poisson_truncation(lambda, tail);
        bound += poisson_tail_bound(lambda, k_max);
        let weights: Vec<f64> = (0..=k_max as i64).map(|k| poisson_pmf_value(lambda, k)).collect::<Result<_>>()?;
        let mut next: BTreeMap<[i64; 2], f64> = BTreeMap::new();
        for (x, p) in &dist {
            for (c, w) in weights.iter().enumerate() {
                let c = c as i64;
                *next.entry([x[0] + c * jump[0], x[1] + c * jump[1]]).or_insert(0.0) += p * w;
            }
        }
        dist = next;
    }
    let width = (hi[1] - lo[1] + 1) as usize;
    let mut values = vec![0.0; (hi[0] - lo[0] + 1) as usize * width];
    for (x, p) in dist {
        if (lo[0]..=hi[0]).contains(&x[0]) && (lo[1]..=hi[1]).contains(&x[1]) {
            values[(x[0] - lo[0]) as usize * width + (x[1] - lo[1]) as usize] = p;
        }
    }
    Ok(PmfTable { lo, hi, values, truncation_bound: bound })
}

/// `Σ_h P{N1 = h + k} P{N2 = h}` truncated once the geometric tail of the
/// summand falls below `tol`.
pub fn bd_difference_convolution(lambda1: f64, mu1: f64, lambda2: f64, mu2: f64, t: f64, k: i64, tol: f64) -> Result<f64> {
    let ratio = bd_ratio(lambda1, mu1, t)? * bd_ratio(lambda2, mu2, t)?;
    let mut acc = 0.0;
    let start = (-k).max(0);
    let mut h = start;
    loop {
        let term = bd_pmf(lambda1, mu1, t, h + k)? * bd_pmf(lambda2, mu2, t, h)?;
        acc += term;
        // from h >= 1 on, terms shrink geometrically by `ratio`
        if h > start.max(1) && term * ratio / (1.0 - ratio) < tol {
            break;
        }
        h += 1;
        if h > 10_000_000 {
            return Err(Error::SeriesNonConvergence { what: "birth-death difference", max_terms: 10_000_000 });
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skellam::skellam_pmf_value;
    use crate::specfun::SeriesControl;

    const FLIP: f64 = 0.3160602794142788392022381;

    #[test]
    fn small_death_migration_chain() {
        let s = BdmSpec::death_migration([1.0, 2.0], [0.5, 0.25], [1, 0]).unwrap();
        let g = build_death_migration_generator(&s).unwrap();
        assert_eq!(g.states(), &[vec![0, 0], vec![0, 1], vec![1, 0]]);
        let q = g.matrix();
        assert_eq!(q.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0; 3]);
        assert_eq!(q[(2, 0)], 1.0);
        assert_eq!(q[(2, 1)], 0.5);
        assert_eq!(q[(1, 0)], 2.0);
        assert_eq!(q[(1, 2)], 0.25);
        let big = build_death_migration_generator(&BdmSpec::death_migration([1.0, 2.0], [0.5, 0.25], [3, 2]).unwrap())
            .unwrap();
        assert_eq!(big.len(), 21);
        for r in big.matrix().row_iter() {
            assert!(r.sum().abs() < 1e-12);
        }
    }

    #[test]
    fn flip_chain() {
        let s = PureMigrationSpec::new(1.0, 1.0, [1, 0]).unwrap();
        let g = build_pure_migration_generator(&s).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.transient_pmf(&[1], 0.0).unwrap(), vec![0.0, 1.0]);
        let p = g.transient_pmf(&[1], 0.5).unwrap();
        assert!((p[0] - FLIP).abs() < 1e-14);
        assert!((p[0] - (1.0 - (-1f64).exp()) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn stationary_is_binomial() {
        let s = PureMigrationSpec::new(1.3, 0.6, [4, 3]).unwrap();
        let g = build_pure_migration_generator(&s).unwrap();
        for (a, b) in g.stationary().unwrap().iter().zip(s.stationary()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn uniformization_properties() {
        let s = BdmSpec::death_migration([1.0, 2.0], [0.5, 0.25], [3, 2]).unwrap();
        let g = build_death_migration_generator(&s).unwrap();
        let p0 = g.point_mass(&[3, 2]).unwrap();
        let a = g.transient_from(&p0, 0.7, None).unwrap();
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for k in [2.0, 5.0, 10.0] {
            let b = g.transient_from(&p0, 0.7, Some(k * g.max_exit_rate())).unwrap();
            assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
        }
        let half = g.transient_from(&p0, 0.3, None).unwrap();
        let ck = g.transient_from(&half, 0.4, None).unwrap();
        assert!(a.iter().zip(&ck).all(|(x, y)| (x - y).abs() < 1e-10));
        let long = g.transient_from(&p0, 200.0, None).unwrap();
        assert!((long[g.index_of(&[0, 0]).unwrap()] - 1.0).abs() < 1e-10);
        assert!(g.transient_from(&p0, 1.0, Some(0.5)).is_err());
        assert!(g.transient_pmf(&[9, 9], 1.0).is_err());
    }

    #[test]
    fn generator_validation() {
        let q = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 2.0, -1.0]);
        assert!(FiniteGenerator::new(vec![vec![0], vec![1]], q).is_err());
        let q = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 0.0]);
        assert!(FiniteGenerator::new(vec![vec![0], vec![1]], q).is_err());
    }

    #[test]
    fn convolution_examples() {
        let t = poisson_convolution_pmf(&[([1, 0], 2.5)], [0, 0], ([0, 0], [40, 0]), 1e-14).unwrap();
        for k in 0..20 {
            assert!((t.get(k, 0) - poisson_pmf_value(2.5, k).unwrap()).abs() < 1e-15);
        }
        let s = poisson_convolution_pmf(&[([1, 0], 1.5), ([-1, 0], 1.5)], [0, 0], ([-30, 0], [30, 0]), 1e-14).unwrap();
        for k in 0..10 {
            assert!((s.get(k, 0) - s.get(-k, 0)).abs() < 1e-16);
            let want = skellam_pmf_value(1.5, 1.5, k, &SeriesControl::default()).unwrap();
            assert!((s.get(k, 0) - want).abs() < 1e-14);
        }
        assert!((s.mass() - 1.0).abs() < 1e-12);
        assert!(s.truncation_bound < 1e-13);
    }

    #[test]
    fn bd_convolution_oracle() {
        let direct: f64 = (0..300).map(|h| bd_pmf(1.3, 0.7, 1.0, h + 2).unwrap() * bd_pmf(0.5, 0.9, 1.0, h).unwrap()).sum();
        let o = bd_difference_convolution(1.3, 0.7, 0.5, 0.9, 1.0, 2, 1e-15).unwrap();
        assert!((direct - o).abs() < 1e-14);
    }
}
