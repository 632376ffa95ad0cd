//! Deterministic, non-negative, time-dependent rate functions.
//!
//! Three primitive kinds cover every rate in the process specs: constants,
//! right-continuous piecewise-constant functions and linearly interpolated
//! tables (clamped outside the grid). Pointwise sums and products of rates
//! appear in the interacting models; they are kept symbolic so that their
//! cumulative integrals stay exact: between two consecutive breakpoints of the
//! leaves every composite is a polynomial, integrated by Gauss-Legendre with
//! enough nodes to be exact.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, ensure_time, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RateFunction {
    Constant {
        c: f64,
    },
    /// `values[i]` on `[breakpoints[i], breakpoints[i + 1])`, the last value
    /// extending to infinity. `breakpoints[0]` must be `0`.
    Piecewise {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
    /// Linear interpolation on `grid`, constant outside it.
    Tabulated {
        grid: Vec<f64>,
        values: Vec<f64>,
    },
    Sum {
        terms: Vec<RateFunction>,
    },
    Product {
        factors: Vec<RateFunction>,
    },
}

impl Default for RateFunction {
    fn default() -> Self {
        RateFunction::Constant { c: 0.0 }
    }
}

impl RateFunction {
    pub fn constant(c: f64) -> Self {
        RateFunction::Constant { c }
    }

    pub fn zero() -> Self {
        RateFunction::Constant { c: 0.0 }
    }

    pub fn piecewise(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let r = RateFunction::Piecewise { breakpoints, values };
        r.validate()?;
        Ok(r)
    }

    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let r = RateFunction::Tabulated { grid, values };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        fn check_values(values: &[f64]) -> Result<()> {
            ensure(values.iter().all(|v| v.is_finite() && *v >= 0.0), || {
                format!("rate values must be finite and non-negative: {values:?}")
            })
        }
        fn check_increasing(xs: &[f64], what: &str) -> Result<()> {
            ensure(
                xs.iter().all(|x| x.is_finite()) && xs.windows(2).all(|w| w[0] < w[1]),
                || format!("{what} must be finite and strictly increasing: {xs:?}"),
            )
        }
        match self {
            RateFunction::Constant { c } => check_values(std::slice::from_ref(c)),
            RateFunction::Piecewise { breakpoints, values } => {
                ensure(!values.is_empty() && breakpoints.len() == values.len(), || {
                    "piecewise rate needs one value per breakpoint".into()
                })?;
                ensure(breakpoints[0] == 0.0, || "first breakpoint must be 0".into())?;
                check_increasing(breakpoints, "breakpoints")?;
                check_values(values)
            }
            RateFunction::Tabulated { grid, values } => {
                ensure(!values.is_empty() && grid.len() == values.len(), || {
                    "tabulated rate needs one value per grid point".into()
                })?;
                ensure(grid[0] >= 0.0, || "grid must start at t >= 0".into())?;
                check_increasing(grid, "grid")?;
                check_values(values)
            }
            RateFunction::Sum { terms: children } | RateFunction::Product { factors: children } => {
                ensure(!children.is_empty(), || "empty composite rate".into())?;
                children.iter().try_for_each(RateFunction::validate)
            }
        }
    }

    /// `λ(t)`; rejects negative times.
    pub fn value(&self, t: f64) -> Result<f64> {
        ensure_time(t)?;
        Ok(self.rate_at(t))
    }

    pub(crate) fn rate_at(&self, t: f64) -> f64 {
        match self {
            RateFunction::Constant { c } => *c,
            RateFunction::Piecewise { breakpoints, values } => {
                let i = breakpoints.partition_point(|&b| b <= t);
                values[i.saturating_sub(1)]
            }
            RateFunction::Tabulated { grid, values } => interpolate(grid, values, t),
            RateFunction::Sum { terms } => terms.iter().map(|r| r.rate_at(t)).sum(),
            RateFunction::Product { factors } => factors.iter().map(|r| r.rate_at(t)).product(),
        }
    }

    /// `Λ(t) = ∫₀ᵗ λ(s) ds`, exact for every kind.
    pub fn cumulative(&self, t: f64) -> Result<f64> {
        ensure_time(t)?;
        Ok(self.integral(t))
    }

    pub(crate) fn integral(&self, t: f64) -> f64 {
        match self {
            RateFunction::Constant { c } => c * t,
            RateFunction::Piecewise { breakpoints, values } => {
                let mut acc = 0.0;
                for (i, &b) in breakpoints.iter().enumerate() {
                    if b >= t {
                        break;
                    }
                    let end = breakpoints.get(i + 1).copied().unwrap_or(f64::INFINITY).min(t);
                    acc += values[i] * (end - b);
                }
                acc
            }
            RateFunction::Tabulated { grid, values } => tabulated_integral(grid, values, t),
            RateFunction::Sum { terms } => terms.iter().map(|r| r.integral(t)).sum(),
            RateFunction::Product { .. } => {
                let nodes = gauss_legendre(self.degree() / 2 + 1);
                let mut cuts: Vec<f64> = self.breakpoints().into_iter().filter(|&b| b > 0.0 && b < t).collect();
                cuts.insert(0, 0.0);
                cuts.push(t);
                cuts.windows(2)
                    .map(|w| {
                        let (a, b) = (w[0], w[1]);
                        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
                        half * nodes.iter().map(|&(x, wt)| wt * self.rate_at(mid + half * x)).sum::<f64>()
                    })
                    .sum()
            }
        }
    }

    /// Upper bound of `λ` on `[t0, t1]`, exact for the primitive kinds.
    pub fn sup_on(&self, t0: f64, t1: f64) -> Result<f64> {
        ensure_time(t0)?;
        if !(t1 > t0) {
            return Err(Error::Domain(format!("empty interval [{t0}, {t1}]")));
        }
        Ok(self.majorant(t0, t1))
    }

    pub(crate) fn majorant(&self, t0: f64, t1: f64) -> f64 {
        match self {
            RateFunction::Constant { c } => *c,
            RateFunction::Piecewise { breakpoints, values } => breakpoints
                .iter()
                .enumerate()
                .filter(|&(i, &b)| {
                    let next = breakpoints.get(i + 1).copied().unwrap_or(f64::INFINITY);
                    b <= t1 && next > t0
                })
                .map(|(i, _)| values[i])
                .fold(0.0, f64::max),
            RateFunction::Tabulated { grid, values } => grid
                .iter()
                .zip(values)
                .filter(|&(&g, _)| g > t0 && g < t1)
                .map(|(_, &v)| v)
                .fold(interpolate(grid, values, t0).max(interpolate(grid, values, t1)), f64::max),
            RateFunction::Sum { terms } => terms.iter().map(|r| r.majorant(t0, t1)).sum(),
            RateFunction::Product { factors } => factors.iter().map(|r| r.majorant(t0, t1)).product(),
        }
    }

    /// Sorted, deduplicated breakpoints of every primitive leaf.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_breakpoints(&mut out);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn collect_breakpoints(&self, out: &mut Vec<f64>) {
        match self {
            RateFunction::Constant { .. } => {}
            RateFunction::Piecewise { breakpoints, .. } => out.extend_from_slice(breakpoints),
            RateFunction::Tabulated { grid, .. } => out.extend_from_slice(grid),
            RateFunction::Sum { terms: children } | RateFunction::Product { factors: children } => {
                children.iter().for_each(|r| r.collect_breakpoints(out))
            }
        }
    }

    /// Polynomial degree between breakpoints.
    fn degree(&self) -> usize {
        match self {
            RateFunction::Constant { .. } | RateFunction::Piecewise { .. } => 0,
            RateFunction::Tabulated { .. } => 1,
            RateFunction::Sum { terms } => terms.iter().map(RateFunction::degree).max().unwrap_or(0),
            RateFunction::Product { factors } => factors.iter().map(RateFunction::degree).sum(),
        }
    }

    /// `Some(c)` when the function is constant in time.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            RateFunction::Constant { c } => Some(*c),
            RateFunction::Piecewise { values, .. } | RateFunction::Tabulated { values, .. } => {
                values.iter().all(|v| *v == values[0]).then(|| values[0])
            }
            RateFunction::Sum { terms } => terms.iter().map(RateFunction::as_constant).sum(),
            RateFunction::Product { factors } => factors.iter().map(RateFunction::as_constant).product(),
        }
    }

    pub fn is_strictly_positive(&self) -> bool {
        match self {
            RateFunction::Constant { c } => *c > 0.0,
            RateFunction::Piecewise { values, .. } | RateFunction::Tabulated { values, .. } => {
                values.iter().all(|v| *v > 0.0)
            }
            RateFunction::Sum { terms } => terms.iter().any(RateFunction::is_strictly_positive),
            RateFunction::Product { factors } => factors.iter().all(RateFunction::is_strictly_positive),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_constant() == Some(0.0)
    }

    pub fn scale(&self, k: f64) -> RateFunction {
        self.mul(&RateFunction::constant(k))
    }

    /// Pointwise product, simplified where the result stays primitive.
    pub fn mul(&self, other: &RateFunction) -> RateFunction {
        use RateFunction::*;
        match (self, other) {
            (Constant { c: a }, Constant { c: b }) => Constant { c: a * b },
            (Constant { c }, _) | (_, Constant { c }) if *c == 0.0 => RateFunction::zero(),
            (Constant { c }, r) | (r, Constant { c }) if *c == 1.0 => r.clone(),
            (Constant { c }, Piecewise { breakpoints, values })
            | (Piecewise { breakpoints, values }, Constant { c }) => Piecewise {
                breakpoints: breakpoints.clone(),
                values: values.iter().map(|v| v * c).collect(),
            },
            (Constant { c }, Tabulated { grid, values }) | (Tabulated { grid, values }, Constant { c }) => {
                Tabulated { grid: grid.clone(), values: values.iter().map(|v| v * c).collect() }
            }
            (Piecewise { .. }, Piecewise { .. }) => merge_piecewise(self, other, |a, b| a * b),
            _ => {
                let mut factors = Vec::new();
                for r in [self, other] {
                    match r {
                        Product { factors: inner } => factors.extend(inner.iter().cloned()),
                        _ => factors.push(r.clone()),
                    }
                }
                Product { factors }
            }
        }
    }

    /// Pointwise sum, simplified where the result stays primitive.
    pub fn add(&self, other: &RateFunction) -> RateFunction {
        use RateFunction::*;
        match (self, other) {
            (Constant { c: a }, Constant { c: b }) => Constant { c: a + b },
            (Constant { c }, r) | (r, Constant { c }) if *c == 0.0 => r.clone(),
            (Constant { .. } | Piecewise { .. }, Constant { .. } | Piecewise { .. }) => {
                merge_piecewise(self, other, |a, b| a + b)
            }
            (Constant { c }, Tabulated { grid, values }) | (Tabulated { grid, values }, Constant { c }) => {
                Tabulated { grid: grid.clone(), values: values.iter().map(|v| v + c).collect() }
            }
            (Tabulated { grid: g1, .. }, Tabulated { grid: g2, .. }) => {
                let mut grid: Vec<f64> = g1.iter().chain(g2).copied().collect();
                grid.sort_by(f64::total_cmp);
                grid.dedup();
                let values = grid.iter().map(|&t| self.rate_at(t) + other.rate_at(t)).collect();
                Tabulated { grid, values }
            }
            _ => {
                let mut terms = Vec::new();
                for r in [self, other] {
                    match r {
                        Sum { terms: inner } => terms.extend(inner.iter().cloned()),
                        _ => terms.push(r.clone()),
                    }
                }
                Sum { terms }
            }
        }
    }

    pub fn sum_of<'a>(rates: impl IntoIterator<Item = &'a RateFunction>) -> RateFunction {
        rates.into_iter().fold(RateFunction::zero(), |acc, r| acc.add(r))
    }

    pub fn product_of<'a>(rates: impl IntoIterator<Item = &'a RateFunction>) -> RateFunction {
        rates.into_iter().fold(RateFunction::constant(1.0), |acc, r| acc.mul(r))
    }
}

fn merge_piecewise(a: &RateFunction, b: &RateFunction, op: impl Fn(f64, f64) -> f64) -> RateFunction {
    let mut breakpoints: Vec<f64> = a.breakpoints().into_iter().chain(b.breakpoints()).collect();
    breakpoints.push(0.0);
    breakpoints.sort_by(f64::total_cmp);
    breakpoints.dedup();
    let values = breakpoints.iter().map(|&t| op(a.rate_at(t), b.rate_at(t))).collect();
    RateFunction::Piecewise { breakpoints, values }
}

fn interpolate(grid: &[f64], values: &[f64], t: f64) -> f64 {
    let i = grid.partition_point(|&g| g <= t);
    if i == 0 {
        return values[0];
    }
    if i == grid.len() {
        return values[values.len() - 1];
    }
    let (g0, g1) = (grid[i - 1], grid[i]);
    let w = (t - g0) / (g1 - g0);
    values[i - 1] + w * (values[i] - values[i - 1])
}

fn tabulated_integral(grid: &[f64], values: &[f64], t: f64) -> f64 {
    // constant before the first grid point
    let mut acc = values[0] * grid[0].min(t);
    for i in 0..grid.len() - 1 {
        let (a, b) = (grid[i], grid[i + 1]);
        if a >= t {
            break;
        }
        let end = b.min(t);
        acc += 0.5 * (end - a) * (values[i] + interpolate(grid, values, end));
    }
    let last = grid[grid.len() - 1];
    if t > last {
        acc += values[values.len() - 1] * (t - last);
    }
    acc
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, exact for degree `2n - 1`.
pub(crate) fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let n = n.max(1);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pw(pairs: &[(f64, f64)]) -> RateFunction {
        RateFunction::piecewise(pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect()).unwrap()
    }

    fn tab(pairs: &[(f64, f64)]) -> RateFunction {
        RateFunction::tabulated(pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect()).unwrap()
    }

    #[test]
    fn values() {
        assert_eq!(RateFunction::constant(2.0).value(5.0).unwrap(), 2.0);
        assert_eq!(pw(&[(0.0, 1.0), (3.0, 4.0)]).value(3.0).unwrap(), 4.0);
        assert_eq!(pw(&[(0.0, 1.0), (3.0, 4.0)]).value(2.999).unwrap(), 1.0);
        assert_eq!(tab(&[(0.0, 0.0), (1.0, 2.0)]).value(0.5).unwrap(), 1.0);
        assert_eq!(tab(&[(0.0, 0.0), (1.0, 2.0)]).value(7.0).unwrap(), 2.0);
        assert!(RateFunction::constant(1.0).value(-1.0).is_err());
    }

    #[test]
    fn cumulatives() {
        assert_eq!(RateFunction::constant(2.0).cumulative(3.0).unwrap(), 6.0);
        assert_eq!(pw(&[(0.0, 1.0), (2.0, 3.0)]).cumulative(4.0).unwrap(), 8.0);
        assert_eq!(tab(&[(0.0, 0.0), (2.0, 2.0)]).cumulative(2.0).unwrap(), 2.0);
        assert_eq!(tab(&[(0.0, 0.0), (2.0, 2.0)]).cumulative(3.0).unwrap(), 4.0);
        assert_eq!(RateFunction::constant(1.0).cumulative(0.0).unwrap(), 0.0);
    }

    #[test]
    fn suprema() {
        assert_eq!(RateFunction::constant(2.0).sup_on(0.0, 10.0).unwrap(), 2.0);
        assert_eq!(pw(&[(0.0, 1.0), (3.0, 4.0)]).sup_on(0.0, 5.0).unwrap(), 4.0);
        assert_eq!(pw(&[(0.0, 1.0), (3.0, 4.0)]).sup_on(0.0, 2.0).unwrap(), 1.0);
        assert_eq!(tab(&[(0.0, 0.0), (1.0, 3.0)]).sup_on(0.0, 1.0).unwrap(), 3.0);
        assert_eq!(tab(&[(0.0, 0.0), (1.0, 3.0), (2.0, 0.0)]).sup_on(0.5, 1.5).unwrap(), 3.0);
        assert!(RateFunction::constant(1.0).sup_on(2.0, 2.0).is_err());
    }

    #[test]
    fn invalid_rates_rejected() {
        assert!(RateFunction::piecewise(vec![1.0], vec![1.0]).is_err());
        assert!(RateFunction::piecewise(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(RateFunction::tabulated(vec![0.0, 1.0], vec![1.0, -2.0]).is_err());
        assert!(RateFunction::constant(-1.0).validate().is_err());
    }

    #[test]
    fn products_stay_exact() {
        let a = tab(&[(0.0, 0.0), (2.0, 2.0)]);
        let b = tab(&[(0.0, 1.0), (1.0, 3.0)]);
        let p = a.mul(&b);
        assert!(matches!(p, RateFunction::Product { .. }));
        // ∫₀¹ s(1+2s) ds + ∫₁² 3s ds = 1/2 + 2/3 + 9/2
        let exact = 0.5 + 2.0 / 3.0 + 4.5;
        assert!((p.cumulative(2.0).unwrap() - exact).abs() < 1e-13);
        let q = pw(&[(0.0, 1.0), (1.0, 2.0)]).mul(&pw(&[(0.0, 3.0), (0.5, 5.0)]));
        assert!(matches!(q, RateFunction::Piecewise { .. }));
        assert_eq!(q.cumulative(2.0).unwrap(), 0.5 * 3.0 + 0.5 * 5.0 + 1.0 * 10.0);
        assert_eq!(RateFunction::constant(2.0).mul(&RateFunction::constant(3.0)).as_constant(), Some(6.0));
    }

    #[test]
    fn sums_of_tables_merge_grids() {
        let s = tab(&[(0.0, 0.0), (2.0, 2.0)]).add(&tab(&[(1.0, 1.0), (3.0, 0.0)]));
        assert!(matches!(s, RateFunction::Tabulated { .. }));
        for t in [0.0f64, 0.5, 1.0, 1.7, 2.5, 4.0] {
            let direct = t.min(2.0) + if t <= 1.0 { 1.0 } else if t >= 3.0 { 0.0 } else { 1.0 - (t - 1.0) / 2.0 };
            assert!((s.value(t).unwrap() - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn gauss_legendre_exactness() {
        for n in 1..=6 {
            let nodes = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let q: f64 = nodes.iter().map(|&(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let r: RateFunction = serde_json_like(r#"{"kind":"constant","c":2.0}"#);
        assert_eq!(r, RateFunction::constant(2.0));
    }

    fn serde_json_like(s: &str) -> RateFunction {
        serde_json::from_str(s).unwrap()
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_rate() -> impl Strategy<Value = RateFunction> {
            let constant = (0.0..5.0f64).prop_map(RateFunction::constant);
            let piecewise = prop::collection::vec((0.01..2.0f64, 0.0..5.0f64), 1..6).prop_map(|segs| {
                let mut t = 0.0;
                let mut bp = vec![];
                let mut vals = vec![];
                for (dt, v) in segs {
                    bp.push(t);
                    vals.push(v);
                    t += dt;
                }
                RateFunction::piecewise(bp, vals).unwrap()
            });
            let tabulated = prop::collection::vec((0.01..2.0f64, 0.0..5.0f64), 1..6).prop_map(|pts| {
                let mut t = 0.0;
                let (mut g, mut v) = (vec![], vec![]);
                for (dt, x) in pts {
                    g.push(t);
                    v.push(x);
                    t += dt;
                }
                RateFunction::tabulated(g, v).unwrap()
            });
            let leaf = prop_oneof![constant, piecewise, tabulated];
            leaf.prop_recursive(2, 8, 3, |inner| {
                prop_oneof![
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| a.mul(&b)),
                    (inner.clone(), inner).prop_map(|(a, b)| a.add(&b)),
                ]
            })
        }

        proptest! {
            #[test]
            fn cumulative_is_monotone(r in arb_rate(), mut ts in prop::collection::vec(0.0..8.0f64, 2..10)) {
                ts.sort_by(f64::total_cmp);
                for w in ts.windows(2) {
                    prop_assert!(r.cumulative(w[1]).unwrap() - r.cumulative(w[0]).unwrap() >= -1e-12);
                }
            }

            #[test]
            fn majorant_dominates(r in arb_rate(), t in 0.01..8.0f64) {
                let m = r.sup_on(0.0, t).unwrap();
                prop_assert!(r.cumulative(t).unwrap() <= m * t * (1.0 + 1e-12) + 1e-12);
                for k in 0..=20 {
                    prop_assert!(r.value(t * k as f64 / 20.0).unwrap() <= m * (1.0 + 1e-12) + 1e-12);
                }
            }

            #[test]
            fn cumulative_matches_fine_quadrature(r in arb_rate(), t in 0.01..6.0f64) {
                let n = 20_000;
                let h = t / n as f64;
                // midpoint rule, error bounded by jumps and curvature
                let approx: f64 = (0..n).map(|i| r.rate_at((i as f64 + 0.5) * h) * h).sum();
                let exact = r.cumulative(t).unwrap();
                prop_assert!((approx - exact).abs() < 1e-2 * (1.0 + exact), "{approx} vs {exact}");
            }
        }
    }
}
