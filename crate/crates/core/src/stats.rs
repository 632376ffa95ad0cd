//! Goodness-of-fit and summary statistics for simulation checks.

use std::collections::BTreeMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn chi_square_p(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    ChiSquared::new(dof as f64).map(|d| d.sf(statistic)).unwrap_or(f64::NAN)
}

/// Pearson goodness of fit. `cells` pairs observed counts with model
/// probabilities; the leftover mass and count form one more cell. Cells with
/// expected count below 5 are pooled.
pub fn chi_square_gof(cells: &[(u64, f64)], n: u64) -> ChiSquareTest {
    let nf = n as f64;
    let obs_rest = n.saturating_sub(cells.iter().map(|c| c.0).sum());
    let p_rest = (1.0 - cells.iter().map(|c| c.1).sum::<f64>()).max(0.0);
    let mut kept: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (obs_rest as f64, p_rest * nf);
    for &(o, p) in cells {
        if p * nf >= 5.0 {
            kept.push((o as f64, p * nf));
        } else {
            pooled.0 += o as f64;
            pooled.1 += p * nf;
        }
    }
    if pooled.1 >= 5.0 || kept.is_empty() {
        kept.push(pooled);
    } else if pooled.0 > 0.0 || pooled.1 > 0.0 {
        let smallest = kept
            .iter_mut()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty");
        smallest.0 += pooled.0;
        smallest.1 += pooled.1;
    }
    let statistic = kept
        .iter()
        .filter(|c| c.1 > 0.0)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dof = kept.len().saturating_sub(1);
    ChiSquareTest { statistic, dof, p_value: chi_square_p(statistic, dof) }
}

/// Two-sample chi-square homogeneity test on histograms over the same keys.
/// Keys with fewer than 10 combined counts are pooled.
pub fn two_sample_chi_square<K: Ord + Clone>(a: &BTreeMap<K, u64>, b: &BTreeMap<K, u64>) -> ChiSquareTest {
    let na: u64 = a.values().sum();
    let nb: u64 = b.values().sum();
    let (k1, k2) = ((nb as f64 / na as f64).sqrt(), (na as f64 / nb as f64).sqrt());
    let mut keys: Vec<&K> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    for k in keys {
        let x = *a.get(k).unwrap_or(&0) as f64;
        let y = *b.get(k).unwrap_or(&0) as f64;
        if x + y >= 10.0 {
            cells.push((x, y));
        } else {
            pooled.0 += x;
            pooled.1 += y;
        }
    }
    if pooled.0 + pooled.1 > 0.0 {
        cells.push(pooled);
    }
    let statistic = cells
        .iter()
        .map(|(x, y)| (k1 * x - k2 * y).powi(2) / (x + y))
        .sum();
    let dof = cells.len().saturating_sub(1);
    ChiSquareTest { statistic, dof, p_value: chi_square_p(statistic, dof) }
}

pub fn histogram<K: Ord + Clone>(samples: impl IntoIterator<Item = K>) -> BTreeMap<K, u64> {
    let mut h = BTreeMap::new();
    for s in samples {
        *h.entry(s).or_insert(0) += 1;
    }
    h
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn within(&self, target: f64, k_se: f64) -> bool {
        (self.mean - target).abs() <= k_se * self.std_error
    }
}

pub fn mean_estimate(xs: &[f64]) -> MeanEstimate {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0).max(1.0);
    MeanEstimate { mean, std_error: (var / n as f64).sqrt(), n }
}

/// Sample covariance of paired draws with a delta-method standard error.
pub fn covariance_estimate(xs: &[f64], ys: &[f64]) -> MeanEstimate {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let products: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let est = mean_estimate(&products);
    MeanEstimate { mean: est.mean * n / (n - 1.0), ..est }
}

/// Half-width of the Dvoretzky-Kiefer-Wolfowitz band at confidence `1 - level`.
pub fn dkw_epsilon(n: usize, level: f64) -> f64 {
    ((2.0 / level).ln() / (2.0 * n as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit_has_p_one() {
        let t = chi_square_gof(&[(250, 0.25), (250, 0.25), (500, 0.5)], 1000);
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.dof, 2);
        assert!((t.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gross_misfit_rejected() {
        let t = chi_square_gof(&[(900, 0.5)], 1000);
        assert!(t.p_value < 1e-10);
    }

    #[test]
    fn sparse_cells_are_pooled() {
        let t = chi_square_gof(&[(500, 0.5), (498, 0.498), (1, 0.001), (1, 0.001)], 1000);
        assert_eq!(t.dof, 1);
    }

    #[test]
    fn two_sample() {
        let a = histogram([1, 1, 2, 2, 3, 3].repeat(100));
        let b = histogram([1, 2, 3].repeat(300));
        let t = two_sample_chi_square(&a, &b);
        assert!(t.statistic.abs() < 1e-12);
        assert_eq!(t.dof, 2);
        let c = histogram([1, 1, 1, 1, 2, 3].repeat(100));
        assert!(two_sample_chi_square(&a, &c).p_value < 1e-6);
    }

    #[test]
    fn summaries() {
        let m = mean_estimate(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.std_error - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        let c = covariance_estimate(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]);
        assert!((c.mean - 2.0).abs() < 1e-14);
        assert!((dkw_epsilon(1000, 0.05) - (40f64.ln() / 2000.0).sqrt()).abs() < 1e-15);
    }
}
