//! Built-in engine-versus-oracle batteries run by the `validate` kind.

use rand::Rng;
use serde::Serialize;

use ptproc::bdm::{bd_difference_pmf, BdmSpec, PureMigrationSpec};
use ptproc::interact::InteractingSkellamSpec;
use ptproc::mc::{replicate, replicate_rng};
use ptproc::oracle::{
    bd_difference_convolution, build_death_migration_generator, build_pure_migration_generator, poisson_convolution_pmf,
};
use ptproc::stats::{chi_square_gof, histogram};
use ptproc::timechange::{talbot_pmf, BernsteinSpec, FractionalStateDistribution};

use crate::config::{ExperimentConfig, ExperimentKind, ProcessSpec, Tolerances, SCHEMA_VERSION};
use crate::output::{fmt_f64, Table};
use crate::CliError;

/// A measured quantity and the bound it must respect.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    /// `true` when the value must exceed the tolerance (p-values).
    pub lower_bound: bool,
}

impl Check {
    fn error(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, tolerance, lower_bound: false }
    }

    fn p_value(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, tolerance, lower_bound: true }
    }

    pub fn passed(&self) -> bool {
        if self.lower_bound {
            self.value > self.tolerance
        } else {
            self.value <= self.tolerance
        }
    }
}

pub fn checks_table(checks: &[Check]) -> Table {
    let mut t = Table::new(["check", "value", "tolerance", "bound", "passed"].map(String::from).to_vec());
    for c in checks {
        let bound = if c.lower_bound { "min" } else { "max" };
        t.push(vec![c.name.clone(), fmt_f64(c.value), fmt_f64(c.tolerance), bound.into(), c.passed().to_string()]);
    }
    t
}

#[derive(Clone, Debug, Serialize)]
pub struct Battery {
    pub name: &'static str,
    pub description: &'static str,
    pub template: ExperimentConfig,
    #[serde(skip)]
    run: fn(&ExperimentConfig) -> Result<Vec<Check>, CliError>,
}

impl Battery {
    pub fn run(&self, cfg: &ExperimentConfig) -> Result<Vec<Check>, CliError> {
        (self.run)(cfg)
    }
}

fn template(process: ProcessSpec, battery: &str, times: Vec<f64>, replicates: u64) -> ExperimentConfig {
    ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        kind: Some(ExperimentKind::Validate),
        process,
        times,
        replicates: Some(replicates),
        seed: Some(20240601),
        out: None,
        tolerances: Tolerances::default(),
        window: None,
        subordinator: None,
        battery: Some(battery.into()),
        sampling: Default::default(),
    }
}

fn interacting() -> InteractingSkellamSpec {
    InteractingSkellamSpec::constant([1.0, 0.5, 0.3, 0.8, 0.2, 0.4, 0.6, 0.1], [2, 1]).expect("valid rates")
}

fn death_migration() -> BdmSpec {
    BdmSpec::death_migration([1.0, 2.0], [0.5, 0.25], [3, 2]).expect("valid rates")
}

fn pure_migration() -> PureMigrationSpec {
    PureMigrationSpec::new(1.0, 2.0, [2, 1]).expect("valid rates")
}

/// The fixed catalog, in a stable order.
pub fn list_batteries() -> Vec<Battery> {
    let mut fractional = template(ProcessSpec::PureMigration(pure_migration()), "fractional-migration", vec![1.0], 100_000);
    fractional.subordinator = Some(BernsteinSpec::stable(0.6).expect("valid index"));
    vec![
        Battery {
            name: "skellam-decomposition",
            description: "joint PGF against the product of the four component Skellam PGFs at random (t, u, v)",
            template: template(ProcessSpec::InteractingSkellam(interacting()), "skellam-decomposition", vec![1.0], 100),
            run: skellam_decomposition,
        },
        Battery {
            name: "dual-engine-joint-law",
            description: "truncated joint pmf against the Poisson convolution oracle on a 41x41 window",
            template: template(ProcessSpec::InteractingSkellam(interacting()), "dual-engine-joint-law", vec![0.5, 1.0], 1),
            run: dual_engine,
        },
        Battery {
            name: "death-migration-multinomial",
            description: "closed-form death-migration law, extinction probability and covariance against uniformization",
            template: template(ProcessSpec::Bdm(death_migration()), "death-migration-multinomial", vec![0.3, 0.8, 2.0], 1),
            run: death_migration_multinomial,
        },
        Battery {
            name: "mean-vector",
            description: "closed-form mean vector against the moment ODE",
            template: template(
                ProcessSpec::Bdm(BdmSpec::new([1.0, 0.8, 0.5, 0.3, 0.2, 0.2], [3, 2]).expect("valid rates")),
                "mean-vector",
                (1..=20).map(|i| i as f64 * 0.1).collect(),
                1,
            ),
            run: mean_vector,
        },
        Battery {
            name: "pure-migration",
            description: "closed-form pure-migration law against the tridiagonal chain, and its binomial stationary law",
            template: template(ProcessSpec::PureMigration(pure_migration()), "pure-migration", vec![0.1, 1.0, 3.0], 1),
            run: pure_migration_battery,
        },
        Battery {
            name: "birth-death-difference",
            description: "difference of two linear birth-death processes against a truncated convolution",
            template: template(
                ProcessSpec::Bdm(BdmSpec::new([1.0, 0.8, 0.5, 1.2, 0.0, 0.0], [1, 1]).expect("valid rates")),
                "birth-death-difference",
                vec![0.5, 1.5],
                1,
            ),
            run: birth_death_difference,
        },
        Battery {
            name: "fractional-migration",
            description: "spectral fractional law against Laplace inversion and the time-changed sampler",
            template: fractional,
            run: fractional_migration,
        },
    ]
}

pub fn find(name: &str) -> Option<Battery> {
    list_batteries().into_iter().find(|b| b.name == name)
}

fn wrong_process(battery: &str, expected: &str) -> CliError {
    CliError::Config(format!("battery `{battery}` needs a `{expected}` process"))
}

fn max_error(cfg: &ExperimentConfig, default: f64) -> f64 {
    cfg.tolerances.max_error.unwrap_or(default)
}

fn skellam_decomposition(cfg: &ExperimentConfig) -> Result<Vec<Check>, CliError> {
    let ProcessSpec::InteractingSkellam(s) = &cfg.process else {
        return Err(wrong_process("skellam-decomposition", "interacting-skellam"));
    };
    let d = s.decompose();
    let mut rng = replicate_rng(cfg.seed(), 0);
    let mut worst = 0.0f64;
    for _ in 0..cfg.replicate_count() {
        let t = cfg.times[rng.random_range(0..cfg.times.len())];
        let (u, v) = (rng.random_range(0.5..=1.0), rng.random_range(0.5..=1.0));
        let product = d
            .components()
            .iter()
            .zip([u, v, u * v, u / v])
            .map(|(c, x)| c.pgf(t, x))
            .product::<ptproc::Result<f64>>()?;
        worst = worst.max((s.joint_pgf(t, u, v)? - product).abs());
    }
    Ok(vec![Check::error("max |joint pgf - product|", worst, max_error(cfg, 1e-12))])
}

fn dual_engine(cfg: &ExperimentConfig) -> Result<Vec<Check>, CliError> {
    let ProcessSpec::InteractingSkellam(s) = &cfg.process else {
        return Err(wrong_process("dual-engine-joint-law", "interacting-skellam"));
    };
    let [m0, n0] = s.initial;
    let (lo, hi) = cfg
        .window
        .as_ref()
        .map_or(([m0 - 20, n0 - 20], [m0 + 20, n0 + 20]), |w| ([w.lo[0], w.lo[1]], [w.hi[0], w.hi[1]]));
    let mut checks = Vec::new();
    for &t in &cfg.times {
        let eval = s.joint_pmf_auto(t, cfg.tolerances.truncation.unwrap_or(1e-14))?;
        let jumps: Vec<([i64; 2], f64)> =
            s.jump_menu().iter().map(|(j, r)| r.cumulative(t).map(|c| (*j, c))).collect::<ptproc::Result<_>>()?;
        let oracle = poisson_convolution_pmf(&jumps, s.initial, (lo, hi), 1e-16)?;
        let worst = oracle.iter().map(|((m, n), p)| (eval.pmf(m, n) - p).abs()).fold(0.0, f64::max);
        checks.push(Check::error(format!("joint pmf at t={}", fmt_f64(t)), worst, max_error(cfg, 1e-8)));
    }
    Ok(checks)
}

fn death_migration_multinomial(cfg: &ExperimentConfig) -> Result<Vec<Check>, CliError> {
    let ProcessSpec::Bdm(s) = &cfg.process else {
        return Err(wrong_process("death-migration-multinomial", "bdm"));
    };
    let g = build_death_migration_generator(s).map_err(|e| CliError::Config(e.to_string()))?;
    let start = [s.initial[0] as i64, s.initial[1] as i64];
    let tol = max_error(cfg, 1e-10);
    let (mut pmf, mut ext, mut cov) = (0.0f64, 0.0f64, 0.0f64);
    for &t in &cfg.times {
        let table = s.death_migration_table(t)?;
        let oracle = g.transient_pmf(&start, t)?;
        let (mut e1, mut e2, mut e12) = (0.0, 0.0, 0.0);
        for (state, p) in g.states().iter().zip(&oracle) {
            pmf = pmf.max((table[state[0] as usize][state[1] as usize] - p).abs());
            e1 += state[0] as f64 * p;
            e2 += state[1] as f64 * p;
            e12 += (state[0] * state[1]) as f64 * p;
        }
        let extinct = g.index_of(&[0, 0]).map_or(0.0, |i| oracle[i]);
        ext = ext.max((s.extinction_probability(t)? - extinct).abs());
        cov = cov.max((s.covariance_death_migration(t)? - (e12 - e1 * e2)).abs());
    }
    Ok(vec![
        Check::error("pmf table", pmf, tol),
        Check::error("extinction probability", ext, tol),
        Check::error("covariance", cov, tol),
    ])
}

fn mean_vector(cfg: &ExperimentConfig) -> Result<Vec<Check>, CliError> {
    let ProcessSpec::Bdm(s) = &cfg.process else {
        return Err(wrong_process("mean-vector", "bdm"));
    };
    let mut worst = 0.0f64;
    for &t in &cfg.times {
        let closed = s.mean_vector(t)?;
        let ode = s.moments_ode(t)?.means;
        worst = worst.max((closed[0] - ode[0]).abs()).max((closed[1] - ode[1]).abs());
    }
    Ok(vec![Check::error("mean vector", worst, max_error(cfg, 1e-8))])
}

fn pure_migration_battery(cfg: &ExperimentConfig) -> Result<Vec<Check>, CliError> {
    let ProcessSpec::PureMigration(s) = &cfg.process else {
        return Err(wrong_process("pure-migration", "pure-migration"));
    };
    let g = build_pure_migration_generator(s)?;
    let mut pmf = 0.0f64;
    for &t in &cfg.times {
        let oracle = g.transient_pmf(&[s.initial[0] as i64], t)?;
        for (a, b) in s.pmf_table(t)?.iter().zip(&oracle) {
            pmf = pmf.max((a - b).abs());
        }
    }
    let stationary =
        s.stationary().iter().zip(&g.stationary()?).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let tol = max_error(cfg, 1e-12);
    Ok(vec![Check::error("pmf", pmf, tol), Check::error("stationary law", stationary, tol)])
}

fn birth_death_difference(cfg: &ExperimentConfig) -> Result<Vec<Check>, CliError> {
    let ProcessSpec::Bdm(s) = &cfg.process else {
        return Err(wrong_process("birth-death-difference", "bdm"));
    };
    if s.eta1 != 0.0 || s.eta2 != 0.0 || s.initial != [1, 1] {
        return Err(CliError::Config("birth-death-difference needs zero migration and initial [1, 1]".into()));
    }
    let mut worst = 0.0f64;
    for &t in &cfg.times {
        for k in -15..=15 {
            let closed = bd_difference_pmf(s.lambda1, s.mu1, s.lambda2, s.mu2, t, k)?;
            let conv = bd_difference_convolution(s.lambda1, s.mu1, s.lambda2, s.mu2, t, k, 1e-17)?;
            worst = worst.max((closed - conv).abs());
        }
    }
    Ok(vec![Check::error("difference pmf on [-15, 15]", worst, max_error(cfg, 1e-10))])
}

fn fractional_migration(cfg: &ExperimentConfig) -> Result<Vec<Check>, CliError> {
    let ProcessSpec::PureMigration(s) = &cfg.process else {
        return Err(wrong_process("fractional-migration", "pure-migration"));
    };
    let sub: &BernsteinSpec =
        cfg.subordinator.as_ref().ok_or_else(|| CliError::Config("fractional-migration needs a subordinator".into()))?;
    let alpha = sub
        .pure_stable_alpha()
        .ok_or_else(|| CliError::Config("fractional-migration needs a pure stable subordinator".into()))?;
    let g = build_pure_migration_generator(s)?;
    let p0 = g.point_mass(&[s.initial[0] as i64])?;
    let spectral = FractionalStateDistribution::new(&g, &p0)?;
    let n = cfg.replicate_count();
    let mut inversion = 0.0f64;
    let mut checks = Vec::new();
    for (i, &t) in cfg.times.iter().enumerate() {
        let q = spectral.pmf(alpha, t)?;
        let talbot = talbot_pmf(&g, &p0, alpha, t)?;
        inversion = inversion.max(q.iter().zip(&talbot).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        let draws = replicate(cfg.seed().wrapping_add(i as u64), n, |rng, _| sub.time_changed_sample(s, t, rng));
        let draws = draws.into_iter().collect::<ptproc::Result<Vec<u64>>>()?;
        let h = histogram(draws);
        let cells: Vec<(u64, f64)> = q.iter().enumerate().map(|(k, p)| (*h.get(&(k as u64)).unwrap_or(&0), *p)).collect();
        let gof = chi_square_gof(&cells, n);
        checks.push(Check::p_value(
            format!("sampler GOF p-value at t={}", fmt_f64(t)),
            gof.p_value,
            cfg.tolerances.p_value.unwrap_or(1e-3),
        ));
    }
    checks.insert(0, Check::error("spectral vs Laplace inversion", inversion, max_error(cfg, 1e-8)));
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_direction() {
        assert!(Check::error("e", 1e-12, 1e-10).passed());
        assert!(!Check::error("e", 1e-9, 1e-10).passed());
        assert!(Check::p_value("p", 0.2, 1e-3).passed());
        assert!(!Check::p_value("p", 1e-4, 1e-3).passed());
    }

    #[test]
    fn names_are_unique_and_findable() {
        let names: Vec<&str> = list_batteries().iter().map(|b| b.name).collect();
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
        assert!(names.iter().all(|n| find(n).is_some()));
        assert!(find("nope").is_none());
    }

    #[test]
    fn mismatched_process_is_a_config_error() {
        let mut cfg = find("pure-migration").unwrap().template;
        cfg.process = ProcessSpec::Bdm(death_migration());
        assert!(matches!(find("pure-migration").unwrap().run(&cfg), Err(CliError::Config(_))));
    }
}
