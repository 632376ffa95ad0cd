//! The four non-validation experiment kinds. Each returns a table whose
//! columns depend only on the kind and the process dimension.

use rand::Rng;

use ptproc::bdm::BdmSpec;
use ptproc::interact::InteractingSkellamSpec;
use ptproc::mc::replicate;
use ptproc::skellam::{NhSkellamSpec, SamplePath};
use ptproc::stats::{covariance_estimate, mean_estimate};
use ptproc::oracle::{build_death_migration_generator, build_pure_migration_generator};
use ptproc::timechange::{fractional_distribution, BernsteinSpec, HomogeneousSampler, InverseControl};

use crate::config::{ExperimentConfig, ProcessSpec};
use crate::output::{fmt_f64, Table};
use crate::CliError;

const DEFAULT_TRUNCATION: f64 = 1e-13;

fn state_columns(prefix: &[&str], dim: usize) -> Vec<String> {
    prefix.iter().map(|s| s.to_string()).chain((1..=dim).map(|i| format!("x{i}"))).collect()
}

fn unsupported(cfg: &ExperimentConfig, what: &str) -> CliError {
    CliError::Config(format!("{what} is not available for process type `{}`", cfg.process.name()))
}

/// One path per replicate up to the last time, read off at every grid time.
/// Trivariate endpoints are drawn independently per time.
fn endpoints<R: Rng + ?Sized>(process: &ProcessSpec, cfg: &ExperimentConfig, rng: &mut R) -> ptproc::Result<Vec<Vec<i64>>> {
    let horizon = *cfg.times.last().expect("validated non-empty");
    let read = |p: SamplePath| cfg.times.iter().map(|&t| p.state_at(t)).collect();
    Ok(match process {
        ProcessSpec::InteractingSkellam(s) => read(s.sample_path(horizon, rng, cfg.sampling)?),
        ProcessSpec::Skellam(s) => read(s.sample(horizon, rng)?),
        ProcessSpec::GeneralizedSkellam(s) => read(s.sample(horizon, rng)?),
        ProcessSpec::Bdm(s) => read(s.sample_gillespie(horizon, rng)?),
        ProcessSpec::PureMigration(s) => read(s.as_bdm().sample_gillespie(horizon, rng)?),
        ProcessSpec::Trivariate(s) => cfg.times.iter().map(|&t| s.sample_endpoint(t, rng).to_vec()).collect(),
    })
}

fn all_endpoints(cfg: &ExperimentConfig) -> Result<Vec<Vec<Vec<i64>>>, CliError> {
    replicate(cfg.seed(), cfg.replicate_count(), |rng, _| endpoints(&cfg.process, cfg, rng))
        .into_iter()
        .collect::<ptproc::Result<_>>()
        .map_err(CliError::Engine)
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let dim = cfg.process.dimension();
    let mut table = Table::new(state_columns(&["replicate", "time"], dim));
    for (r, states) in all_endpoints(cfg)?.into_iter().enumerate() {
        for (t, x) in cfg.times.iter().zip(states) {
            let mut row = vec![r.to_string(), fmt_f64(*t)];
            row.extend(x.iter().map(i64::to_string));
            table.push(row);
        }
    }
    Ok(table)
}

fn window_or(cfg: &ExperimentConfig, lo: Vec<i64>, hi: Vec<i64>) -> (Vec<i64>, Vec<i64>) {
    cfg.window.as_ref().map_or((lo, hi), |w| (w.lo.clone(), w.hi.clone()))
}

/// Law of a finite chain run on the inverse of a pure stable subordinator.
fn fractional_pmf(cfg: &ExperimentConfig, sub: &BernsteinSpec) -> Result<Table, CliError> {
    let alpha = sub
        .pure_stable_alpha()
        .ok_or_else(|| CliError::Config("fractional pmf needs a pure stable subordinator".into()))?;
    let (gen, initial, total) = match &cfg.process {
        ProcessSpec::PureMigration(s) => (build_pure_migration_generator(s)?, vec![s.initial[0] as i64], Some(s.total() as i64)),
        ProcessSpec::Bdm(s) if s.is_death_migration() => {
            (build_death_migration_generator(s)?, s.initial.iter().map(|&x| x as i64).collect(), None)
        }
        _ => return Err(unsupported(cfg, "a fractional pmf")),
    };
    let mut columns = state_columns(&["alpha", "time"], 2);
    columns.push("probability".into());
    let mut table = Table::new(columns);
    for &t in &cfg.times {
        let (q, _) = fractional_distribution(&gen, alpha, t, &initial)?;
        for (state, p) in gen.states().iter().zip(q) {
            let (x1, x2) = match total {
                Some(n) => (state[0], n - state[0]),
                None => (state[0], state[1]),
            };
            table.push(vec![fmt_f64(alpha), fmt_f64(t), x1.to_string(), x2.to_string(), fmt_f64(p)]);
        }
    }
    Ok(table)
}

pub fn pmf(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    if let Some(sub) = &cfg.subordinator {
        return fractional_pmf(cfg, sub);
    }
    let dim = cfg.process.dimension();
    let mut columns = state_columns(&["time"], dim);
    columns.push("probability".into());
    let mut table = Table::new(columns);
    let eps = cfg.tolerances.truncation.unwrap_or(DEFAULT_TRUNCATION);
    for &t in &cfg.times {
        let ft = fmt_f64(t);
        match &cfg.process {
            ProcessSpec::InteractingSkellam(s) => {
                let [m0, n0] = s.initial;
                let (lo, hi) = window_or(cfg, vec![m0 - 10, n0 - 10], vec![m0 + 10, n0 + 10]);
                let eval = s.joint_pmf_auto(t, eps)?;
                for m in lo[0]..=hi[0] {
                    for n in lo[1]..=hi[1] {
                        table.push(vec![ft.clone(), m.to_string(), n.to_string(), fmt_f64(eval.pmf(m, n))]);
                    }
                }
            }
            ProcessSpec::Skellam(s) => {
                let (lo, hi) = window_or(cfg, vec![s.initial - 20], vec![s.initial + 20]);
                for k in lo[0]..=hi[0] {
                    table.push(vec![ft.clone(), k.to_string(), fmt_f64(s.pmf(t, k)?)]);
                }
            }
            ProcessSpec::Bdm(s) if s.is_death_migration() => {
                let p = s.death_migration_table(t)?;
                for (m, row) in p.iter().enumerate() {
                    for (n, v) in row.iter().enumerate().take(s.total() as usize + 1 - m) {
                        table.push(vec![ft.clone(), m.to_string(), n.to_string(), fmt_f64(*v)]);
                    }
                }
            }
            ProcessSpec::PureMigration(s) => {
                let n = s.total() as i64;
                for (k, v) in s.pmf_table(t)?.iter().enumerate() {
                    let k = k as i64;
                    table.push(vec![ft.clone(), k.to_string(), (n - k).to_string(), fmt_f64(*v)]);
                }
            }
            ProcessSpec::Bdm(_) => {
                return Err(CliError::Config("closed-form pmf needs zero birth rates (death-migration)".into()))
            }
            _ => return Err(unsupported(cfg, "an exact pmf")),
        }
    }
    Ok(table)
}

struct Exact {
    means: Vec<f64>,
    variances: Vec<f64>,
    covariance: Option<f64>,
}

fn skellam_exact(s: &NhSkellamSpec, t: f64) -> ptproc::Result<(f64, f64)> {
    let (up, down) = s.cumulatives(t)?;
    Ok((s.mean(t)?, up + down))
}

fn exact_moments(process: &ProcessSpec, t: f64) -> Result<Exact, CliError> {
    let bdm = |s: &BdmSpec| -> ptproc::Result<Exact> {
        let m = s.moments_ode(t)?;
        Ok(Exact { means: m.means.to_vec(), variances: m.variances().to_vec(), covariance: Some(m.covariance()) })
    };
    Ok(match process {
        ProcessSpec::InteractingSkellam(s) => {
            let (a, b) = s.marginal_rates();
            let ((m1, v1), (m2, v2)) = (skellam_exact(&a, t)?, skellam_exact(&b, t)?);
            Exact { means: vec![m1, m2], variances: vec![v1, v2], covariance: Some(s.covariance(t, t)?) }
        }
        ProcessSpec::Skellam(s) => {
            let (m, v) = skellam_exact(s, t)?;
            Exact { means: vec![m], variances: vec![v], covariance: None }
        }
        ProcessSpec::Bdm(s) => bdm(s)?,
        ProcessSpec::PureMigration(s) => bdm(&s.as_bdm())?,
        _ => return Err(CliError::Config(format!("exact moments are not available for `{}`", process.name()))),
    })
}

/// Exact moments beside Monte Carlo estimates with standard errors.
pub fn moments(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let exact: Vec<Exact> = cfg.times.iter().map(|&t| exact_moments(&cfg.process, t)).collect::<Result<_, _>>()?;
    let samples = all_endpoints(cfg)?;
    let mut table = Table::new(["time", "statistic", "exact", "estimate", "std_error"].map(String::from).to_vec());
    let column = |ti: usize, c: usize| -> Vec<f64> { samples.iter().map(|s| s[ti][c] as f64).collect() };
    for (ti, (t, ex)) in cfg.times.iter().zip(&exact).enumerate() {
        let ft = fmt_f64(*t);
        let mut row = |name: String, exact: f64, est: f64, se: f64| {
            table.push(vec![ft.clone(), name, fmt_f64(exact), fmt_f64(est), fmt_f64(se)]);
        };
        for (c, (m, v)) in ex.means.iter().zip(&ex.variances).enumerate() {
            let xs = column(ti, c);
            let me = mean_estimate(&xs);
            let ve = covariance_estimate(&xs, &xs);
            row(format!("mean_{}", c + 1), *m, me.mean, me.std_error);
            row(format!("var_{}", c + 1), *v, ve.mean, ve.std_error);
        }
        if let Some(cov) = ex.covariance {
            let ce = covariance_estimate(&column(ti, 0), &column(ti, 1));
            row("cov_12".into(), cov, ce.mean, ce.std_error);
        }
    }
    Ok(table)
}

fn changed<B, R>(base: &B, tau: f64, rng: &mut R) -> Vec<i64>
where
    B: HomogeneousSampler,
    B::State: IntoIterator,
    <B::State as IntoIterator>::Item: Into<i128>,
    R: Rng + ?Sized,
{
    base.endpoint(tau, rng).into_iter().map(|x| x.into() as i64).collect()
}

/// Time-changed endpoints. Each (replicate, time) pair gets its own draw of
/// the inverse subordinator, reported as `inverse_time`.
pub fn timechange(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let sub = cfg.subordinator.as_ref().expect("validated");
    let check = match &cfg.process {
        ProcessSpec::InteractingSkellam(s) => s.check_homogeneous(),
        ProcessSpec::Skellam(s) => s.check_homogeneous(),
        ProcessSpec::Bdm(s) => s.check_homogeneous(),
        ProcessSpec::PureMigration(s) => s.check_homogeneous(),
        _ => return Err(unsupported(cfg, "a time change")),
    };
    check.map_err(|e| CliError::Config(e.to_string()))?;
    let dim = cfg.process.dimension();
    let rows = replicate(cfg.seed(), cfg.replicate_count(), |rng, _| {
        cfg.times
            .iter()
            .map(|&t| {
                let tau = sub.sample_inverse(t, rng, &InverseControl::default())?;
                let x = match &cfg.process {
                    ProcessSpec::InteractingSkellam(s) => changed::<InteractingSkellamSpec, _>(s, tau, rng),
                    ProcessSpec::Skellam(s) => vec![s.endpoint(tau, rng)],
                    ProcessSpec::Bdm(s) => changed::<BdmSpec, _>(s, tau, rng),
                    ProcessSpec::PureMigration(s) => {
                        let k = s.endpoint(tau, rng) as i64;
                        vec![k, s.total() as i64 - k]
                    }
                    _ => unreachable!("checked above"),
                };
                Ok((t, tau, x))
            })
            .collect::<ptproc::Result<Vec<_>>>()
    });
    let mut table = Table::new(state_columns(&["replicate", "time", "inverse_time"], dim));
    for (r, draws) in rows.into_iter().enumerate() {
        for (t, tau, x) in draws? {
            let mut row = vec![r.to_string(), fmt_f64(t), fmt_f64(tau)];
            row.extend(x.iter().map(i64::to_string));
            table.push(row);
        }
    }
    Ok(table)
}
