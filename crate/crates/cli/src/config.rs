use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ptproc::bdm::{BdmSpec, PureMigrationSpec};
use ptproc::interact::{InteractingSkellamSpec, SamplingMethod, TrivariateSpec};
use ptproc::skellam::{GeneralizedSkellamSpec, NhSkellamSpec};
use ptproc::timechange::BernsteinSpec;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_REPLICATES: u64 = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Pmf,
    Moments,
    Validate,
    Timechange,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Pmf => "pmf",
            ExperimentKind::Moments => "moments",
            ExperimentKind::Validate => "validate",
            ExperimentKind::Timechange => "timechange",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ProcessSpec {
    InteractingSkellam(InteractingSkellamSpec),
    Skellam(NhSkellamSpec),
    GeneralizedSkellam(GeneralizedSkellamSpec),
    Trivariate(TrivariateSpec),
    Bdm(BdmSpec),
    PureMigration(PureMigrationSpec),
}

impl ProcessSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ProcessSpec::InteractingSkellam(_) => "interacting-skellam",
            ProcessSpec::Skellam(_) => "skellam",
            ProcessSpec::GeneralizedSkellam(_) => "generalized-skellam",
            ProcessSpec::Trivariate(_) => "trivariate",
            ProcessSpec::Bdm(_) => "bdm",
            ProcessSpec::PureMigration(_) => "pure-migration",
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            ProcessSpec::Skellam(_) | ProcessSpec::GeneralizedSkellam(_) => 1,
            ProcessSpec::Trivariate(_) => 3,
            _ => 2,
        }
    }

    pub fn validate(&self) -> ptproc::Result<()> {
        match self {
            ProcessSpec::InteractingSkellam(s) => s.validate(),
            ProcessSpec::Skellam(s) => s.validate(),
            ProcessSpec::GeneralizedSkellam(s) => s.validate(),
            ProcessSpec::Trivariate(s) => s.validate(),
            ProcessSpec::Bdm(s) => s.validate(),
            ProcessSpec::PureMigration(s) => s.validate(),
        }
    }
}

/// Per-run tolerance overrides; batteries fall back to their own defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ExperimentKind>,
    pub process: ProcessSpec,
    #[serde(default)]
    pub times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Window>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subordinator: Option<BernsteinSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub battery: Option<String>,
    #[serde(default)]
    pub sampling: SamplingMethod,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicates: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => return Err(CliError::Config(format!("unsupported schema_version {v}, expected {SCHEMA_VERSION}"))),
            None => return Err(CliError::Config("missing integer field schema_version".into())),
        }
        serde_json::from_value(value).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    /// Applies overrides, fixes the kind, and checks everything that does not
    /// need an engine run.
    pub fn resolve(mut self, kind: ExperimentKind, overrides: &Overrides) -> Result<Self, CliError> {
        if let Some(k) = self.kind {
            if k != kind {
                return Err(CliError::Config(format!("config is for `{k}` but `{kind}` was requested")));
            }
        }
        self.kind = Some(kind);
        if overrides.seed.is_some() {
            self.seed = overrides.seed;
        }
        if overrides.replicates.is_some() {
            self.replicates = overrides.replicates;
        }
        if overrides.out.is_some() {
            self.out = overrides.out.clone();
        }
        self.replicates.get_or_insert(DEFAULT_REPLICATES);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {}", self.schema_version));
        }
        if self.seed.is_none() {
            return bad("a seed is required (config `seed` or --seed)".into());
        }
        if self.replicates == Some(0) {
            return bad("replicate count must be at least 1".into());
        }
        if self.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return bad("times must be finite and non-negative".into());
        }
        if self.times.windows(2).any(|w| w[0] > w[1]) {
            return bad("times must be non-decreasing".into());
        }
        if self.times.is_empty() {
            return bad("at least one time is required".into());
        }
        if let Some(w) = &self.window {
            let d = self.process.dimension();
            if w.lo.len() != d || w.hi.len() != d || w.lo.iter().zip(&w.hi).any(|(a, b)| a > b) {
                return bad(format!("window must give {d} bounds with lo <= hi"));
            }
        }
        for (name, v) in [
            ("max_error", self.tolerances.max_error),
            ("p_value", self.tolerances.p_value),
            ("truncation", self.tolerances.truncation),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(format!("tolerance {name} must be positive"));
                }
            }
        }
        self.process.validate().map_err(|e| CliError::Config(format!("process spec: {e}")))?;
        if let Some(s) = &self.subordinator {
            s.validate().map_err(|e| CliError::Config(format!("subordinator: {e}")))?;
        }
        match self.kind {
            Some(ExperimentKind::Timechange) if self.subordinator.is_none() => {
                bad("timechange needs a `subordinator`".into())
            }
            Some(ExperimentKind::Validate) if self.battery.is_none() => bad("validate needs a `battery`".into()),
            _ => Ok(()),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or_default()
    }

    pub fn replicate_count(&self) -> u64 {
        self.replicates.unwrap_or(DEFAULT_REPLICATES)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "process": {"type": "skellam", "rate_up": {"kind": "constant", "c": 1.0},
                    "rate_down": {"kind": "constant", "c": 0.5}},
        "times": [1.0],
        "seed": 4
    }"#;

    #[test]
    fn defaults_and_overrides() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.process.dimension(), 1);
        let o = Overrides { seed: Some(9), replicates: None, out: Some("x".into()) };
        let r = cfg.resolve(ExperimentKind::Simulate, &o).unwrap();
        assert_eq!((r.seed(), r.replicate_count()), (9, DEFAULT_REPLICATES));
        assert_eq!(r.kind, Some(ExperimentKind::Simulate));
        assert_eq!(r.out.as_deref(), Some(Path::new("x")));
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        let again = ExperimentConfig::parse(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn rejections() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        let err = |c: ExperimentConfig, k| matches!(c.resolve(k, &Overrides::default()), Err(CliError::Config(_)));
        assert!(err(cfg.clone(), ExperimentKind::Timechange));
        assert!(err(cfg.clone(), ExperimentKind::Validate));
        let mut w = cfg.clone();
        w.window = Some(Window { lo: vec![0, 0], hi: vec![1, 1] });
        assert!(err(w, ExperimentKind::Pmf));
        let mut t = cfg.clone();
        t.tolerances.max_error = Some(-1.0);
        assert!(err(t, ExperimentKind::Pmf));
        let mut e = cfg;
        e.times.clear();
        assert!(err(e, ExperimentKind::Simulate));
        assert!(ExperimentConfig::parse(r#"{"process": {"type": "skellam"}}"#).is_err());
    }
}
