//! Study configuration file (TOML). Every key is optional; see the README
//! for the full list and defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::ModelKind;
use crate::sim::SimConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySettings {
    /// Model that accounts for competing events.
    pub competing_model: ModelKind,
    /// Model that recodes competing events as censoring.
    pub naive_model: ModelKind,
    /// Evaluation horizons as quantile levels of the held-out event times.
    pub horizons: Vec<f64>,
    pub cause: u8,
    pub dev_fraction: f64,
    /// Grouping column for fairness reports: `group` or a binary `x{k}`.
    pub group: String,
    pub jobs: Option<usize>,
}

impl Default for StudySettings {
    fn default() -> Self {
        Self {
            competing_model: ModelKind::FineGray,
            naive_model: ModelKind::Cox,
            horizons: vec![0.5, 1.0],
            cause: 1,
            dev_fraction: 0.8,
            group: "group".into(),
            jobs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySettings {
    pub threshold: f64,
    /// Quantile level of the held-out event times used as the decision horizon.
    pub horizon: f64,
    /// Covariate index holding age; unset makes everyone eligible.
    pub age_covariate: Option<usize>,
    pub min_age: f64,
}

impl Default for PolicySettings {
    fn default() -> Self {
        Self {
            threshold: 0.10,
            horizon: 1.0,
            age_covariate: None,
            min_age: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub sim: SimConfig,
    pub study: StudySettings,
    pub policy: PolicySettings,
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        let s = &self.study;
        if s.horizons.is_empty() || s.horizons.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return Err(Error::Config("horizons must be quantile levels in [0, 1]".into()));
        }
        if s.cause == 0 || s.cause > 2 {
            return Err(Error::Config(format!("cause {} is not 1 or 2", s.cause)));
        }
        if !(s.dev_fraction > 0.0 && s.dev_fraction < 1.0) {
            return Err(Error::Config("dev_fraction must lie in (0, 1)".into()));
        }
        if s.jobs == Some(0) {
            return Err(Error::Config("jobs must be positive".into()));
        }
        let p = &self.policy;
        if !(p.threshold > 0.0 && p.threshold < 1.0) || !(0.0..=1.0).contains(&p.horizon) {
            return Err(Error::Config("policy threshold must lie in (0, 1) and horizon in [0, 1]".into()));
        }
        if p.age_covariate.is_some_and(|c| c >= self.sim.p) {
            return Err(Error::Config("policy age_covariate is not a covariate index".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = StudyConfig::from_toml("").unwrap();
        assert_eq!(c, StudyConfig::default());
        assert_eq!(c.sim.n, 30_000);
        assert_eq!(c.sim.replications, 25);
    }

    #[test]
    fn partial_sections() {
        let c = StudyConfig::from_toml(
            "[sim]\nn = 100\nreplications = 2\n[study]\nhorizons = [1.0]\nnaive_model = \"km\"\n[policy]\nthreshold = 0.2\n",
        )
        .unwrap();
        assert_eq!((c.sim.n, c.sim.replications), (100, 2));
        assert_eq!(c.study.horizons, vec![1.0]);
        assert_eq!(c.study.naive_model, ModelKind::Km);
        assert_eq!(c.policy.threshold, 0.2);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(StudyConfig::from_toml("[sim]\nbogus = 1\n").is_err());
        assert!(StudyConfig::from_toml("[study]\nhorizons = [1.5]\n").is_err());
        assert!(StudyConfig::from_toml("[study]\nnaive_model = \"weibull\"\n").is_err());
        assert!(StudyConfig::from_toml("[sim]\np = 4\n").is_err());
    }

    #[test]
    fn toml_roundtrip() {
        let c = StudyConfig::default();
        assert_eq!(StudyConfig::from_toml(&c.to_toml()).unwrap(), c);
    }
}
