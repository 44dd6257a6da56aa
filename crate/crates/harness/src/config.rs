//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use condphase::exact::InferenceBudget;
use condphase::mcmc::ChainSchedule;
use serde::Deserialize;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    StabilitySweep,
    DobrushinCert,
    PeierlsCert,
    EntropySuite,
    CrfUniqueness,
    CrfMixing,
    BlackwellDemo,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 7] = [
        ExperimentId::StabilitySweep,
        ExperimentId::DobrushinCert,
        ExperimentId::PeierlsCert,
        ExperimentId::EntropySuite,
        ExperimentId::CrfUniqueness,
        ExperimentId::CrfMixing,
        ExperimentId::BlackwellDemo,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentId::StabilitySweep => "stability-sweep",
            ExperimentId::DobrushinCert => "dobrushin-cert",
            ExperimentId::PeierlsCert => "peierls-cert",
            ExperimentId::EntropySuite => "entropy-suite",
            ExperimentId::CrfUniqueness => "crf-uniqueness",
            ExperimentId::CrfMixing => "crf-mixing",
            ExperimentId::BlackwellDemo => "blackwell-demo",
        }
    }

    /// Experiment coordinate of the seed.
    pub fn stream(&self) -> u32 {
        1 + ExperimentId::ALL.iter().position(|e| e == self).expect("listed") as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Enumeration,
    #[default]
    TransferMatrix,
    Mcmc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    Vertex,
    #[default]
    Edge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub burn_in: usize,
    pub measure: usize,
    #[serde(default = "one")]
    pub thin: usize,
}

fn one() -> usize {
    1
}

impl From<ScheduleConfig> for ChainSchedule {
    fn from(s: ScheduleConfig) -> Self {
        ChainSchedule {
            burn_in: s.burn_in,
            measure: s.measure,
            thin: s.thin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub max_enum_sites: usize,
    pub max_column_height: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must match the subcommand when given; required for `validate`.
    #[serde(default)]
    pub experiment: Option<ExperimentId>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub p: Vec<f64>,
    #[serde(default)]
    pub k: Vec<usize>,
    #[serde(default)]
    pub m: Vec<usize>,
    /// Ising couplings for crf-uniqueness.
    #[serde(default)]
    pub coupling: Vec<f64>,
    /// `[rows, cols]` boxes for the random-field experiments.
    #[serde(default)]
    pub boxes: Vec<[usize; 2]>,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub schedule: Option<ScheduleConfig>,
    #[serde(default)]
    pub budget: Option<BudgetConfig>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Signal dimension and per-step coordinate flip rate for entropy-suite.
    #[serde(default = "one")]
    pub r: usize,
    #[serde(default = "default_flip_rate")]
    pub flip_rate: f64,
    #[serde(default)]
    pub channel: ChannelKind,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Fill the wall_ms column; makes output timing dependent.
    #[serde(default)]
    pub record_wall_time: bool,
}

fn default_replicates() -> usize {
    100
}

fn default_tol() -> f64 {
    1e-12
}

fn default_flip_rate() -> f64 {
    0.2
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        ExperimentConfig::from_json(&text)
    }

    pub fn inference_budget(&self) -> InferenceBudget {
        match self.budget {
            Some(b) => InferenceBudget {
                max_enum_sites: b.max_enum_sites,
                max_column_height: b.max_column_height,
            },
            None => InferenceBudget::default(),
        }
    }

    pub fn chain_schedule(&self) -> ChainSchedule {
        self.schedule.map(Into::into).unwrap_or_default()
    }

    /// Experiment to run under `subcommand`, checking the config agrees.
    pub fn resolve(&self, subcommand: Option<ExperimentId>) -> Result<ExperimentId> {
        match (subcommand, self.experiment) {
            (Some(a), Some(b)) if a != b => Err(HarnessError::Config(format!(
                "config is for {} but the subcommand is {}",
                b.name(),
                a.name()
            ))),
            (Some(a), _) => Ok(a),
            (None, Some(b)) => Ok(b),
            (None, None) => Err(HarnessError::Config("config does not name an experiment".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_streams() {
        let c = ExperimentConfig::from_json(r#"{"experiment": "crf-mixing"}"#).unwrap();
        assert_eq!(c.replicates, 100);
        assert_eq!(c.channel, ChannelKind::Edge);
        assert_eq!(c.method, Method::TransferMatrix);
        assert_eq!(c.chain_schedule(), ChainSchedule::default());
        let streams: Vec<u32> = ExperimentId::ALL.iter().map(|e| e.stream()).collect();
        assert_eq!(streams, (1..=7).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_unknown_fields_and_mismatch() {
        assert!(ExperimentConfig::from_json(r#"{"p": [0.1], "q": 2}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"schedule": {"burn_in": 1, "measure": 2, "x": 0}}"#).is_err());
        let c = ExperimentConfig::from_json(r#"{"experiment": "peierls-cert"}"#).unwrap();
        assert!(c.resolve(Some(ExperimentId::DobrushinCert)).is_err());
        assert_eq!(c.resolve(None).unwrap(), ExperimentId::PeierlsCert);
        let anon = ExperimentConfig::from_json("{}").unwrap();
        assert!(anon.resolve(None).is_err());
    }
}
