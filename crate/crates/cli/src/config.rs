use std::fs;
use std::path::{Path, PathBuf};

use entsched::classifier::TrainingConfig;
use entsched::scheduling::PolicyKind;
use entsched::simulator::SimConfig;
use entsched::topology::TopologyParams;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

/// Everything an experiment needs. An empty file gives the default setting:
/// 10 nodes, 1000 slots, all five policies at loads 2, 6 and 8.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seeds topology generation, dataset sampling and training.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub policies: Vec<PolicyKind>,
    pub lambdas: Vec<f64>,
    /// One simulation run per seed for every policy and load.
    pub seeds: Vec<u64>,
    pub topology: TopologyParams,
    pub training: TrainingConfig,
    pub simulation: SimConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            output_dir: PathBuf::from("out"),
            policies: PolicyKind::ALL.to_vec(),
            lambdas: vec![2.0, 6.0, 8.0],
            seeds: vec![1],
            topology: TopologyParams::default(),
            training: TrainingConfig::default(),
            simulation: SimConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &Path) -> CliResult<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate().map_err(|e| CliError::Config {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        ExperimentConfig::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> entsched::Result<()> {
        if self.policies.is_empty() || self.lambdas.is_empty() || self.seeds.is_empty() {
            return Err(entsched::Error::Config("policies, lambdas and seeds must be non-empty".into()));
        }
        self.topology.validate()?;
        self.training.validate()?;
        for &lambda in &self.lambdas {
            SimConfig { lambda, ..self.simulation.clone() }.validate()?;
        }
        Ok(())
    }

    pub fn training_config(&self) -> TrainingConfig {
        TrainingConfig { seed: self.seed, ..self.training.clone() }
    }

    pub fn sim_config(&self, lambda: f64, seed: u64) -> SimConfig {
        SimConfig { lambda, seed, ..self.simulation.clone() }
    }

    pub fn needs_model(&self) -> bool {
        self.policies.iter().any(|p| p.is_adaptive())
    }

    pub fn topology_path(&self) -> PathBuf {
        self.output_dir.join("topology.txt")
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.output_dir.join("dataset.csv")
    }

    pub fn model_path(&self) -> PathBuf {
        self.output_dir.join("model.bin")
    }

    pub fn training_report_path(&self) -> PathBuf {
        self.output_dir.join("training_report.csv")
    }

    pub fn runs_dir(&self) -> PathBuf {
        self.output_dir.join("runs")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.output_dir.join("report")
    }
}
