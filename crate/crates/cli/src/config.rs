//! Versioned experiment configuration.

use std::path::Path;

use mehk_core::evolution::{AmeConfig, EvalMode};
use mehk_core::ncmaes::NcmaConfig;
use mehk_core::seeds;
use mehk_core::selection::{SparsityPool, DEFAULT_SPARSITY_K};
use mehk_core::sim::TaskKind;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    /// Fitness threshold; the published value for the mode when absent.
    pub threshold: Option<f64>,
    pub sparsity_k: usize,
    pub sparsity_pool: SparsityPool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self { threshold: None, sparsity_k: DEFAULT_SPARSITY_K, sparsity_pool: SparsityPool::Filtered }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Training runs per (design, task).
    pub replicates: usize,
    pub tasks: Vec<TaskKind>,
    pub ncma: NcmaConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { replicates: 1, tasks: TaskKind::DOWNSTREAM.to_vec(), ncma: NcmaConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub mode: EvalMode,
    pub replicates: usize,
    pub master_seed: u64,
    pub workers: usize,
    pub sync_mode: bool,
    /// Evaluations between generation checkpoints.
    pub checkpoint_every: usize,
    pub ame: AmeConfig,
    pub selection: SelectionConfig,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            mode: EvalMode::Mehk,
            replicates: 30,
            master_seed: 0,
            workers: 1,
            sync_mode: false,
            checkpoint_every: 100,
            ame: AmeConfig::default(),
            selection: SelectionConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Full-scale preset.
    pub fn full() -> Self {
        Self::default()
    }

    /// Desk-scale preset: 2000 evaluations, 5 replicates, 2500 training evaluations.
    pub fn desk() -> Self {
        let mut c = Self::default();
        c.replicates = 5;
        c.ame.budget = 2000;
        c.train.ncma.budget = 2500;
        c
    }

    pub fn threshold(&self) -> f64 {
        self.selection.threshold.unwrap_or_else(|| self.mode.default_threshold())
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "config version {} unsupported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.replicates == 0 || self.workers == 0 || self.checkpoint_every == 0 {
            return Err(CliError::Config("replicates, workers and checkpoint_every must be positive".into()));
        }
        if !self.threshold().is_finite() {
            return Err(CliError::Config("selection threshold must be finite".into()));
        }
        if self.selection.sparsity_k == 0 || self.train.replicates == 0 {
            return Err(CliError::Config("sparsity_k and train.replicates must be positive".into()));
        }
        self.ame_for(0).validate()?;
        self.train.ncma.validate()?;
        Ok(())
    }

    pub fn replicate_seed(&self, replicate: usize) -> u64 {
        seeds::derive(self.master_seed, &[seeds::STREAM_REPLICATE, replicate as u64])
    }

    /// AME configuration of one replicate.
    pub fn ame_for(&self, replicate: usize) -> AmeConfig {
        AmeConfig {
            mode: self.mode,
            workers: self.workers,
            master_seed: self.replicate_seed(replicate),
            sync_mode: self.sync_mode,
            ..self.ame.clone()
        }
    }

    pub fn ncma(&self) -> NcmaConfig {
        NcmaConfig { workers: self.workers, ..self.train.ncma.clone() }
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serialises to TOML")
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trip() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn thresholds_follow_mode() {
        let mut c = ExperimentConfig::default();
        assert_eq!(c.threshold(), 0.4);
        c.mode = EvalMode::Mefc;
        assert_eq!(c.threshold(), 0.2);
        c.selection.threshold = Some(0.1);
        assert_eq!(c.threshold(), 0.1);
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
        assert!(ExperimentConfig::from_toml("version = 2").is_err());
        assert!(ExperimentConfig::from_toml("[ame]\npopulation_size = 2\n").is_err());
    }

    #[test]
    fn desk_preset() {
        let c = ExperimentConfig::desk();
        assert_eq!((c.replicates, c.ame.budget, c.train.ncma.budget), (5, 2000, 2500));
    }
}
