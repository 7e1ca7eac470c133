//! One TOML document configuring every stage.
//!
//! ```toml
//! seed = 7
//! [synthetic]
//! num_samples = 20000
//! [base]
//! hidden = [32, 16]
//! [train]
//! epochs = 3
//! [memory]
//! kernel = "softmax"
//! ```
//!
//! The memory model inherits `embedding_dim` and `hidden` from `[base]`
//! so that both models share the same backbone shape.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attribution::IgConfig;
use crate::data::SyntheticConfig;
use crate::error::{Error, Result};
use crate::memory::MemoryModelConfig;
use crate::sensitivity::RankConfig;
use crate::train::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { valid: 0.1, test: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaseConfig {
    pub embedding_dim: usize,
    pub hidden: Vec<usize>,
}

impl Default for BaseConfig {
    fn default() -> Self {
        BaseConfig {
            embedding_dim: 8,
            hidden: vec![64, 32],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub seeds: Vec<u64>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            seeds: (0..5).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigBundle {
    pub seed: u64,
    pub synthetic: SyntheticConfig,
    pub split: SplitConfig,
    pub base: BaseConfig,
    pub train: TrainConfig,
    pub ig: IgConfig,
    pub rank: RankConfig,
    pub memory: MemoryModelConfig,
    pub study: StudyConfig,
}

impl Default for ConfigBundle {
    fn default() -> Self {
        ConfigBundle {
            seed: 0,
            synthetic: SyntheticConfig::default(),
            split: SplitConfig::default(),
            base: BaseConfig::default(),
            train: TrainConfig::default(),
            ig: IgConfig::default(),
            rank: RankConfig::default(),
            memory: MemoryModelConfig::default(),
            study: StudyConfig::default(),
        }
    }
}

impl ConfigBundle {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut cfg: ConfigBundle = toml::from_str(text)?;
        cfg.resolve();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Copies the shared backbone shape into the memory section.
    pub fn resolve(&mut self) {
        self.memory.embedding_dim = self.base.embedding_dim;
        self.memory.hidden = self.base.hidden.clone();
    }

    pub fn validate(&self) -> Result<()> {
        if self.base.embedding_dim == 0 || self.base.hidden.is_empty() || self.base.hidden.contains(&0) {
            return Err(Error::Config("[base] needs a positive embedding size and hidden layers".into()));
        }
        self.train.validate()?;
        self.ig.validate()?;
        if self.study.seeds.is_empty() {
            return Err(Error::Config("[study] needs at least one seed".into()));
        }
        if self.rank.top_k.total() == 0 {
            return Err(Error::Config("top-k selects no features; the sensitive set would be empty".into()));
        }
        Ok(())
    }

    /// Structured copy for manifests.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
