//! Content fingerprints, model checkpoints and run manifests.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::Parameters;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash over the bit patterns of all parameters in order.
pub fn fingerprint_params<P: Parameters + ?Sized>(params: &P) -> String {
    let mut h = Sha256::new();
    for t in params.tensors() {
        h.update((t.rows as u64).to_le_bytes());
        h.update((t.cols as u64).to_le_bytes());
        for x in &t.data {
            h.update(x.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

pub fn file_fingerprint(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Self-describing model file: schema hash, hyperparameters, parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint<M> {
    pub format: String,
    pub kind: String,
    pub schema_fingerprint: String,
    pub model_fingerprint: String,
    pub hyperparameters: serde_json::Value,
    pub model: M,
}

const CHECKPOINT_FORMAT: &str = "dsfm-checkpoint/1";

impl<M: Serialize + DeserializeOwned + Parameters> Checkpoint<M> {
    pub fn new(kind: &str, schema_fingerprint: &str, hyperparameters: serde_json::Value, model: M) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            kind: kind.into(),
            schema_fingerprint: schema_fingerprint.into(),
            model_fingerprint: fingerprint_params(&model),
            hyperparameters,
            model,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_vec(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Loads and verifies kind, schema hash and parameter hash.
    pub fn load(path: &Path, kind: &str, schema_fingerprint: &str) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::MissingArtifact {
            path: path.to_path_buf(),
            msg: format!("checkpoint not readable: {e}"),
        })?;
        let ckpt: Checkpoint<M> = serde_json::from_slice(&bytes)?;
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.kind != kind {
            return Err(Error::Compatibility(format!(
                "{} holds a `{}` {} checkpoint, expected `{kind}`",
                path.display(),
                ckpt.kind,
                ckpt.format
            )));
        }
        if ckpt.schema_fingerprint != schema_fingerprint {
            return Err(Error::Compatibility(format!(
                "checkpoint schema {} does not match data schema {}",
                &ckpt.schema_fingerprint[..12.min(ckpt.schema_fingerprint.len())],
                &schema_fingerprint[..12.min(schema_fingerprint.len())]
            )));
        }
        if fingerprint_params(&ckpt.model) != ckpt.model_fingerprint {
            return Err(Error::Compatibility(format!(
                "{}: parameters do not match the recorded fingerprint",
                path.display()
            )));
        }
        Ok(ckpt)
    }
}

/// Record of one CLI run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub duration_secs: f64,
}

impl RunManifest {
    pub fn new(subcommand: &str, seed: u64, config: serde_json::Value) -> Self {
        RunManifest {
            tool_version: TOOL_VERSION.into(),
            subcommand: subcommand.into(),
            seed,
            config,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            duration_secs: 0.0,
        }
    }

    pub fn input(&mut self, name: &str, fingerprint: impl Into<String>) {
        self.inputs.insert(name.into(), fingerprint.into());
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        let fp = file_fingerprint(path)?;
        self.outputs.insert(path.display().to_string(), fp);
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
