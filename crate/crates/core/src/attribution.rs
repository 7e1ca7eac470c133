//! Integrated Gradients attribution on the pooled embedding matrix.
//!
//! Each feature gets one scalar per sample: the IG vector of its embedding
//! row, summed over the embedding dimension. The path runs from the zero
//! matrix to the sample's embeddings with right-endpoint Riemann steps.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact::fingerprint_params;
use crate::data::{MultiDomainDataset, Sample};
use crate::error::{Error, Result};
use crate::nn::{CtrModel, EmbeddingInputModel, Tensor};

pub const DEFAULT_IG_STEPS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    ZeroEmbedding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IgConfig {
    pub steps: usize,
    pub baseline: Baseline,
}

impl Default for IgConfig {
    fn default() -> Self {
        IgConfig {
            steps: DEFAULT_IG_STEPS,
            baseline: Baseline::ZeroEmbedding,
        }
    }
}

impl IgConfig {
    pub fn with_steps(steps: usize) -> Self {
        IgConfig {
            steps,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("IG needs at least one interpolation step".into()));
        }
        Ok(())
    }
}

/// IG scores of every feature against the zero baseline, computed in the
/// space of the embedding matrix `z`.
pub fn integrated_gradients_at<M: EmbeddingInputModel + ?Sized>(
    model: &M,
    z: &Tensor,
    cfg: &IgConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let baseline = match cfg.baseline {
        Baseline::ZeroEmbedding => Tensor::zeros(z.rows, z.cols),
    };
    let steps = cfg.steps;
    let mut grad_sum = Tensor::zeros(z.rows, z.cols);
    for t in 1..=steps {
        let alpha = t as f64 / steps as f64;
        let mut point = baseline.clone();
        for ((p, &x), &b) in point.data.iter_mut().zip(&z.data).zip(&baseline.data) {
            *p = b + alpha * (x - b);
        }
        let (_, g) = model.input_gradient(&point);
        grad_sum.add_assign(&g);
    }
    let scale = 1.0 / steps as f64;
    let scores = (0..z.rows)
        .map(|j| {
            z.row(j)
                .iter()
                .zip(baseline.row(j))
                .zip(grad_sum.row(j))
                .map(|((&x, &b), &g)| (x - b) * g * scale)
                .sum()
        })
        .collect();
    Ok(scores)
}

pub fn integrated_gradients<M: CtrModel + EmbeddingInputModel>(
    model: &M,
    sample: &Sample,
    cfg: &IgConfig,
) -> Result<Vec<f64>> {
    let z = model.embed(sample);
    if sample.values.len() != z.rows {
        return Err(Error::Compatibility(format!(
            "sample has {} features, model embeds {}",
            sample.values.len(),
            z.rows
        )));
    }
    integrated_gradients_at(model, &z, cfg)
}

/// Per-sample, per-feature IG scores with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionMatrix {
    pub num_samples: usize,
    pub num_features: usize,
    /// Row-major `num_samples × num_features`.
    pub scores: Vec<f64>,
    pub dataset_fingerprint: String,
    pub model_fingerprint: String,
    pub steps: usize,
}

impl AttributionMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.scores[i * self.num_features..(i + 1) * self.num_features]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.scores[i * self.num_features + j]
    }

    /// Matrix with every score equal to `value`, bound to `ds`.
    pub fn constant(ds: &MultiDomainDataset, value: f64) -> Self {
        AttributionMatrix {
            num_samples: ds.len(),
            num_features: ds.schema.num_features(),
            scores: vec![value; ds.len() * ds.schema.num_features()],
            dataset_fingerprint: ds.fingerprint(),
            model_fingerprint: "constant".into(),
            steps: 0,
        }
    }

    pub fn mean_abs(&self, j: usize) -> f64 {
        (0..self.num_samples).map(|i| self.get(i, j).abs()).sum::<f64>() / self.num_samples.max(1) as f64
    }

    pub fn check_dataset(&self, ds: &MultiDomainDataset) -> Result<()> {
        if self.num_samples != ds.len() || self.num_features != ds.schema.num_features() {
            return Err(Error::Compatibility(format!(
                "attribution is {}×{}, dataset is {}×{}",
                self.num_samples,
                self.num_features,
                ds.len(),
                ds.schema.num_features()
            )));
        }
        let fp = ds.fingerprint();
        if self.dataset_fingerprint != fp {
            return Err(Error::Compatibility(format!(
                "attribution was computed for dataset {}, not {}",
                short(&self.dataset_fingerprint),
                short(&fp)
            )));
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = AttributionHeader {
            dataset_fingerprint: self.dataset_fingerprint.clone(),
            model_fingerprint: self.model_fingerprint.clone(),
            steps: self.steps,
            num_features: self.num_features,
            num_samples: self.num_samples,
        };
        let head = serde_json::to_vec(&header)?;
        let io = |e| Error::io("<attribution>", e);
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&(head.len() as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&head).map_err(io)?;
        for s in &self.scores {
            w.write_all(&s.to_le_bytes()).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let io = |e| Error::io("<attribution>", e);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(Error::Value("not an attribution file".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len).map_err(io)?;
        let mut head = vec![0u8; u64::from_le_bytes(len) as usize];
        r.read_exact(&mut head).map_err(io)?;
        let header: AttributionHeader = serde_json::from_slice(&head)?;
        let n = header.num_samples * header.num_features;
        let mut buf = vec![0u8; n * 8];
        r.read_exact(&mut buf).map_err(io)?;
        let scores = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(AttributionMatrix {
            num_samples: header.num_samples,
            num_features: header.num_features,
            scores,
            dataset_fingerprint: header.dataset_fingerprint,
            model_fingerprint: header.model_fingerprint,
            steps: header.steps,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::MissingArtifact {
            path: path.to_path_buf(),
            msg: format!("attribution file not readable ({e}); run `attribute` first"),
        })?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

const MAGIC: &[u8; 8] = b"DSFMATR1";

#[derive(Serialize, Deserialize)]
struct AttributionHeader {
    dataset_fingerprint: String,
    model_fingerprint: String,
    steps: usize,
    num_features: usize,
    num_samples: usize,
}

fn short(fp: &str) -> &str {
    &fp[..fp.len().min(12)]
}

/// IG for every sample; rows land in sample order regardless of threading.
pub fn attribute_dataset<M: CtrModel + EmbeddingInputModel>(
    model: &M,
    ds: &MultiDomainDataset,
    cfg: &IgConfig,
) -> Result<AttributionMatrix> {
    cfg.validate()?;
    let schema_fp = ds.schema.fingerprint();
    if model.schema_fingerprint() != schema_fp {
        return Err(Error::Compatibility(format!(
            "model was built for schema {}, dataset uses {}",
            short(model.schema_fingerprint()),
            short(&schema_fp)
        )));
    }
    let m = ds.schema.num_features();
    let rows: Vec<Vec<f64>> = ds
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            integrated_gradients(model, s, cfg).map_err(|e| Error::Sample {
                index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let mut scores = Vec::with_capacity(ds.len() * m);
    for r in rows {
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::Value("non-finite attribution score".into()));
        }
        scores.extend(r);
    }
    Ok(AttributionMatrix {
        num_samples: ds.len(),
        num_features: m,
        scores,
        dataset_fingerprint: ds.fingerprint(),
        model_fingerprint: fingerprint_params(model),
        steps: cfg.steps,
    })
}
