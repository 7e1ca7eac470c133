//! Two towers over shared embeddings. The extractor tower sees only the
//! domain-sensitive features; retrievers let the base tower attend to it
//! at the embedding layer and between consecutive hidden layers.

use serde::{Deserialize, Serialize};

use super::attention::Kernel;
use super::retriever::{Retriever, RetrieverCache};
use crate::data::{FeatureSchema, Sample};
use crate::error::{Error, Result};
use crate::nn::layers::{relu, relu_grad};
use crate::nn::{CtrModel, EmbeddingInputModel, EmbeddingTables, Mlp, MlpCache, Parameters, Tensor};
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemoryModelConfig {
    pub embedding_dim: usize,
    pub hidden: Vec<usize>,
    /// Defaults to `hidden` when empty.
    pub extractor_hidden: Vec<usize>,
    pub attn_dim_emb: usize,
    pub attn_dim_hidden: usize,
    /// FFN width at the embedding site is `ffn_mult · d`.
    pub ffn_mult: usize,
    /// FFN width at hidden sites, where tokens have width 1.
    pub ffn_hidden: usize,
    pub sensitive: Vec<String>,
    pub kernel: Kernel,
    pub use_emb_attn: bool,
    pub use_hidden_attn: bool,
    pub use_aux_logit: bool,
}

impl Default for MemoryModelConfig {
    fn default() -> Self {
        MemoryModelConfig {
            embedding_dim: 8,
            hidden: vec![64, 32],
            extractor_hidden: Vec::new(),
            attn_dim_emb: 8,
            attn_dim_hidden: 4,
            ffn_mult: 4,
            ffn_hidden: 4,
            sensitive: Vec::new(),
            kernel: Kernel::Linear,
            use_emb_attn: true,
            use_hidden_attn: true,
            use_aux_logit: true,
        }
    }
}

impl MemoryModelConfig {
    pub fn extractor_sizes(&self) -> Vec<usize> {
        if self.extractor_hidden.is_empty() {
            self.hidden.clone()
        } else {
            self.extractor_hidden.clone()
        }
    }

    pub fn with_flags(mut self, emb: bool, hidden: bool, aux: bool) -> Self {
        self.use_emb_attn = emb;
        self.use_hidden_attn = hidden;
        self.use_aux_logit = aux;
        self
    }

    /// Schema positions of the sensitive features.
    pub fn sensitive_indices(&self, schema: &FeatureSchema) -> Result<Vec<usize>> {
        self.validate()?;
        let mut idx = Vec::with_capacity(self.sensitive.len());
        for name in &self.sensitive {
            let j = schema
                .index_of(name)
                .map_err(|_| Error::Config(format!("sensitive feature `{name}` is not in the schema")))?;
            if idx.contains(&j) {
                return Err(Error::Config(format!("sensitive feature `{name}` listed twice")));
            }
            idx.push(j);
        }
        Ok(idx)
    }

    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 || self.attn_dim_emb == 0 || self.attn_dim_hidden == 0 {
            return Err(Error::Config("embedding and attention widths must be positive".into()));
        }
        if self.ffn_mult == 0 || self.ffn_hidden == 0 {
            return Err(Error::Config("FFN widths must be positive".into()));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config("base tower needs at least one non-empty hidden layer".into()));
        }
        let ext = self.extractor_sizes();
        if ext.len() != self.hidden.len() || ext.contains(&0) {
            return Err(Error::Config(format!(
                "extractor has {} hidden layers, base has {}; they must match",
                ext.len(),
                self.hidden.len()
            )));
        }
        if self.sensitive.is_empty() {
            return Err(Error::Config("the sensitive feature set is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryModel {
    pub schema_fingerprint: String,
    pub config: MemoryModelConfig,
    pub sensitive_idx: Vec<usize>,
    pub embeddings: EmbeddingTables,
    pub base: Mlp,
    pub extractor: Mlp,
    pub emb_retriever: Retriever,
    /// One per gap between consecutive hidden layers.
    pub hidden_retrievers: Vec<Retriever>,
}

#[derive(Debug, Clone)]
pub struct MemoryCache {
    emb: Option<RetrieverCache>,
    ext: Option<MlpCache>,
    base_inputs: Vec<Vec<f64>>,
    base_pre: Vec<Vec<f64>>,
    hidden: Vec<Option<RetrieverCache>>,
}

impl MemoryModel {
    /// Embeddings and base tower are drawn exactly as for a `BaseDnn` with
    /// the same seed, so the two start from identical shared parameters.
    pub fn new(schema: &FeatureSchema, config: MemoryModelConfig, seed: u64) -> Result<Self> {
        let sensitive_idx = config.sensitive_indices(schema)?;
        let d = config.embedding_dim;
        let mut rng = rng_for(seed, "base-dnn/init");
        let embeddings = EmbeddingTables::init(schema, d, &mut rng);
        let base = Mlp::init(schema.num_features() * d, &config.hidden, &mut rng);

        let mut rng = rng_for(seed, "memory/init");
        let ext_sizes = config.extractor_sizes();
        let mut extractor = Mlp::init(sensitive_idx.len() * d, &ext_sizes, &mut rng);
        if let Some(out) = extractor.layers.last_mut() {
            out.w.fill(0.0);
            out.b.fill(0.0);
        }
        let emb_retriever = Retriever::init(d, config.attn_dim_emb, config.ffn_mult * d, &mut rng);
        let hidden_retrievers = (0..config.hidden.len() - 1)
            .map(|_| Retriever::init(1, config.attn_dim_hidden, config.ffn_hidden, &mut rng))
            .collect();
        Ok(MemoryModel {
            schema_fingerprint: schema.fingerprint(),
            config,
            sensitive_idx,
            embeddings,
            base,
            extractor,
            emb_retriever,
            hidden_retrievers,
        })
    }

    pub fn num_hidden(&self) -> usize {
        self.base.num_hidden()
    }

    /// Runs the extractor tower; returns its hidden states and logit.
    pub fn extractor_forward(&self, e_ext: &[f64]) -> Result<(Vec<Vec<f64>>, f64)> {
        if e_ext.len() != self.extractor.input_dim() {
            return Err(Error::Shape(format!(
                "extractor expects {} inputs, got {}",
                self.extractor.input_dim(),
                e_ext.len()
            )));
        }
        let (logit, cache) = self.extractor.forward_cached(e_ext);
        Ok((cache.inputs[1..].to_vec(), logit))
    }

    fn check_embeddings(&self, z: &Tensor) -> Result<()> {
        let m = self.embeddings.num_features();
        if z.rows != m || z.cols != self.embeddings.dim {
            return Err(Error::Shape(format!(
                "expected a {m}x{} embedding matrix, got {}x{}",
                self.embeddings.dim, z.rows, z.cols
            )));
        }
        Ok(())
    }

    fn forward_embeddings(&self, z: &Tensor) -> (f64, MemoryCache) {
        let cfg = &self.config;
        let z_ext = z.select_rows(&self.sensitive_idx);
        let ext = (cfg.use_aux_logit || cfg.use_hidden_attn).then(|| self.extractor.forward_cached(&z_ext.data).1);

        let (mut h, emb) = if cfg.use_emb_attn {
            let (zp, c) = self.emb_retriever.forward_cached(z, &z_ext, cfg.kernel);
            (zp.data, Some(c))
        } else {
            (z.data.clone(), None)
        };

        let last = self.base.layers.len() - 1;
        let mut base_inputs = Vec::with_capacity(last + 1);
        let mut base_pre = Vec::with_capacity(last + 1);
        let mut hidden = Vec::with_capacity(last.saturating_sub(1));
        for (l, layer) in self.base.layers.iter().enumerate() {
            let pre = layer.forward(&h);
            base_inputs.push(h);
            h = pre.clone();
            if l < last {
                h.iter_mut().for_each(|v| *v = relu(*v));
                if l + 1 < last {
                    hidden.push(match (cfg.use_hidden_attn, &ext) {
                        (true, Some(ext)) => {
                            let tokens = Tensor::from_vec(h.len(), 1, h);
                            let ext_h = &ext.inputs[l + 1];
                            let ext_tokens = Tensor::from_vec(ext_h.len(), 1, ext_h.clone());
                            let (out, c) =
                                self.hidden_retrievers[l].forward_cached(&tokens, &ext_tokens, cfg.kernel);
                            h = out.data;
                            Some(c)
                        }
                        _ => None,
                    });
                }
            }
            base_pre.push(pre);
        }
        let mut logit = h[0];
        if cfg.use_aux_logit {
            if let Some(pre) = ext.as_ref().and_then(|c| c.pre.last()) {
                logit += pre[0];
            }
        }
        let cache = MemoryCache {
            emb,
            ext,
            base_inputs,
            base_pre,
            hidden,
        };
        (logit, cache)
    }

    /// Reverse pass to `∂/∂Z`, accumulating every other gradient.
    fn backward_embeddings(&self, cache: &MemoryCache, dlogit: f64, grads: &mut MemoryModel) -> Tensor {
        let m = self.embeddings.num_features();
        let d = self.embeddings.dim;
        let last = self.base.layers.len() - 1;
        let mut d_ext_hidden: Vec<Option<Vec<f64>>> = vec![None; last];

        let mut dcur = vec![dlogit];
        for l in (0..=last).rev() {
            if l < last {
                if let Some(Some(rc)) = cache.hidden.get(l) {
                    let dt = Tensor::from_vec(dcur.len(), 1, dcur);
                    let (dtok, dext) = self.hidden_retrievers[l].backward(rc, &dt, &mut grads.hidden_retrievers[l]);
                    dcur = dtok.data;
                    d_ext_hidden[l] = Some(dext.data);
                }
                for (g, &p) in dcur.iter_mut().zip(&cache.base_pre[l]) {
                    *g *= relu_grad(p);
                }
            }
            dcur = self.base.layers[l].backward(&cache.base_inputs[l], &dcur, &mut grads.base.layers[l]);
        }
        let dz_prime = Tensor::from_vec(m, d, dcur);

        let (mut dz, mut dz_ext) = match &cache.emb {
            Some(rc) => self.emb_retriever.backward(rc, &dz_prime, &mut grads.emb_retriever),
            None => (dz_prime, Tensor::zeros(self.sensitive_idx.len(), d)),
        };

        if let Some(ec) = &cache.ext {
            let elast = self.extractor.layers.len() - 1;
            let mut de = vec![if self.config.use_aux_logit { dlogit } else { 0.0 }];
            for l in (0..=elast).rev() {
                if l < elast {
                    if let Some(extra) = &d_ext_hidden[l] {
                        for (g, &x) in de.iter_mut().zip(extra) {
                            *g += x;
                        }
                    }
                    for (g, &p) in de.iter_mut().zip(&ec.pre[l]) {
                        *g *= relu_grad(p);
                    }
                }
                de = self.extractor.layers[l].backward(&ec.inputs[l], &de, &mut grads.extractor.layers[l]);
            }
            for (a, b) in dz_ext.data.iter_mut().zip(&de) {
                *a += b;
            }
        }
        for (i, &j) in self.sensitive_idx.iter().enumerate() {
            for (a, &b) in dz.row_mut(j).iter_mut().zip(dz_ext.row(i)) {
                *a += b;
            }
        }
        dz
    }
}

impl Parameters for MemoryModel {
    fn tensors(&self) -> Vec<&Tensor> {
        let mut v = self.embeddings.tensors();
        v.extend(self.base.tensors());
        v.extend(self.extractor.tensors());
        v.extend(self.emb_retriever.tensors());
        for r in &self.hidden_retrievers {
            v.extend(r.tensors());
        }
        v
    }
    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.embeddings.tensors_mut();
        v.extend(self.base.tensors_mut());
        v.extend(self.extractor.tensors_mut());
        v.extend(self.emb_retriever.tensors_mut());
        for r in &mut self.hidden_retrievers {
            v.extend(r.tensors_mut());
        }
        v
    }
}

impl CtrModel for MemoryModel {
    type Cache = MemoryCache;

    fn schema_fingerprint(&self) -> &str {
        &self.schema_fingerprint
    }

    fn logit(&self, sample: &Sample) -> f64 {
        self.forward_embeddings(&self.embeddings.embed(sample)).0
    }

    fn forward_cached(&self, sample: &Sample) -> (f64, MemoryCache) {
        self.forward_embeddings(&self.embeddings.embed(sample))
    }

    fn backward(&self, sample: &Sample, cache: &MemoryCache, dlogit: f64, grads: &mut Self) {
        let dz = self.backward_embeddings(cache, dlogit, grads);
        self.embeddings.accumulate_grad(sample, &dz, &mut grads.embeddings);
    }

    fn zeros_like(&self) -> Self {
        let mut g = self.clone();
        g.zero();
        g
    }
}

impl EmbeddingInputModel for MemoryModel {
    fn embed(&self, sample: &Sample) -> Tensor {
        self.embeddings.embed(sample)
    }

    fn logit_from_embeddings(&self, z: &Tensor) -> f64 {
        debug_assert!(self.check_embeddings(z).is_ok());
        self.forward_embeddings(z).0
    }

    fn input_gradient(&self, z: &Tensor) -> (f64, Tensor) {
        let (logit, cache) = self.forward_embeddings(z);
        let mut scratch = self.zeros_like();
        (logit, self.backward_embeddings(&cache, 1.0, &mut scratch))
    }
}
