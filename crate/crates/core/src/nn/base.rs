use serde::{Deserialize, Serialize};

use super::embedding::EmbeddingTables;
use super::layers::{Mlp, MlpCache};
use super::tensor::Tensor;
use super::{CtrModel, EmbeddingInputModel, Parameters};
use crate::data::{FeatureSchema, Sample};
use crate::seed::rng_for;

/// Shared-bottom DNN: concatenated feature embeddings into one tower.
/// Serves as the attribution model and as the shared-DNN baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseDnn {
    pub schema_fingerprint: String,
    pub embeddings: EmbeddingTables,
    pub tower: Mlp,
}

impl BaseDnn {
    pub fn new(schema: &FeatureSchema, dim: usize, hidden: &[usize], seed: u64) -> Self {
        let mut rng = rng_for(seed, "base-dnn/init");
        let embeddings = EmbeddingTables::init(schema, dim, &mut rng);
        let tower = Mlp::init(schema.num_features() * dim, hidden, &mut rng);
        BaseDnn {
            schema_fingerprint: schema.fingerprint(),
            embeddings,
            tower,
        }
    }

    pub fn embedding_dim(&self) -> usize {
        self.embeddings.dim
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.tower.hidden_sizes()
    }
}

impl Parameters for BaseDnn {
    fn tensors(&self) -> Vec<&Tensor> {
        let mut v = self.embeddings.tensors();
        v.extend(self.tower.tensors());
        v
    }
    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.embeddings.tensors_mut();
        v.extend(self.tower.tensors_mut());
        v
    }
}

impl CtrModel for BaseDnn {
    type Cache = MlpCache;

    fn schema_fingerprint(&self) -> &str {
        &self.schema_fingerprint
    }

    fn logit(&self, sample: &Sample) -> f64 {
        self.tower.forward_unchecked(&self.embeddings.embed(sample).data)
    }

    fn forward_cached(&self, sample: &Sample) -> (f64, MlpCache) {
        self.tower.forward_cached(&self.embeddings.embed(sample).data)
    }

    fn backward(&self, sample: &Sample, cache: &MlpCache, dlogit: f64, grads: &mut Self) {
        let dx = self.tower.backward_cache(cache, dlogit, &mut grads.tower);
        let dz = Tensor::from_vec(self.embeddings.num_features(), self.embeddings.dim, dx);
        self.embeddings.accumulate_grad(sample, &dz, &mut grads.embeddings);
    }

    fn zeros_like(&self) -> Self {
        BaseDnn {
            schema_fingerprint: self.schema_fingerprint.clone(),
            embeddings: self.embeddings.zeros_like(),
            tower: Mlp::zeros(self.tower.input_dim(), &self.tower.hidden_sizes()),
        }
    }
}

impl EmbeddingInputModel for BaseDnn {
    fn embed(&self, sample: &Sample) -> Tensor {
        self.embeddings.embed(sample)
    }

    fn logit_from_embeddings(&self, z: &Tensor) -> f64 {
        self.tower.forward_unchecked(&z.data)
    }

    fn input_gradient(&self, z: &Tensor) -> (f64, Tensor) {
        let (logit, cache) = self.tower.forward_cached(&z.data);
        let mut scratch = Mlp::zeros(self.tower.input_dim(), &self.tower.hidden_sizes());
        let dx = self.tower.backward_cache(&cache, 1.0, &mut scratch);
        (logit, Tensor::from_vec(z.rows, z.cols, dx))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureSpec, FeatureValue};
    use crate::nn::gradcheck::{assert_close_rel, central_difference};
    use crate::nn::loss::{bce_grad, bce_single};

    fn schema() -> FeatureSchema {
        FeatureSchema::new(
            2,
            vec![
                FeatureSpec::categorical("c", vec!["a".into(), "b".into()]),
                FeatureSpec::sequential("s", vec!["x".into(), "y".into()]),
                FeatureSpec::numerical("n", vec![0.0, 1.0, 2.0]),
            ],
        )
        .unwrap()
    }

    fn sample() -> Sample {
        Sample {
            domain: 1,
            label: 1,
            values: vec![
                FeatureValue::Categorical(1),
                FeatureValue::Sequence(vec![0, 1, 1]),
                FeatureValue::Numerical { bin: 1, raw: 1.5 },
            ],
        }
    }

    #[test]
    fn full_model_gradient_check() {
        for seed in 0..10 {
            let mut model = BaseDnn::new(&schema(), 3, &[4, 3], seed);
            // larger embeddings so the check is not dominated by tiny values
            for t in model.embeddings.tables.iter_mut() {
                t.scale(50.0);
            }
            let s = sample();
            let (logit, cache) = model.forward_cached(&s);
            let mut g = model.zeros_like();
            model.backward(&s, &cache, bce_grad(s.label, logit), &mut g);
            let analytic: Vec<Vec<f64>> = g.tensors().iter().map(|t| t.data.clone()).collect();
            for t in 0..analytic.len() {
                for e in 0..analytic[t].len() {
                    let orig = model.tensors()[t].data[e];
                    let fd = central_difference(
                        |v| {
                            model.tensors_mut()[t].data[e] = v;
                            bce_single(s.label, model.logit(&s))
                        },
                        orig,
                    );
                    model.tensors_mut()[t].data[e] = orig;
                    assert_close_rel(analytic[t][e], fd, "base dnn");
                }
            }
        }
    }

    #[test]
    fn shared_storage_is_seen_by_next_forward() {
        let mut model = BaseDnn::new(&schema(), 3, &[4], 1);
        let s = sample();
        let before = model.embed(&s);
        model.embeddings.tables[0].row_mut(1)[0] += 1.0;
        let after = model.embed(&s);
        assert_eq!(after.get(0, 0), before.get(0, 0) + 1.0);
    }
}
