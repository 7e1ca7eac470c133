//! Minimal deterministic network engine: embeddings, dense towers,
//! hand-written reverse passes, BCE and Adam, all in `f64`.

pub mod adam;
pub mod base;
pub mod embedding;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod tensor;

pub use adam::{adam_step, AdamState};
pub use base::BaseDnn;
pub use embedding::EmbeddingTables;
pub use layers::{Dense, GradientTape, Mlp, MlpCache};
pub use loss::{bce_loss, sigmoid};
pub use tensor::Tensor;

use crate::data::Sample;

/// Ordered view over every trainable tensor. Gradients use the same type
/// as the model, so `tensors()` of a model and of its gradient line up.
pub trait Parameters {
    fn tensors(&self) -> Vec<&Tensor>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;

    fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    fn accumulate(&mut self, other: &Self)
    where
        Self: Sized,
    {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b);
        }
    }

    fn scale_all(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.scale(s);
        }
    }

    /// Bit pattern of every parameter, in order.
    fn parameter_bits(&self) -> Vec<u64> {
        self.tensors()
            .iter()
            .flat_map(|t| t.data.iter().map(|x| x.to_bits()))
            .collect()
    }
}

/// A click model over encoded samples that can be trained by backprop.
pub trait CtrModel: Parameters + Clone + Send + Sync {
    type Cache: Send;

    fn schema_fingerprint(&self) -> &str;

    fn logit(&self, sample: &Sample) -> f64;

    fn forward_cached(&self, sample: &Sample) -> (f64, Self::Cache);

    /// Accumulates `dlogit · ∂logit/∂θ` into `grads`.
    fn backward(&self, sample: &Sample, cache: &Self::Cache, dlogit: f64, grads: &mut Self);

    fn zeros_like(&self) -> Self;
}

/// A model whose logit is a function of the pooled `m × d` embedding matrix.
pub trait EmbeddingInputModel {
    fn embed(&self, sample: &Sample) -> Tensor;

    fn logit_from_embeddings(&self, z: &Tensor) -> f64;

    /// Logit and `∂logit/∂Z`.
    fn input_gradient(&self, z: &Tensor) -> (f64, Tensor);
}
