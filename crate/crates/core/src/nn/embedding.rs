use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use super::Parameters;
use crate::data::{FeatureSchema, FeatureValue, Sample};

/// One `cardinality × d` table per feature, shared by every tower.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTables {
    pub dim: usize,
    pub tables: Vec<Tensor>,
}

impl EmbeddingTables {
    pub fn init<R: Rng + ?Sized>(schema: &FeatureSchema, dim: usize, rng: &mut R) -> Self {
        EmbeddingTables {
            dim,
            tables: schema
                .features
                .iter()
                .map(|f| Tensor::uniform(f.cardinality(), dim, 0.01, rng))
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        EmbeddingTables {
            dim: self.dim,
            tables: self.tables.iter().map(Tensor::zeros_like).collect(),
        }
    }

    pub fn num_features(&self) -> usize {
        self.tables.len()
    }

    /// Token matrix `m × d`: one row per feature; sequences are mean-pooled
    /// and an empty sequence gives a zero row.
    pub fn embed(&self, sample: &Sample) -> Tensor {
        let d = self.dim;
        let mut z = Tensor::zeros(self.tables.len(), d);
        for (j, (table, value)) in self.tables.iter().zip(&sample.values).enumerate() {
            let row = z.row_mut(j);
            match value {
                FeatureValue::Categorical(i) => row.copy_from_slice(table.row(*i as usize)),
                FeatureValue::Numerical { bin, .. } => row.copy_from_slice(table.row(*bin as usize)),
                FeatureValue::Sequence(toks) => {
                    if toks.is_empty() {
                        continue;
                    }
                    for &t in toks {
                        for (r, e) in row.iter_mut().zip(table.row(t as usize)) {
                            *r += e;
                        }
                    }
                    let n = toks.len() as f64;
                    row.iter_mut().for_each(|r| *r /= n);
                }
            }
        }
        z
    }

    /// Scatters `dL/dZ` back to the rows that produced `Z`.
    pub fn accumulate_grad(&self, sample: &Sample, dz: &Tensor, grads: &mut EmbeddingTables) {
        for (j, value) in sample.values.iter().enumerate() {
            let g = dz.row(j);
            let table = &mut grads.tables[j];
            match value {
                FeatureValue::Categorical(i) => add_row(table.row_mut(*i as usize), g, 1.0),
                FeatureValue::Numerical { bin, .. } => add_row(table.row_mut(*bin as usize), g, 1.0),
                FeatureValue::Sequence(toks) => {
                    let w = 1.0 / toks.len().max(1) as f64;
                    for &t in toks {
                        add_row(table.row_mut(t as usize), g, w);
                    }
                }
            }
        }
    }
}

fn add_row(dst: &mut [f64], src: &[f64], scale: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += scale * s;
    }
}

impl Parameters for EmbeddingTables {
    fn tensors(&self) -> Vec<&Tensor> {
        self.tables.iter().collect()
    }
    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.tables.iter_mut().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(
            2,
            vec![
                FeatureSpec::categorical("c", vec!["a".into(), "b".into()]),
                FeatureSpec::sequential("s", vec!["t1".into(), "t2".into(), "t3".into()]),
            ],
        )
        .unwrap()
    }

    fn sample(c: u32, seq: Vec<u32>) -> Sample {
        Sample {
            domain: 0,
            label: 0,
            values: vec![FeatureValue::Categorical(c), FeatureValue::Sequence(seq)],
        }
    }

    #[test]
    fn zero_tables_embed_to_zero() {
        let tables = EmbeddingTables::init(&schema(), 4, &mut ChaCha8Rng::seed_from_u64(1)).zeros_like();
        let z = tables.embed(&sample(1, vec![0, 2]));
        assert!(z.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sequence_pooling() {
        let tables = EmbeddingTables::init(&schema(), 4, &mut ChaCha8Rng::seed_from_u64(2));
        let same = tables.embed(&sample(0, vec![1, 1]));
        assert_eq!(same.row(1), tables.tables[1].row(1));

        let mixed = tables.embed(&sample(0, vec![0, 1]));
        let t = &tables.tables[1];
        for c in 0..4 {
            let mean = (t.get(0, c) + t.get(1, c)) / 2.0;
            assert!((mixed.get(1, c) - mean).abs() < 1e-18);
        }
        let empty = tables.embed(&sample(0, vec![]));
        assert!(empty.row(1).iter().all(|&v| v == 0.0));
        assert_eq!(empty.row(0), tables.tables[0].row(0));
    }

    #[test]
    fn gradient_scatter_splits_over_tokens() {
        let tables = EmbeddingTables::init(&schema(), 2, &mut ChaCha8Rng::seed_from_u64(3));
        let mut g = tables.zeros_like();
        let dz = Tensor::from_rows(&[vec![1.0, 2.0], vec![4.0, 8.0]]);
        tables.accumulate_grad(&sample(1, vec![2, 2, 0, 1]), &dz, &mut g);
        assert_eq!(g.tables[0].row(1), &[1.0, 2.0]);
        assert_eq!(g.tables[1].row(2), &[2.0, 4.0]);
        assert_eq!(g.tables[1].row(0), &[1.0, 2.0]);
    }
}
