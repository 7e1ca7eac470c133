//! Mini-batch Adam on the pooled mean BCE.
//!
//! Each batch is cut into fixed-size chunks; chunks are processed in
//! parallel into their own gradient buffers and summed in chunk order, so
//! results do not depend on the thread count.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eval::{evaluate, score_dataset};
use super::auc::auc;
use crate::data::MultiDomainDataset;
use crate::error::{Error, Result};
use crate::nn::loss::{bce_grad, bce_single};
use crate::nn::{adam_step, AdamState, CtrModel};
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    /// Reshuffle the pooled training set every epoch.
    pub shuffle: bool,
    /// Samples per parallel work unit inside a batch.
    pub chunk_size: usize,
    pub max_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 256,
            epochs: 4,
            learning_rate: 1e-3,
            seed: 0,
            patience: 2,
            shuffle: true,
            chunk_size: 32,
            max_steps: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 || self.chunk_size == 0 {
            return Err(Error::Config("batch size, epochs and chunk size must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!("bad learning rate {}", self.learning_rate)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub batch_losses: Vec<f64>,
    pub epoch_losses: Vec<f64>,
    pub valid_auc: Vec<Option<f64>>,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
    pub steps: usize,
    pub stopped_early: bool,
}

/// Trains `model` and returns the parameters with the best validation
/// overall AUC (the last epoch's when there is no usable validation set).
pub fn train<M: CtrModel>(
    mut model: M,
    train_ds: &MultiDomainDataset,
    valid_ds: Option<&MultiDomainDataset>,
    cfg: &TrainConfig,
) -> Result<(M, TrainHistory)> {
    cfg.validate()?;
    if train_ds.is_empty() {
        return Err(Error::Value("training set is empty".into()));
    }
    let fp = train_ds.schema.fingerprint();
    for ds in std::iter::once(train_ds).chain(valid_ds) {
        if ds.schema.fingerprint() != fp || model.schema_fingerprint() != fp {
            return Err(Error::Compatibility("model and datasets use different schemas".into()));
        }
    }

    let mut adam = AdamState::new(&model, cfg.learning_rate);
    let mut rng = rng_for(cfg.seed, "train/shuffle");
    let mut order: Vec<usize> = (0..train_ds.len()).collect();
    let chunks_per_batch = cfg.batch_size.div_ceil(cfg.chunk_size);
    let mut buffers: Vec<M> = (0..chunks_per_batch).map(|_| model.zeros_like()).collect();
    let mut total = model.zeros_like();

    let mut history = TrainHistory::default();
    let mut best: Option<(f64, M)> = None;
    let mut since_best = 0;

    'epochs: for epoch in 1..=cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        let mut epoch_n = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            if cfg.max_steps.is_some_and(|m| history.steps >= m) {
                break 'epochs;
            }
            let step = history.steps;
            let model_ref = &model;
            let losses: Vec<f64> = buffers
                .par_iter_mut()
                .zip(batch.par_chunks(cfg.chunk_size))
                .map(|(grads, idx)| {
                    grads.zero();
                    let mut loss = 0.0;
                    for &i in idx {
                        let s = &train_ds.samples[i];
                        let (logit, cache) = model_ref.forward_cached(s);
                        loss += bce_single(s.label, logit);
                        model_ref.backward(s, &cache, bce_grad(s.label, logit), grads);
                    }
                    loss
                })
                .collect();
            let batch_loss: f64 = losses.iter().sum();
            if !batch_loss.is_finite() {
                return Err(Error::Training {
                    batch: step,
                    msg: format!("loss became {batch_loss}"),
                });
            }
            total.zero();
            let used = batch.len().div_ceil(cfg.chunk_size);
            for g in &buffers[..used] {
                total.accumulate(g);
            }
            total.scale_all(1.0 / batch.len() as f64);
            adam_step(&mut model, &total, &mut adam, step)?;
            history.steps += 1;
            history.batch_losses.push(batch_loss / batch.len() as f64);
            epoch_loss += batch_loss;
            epoch_n += batch.len();
        }
        history.epoch_losses.push(epoch_loss / epoch_n.max(1) as f64);

        let valid_auc = match valid_ds {
            Some(v) if !v.is_empty() => auc(&v.labels(), &score_dataset(&model, v)).ok(),
            _ => None,
        };
        history.valid_auc.push(valid_auc);
        log::info!(
            "epoch {epoch}: loss {:.5} valid auc {:?}",
            history.epoch_losses.last().unwrap(),
            valid_auc
        );
        match valid_auc {
            Some(a) if best.as_ref().is_none_or(|(b, _)| a > *b) => {
                best = Some((a, model.clone()));
                history.best_epoch = epoch;
                since_best = 0;
            }
            Some(_) => {
                since_best += 1;
                if since_best >= cfg.patience.max(1) {
                    history.stopped_early = true;
                    break;
                }
            }
            None => {}
        }
    }
    match best {
        Some((_, m)) => Ok((m, history)),
        None => {
            history.best_epoch = history.epoch_losses.len();
            Ok((model, history))
        }
    }
}

/// Convenience: train then evaluate on a held-out set.
pub fn train_and_evaluate<M: CtrModel>(
    model: M,
    train_ds: &MultiDomainDataset,
    valid_ds: Option<&MultiDomainDataset>,
    test_ds: &MultiDomainDataset,
    cfg: &TrainConfig,
) -> Result<(M, TrainHistory, super::EvalReport)> {
    let (model, history) = train(model, train_ds, valid_ds, cfg)?;
    let report = evaluate(&model, test_ds)?;
    Ok((model, history, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureSchema, FeatureSpec, FeatureValue, Sample, Split};
    use crate::nn::{BaseDnn, Parameters};

    /// Label is 1 exactly when feature `a` takes an even value.
    fn separable(n: usize) -> MultiDomainDataset {
        let vocab: Vec<String> = (0..6).map(|i| format!("v{i}")).collect();
        let schema = FeatureSchema::new(
            2,
            vec![
                FeatureSpec::categorical("a", vocab.clone()),
                FeatureSpec::categorical("b", vocab),
            ],
        )
        .unwrap();
        let samples = (0..n)
            .map(|i| {
                let a = (i * 7 % 6) as u32;
                Sample {
                    domain: (i % 2) as u32,
                    label: (a % 2 == 0) as u8,
                    values: vec![FeatureValue::Categorical(a), FeatureValue::Categorical((i % 5) as u32)],
                }
            })
            .collect();
        MultiDomainDataset::new(schema, samples, Split::Train).unwrap()
    }

    #[test]
    fn separable_data_is_learned() {
        let ds = separable(600);
        let model = BaseDnn::new(&ds.schema, 4, &[8], 1);
        let cfg = TrainConfig {
            batch_size: 32,
            epochs: 100,
            learning_rate: 1e-2,
            max_steps: Some(500),
            ..TrainConfig::default()
        };
        let (model, hist) = train(model, &ds, None, &cfg).unwrap();
        assert!(hist.steps <= 500);
        let report = evaluate(&model, &ds).unwrap();
        assert!(report.overall_auc.unwrap() > 0.99, "{report:?}");
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let ds = separable(100);
        let model = BaseDnn::new(&ds.schema, 3, &[4], 2);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 2,
            shuffle: false,
            ..TrainConfig::default()
        };
        let (trained, hist) = train(model.clone(), &ds, None, &cfg).unwrap();
        assert_eq!(trained.parameter_bits(), model.parameter_bits());
        assert_eq!(hist.epoch_losses[0], hist.epoch_losses[1]);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let ds = separable(300);
        let cfg = TrainConfig {
            batch_size: 50,
            chunk_size: 7,
            epochs: 2,
            ..TrainConfig::default()
        };
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| train(BaseDnn::new(&ds.schema, 3, &[4], 9), &ds, Some(&ds), &cfg).unwrap())
        };
        let (a, ha) = run(1);
        let (b, hb) = run(4);
        assert_eq!(ha, hb);
        assert_eq!(a.parameter_bits(), b.parameter_bits());
    }

    #[test]
    fn rejects_bad_input() {
        let ds = separable(10);
        let model = BaseDnn::new(&ds.schema, 3, &[4], 2);
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(train(model.clone(), &ds, None, &bad).is_err());
        let empty = MultiDomainDataset::new(ds.schema.clone(), vec![], Split::Valid).unwrap();
        assert!(train(model.clone(), &empty, None, &TrainConfig::default()).is_err());
        let mut exploding = model;
        exploding.tower.layers[1].b.data[0] = f64::NAN;
        assert!(matches!(
            train(exploding, &ds, None, &TrainConfig::default()),
            Err(Error::Training { batch: 0, .. })
        ));
    }
}
