//! End-to-end runs: base model, attribution, ranking, memory model, and the
//! comparative studies built from them.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::eval::{evaluate, render_comparison, EvalReport};
use super::trainer::{train, TrainConfig, TrainHistory};
use crate::artifact::{fingerprint_params, Checkpoint};
use crate::attribution::{attribute_dataset, AttributionMatrix};
use crate::config::ConfigBundle;
use crate::data::{generate_synthetic, MultiDomainDataset};
use crate::error::{Error, Result};
use crate::memory::{MemoryModel, MemoryModelConfig};
use crate::nn::BaseDnn;
use crate::seed::sub_seed;
use crate::sensitivity::{rank_features, Selection, SensitivityReport};

pub const BASE_KIND: &str = "base-dnn";
pub const MEMORY_KIND: &str = "memory-model";

/// Everything a seed's variants share: data splits, the trained base
/// model (also the shared-DNN baseline) and its feature ranking.
#[derive(Debug, Clone)]
pub struct SeedContext {
    pub seed: u64,
    pub train: MultiDomainDataset,
    pub valid: MultiDomainDataset,
    pub test: MultiDomainDataset,
    pub base: BaseDnn,
    pub base_history: TrainHistory,
    pub base_eval: EvalReport,
    pub attribution: AttributionMatrix,
    pub report: SensitivityReport,
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

/// The synthetic dataset of a run seed.
pub fn synthetic_for_seed(bundle: &ConfigBundle, seed: u64) -> Result<MultiDomainDataset> {
    let mut cfg = bundle.synthetic.clone();
    cfg.seed = seed;
    generate_synthetic(&cfg)
}

pub fn train_config_for(bundle: &ConfigBundle, seed: u64) -> TrainConfig {
    TrainConfig {
        seed: sub_seed(seed, "train"),
        ..bundle.train.clone()
    }
}

/// Model initialization seed; base and memory models drawn from the same
/// value share their embedding and base-tower initialization.
pub fn model_seed(seed: u64) -> u64 {
    sub_seed(seed, "model")
}

pub fn split_data(
    bundle: &ConfigBundle,
    data: &MultiDomainDataset,
    seed: u64,
) -> Result<(MultiDomainDataset, MultiDomainDataset, MultiDomainDataset)> {
    data.split(bundle.split.valid, bundle.split.test, sub_seed(seed, "split"))
}

pub fn train_base(
    bundle: &ConfigBundle,
    train_ds: &MultiDomainDataset,
    valid: &MultiDomainDataset,
    seed: u64,
) -> Result<(BaseDnn, TrainHistory)> {
    let model = BaseDnn::new(&train_ds.schema, bundle.base.embedding_dim, &bundle.base.hidden, model_seed(seed));
    train(model, train_ds, Some(valid), &train_config_for(bundle, seed))
}

/// Data, base training, attribution and ranking for one seed. Without
/// `data` the synthetic generator runs with the seed.
pub fn prepare_seed(bundle: &ConfigBundle, data: Option<&MultiDomainDataset>, seed: u64) -> Result<SeedContext> {
    let generated;
    let data = match data {
        Some(d) => d,
        None => {
            generated = stage("gen-data", synthetic_for_seed(bundle, seed))?;
            &generated
        }
    };
    let (train_ds, valid, test) = stage("split", split_data(bundle, data, seed))?;
    let (base, base_history) = stage("train-base", train_base(bundle, &train_ds, &valid, seed))?;
    let base_eval = stage("evaluate", evaluate(&base, &test))?;
    let attribution = stage("attribute", attribute_dataset(&base, &train_ds, &bundle.ig))?;
    let report = stage("rank", rank_features(&train_ds, &attribution, &bundle.rank))?;
    Ok(SeedContext {
        seed,
        train: train_ds,
        valid,
        test,
        base,
        base_history,
        base_eval,
        attribution,
        report,
    })
}

/// Ablation switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    pub emb_attn: bool,
    pub hidden_attn: bool,
    pub aux_logit: bool,
}

impl Flags {
    pub const FULL: Flags = Flags {
        emb_attn: true,
        hidden_attn: true,
        aux_logit: true,
    };

    pub fn of(cfg: &MemoryModelConfig) -> Self {
        Flags {
            emb_attn: cfg.use_emb_attn,
            hidden_attn: cfg.use_hidden_attn,
            aux_logit: cfg.use_aux_logit,
        }
    }
}

pub fn memory_config(bundle: &ConfigBundle, sensitive: Vec<String>, flags: Flags) -> MemoryModelConfig {
    let mut cfg = bundle.memory.clone();
    cfg.embedding_dim = bundle.base.embedding_dim;
    cfg.hidden = bundle.base.hidden.clone();
    cfg.sensitive = sensitive;
    cfg.with_flags(flags.emb_attn, flags.hidden_attn, flags.aux_logit)
}

pub fn train_memory(
    bundle: &ConfigBundle,
    train_ds: &MultiDomainDataset,
    valid: &MultiDomainDataset,
    config: MemoryModelConfig,
    seed: u64,
) -> Result<(MemoryModel, TrainHistory)> {
    let model = MemoryModel::new(&train_ds.schema, config, model_seed(seed))?;
    train(model, train_ds, Some(valid), &train_config_for(bundle, seed))
}

#[derive(Debug, Clone)]
pub struct PipelineArtifacts {
    pub context: SeedContext,
    pub memory: MemoryModel,
    pub memory_history: TrainHistory,
    pub memory_eval: EvalReport,
}

/// The full method for the bundle's seed; artifacts are written to
/// `out_dir` when given.
pub fn run_pipeline(
    bundle: &ConfigBundle,
    data: Option<&MultiDomainDataset>,
    out_dir: Option<&Path>,
) -> Result<PipelineArtifacts> {
    bundle.validate()?;
    let context = prepare_seed(bundle, data, bundle.seed)?;
    let sensitive = context.report.selected();
    if sensitive.is_empty() {
        return Err(Error::Config("no feature was selected as domain-sensitive".into()));
    }
    let cfg = memory_config(bundle, sensitive, Flags::of(&bundle.memory));
    let (memory, memory_history) =
        stage("train-memory", train_memory(bundle, &context.train, &context.valid, cfg, bundle.seed))?;
    let memory_eval = stage("evaluate", evaluate(&memory, &context.test))?;
    let artifacts = PipelineArtifacts {
        context,
        memory,
        memory_history,
        memory_eval,
    };
    if let Some(dir) = out_dir {
        save_pipeline(bundle, &artifacts, dir)?;
    }
    Ok(artifacts)
}

fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).map_err(|e| Error::io(path, e))
}

fn save_pipeline(bundle: &ConfigBundle, a: &PipelineArtifacts, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ctx = &a.context;
    let schema_fp = ctx.train.schema.fingerprint();
    let hp = serde_json::json!({ "base": bundle.base, "train": bundle.train });
    Checkpoint::new(BASE_KIND, &schema_fp, hp, ctx.base.clone()).save(&dir.join("base.ckpt.json"))?;
    ctx.attribution.save(&dir.join("attribution.bin"))?;
    ctx.report.save(&dir.join("sensitivity.json"))?;
    let hp = serde_json::json!({ "memory": a.memory.config, "train": bundle.train });
    Checkpoint::new(MEMORY_KIND, &schema_fp, hp, a.memory.clone()).save(&dir.join("memory.ckpt.json"))?;
    save_json(&dir.join("eval_base.json"), &ctx.base_eval)?;
    save_json(&dir.join("eval_memory.json"), &a.memory_eval)?;
    Ok(())
}

/// One trained configuration inside a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub name: String,
    /// `None` is the shared-DNN baseline.
    pub selection: Option<Selection>,
    pub flags: Flags,
}

impl VariantSpec {
    pub fn baseline() -> Self {
        VariantSpec {
            name: "shared-dnn".into(),
            selection: None,
            flags: Flags {
                emb_attn: false,
                hidden_attn: false,
                aux_logit: false,
            },
        }
    }

    pub fn memory(name: &str, selection: Selection, flags: Flags) -> Self {
        VariantSpec {
            name: name.into(),
            selection: Some(selection),
            flags,
        }
    }

    pub fn selection_name(sel: Selection) -> &'static str {
        match sel {
            Selection::TopK => "top-k",
            Selection::LastK => "last-k",
            Selection::All => "all-feat",
        }
    }

    pub fn for_selections(selections: &[Selection], flags: Flags) -> Vec<Self> {
        selections
            .iter()
            .map(|&s| VariantSpec::memory(Self::selection_name(s), s, flags))
            .collect()
    }

    pub fn ablations() -> Vec<Self> {
        let full = Flags::FULL;
        vec![
            VariantSpec::memory("full", Selection::TopK, full),
            VariantSpec::memory("w/o emb_attn", Selection::TopK, Flags { emb_attn: false, ..full }),
            VariantSpec::memory("w/o hidden_attn", Selection::TopK, Flags { hidden_attn: false, ..full }),
            VariantSpec::memory("w/o aux_logit", Selection::TopK, Flags { aux_logit: false, ..full }),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub name: String,
    /// Sensitive features per seed (empty for the baseline).
    pub features: Vec<Vec<String>>,
    pub reports: Vec<EvalReport>,
    pub mean_overall_auc: Option<f64>,
    pub mean_domain_auc: Vec<Option<f64>>,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl VariantResult {
    fn summarize(&mut self) {
        self.mean_overall_auc = mean_defined(self.reports.iter().map(|r| r.overall_auc));
        let k = self.reports.first().map_or(0, |r| r.domain_auc.len());
        self.mean_domain_auc = (0..k)
            .map(|d| mean_defined(self.reports.iter().map(|r| r.domain_auc[d])))
            .collect();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub seeds: Vec<u64>,
    pub domains: Vec<String>,
    pub variants: Vec<VariantResult>,
    /// Feature ranking of every seed.
    pub sensitivity: Vec<SensitivityReport>,
}

impl StudyReport {
    pub fn variant(&self, name: &str) -> Option<&VariantResult> {
        self.variants.iter().find(|v| v.name == name)
    }

    /// Mean AUC per domain and overall, one column per variant.
    pub fn render_table(&self) -> String {
        let cols: Vec<(String, Vec<Option<f64>>, Option<f64>)> = self
            .variants
            .iter()
            .map(|v| (v.name.clone(), v.mean_domain_auc.clone(), v.mean_overall_auc))
            .collect();
        render_comparison(&self.domains, &cols)
    }
}

/// Trains every variant for every seed with identical data and budgets.
/// `on_seed` sees each seed's shared context once its variants are done.
pub fn run_study_with(
    bundle: &ConfigBundle,
    data: Option<&MultiDomainDataset>,
    variants: &[VariantSpec],
    mut on_seed: impl FnMut(&SeedContext, &[EvalReport]),
) -> Result<StudyReport> {
    bundle.validate()?;
    let mut results: Vec<VariantResult> = variants
        .iter()
        .map(|v| VariantResult {
            name: v.name.clone(),
            features: Vec::new(),
            reports: Vec::new(),
            mean_overall_auc: None,
            mean_domain_auc: Vec::new(),
        })
        .collect();
    let mut sensitivity = Vec::new();
    let mut domains = Vec::new();
    for &seed in &bundle.study.seeds {
        let ctx = prepare_seed(bundle, data, seed)?;
        domains = (0..ctx.train.num_domains()).map(|k| ctx.train.schema.domain_label(k)).collect();
        let mut seed_reports = Vec::with_capacity(variants.len());
        for (spec, result) in variants.iter().zip(results.iter_mut()) {
            let (features, report) = match spec.selection {
                None => (Vec::new(), ctx.base_eval.clone()),
                Some(sel) => {
                    let features = ctx.report.select(sel);
                    if features.is_empty() {
                        return Err(Error::Config(format!("variant `{}` selects no features", spec.name)));
                    }
                    let cfg = memory_config(bundle, features.clone(), spec.flags);
                    let (model, _) = stage("train-memory", train_memory(bundle, &ctx.train, &ctx.valid, cfg, seed))?;
                    (features, stage("evaluate", evaluate(&model, &ctx.test))?)
                }
            };
            log::info!("seed {seed} {}: overall AUC {:?}", spec.name, report.overall_auc);
            result.features.push(features);
            result.reports.push(report.clone());
            seed_reports.push(report);
        }
        on_seed(&ctx, &seed_reports);
        sensitivity.push(ctx.report);
    }
    for r in &mut results {
        r.summarize();
    }
    Ok(StudyReport {
        seeds: bundle.study.seeds.clone(),
        domains,
        variants: results,
        sensitivity,
    })
}

pub fn run_study(
    bundle: &ConfigBundle,
    data: Option<&MultiDomainDataset>,
    variants: &[VariantSpec],
) -> Result<StudyReport> {
    run_study_with(bundle, data, variants, |_, _| {})
}

/// Baseline plus one memory model per selection strategy.
pub fn run_selection_study(
    bundle: &ConfigBundle,
    data: Option<&MultiDomainDataset>,
    selections: &[Selection],
) -> Result<StudyReport> {
    let mut variants = vec![VariantSpec::baseline()];
    variants.extend(VariantSpec::for_selections(selections, Flags::of(&bundle.memory)));
    run_study(bundle, data, &variants)
}

/// Full model and the three single ablations.
pub fn run_ablation_study(bundle: &ConfigBundle, data: Option<&MultiDomainDataset>) -> Result<StudyReport> {
    run_study(bundle, data, &VariantSpec::ablations())
}

/// Fingerprint of the memory model a pipeline run would produce; used to
/// check that the ablation study's full variant is the same model.
pub fn memory_fingerprint(model: &MemoryModel) -> String {
    fingerprint_params(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SyntheticConfig;
    use crate::sensitivity::TopK;

    fn tiny_bundle() -> ConfigBundle {
        let mut b = ConfigBundle {
            synthetic: SyntheticConfig::planted_benchmark(1500, 0),
            ..ConfigBundle::default()
        };
        b.base.hidden = vec![8, 4];
        b.base.embedding_dim = 4;
        b.train.epochs = 1;
        b.study.seeds = vec![3];
        b.resolve();
        b
    }

    #[test]
    fn pipeline_runs_and_persists() {
        let b = tiny_bundle();
        let dir = tempfile::tempdir().unwrap();
        let a = run_pipeline(&b, None, Some(dir.path())).unwrap();
        assert_eq!(a.memory_eval.domain_auc.len(), 4);
        for f in ["base.ckpt.json", "attribution.bin", "sensitivity.json", "memory.ckpt.json", "eval_memory.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        // the ablation study's full variant is the pipeline's model
        let study = run_ablation_study(&ConfigBundle { study: crate::config::StudyConfig { seeds: vec![b.seed] }, ..b.clone() }, None).unwrap();
        assert_eq!(study.variants.len(), 4);
        assert_eq!(study.variant("full").unwrap().reports[0].model_fingerprint, memory_fingerprint(&a.memory));
    }

    #[test]
    fn empty_selection_is_rejected() {
        let mut b = tiny_bundle();
        b.rank.top_k = TopK::uniform(0);
        assert!(matches!(run_pipeline(&b, None, None), Err(Error::Config(_))));
    }

    #[test]
    fn selection_study_shape() {
        let b = tiny_bundle();
        let study = run_selection_study(&b, None, &[Selection::TopK, Selection::LastK]).unwrap();
        let names: Vec<&str> = study.variants.iter().map(|v| v.name.as_str()).collect();
        assert_eq!(names, vec!["shared-dnn", "top-k", "last-k"]);
        assert!(study.render_table().contains("Overall"));
        assert_eq!(study.sensitivity.len(), 1);
    }
}
