//! Training, evaluation and experiment orchestration.

pub mod auc;
pub mod eval;
pub mod pipeline;
pub mod trainer;

pub use auc::auc;
pub use eval::{evaluate, render_comparison, report_from_scores, score_dataset, EvalReport};
pub use pipeline::{
    memory_config, model_seed, prepare_seed, run_ablation_study, run_pipeline, run_selection_study, run_study, run_study_with, Flags,
    PipelineArtifacts, SeedContext, StudyReport, VariantResult, VariantSpec, split_data, synthetic_for_seed,
    train_base, train_config_for, train_memory, BASE_KIND, MEMORY_KIND,
};
pub use trainer::{train, TrainConfig, TrainHistory};
