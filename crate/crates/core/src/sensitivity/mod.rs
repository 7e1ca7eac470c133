//! Which features behave differently across domains, and how much.

pub mod distance;
pub mod distribution;
pub mod rank;

pub use distance::{js_divergence, wasserstein_1d, wasserstein_on_support, DiscreteMeasure};
pub use distribution::{
    domain_distributions, effect_weighted_dist, effect_weighted_dist_seq,
    EffectWeightedDistribution, WeightMode,
};
pub use rank::{
    all_distributions, domain_sensitivity, rank_features, value_labels, write_distribution_csv,
    DomainSensitivity, FeatureSensitivity, Metric, RankConfig, Selection, SensitivityReport, TopK,
};
