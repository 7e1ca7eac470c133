//! Synthetic multi-domain CTR data with planted domain-sensitive features.
//!
//! Labels follow a logistic model. A planted feature's value distribution
//! moves toward a domain-specific block of values (`domain_value_shift`)
//! and its per-value coefficients get a domain-specific perturbation
//! (`domain_effect_shift`). Everything else is shared across domains.

use rand::Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dataset::{FeatureValue, MultiDomainDataset, Sample, Split};
use super::schema::{equal_frequency_edges, Arity, FeatureKind, FeatureSchema, FeatureSpec};
use crate::error::{Error, Result};
use crate::seed::rng_for;

pub const DOMAIN_INDICATOR: &str = "domain_ind";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticFeature {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default = "scalar")]
    pub arity: Arity,
    /// Number of real values (categorical) or bins (numerical).
    #[serde(default = "default_cardinality")]
    pub cardinality: usize,
    #[serde(default)]
    pub planted_sensitive: bool,
    #[serde(default)]
    pub domain_value_shift: f64,
    #[serde(default)]
    pub domain_effect_shift: f64,
    /// Std-dev of the domain-shared coefficients; 0 makes the feature inert.
    #[serde(default = "default_effect_scale")]
    pub effect_scale: f64,
}

fn scalar() -> Arity {
    Arity::Scalar
}
fn default_cardinality() -> usize {
    16
}
fn default_effect_scale() -> f64 {
    0.5
}

impl SyntheticFeature {
    pub fn new(name: &str, kind: FeatureKind, arity: Arity, cardinality: usize) -> Self {
        SyntheticFeature {
            name: name.to_string(),
            kind,
            arity,
            cardinality,
            planted_sensitive: false,
            domain_value_shift: 0.0,
            domain_effect_shift: 0.0,
            effect_scale: default_effect_scale(),
        }
    }

    pub fn planted(mut self, value_shift: f64, effect_shift: f64) -> Self {
        self.planted_sensitive = true;
        self.domain_value_shift = value_shift;
        self.domain_effect_shift = effect_shift;
        self
    }

    pub fn with_effect_scale(mut self, scale: f64) -> Self {
        self.effect_scale = scale;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub num_domains: usize,
    pub domain_proportions: Vec<f64>,
    pub num_samples: usize,
    /// Target positive rate per domain; a single entry applies to all.
    pub positive_rates: Vec<f64>,
    pub seed: u64,
    /// Adds a categorical feature carrying the domain id.
    #[serde(default = "yes")]
    pub include_domain_feature: bool,
    #[serde(default = "default_seq_len")]
    pub max_seq_len: usize,
    pub features: Vec<SyntheticFeature>,
}

fn yes() -> bool {
    true
}
fn default_seq_len() -> usize {
    8
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig::planted_benchmark(100_000, 0)
    }
}

impl SyntheticConfig {
    /// Twelve features (domain indicator included), three planted: one per
    /// scalar-categorical, numerical and sequential group. Domain shares and
    /// positive rates follow a dominant-plus-tails layout.
    pub fn planted_benchmark(num_samples: usize, seed: u64) -> Self {
        use Arity::*;
        use FeatureKind::*;
        let f = SyntheticFeature::new;
        SyntheticConfig {
            num_domains: 4,
            domain_proportions: vec![0.8, 0.1, 0.06, 0.04],
            num_samples,
            positive_rates: vec![0.25, 0.3, 0.2, 0.35],
            seed,
            include_domain_feature: true,
            max_seq_len: 8,
            features: vec![
                f("user_seg", Categorical, Scalar, 24).planted(0.6, 1.2),
                f("item_cat", Categorical, Scalar, 24),
                f("ad_slot", Categorical, Scalar, 12),
                f("device", Categorical, Scalar, 6).with_effect_scale(0.0),
                f("price", Numerical, Scalar, 10).planted(0.6, 1.2),
                f("age", Numerical, Scalar, 10),
                f("hour", Numerical, Scalar, 10),
                f("click_hist", Categorical, Sequential, 20).planted(0.6, 1.2),
                f("view_hist", Categorical, Sequential, 20),
                f("query_terms", Categorical, Sequential, 20),
                f("ctx_score", Numerical, Scalar, 10),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.num_domains;
        if k < 2 {
            return Err(Error::Config("need at least two domains".into()));
        }
        if self.domain_proportions.len() != k {
            return Err(Error::Config(format!(
                "{} proportions for {k} domains",
                self.domain_proportions.len()
            )));
        }
        if self.domain_proportions.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::Config("proportions must be nonnegative".into()));
        }
        let total: f64 = self.domain_proportions.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("proportions sum to {total}, not 1")));
        }
        if self.positive_rates.len() != 1 && self.positive_rates.len() != k {
            return Err(Error::Config("positive_rates needs 1 or K entries".into()));
        }
        if self.positive_rates.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
            return Err(Error::Config("positive rates must lie in (0,1)".into()));
        }
        if self.num_samples == 0 {
            return Err(Error::Config("num_samples must be positive".into()));
        }
        if self.features.is_empty() {
            return Err(Error::Config("no features declared".into()));
        }
        for f in &self.features {
            if f.kind == FeatureKind::Numerical && f.arity == Arity::Sequential {
                return Err(Error::Config(format!("`{}`: sequences must be categorical", f.name)));
            }
            if f.cardinality < 1 {
                return Err(Error::Config(format!("`{}`: cardinality must be >= 1", f.name)));
            }
            if !(0.0..=1.0).contains(&f.domain_value_shift) {
                return Err(Error::Config(format!(
                    "`{}`: domain_value_shift must lie in [0,1]",
                    f.name
                )));
            }
            if !f.planted_sensitive && (f.domain_value_shift != 0.0 || f.domain_effect_shift != 0.0) {
                return Err(Error::Config(format!(
                    "`{}`: only planted features may carry domain shifts",
                    f.name
                )));
            }
            if f.kind == FeatureKind::Categorical && f.domain_value_shift > 0.0 && f.cardinality < k {
                return Err(Error::Config(format!(
                    "`{}`: a value shift needs cardinality >= number of domains",
                    f.name
                )));
            }
            if f.name == DOMAIN_INDICATOR && self.include_domain_feature {
                return Err(Error::Config(format!("`{DOMAIN_INDICATOR}` is reserved")));
            }
        }
        Ok(())
    }

    pub fn planted_names(&self) -> Vec<String> {
        self.features
            .iter()
            .filter(|f| f.planted_sensitive)
            .map(|f| f.name.clone())
            .collect()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SyntheticConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Values of categorical feature `cardinality` owned by domain `k` when shifted.
fn domain_block(cardinality: usize, k: usize, num_domains: usize) -> std::ops::Range<usize> {
    (k * cardinality / num_domains)..((k + 1) * cardinality / num_domains)
}

/// Per-feature generative parameters drawn once from the seed.
struct FeatureWorld {
    /// Categorical: per-domain value distribution.
    value_dists: Vec<WeightedIndex<f64>>,
    /// coefficient[k][v] for categorical; coefficient[k][0] for numerical.
    coefficients: Vec<Vec<f64>>,
}

fn build_world(cfg: &SyntheticConfig) -> Vec<FeatureWorld> {
    let mut rng = rng_for(cfg.seed, "synthetic/world");
    let k = cfg.num_domains;
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    cfg.features
        .iter()
        .map(|f| {
            let card = f.cardinality;
            let value_dists = if f.kind == FeatureKind::Categorical {
                let logits: Vec<f64> = (0..card).map(|_| 0.7 * std_normal.sample(&mut rng)).collect();
                let norm: f64 = logits.iter().map(|l| l.exp()).sum();
                let base: Vec<f64> = logits.iter().map(|l| l.exp() / norm).collect();
                (0..k)
                    .map(|d| {
                        let block = domain_block(card, d, k);
                        let width = block.len() as f64;
                        let weights: Vec<f64> = (0..card)
                            .map(|v| {
                                let own = if block.contains(&v) { 1.0 / width } else { 0.0 };
                                (1.0 - f.domain_value_shift) * base[v] + f.domain_value_shift * own
                            })
                            .collect();
                        WeightedIndex::new(weights).expect("valid weights")
                    })
                    .collect()
            } else {
                Vec::new()
            };
            let n_coef = if f.kind == FeatureKind::Categorical { card } else { 1 };
            let shared: Vec<f64> = (0..n_coef)
                .map(|_| f.effect_scale * std_normal.sample(&mut rng))
                .collect();
            let coefficients = (0..k)
                .map(|_| {
                    shared
                        .iter()
                        .map(|c| c + f.domain_effect_shift * std_normal.sample(&mut rng))
                        .collect()
                })
                .collect();
            FeatureWorld {
                value_dists,
                coefficients,
            }
        })
        .collect()
}

enum RawValue {
    Cat(u32),
    Num(f64),
    Seq(Vec<u32>),
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<MultiDomainDataset> {
    cfg.validate()?;
    let k = cfg.num_domains;
    let world = build_world(cfg);
    let mut rng = rng_for(cfg.seed, "synthetic/samples");
    let domain_pick = WeightedIndex::new(&cfg.domain_proportions)
        .map_err(|e| Error::Config(format!("bad proportions: {e}")))?;

    let mut rows: Vec<(usize, Vec<RawValue>, f64)> = Vec::with_capacity(cfg.num_samples);
    for _ in 0..cfg.num_samples {
        let d = domain_pick.sample(&mut rng);
        let mut score = 0.0;
        let mut values = Vec::with_capacity(cfg.features.len());
        for (f, w) in cfg.features.iter().zip(&world) {
            let coef = &w.coefficients[d];
            let v = match (f.kind, f.arity) {
                (FeatureKind::Categorical, Arity::Scalar) => {
                    let v = w.value_dists[d].sample(&mut rng);
                    score += coef[v];
                    RawValue::Cat(v as u32)
                }
                (FeatureKind::Categorical, Arity::Sequential) => {
                    let len = rng.random_range(1..=cfg.max_seq_len.max(1));
                    let toks: Vec<u32> = (0..len)
                        .map(|_| w.value_dists[d].sample(&mut rng) as u32)
                        .collect();
                    score += toks.iter().map(|&t| coef[t as usize]).sum::<f64>() / len as f64;
                    RawValue::Seq(toks)
                }
                (FeatureKind::Numerical, _) => {
                    let u: f64 = rng.random();
                    let raw = u + f.domain_value_shift * d as f64;
                    score += 2.0 * coef[0] * (raw - 0.5);
                    RawValue::Num(raw)
                }
            };
            values.push(v);
        }
        rows.push((d, values, score));
    }

    let mut counts = vec![0usize; k];
    for (d, _, _) in &rows {
        counts[*d] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Config(format!(
            "domain {empty} received no samples; raise num_samples or its proportion"
        )));
    }

    // Per-domain intercepts hitting the target positive rates.
    let intercepts: Vec<f64> = (0..k)
        .map(|d| {
            let target = if cfg.positive_rates.len() == 1 {
                cfg.positive_rates[0]
            } else {
                cfg.positive_rates[d]
            };
            let scores: Vec<f64> = rows.iter().filter(|r| r.0 == d).map(|r| r.2).collect();
            calibrate_intercept(&scores, target)
        })
        .collect();

    let mut specs = Vec::new();
    if cfg.include_domain_feature {
        specs.push(FeatureSpec::categorical(
            DOMAIN_INDICATOR,
            (0..k).map(|d| format!("d{d}")).collect(),
        ));
    }
    for (j, f) in cfg.features.iter().enumerate() {
        specs.push(match (f.kind, f.arity) {
            (FeatureKind::Categorical, Arity::Scalar) => FeatureSpec::categorical(&f.name, vocab(f)),
            (FeatureKind::Categorical, Arity::Sequential) => {
                FeatureSpec::sequential(&f.name, vocab(f))
            }
            (FeatureKind::Numerical, _) => {
                let raws: Vec<f64> = rows
                    .iter()
                    .map(|r| match r.1[j] {
                        RawValue::Num(x) => x,
                        _ => unreachable!(),
                    })
                    .collect();
                FeatureSpec::numerical(&f.name, equal_frequency_edges(&raws, f.cardinality)?)
            }
        });
    }
    let mut schema = FeatureSchema::new(k, specs)?;
    schema.max_seq_len = cfg.max_seq_len.max(1);

    let label_rng = &mut rng_for(cfg.seed, "synthetic/labels");
    let offset = usize::from(cfg.include_domain_feature);
    let samples = rows
        .into_iter()
        .map(|(d, raw, score)| {
            let p = sigmoid(intercepts[d] + score);
            let label = u8::from(label_rng.random::<f64>() < p);
            let mut values = Vec::with_capacity(raw.len() + offset);
            if cfg.include_domain_feature {
                values.push(FeatureValue::Categorical(d as u32));
            }
            for (j, r) in raw.into_iter().enumerate() {
                let spec = &schema.features[j + offset];
                values.push(match r {
                    RawValue::Cat(v) => FeatureValue::Categorical(v),
                    RawValue::Seq(t) => FeatureValue::Sequence(t),
                    RawValue::Num(x) => FeatureValue::Numerical {
                        bin: spec.bin_of(x) as u32,
                        raw: x,
                    },
                });
            }
            Sample {
                domain: d as u32,
                label,
                values,
            }
        })
        .collect();
    MultiDomainDataset::new(schema, samples, Split::Train)
}

fn vocab(f: &SyntheticFeature) -> Vec<String> {
    (0..f.cardinality).map(|v| format!("{}_{v}", f.name)).collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Bisection for `b` with mean sigmoid(b + s_i) = target.
fn calibrate_intercept(scores: &[f64], target: f64) -> f64 {
    let mean_at = |b: f64| scores.iter().map(|s| sigmoid(b + s)).sum::<f64>() / scores.len() as f64;
    let (mut lo, mut hi) = (-30.0, 30.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mean_at(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
