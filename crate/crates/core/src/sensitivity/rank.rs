//! Domain-sensitivity scores and grouped feature ranking.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::distance::{js_divergence, wasserstein_on_support};
use super::distribution::{domain_distributions, EffectWeightedDistribution, WeightMode};
use crate::attribution::AttributionMatrix;
use crate::data::{FeatureGroup, FeatureKind, FeatureSpec, MultiDomainDataset};
use crate::error::{Error, Result};

/// Distance used between two per-domain distributions of one feature.
#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    JensenShannon,
    /// 1-D transport cost with the given value locations.
    Wasserstein(Vec<f64>),
}

impl Metric {
    pub fn for_feature(spec: &FeatureSpec) -> Self {
        match spec.kind {
            FeatureKind::Categorical => Metric::JensenShannon,
            FeatureKind::Numerical => Metric::Wasserstein(spec.bin_centers()),
        }
    }

    pub fn distance(&self, p: &[f64], q: &[f64]) -> Result<f64> {
        match self {
            Metric::JensenShannon => js_divergence(p, q),
            Metric::Wasserstein(locs) => wasserstein_on_support(locs, p, q),
        }
    }
}

/// DS score with its symmetric pairwise matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSensitivity {
    pub score: f64,
    pub pairwise: Vec<Vec<f64>>,
}

/// Sum of distances over unordered domain pairs.
pub fn domain_sensitivity(dists: &[Vec<f64>], metric: &Metric) -> Result<DomainSensitivity> {
    let k = dists.len();
    if k < 2 {
        return Err(Error::Value(format!("need at least two domains, got {k}")));
    }
    let n = dists[0].len();
    if let Some(bad) = dists.iter().find(|d| d.len() != n) {
        return Err(Error::Shape(format!(
            "distributions over {} and {} values",
            n,
            bad.len()
        )));
    }
    let mut pairwise = vec![vec![0.0; k]; k];
    let mut score = 0.0;
    for a in 0..k {
        for b in a + 1..k {
            let d = metric.distance(&dists[a], &dists[b])?;
            pairwise[a][b] = d;
            pairwise[b][a] = d;
            score += d;
        }
    }
    Ok(DomainSensitivity { score, pairwise })
}

/// How many features to select per ranking group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopK {
    pub categorical_scalar: usize,
    pub categorical_sequential: usize,
    pub numerical_scalar: usize,
    pub numerical_sequential: usize,
}

impl Default for TopK {
    fn default() -> Self {
        TopK {
            categorical_scalar: 2,
            categorical_sequential: 1,
            numerical_scalar: 1,
            numerical_sequential: 0,
        }
    }
}

impl TopK {
    pub fn uniform(k: usize) -> Self {
        TopK {
            categorical_scalar: k,
            categorical_sequential: k,
            numerical_scalar: k,
            numerical_sequential: k,
        }
    }

    pub fn get(&self, g: FeatureGroup) -> usize {
        match g {
            FeatureGroup::CategoricalScalar => self.categorical_scalar,
            FeatureGroup::CategoricalSequential => self.categorical_sequential,
            FeatureGroup::NumericalScalar => self.numerical_scalar,
            FeatureGroup::NumericalSequential => self.numerical_sequential,
        }
    }

    pub fn total(&self) -> usize {
        FeatureGroup::ALL.iter().map(|&g| self.get(g)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankConfig {
    pub top_k: TopK,
    pub weight_mode: WeightMode,
    /// Features scored but never ranked or selected.
    pub exclude: Vec<String>,
}

impl Default for RankConfig {
    fn default() -> Self {
        RankConfig {
            top_k: TopK::default(),
            weight_mode: WeightMode::Abs,
            exclude: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSensitivity {
    pub name: String,
    pub group: FeatureGroup,
    pub ds: f64,
    /// 1-based position within the group; `None` for excluded features.
    pub rank: Option<usize>,
    pub selected: bool,
    /// Domains whose attribution weights were all zero.
    pub fallback_domains: Vec<usize>,
    pub pairwise: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub dataset_fingerprint: String,
    pub model_fingerprint: String,
    pub weight_mode: WeightMode,
    pub top_k: TopK,
    /// Schema order.
    pub features: Vec<FeatureSensitivity>,
    /// Feature names per group, most sensitive first.
    pub rankings: BTreeMap<FeatureGroup, Vec<String>>,
    pub warnings: Vec<String>,
}

/// Which features feed the extractor tower.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    TopK,
    LastK,
    All,
}

impl SensitivityReport {
    pub fn feature(&self, name: &str) -> Option<&FeatureSensitivity> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn selected(&self) -> Vec<String> {
        self.select(Selection::TopK)
    }

    /// Feature names for a selection strategy, in schema order. Last-k takes
    /// the same per-group counts from the bottom of each ranking.
    pub fn select(&self, strategy: Selection) -> Vec<String> {
        let mut chosen: Vec<&str> = Vec::new();
        for (group, names) in &self.rankings {
            let k = self.top_k.get(*group).min(names.len());
            match strategy {
                Selection::TopK => chosen.extend(names[..k].iter().map(String::as_str)),
                Selection::LastK => {
                    chosen.extend(names[names.len() - k..].iter().map(String::as_str))
                }
                Selection::All => chosen.extend(names.iter().map(String::as_str)),
            }
        }
        self.features
            .iter()
            .filter(|f| chosen.contains(&f.name.as_str()))
            .map(|f| f.name.clone())
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::MissingArtifact {
            path: path.to_path_buf(),
            msg: format!("sensitivity report not readable: {e}"),
        })?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    /// Plain-text table grouped by ranking group.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        for (group, names) in &self.rankings {
            out.push_str(&format!("[{}]\n", group.as_str()));
            for name in names {
                let f = self.feature(name).expect("ranked feature exists");
                out.push_str(&format!(
                    "  {:>2}. {:<24} DS={:.6}{}\n",
                    f.rank.unwrap_or(0),
                    f.name,
                    f.ds,
                    if f.selected { "  *" } else { "" }
                ));
            }
        }
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out
    }
}

/// Per-feature distributions for every domain, in schema order.
pub fn all_distributions(
    ds: &MultiDomainDataset,
    attrib: &AttributionMatrix,
    mode: WeightMode,
) -> Result<Vec<Vec<EffectWeightedDistribution>>> {
    attrib.check_dataset(ds)?;
    let m = ds.schema.num_features();
    let mut slots: Vec<Option<Result<Vec<EffectWeightedDistribution>>>> = (0..m).map(|_| None).collect();
    slots
        .par_iter_mut()
        .enumerate()
        .for_each(|(j, slot)| *slot = Some(domain_distributions(ds, attrib, j, mode)));
    slots.into_iter().map(|s| s.expect("slot filled")).collect()
}

/// Scores every feature, ranks within groups and marks the top-k of each.
pub fn rank_features(
    ds: &MultiDomainDataset,
    attrib: &AttributionMatrix,
    config: &RankConfig,
) -> Result<SensitivityReport> {
    let dists = all_distributions(ds, attrib, config.weight_mode)?;
    let mut features = Vec::with_capacity(dists.len());
    for (spec, per_domain) in ds.schema.features.iter().zip(&dists) {
        let vectors: Vec<Vec<f64>> = per_domain.iter().map(|d| d.weights.clone()).collect();
        let sens = domain_sensitivity(&vectors, &Metric::for_feature(spec))?;
        features.push(FeatureSensitivity {
            name: spec.name.clone(),
            group: FeatureGroup::of(spec),
            ds: sens.score,
            rank: None,
            selected: false,
            fallback_domains: per_domain.iter().filter(|d| d.fallback).map(|d| d.domain).collect(),
            pairwise: sens.pairwise,
        });
    }

    let mut rankings = BTreeMap::new();
    let mut warnings = Vec::new();
    for group in FeatureGroup::ALL {
        let mut members: Vec<usize> = (0..features.len())
            .filter(|&j| features[j].group == group && !config.exclude.contains(&features[j].name))
            .collect();
        let k = config.top_k.get(group);
        if k > members.len() {
            warnings.push(format!(
                "top-k {k} for group {} exceeds its {} features; clamped",
                group.as_str(),
                members.len()
            ));
        }
        if members.is_empty() {
            continue;
        }
        // descending DS, schema order on ties
        members.sort_by(|&a, &b| features[b].ds.total_cmp(&features[a].ds).then(a.cmp(&b)));
        for (pos, &j) in members.iter().enumerate() {
            features[j].rank = Some(pos + 1);
            features[j].selected = pos < k;
        }
        rankings.insert(group, members.iter().map(|&j| features[j].name.clone()).collect());
    }
    for f in &features {
        if !f.fallback_domains.is_empty() {
            warnings.push(format!(
                "feature `{}`: zero attribution mass in domains {:?}, used plain frequencies",
                f.name, f.fallback_domains
            ));
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(SensitivityReport {
        dataset_fingerprint: attrib.dataset_fingerprint.clone(),
        model_fingerprint: attrib.model_fingerprint.clone(),
        weight_mode: config.weight_mode,
        top_k: config.top_k,
        features,
        rankings,
        warnings,
    })
}

/// Column labels of a feature's value set, OOV last for categorical features.
pub fn value_labels(spec: &FeatureSpec) -> Vec<String> {
    match spec.kind {
        FeatureKind::Categorical => spec
            .vocabulary
            .iter()
            .cloned()
            .chain(std::iter::once("__oov__".to_string()))
            .collect(),
        FeatureKind::Numerical => spec.bin_centers().iter().map(|c| format!("{c}")).collect(),
    }
}

/// One feature's distributions: a header of value labels, then one row per
/// domain holding that domain's probability vector.
pub fn write_distribution_csv<W: std::io::Write>(
    ds: &MultiDomainDataset,
    feature: usize,
    per_domain: &[EffectWeightedDistribution],
    writer: W,
) -> Result<()> {
    let spec = &ds.schema.features[feature];
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["domain".to_string(), "fallback".to_string()];
    header.extend(value_labels(spec));
    w.write_record(&header)?;
    for d in per_domain {
        let mut row = vec![ds.schema.domain_label(d.domain), d.fallback.to_string()];
        row.extend(d.weights.iter().map(|p| format!("{p:e}")));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(Path::new("<csv>"), e))?;
    Ok(())
}
