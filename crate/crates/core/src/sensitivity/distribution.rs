//! Effect-weighted per-domain value distributions.
//!
//! A sample contributes its attribution weight to the value it holds (or,
//! for a sequence, `weight / L` to each of its `L` tokens). Weights are
//! renormalized per domain. When every weight in a domain is zero the
//! plain frequency is used instead and the result is flagged.

use serde::{Deserialize, Serialize};

use crate::attribution::AttributionMatrix;
use crate::data::{FeatureValue, MultiDomainDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    /// `w = |a|`
    #[default]
    Abs,
    /// `w = max(a, 0)`
    ClampRaw,
}

impl WeightMode {
    #[inline]
    pub fn weight(self, a: f64) -> f64 {
        match self {
            WeightMode::Abs => a.abs(),
            WeightMode::ClampRaw => a.max(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectWeightedDistribution {
    pub feature: String,
    pub domain: usize,
    pub weights: Vec<f64>,
    /// Total weight the histogram was divided by.
    pub normalizer: f64,
    /// True when the unweighted frequency was used because all weights were zero.
    pub fallback: bool,
}

/// Unnormalized per-domain sums for one feature.
struct DomainAccumulator {
    weighted: Vec<Vec<f64>>,
    weight_total: Vec<f64>,
    plain: Vec<Vec<f64>>,
    plain_total: Vec<f64>,
    /// Samples that contributed (non-empty sequences for sequential features).
    contributors: Vec<usize>,
    /// All samples of the domain.
    members: Vec<usize>,
}

fn accumulate(
    ds: &MultiDomainDataset,
    attrib: &AttributionMatrix,
    feature: usize,
    mode: WeightMode,
) -> DomainAccumulator {
    let k = ds.num_domains();
    let card = ds.schema.features[feature].cardinality();
    let mut acc = DomainAccumulator {
        weighted: vec![vec![0.0; card]; k],
        weight_total: vec![0.0; k],
        plain: vec![vec![0.0; card]; k],
        plain_total: vec![0.0; k],
        contributors: vec![0; k],
        members: vec![0; k],
    };
    for (i, s) in ds.samples.iter().enumerate() {
        let d = s.domain as usize;
        acc.members[d] += 1;
        let w = mode.weight(attrib.get(i, feature));
        match &s.values[feature] {
            FeatureValue::Sequence(toks) => {
                if toks.is_empty() {
                    continue;
                }
                let inv_len = 1.0 / toks.len() as f64;
                for &t in toks {
                    acc.weighted[d][t as usize] += w * inv_len;
                    acc.plain[d][t as usize] += inv_len;
                }
            }
            v => {
                let r = v.index().expect("scalar value");
                acc.weighted[d][r] += w;
                acc.plain[d][r] += 1.0;
            }
        }
        acc.weight_total[d] += w;
        acc.plain_total[d] += 1.0;
        acc.contributors[d] += 1;
    }
    acc
}

fn finalize(
    ds: &MultiDomainDataset,
    acc: &DomainAccumulator,
    feature: usize,
    domain: usize,
) -> Result<EffectWeightedDistribution> {
    let spec = &ds.schema.features[feature];
    if acc.members[domain] == 0 {
        return Err(Error::EmptyDomain(domain));
    }
    if acc.contributors[domain] == 0 {
        return Err(Error::Value(format!(
            "feature `{}`: every sequence in domain {domain} is empty",
            spec.name
        )));
    }
    let z = acc.weight_total[domain];
    let (hist, normalizer, fallback) = if z > 0.0 {
        (&acc.weighted[domain], z, false)
    } else {
        (&acc.plain[domain], acc.plain_total[domain], true)
    };
    Ok(EffectWeightedDistribution {
        feature: spec.name.clone(),
        domain,
        weights: hist.iter().map(|h| h / normalizer).collect(),
        normalizer,
        fallback,
    })
}

/// All K distributions of one feature (scalar or sequential) in one pass.
/// The caller is responsible for having checked the attribution binding.
pub fn domain_distributions(
    ds: &MultiDomainDataset,
    attrib: &AttributionMatrix,
    feature: usize,
    mode: WeightMode,
) -> Result<Vec<EffectWeightedDistribution>> {
    let acc = accumulate(ds, attrib, feature, mode);
    (0..ds.num_domains())
        .map(|k| finalize(ds, &acc, feature, k))
        .collect()
}

fn single(
    ds: &MultiDomainDataset,
    attrib: &AttributionMatrix,
    feature: &str,
    domain: usize,
    mode: WeightMode,
    sequential: bool,
) -> Result<EffectWeightedDistribution> {
    attrib.check_dataset(ds)?;
    let j = ds.schema.index_of(feature)?;
    if ds.schema.features[j].is_sequential() != sequential {
        return Err(Error::Value(format!(
            "feature `{feature}` is {}sequential",
            if sequential { "not " } else { "" }
        )));
    }
    if domain >= ds.num_domains() {
        return Err(Error::Value(format!("domain {domain} out of range")));
    }
    let acc = accumulate(ds, attrib, j, mode);
    finalize(ds, &acc, j, domain)
}

/// Effect-weighted distribution of a scalar feature in one domain.
pub fn effect_weighted_dist(
    ds: &MultiDomainDataset,
    attrib: &AttributionMatrix,
    feature: &str,
    domain: usize,
    mode: WeightMode,
) -> Result<EffectWeightedDistribution> {
    single(ds, attrib, feature, domain, mode, false)
}

/// Effect-weighted distribution of a sequential feature in one domain;
/// empty sequences contribute nothing.
pub fn effect_weighted_dist_seq(
    ds: &MultiDomainDataset,
    attrib: &AttributionMatrix,
    feature: &str,
    domain: usize,
    mode: WeightMode,
) -> Result<EffectWeightedDistribution> {
    single(ds, attrib, feature, domain, mode, true)
}
