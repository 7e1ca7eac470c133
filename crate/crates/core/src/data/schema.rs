//! Declarative feature schema.
//!
//! Every feature is categorical (with a vocabulary plus one reserved
//! out-of-vocabulary index) or numerical (discretized through bin edges).
//! Numerical features are embedded by bin index, exactly like a categorical
//! feature with `num_bins` values.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_SEQ_LEN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Categorical,
    Numerical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arity {
    Scalar,
    Sequential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default = "default_arity")]
    pub arity: Arity,
    /// Real values of a categorical feature. Index `vocabulary.len()` is OOV.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vocabulary: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_bins: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bin_edges: Vec<f64>,
}

fn default_arity() -> Arity {
    Arity::Scalar
}

impl FeatureSpec {
    pub fn categorical(name: &str, vocabulary: Vec<String>) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::Categorical,
            arity: Arity::Scalar,
            vocabulary,
            num_bins: None,
            bin_edges: Vec::new(),
        }
    }

    pub fn sequential(name: &str, vocabulary: Vec<String>) -> Self {
        FeatureSpec {
            arity: Arity::Sequential,
            ..FeatureSpec::categorical(name, vocabulary)
        }
    }

    pub fn numerical(name: &str, bin_edges: Vec<f64>) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::Numerical,
            arity: Arity::Scalar,
            vocabulary: Vec::new(),
            num_bins: Some(bin_edges.len().saturating_sub(1)),
            bin_edges,
        }
    }

    /// Numerical feature whose edges are fitted from data at load time.
    pub fn numerical_unfitted(name: &str, num_bins: usize) -> Self {
        FeatureSpec {
            num_bins: Some(num_bins),
            bin_edges: Vec::new(),
            ..FeatureSpec::numerical(name, Vec::new())
        }
    }

    pub fn is_sequential(&self) -> bool {
        self.arity == Arity::Sequential
    }

    pub fn oov_index(&self) -> usize {
        self.vocabulary.len()
    }

    /// Size of the value set: vocabulary plus OOV, or the number of bins.
    pub fn cardinality(&self) -> usize {
        match self.kind {
            FeatureKind::Categorical => self.vocabulary.len() + 1,
            FeatureKind::Numerical => self.num_bins.unwrap_or(0),
        }
    }

    pub fn has_edges(&self) -> bool {
        !self.bin_edges.is_empty()
    }

    /// Bin index for a raw value. Bins are right-closed `(e_b, e_{b+1}]`
    /// except the first, which also holds its left edge; out-of-range
    /// values clamp to the first/last bin.
    pub fn bin_of(&self, value: f64) -> usize {
        let n = self.bin_edges.len() - 1;
        let interior = &self.bin_edges[1..n];
        interior.partition_point(|&e| e < value)
    }

    /// Midpoints of the bins, used as transport locations.
    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            FeatureKind::Categorical => {
                let uniq: HashSet<&String> = self.vocabulary.iter().collect();
                if uniq.len() != self.vocabulary.len() {
                    return Err(Error::Schema(format!(
                        "feature `{}` has duplicate vocabulary entries",
                        self.name
                    )));
                }
                if self.cardinality() < 2 {
                    return Err(Error::Schema(format!(
                        "categorical feature `{}` needs at least one value besides OOV",
                        self.name
                    )));
                }
            }
            FeatureKind::Numerical => {
                if self.is_sequential() {
                    return Err(Error::Schema(format!(
                        "feature `{}`: sequential features must be categorical",
                        self.name
                    )));
                }
                let bins = self.num_bins.ok_or_else(|| {
                    Error::Schema(format!("numerical feature `{}` lacks num_bins", self.name))
                })?;
                if bins == 0 {
                    return Err(Error::Schema(format!(
                        "numerical feature `{}` needs num_bins >= 1",
                        self.name
                    )));
                }
                if self.has_edges() {
                    if self.bin_edges.len() != bins + 1 {
                        return Err(Error::Schema(format!(
                            "feature `{}`: {} edges for {} bins",
                            self.name,
                            self.bin_edges.len(),
                            bins
                        )));
                    }
                    if self.bin_edges.iter().any(|e| !e.is_finite())
                        || self.bin_edges.windows(2).any(|w| w[0] >= w[1])
                    {
                        return Err(Error::Schema(format!(
                            "feature `{}`: bin edges must be finite and strictly increasing",
                            self.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Groups within which features are ranked against each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureGroup {
    CategoricalScalar,
    CategoricalSequential,
    NumericalScalar,
    NumericalSequential,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 4] = [
        FeatureGroup::CategoricalScalar,
        FeatureGroup::CategoricalSequential,
        FeatureGroup::NumericalScalar,
        FeatureGroup::NumericalSequential,
    ];

    pub fn of(spec: &FeatureSpec) -> Self {
        match (spec.kind, spec.arity) {
            (FeatureKind::Categorical, Arity::Scalar) => FeatureGroup::CategoricalScalar,
            (FeatureKind::Categorical, Arity::Sequential) => FeatureGroup::CategoricalSequential,
            (FeatureKind::Numerical, Arity::Scalar) => FeatureGroup::NumericalScalar,
            (FeatureKind::Numerical, Arity::Sequential) => FeatureGroup::NumericalSequential,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureGroup::CategoricalScalar => "categorical-scalar",
            FeatureGroup::CategoricalSequential => "categorical-sequential",
            FeatureGroup::NumericalScalar => "numerical-scalar",
            FeatureGroup::NumericalSequential => "numerical-sequential",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub domain_field: String,
    pub label_field: String,
    pub num_domains: usize,
    /// Optional dictionary for string domain labels; position is the id.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub domains: Vec<String>,
    #[serde(default = "default_max_seq_len")]
    pub max_seq_len: usize,
    pub features: Vec<FeatureSpec>,
}

fn default_max_seq_len() -> usize {
    DEFAULT_MAX_SEQ_LEN
}

impl FeatureSchema {
    pub fn new(num_domains: usize, features: Vec<FeatureSpec>) -> Result<Self> {
        let schema = FeatureSchema {
            domain_field: "domain".into(),
            label_field: "label".into(),
            num_domains,
            domains: Vec::new(),
            max_seq_len: DEFAULT_MAX_SEQ_LEN,
            features,
        };
        schema.validate()?;
        Ok(schema)
    }

    /// Structural checks. Numerical edges may still be missing here.
    pub fn validate(&self) -> Result<()> {
        if self.num_domains < 2 {
            return Err(Error::Schema("need at least two domains".into()));
        }
        if !self.domains.is_empty() && self.domains.len() != self.num_domains {
            return Err(Error::Schema(format!(
                "domain dictionary has {} entries, num_domains is {}",
                self.domains.len(),
                self.num_domains
            )));
        }
        if self.features.is_empty() {
            return Err(Error::Schema("schema declares no features".into()));
        }
        let mut seen = HashSet::new();
        for f in &self.features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature `{}`", f.name)));
            }
            if f.name == self.domain_field || f.name == self.label_field {
                return Err(Error::Schema(format!(
                    "feature `{}` collides with the domain/label column",
                    f.name
                )));
            }
            f.validate()?;
        }
        if self.domain_field == self.label_field {
            return Err(Error::Schema("domain and label fields must differ".into()));
        }
        Ok(())
    }

    pub fn is_fitted(&self) -> bool {
        self.features
            .iter()
            .all(|f| f.kind == FeatureKind::Categorical || f.has_edges())
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.features
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| Error::Schema(format!("unknown feature `{name}`")))
    }

    pub fn feature(&self, name: &str) -> Result<&FeatureSpec> {
        Ok(&self.features[self.index_of(name)?])
    }

    pub fn domain_id(&self, raw: &str) -> Option<usize> {
        if self.domains.is_empty() {
            raw.trim().parse::<usize>().ok().filter(|&k| k < self.num_domains)
        } else {
            self.domains.iter().position(|d| d == raw)
        }
    }

    pub fn domain_label(&self, k: usize) -> String {
        self.domains
            .get(k)
            .cloned()
            .unwrap_or_else(|| k.to_string())
    }

    pub fn vocab_lookup(&self) -> Vec<HashMap<&str, usize>> {
        self.features
            .iter()
            .map(|f| {
                f.vocabulary
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (v.as_str(), i))
                    .collect()
            })
            .collect()
    }

    /// Content hash of the schema, used to bind models and datasets.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("schema serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: FeatureSchema = toml::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?).map_err(|e| Error::io(path, e))
    }
}

/// Equal-frequency edges over `values`. Cuts sit on data quantiles so that
/// with right-closed bins each bin holds about `n / num_bins` values; tied
/// quantiles collapse, so heavily tied data may yield fewer bins.
pub fn equal_frequency_edges(values: &[f64], num_bins: usize) -> Result<Vec<f64>> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.is_empty() || num_bins == 0 {
        return Err(Error::Value("cannot fit bin edges on no finite values".into()));
    }
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    let (min, max) = (sorted[0], sorted[n - 1]);
    let pad = 1e-9 * (max - min).abs().max(1.0);
    let mut edges = vec![min - pad];
    for b in 1..num_bins {
        let q = sorted[(b * n / num_bins).saturating_sub(1)];
        if q > *edges.last().unwrap() && q < max {
            edges.push(q);
        }
    }
    edges.push(max);
    Ok(edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edges_feature() -> FeatureSpec {
        FeatureSpec::numerical("x", vec![0.0, 1.0, 2.0, 3.0])
    }

    /// Linear scan, written independently of `bin_of`.
    fn reference_bin(edges: &[f64], v: f64) -> usize {
        let bins = edges.len() - 1;
        if v <= edges[1] {
            return 0;
        }
        for b in 1..bins {
            if v > edges[b] && v <= edges[b + 1] {
                return b;
            }
        }
        bins - 1
    }

    #[test]
    fn bin_edges_table() {
        let f = edges_feature();
        let cases = [
            (-5.0, 0),
            (0.0, 0),
            (0.5, 0),
            (1.0, 0),
            (1.0 + 1e-12, 1),
            (2.0, 1),
            (2.5, 2),
            (3.0, 2),
            (99.0, 2),
        ];
        for (v, want) in cases {
            assert_eq!(f.bin_of(v), want, "value {v}");
            assert_eq!(reference_bin(&f.bin_edges, v), want);
        }
    }

    #[test]
    fn every_edge_position_matches_reference() {
        let f = FeatureSpec::numerical("x", vec![-2.0, -0.5, 0.0, 0.25, 4.0, 10.0]);
        for &e in &f.bin_edges {
            for v in [e - 1e-9, e, e + 1e-9] {
                assert_eq!(f.bin_of(v), reference_bin(&f.bin_edges, v), "v={v}");
            }
        }
    }

    #[test]
    fn single_bin_feature() {
        let f = FeatureSpec::numerical("x", vec![0.0, 1.0]);
        assert_eq!(f.bin_of(-1.0), 0);
        assert_eq!(f.bin_of(5.0), 0);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(FeatureSpec::categorical("c", vec![]).validate().is_err());
        assert!(FeatureSpec::numerical("x", vec![0.0, 0.0]).validate().is_err());
        let mut seq_num = FeatureSpec::numerical("x", vec![0.0, 1.0]);
        seq_num.arity = Arity::Sequential;
        assert!(seq_num.validate().is_err());
        let dup = FeatureSpec::categorical("c", vec!["a".into(), "a".into()]);
        assert!(dup.validate().is_err());
    }

    #[test]
    fn schema_invariants() {
        let c = FeatureSpec::categorical("c", vec!["a".into()]);
        assert!(FeatureSchema::new(1, vec![c.clone()]).is_err());
        assert!(FeatureSchema::new(2, vec![c.clone(), c.clone()]).is_err());
        let clash = FeatureSpec::categorical("label", vec!["a".into()]);
        assert!(FeatureSchema::new(2, vec![clash]).is_err());
        assert!(FeatureSchema::new(2, vec![c]).is_ok());
    }

    #[test]
    fn toml_round_trip() {
        let schema = FeatureSchema::new(
            3,
            vec![
                FeatureSpec::categorical("site", vec!["a".into(), "b".into()]),
                FeatureSpec::sequential("hist", vec!["x".into()]),
                FeatureSpec::numerical("price", vec![0.0, 1.5, 3.0]),
            ],
        )
        .unwrap();
        let text = schema.to_toml_string().unwrap();
        let back = FeatureSchema::from_toml_str(&text).unwrap();
        assert_eq!(back, schema);
        assert_eq!(back.fingerprint(), schema.fingerprint());
    }

    #[test]
    fn equal_frequency_edges_cover_data() {
        let values: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let edges = equal_frequency_edges(&values, 4).unwrap();
        assert_eq!(&edges[1..], &[24.0, 49.0, 74.0, 99.0]);
        assert!(edges[0] < 0.0);
        let f = FeatureSpec::numerical("x", edges);
        let mut counts = [0usize; 4];
        for v in &values {
            counts[f.bin_of(*v)] += 1;
        }
        assert_eq!(counts, [25; 4]);

        let tied = equal_frequency_edges(&[0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0], 4).unwrap();
        let f = FeatureSpec::numerical("x", tied);
        assert_ne!(f.bin_of(0.0), f.bin_of(1.0));

        let constant = equal_frequency_edges(&[2.0; 10], 5).unwrap();
        assert_eq!(constant.len(), 2);
        assert!(constant[0] < constant[1]);
    }
}
