use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::schema::{FeatureKind, FeatureSchema};
use crate::error::{Error, Result};

/// Encoded value of one feature in one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureValue {
    Categorical(u32),
    Numerical { bin: u32, raw: f64 },
    Sequence(Vec<u32>),
}

impl FeatureValue {
    /// Value-set index of a scalar value.
    pub fn index(&self) -> Option<usize> {
        match self {
            FeatureValue::Categorical(i) => Some(*i as usize),
            FeatureValue::Numerical { bin, .. } => Some(*bin as usize),
            FeatureValue::Sequence(_) => None,
        }
    }

    pub fn tokens(&self) -> Option<&[u32]> {
        match self {
            FeatureValue::Sequence(t) => Some(t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub domain: u32,
    pub label: u8,
    /// One entry per schema feature, in schema order.
    pub values: Vec<FeatureValue>,
}

impl Sample {
    pub fn check(&self, schema: &FeatureSchema) -> Result<()> {
        if self.domain as usize >= schema.num_domains {
            return Err(Error::Value(format!("domain {} out of range", self.domain)));
        }
        if self.label > 1 {
            return Err(Error::Value(format!("label {} not in {{0,1}}", self.label)));
        }
        if self.values.len() != schema.num_features() {
            return Err(Error::Shape(format!(
                "sample has {} values, schema has {} features",
                self.values.len(),
                schema.num_features()
            )));
        }
        for (spec, value) in schema.features.iter().zip(&self.values) {
            let card = spec.cardinality() as u32;
            let ok = match (spec.kind, spec.is_sequential(), value) {
                (FeatureKind::Categorical, false, FeatureValue::Categorical(i)) => *i < card,
                (FeatureKind::Categorical, true, FeatureValue::Sequence(t)) => {
                    t.iter().all(|&i| i < card)
                }
                (FeatureKind::Numerical, false, FeatureValue::Numerical { bin, .. }) => {
                    *bin < card
                }
                _ => false,
            };
            if !ok {
                return Err(Error::Value(format!(
                    "value {value:?} invalid for feature `{}`",
                    spec.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiDomainDataset {
    pub schema: FeatureSchema,
    pub samples: Vec<Sample>,
    pub split: Split,
}

impl MultiDomainDataset {
    pub fn new(schema: FeatureSchema, samples: Vec<Sample>, split: Split) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            s.check(&schema).map_err(|e| Error::Sample {
                index: i,
                source: Box::new(e),
            })?;
        }
        let ds = MultiDomainDataset {
            schema,
            samples,
            split,
        };
        if split == Split::Train {
            if let Some(k) = ds.domain_counts().iter().position(|&c| c == 0) {
                return Err(Error::EmptyDomain(k));
            }
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_domains(&self) -> usize {
        self.schema.num_domains
    }

    pub fn domain_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.schema.num_domains];
        for s in &self.samples {
            counts[s.domain as usize] += 1;
        }
        counts
    }

    pub fn labels(&self) -> Vec<u8> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn positive_rate(&self) -> f64 {
        let pos = self.samples.iter().filter(|s| s.label == 1).count();
        pos as f64 / self.samples.len().max(1) as f64
    }

    /// Content hash over schema and encoded samples.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.schema.fingerprint().as_bytes());
        for s in &self.samples {
            h.update(s.domain.to_le_bytes());
            h.update([s.label]);
            for v in &s.values {
                match v {
                    FeatureValue::Categorical(i) => {
                        h.update([0u8]);
                        h.update(i.to_le_bytes());
                    }
                    FeatureValue::Numerical { bin, raw } => {
                        h.update([1u8]);
                        h.update(bin.to_le_bytes());
                        h.update(raw.to_le_bytes());
                    }
                    FeatureValue::Sequence(t) => {
                        h.update([2u8]);
                        h.update((t.len() as u64).to_le_bytes());
                        for i in t {
                            h.update(i.to_le_bytes());
                        }
                    }
                }
            }
        }
        hex::encode(h.finalize())
    }

    pub fn subset(&self, indices: &[usize], split: Split) -> Self {
        MultiDomainDataset {
            schema: self.schema.clone(),
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            split,
        }
    }

    /// Deterministic shuffled train/valid/test split.
    pub fn split(
        &self,
        valid_frac: f64,
        test_frac: f64,
        seed: u64,
    ) -> Result<(MultiDomainDataset, MultiDomainDataset, MultiDomainDataset)> {
        if !(0.0..1.0).contains(&valid_frac)
            || !(0.0..1.0).contains(&test_frac)
            || valid_frac + test_frac >= 1.0
        {
            return Err(Error::Config(format!(
                "bad split fractions valid={valid_frac} test={test_frac}"
            )));
        }
        let n = self.len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_test = (n as f64 * test_frac).round() as usize;
        let n_valid = (n as f64 * valid_frac).round() as usize;
        let (test, rest) = idx.split_at(n_test);
        let (valid, train) = rest.split_at(n_valid);
        let sorted = |v: &[usize]| {
            let mut v = v.to_vec();
            v.sort_unstable();
            v
        };
        let train = self.subset(&sorted(train), Split::Train);
        if let Some(k) = train.domain_counts().iter().position(|&c| c == 0) {
            return Err(Error::EmptyDomain(k));
        }
        Ok((
            train,
            self.subset(&sorted(valid), Split::Valid),
            self.subset(&sorted(test), Split::Test),
        ))
    }
}

/// Plain per-domain frequency of a scalar feature's values.
pub fn empirical_frequency(
    ds: &MultiDomainDataset,
    feature: &str,
    domain: usize,
) -> Result<Vec<f64>> {
    let j = ds.schema.index_of(feature)?;
    empirical_frequency_at(ds, j, domain)
}

pub fn empirical_frequency_at(
    ds: &MultiDomainDataset,
    feature: usize,
    domain: usize,
) -> Result<Vec<f64>> {
    let spec = &ds.schema.features[feature];
    if spec.is_sequential() {
        return Err(Error::Value(format!(
            "feature `{}` is sequential; empirical frequency needs a scalar feature",
            spec.name
        )));
    }
    if domain >= ds.num_domains() {
        return Err(Error::Value(format!("domain {domain} out of range")));
    }
    let mut counts = vec![0u64; spec.cardinality()];
    let mut total = 0u64;
    for s in ds.samples.iter().filter(|s| s.domain as usize == domain) {
        let v = s.values[feature].index().expect("scalar value");
        counts[v] += 1;
        total += 1;
    }
    if total == 0 {
        return Err(Error::EmptyDomain(domain));
    }
    Ok(counts
        .into_iter()
        .map(|c| c as f64 / total as f64)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::FeatureSpec;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(
            2,
            vec![
                FeatureSpec::categorical("c", vec!["a".into(), "b".into(), "c".into()]),
                FeatureSpec::sequential("s", vec!["x".into(), "y".into()]),
            ],
        )
        .unwrap()
    }

    fn sample(domain: u32, c: u32) -> Sample {
        Sample {
            domain,
            label: 0,
            values: vec![FeatureValue::Categorical(c), FeatureValue::Sequence(vec![])],
        }
    }

    #[test]
    fn frequency_direct_count() {
        let ds = MultiDomainDataset::new(
            schema(),
            vec![sample(0, 0), sample(0, 0), sample(0, 1), sample(1, 2)],
            Split::Train,
        )
        .unwrap();
        let p = empirical_frequency(&ds, "c", 0).unwrap();
        assert_eq!(p, vec![2.0 / 3.0, 1.0 / 3.0, 0.0, 0.0]);
        let one_hot = empirical_frequency(&ds, "c", 1).unwrap();
        assert_eq!(one_hot, vec![0.0, 0.0, 1.0, 0.0]);
        assert!(empirical_frequency(&ds, "s", 0).is_err());
    }

    #[test]
    fn empty_domain_is_an_error() {
        let ds = MultiDomainDataset::new(schema(), vec![sample(0, 0)], Split::Test).unwrap();
        assert!(matches!(
            empirical_frequency(&ds, "c", 1),
            Err(Error::EmptyDomain(1))
        ));
        assert!(MultiDomainDataset::new(schema(), vec![sample(0, 0)], Split::Train).is_err());
    }

    #[test]
    fn rejects_out_of_range_values() {
        let bad = sample(0, 9);
        assert!(bad.check(&schema()).is_err());
        let mut bad_domain = sample(0, 0);
        bad_domain.domain = 2;
        assert!(bad_domain.check(&schema()).is_err());
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let samples: Vec<Sample> = (0..100).map(|i| sample(i % 2, i % 3)).collect();
        let ds = MultiDomainDataset::new(schema(), samples, Split::Train).unwrap();
        let (a, b, c) = ds.split(0.1, 0.2, 7).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (70, 10, 20));
        let (a2, _, _) = ds.split(0.1, 0.2, 7).unwrap();
        assert_eq!(a.fingerprint(), a2.fingerprint());
    }
}
