use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::auc::auc;
use crate::artifact::fingerprint_params;
use crate::data::MultiDomainDataset;
use crate::error::{Error, Result};
use crate::nn::CtrModel;

/// Overall and per-domain AUC. Undefined AUCs (single-class label sets)
/// are `None`, serialized as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall_auc: Option<f64>,
    pub domain_auc: Vec<Option<f64>>,
    pub domain_counts: Vec<usize>,
    pub logloss: f64,
    pub model_fingerprint: String,
    pub dataset_fingerprint: String,
}

/// Logits in sample order.
pub fn score_dataset<M: CtrModel>(model: &M, ds: &MultiDomainDataset) -> Vec<f64> {
    ds.samples.par_iter().map(|s| model.logit(s)).collect()
}

fn defined(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(a) => Ok(Some(a)),
        Err(Error::UndefinedAuc(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn report_from_scores(
    ds: &MultiDomainDataset,
    scores: &[f64],
    model_fingerprint: String,
) -> Result<EvalReport> {
    if ds.is_empty() {
        return Err(Error::Value("evaluation set is empty".into()));
    }
    let labels = ds.labels();
    let overall = defined(auc(&labels, scores))?;
    let k = ds.num_domains();
    let mut per_labels = vec![Vec::new(); k];
    let mut per_scores = vec![Vec::new(); k];
    for ((s, &y), &p) in ds.samples.iter().zip(&labels).zip(scores) {
        per_labels[s.domain as usize].push(y);
        per_scores[s.domain as usize].push(p);
    }
    let domain_auc = (0..k)
        .map(|d| defined(auc(&per_labels[d], &per_scores[d])))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        overall_auc: overall,
        domain_auc,
        domain_counts: per_labels.iter().map(Vec::len).collect(),
        logloss: crate::nn::bce_loss(&labels, scores)?,
        model_fingerprint,
        dataset_fingerprint: ds.fingerprint(),
    })
}

pub fn evaluate<M: CtrModel>(model: &M, ds: &MultiDomainDataset) -> Result<EvalReport> {
    if model.schema_fingerprint() != ds.schema.fingerprint() {
        return Err(Error::Compatibility("model and test set use different schemas".into()));
    }
    let scores = score_dataset(model, ds);
    report_from_scores(ds, &scores, fingerprint_params(model))
}

fn fmt_auc(a: Option<f64>) -> String {
    a.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

/// Rows are domains then Overall, columns are variants.
pub fn render_comparison(domain_names: &[String], columns: &[(String, Vec<Option<f64>>, Option<f64>)]) -> String {
    let width = columns.iter().map(|c| c.0.len()).max().unwrap_or(0).max(8) + 2;
    let mut out = format!("{:<12}", "domain");
    for (name, _, _) in columns {
        out.push_str(&format!("{name:>width$}"));
    }
    out.push('\n');
    for (d, dname) in domain_names.iter().enumerate() {
        out.push_str(&format!("{dname:<12}"));
        for (_, per, _) in columns {
            out.push_str(&format!("{:>width$}", fmt_auc(per.get(d).copied().flatten())));
        }
        out.push('\n');
    }
    out.push_str(&format!("{:<12}", "Overall"));
    for (_, _, overall) in columns {
        out.push_str(&format!("{:>width$}", fmt_auc(*overall)));
    }
    out.push('\n');
    out
}

impl EvalReport {
    pub fn render_table(&self, domain_names: &[String]) -> String {
        render_comparison(
            domain_names,
            &[("AUC".to_string(), self.domain_auc.clone(), self.overall_auc)],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureSchema, FeatureSpec, FeatureValue, Sample, Split};
    use crate::nn::BaseDnn;

    fn dataset(labels: &[(u32, u8)]) -> MultiDomainDataset {
        let schema = FeatureSchema::new(2, vec![FeatureSpec::categorical("c", vec!["a".into(), "b".into()])]).unwrap();
        let samples = labels
            .iter()
            .enumerate()
            .map(|(i, &(d, y))| Sample {
                domain: d,
                label: y,
                values: vec![FeatureValue::Categorical((i % 3) as u32)],
            })
            .collect();
        MultiDomainDataset::new(schema, samples, Split::Test).unwrap()
    }

    #[test]
    fn constant_scores_give_half() {
        let ds = dataset(&[(0, 1), (0, 0), (1, 0), (1, 1), (1, 0)]);
        let r = report_from_scores(&ds, &[0.2; 5], "m".into()).unwrap();
        assert_eq!(r.overall_auc, Some(0.5));
        assert_eq!(r.domain_auc, vec![Some(0.5), Some(0.5)]);
        assert_eq!(r.domain_counts.iter().sum::<usize>(), 5);
    }

    #[test]
    fn single_class_domain_is_undefined() {
        let ds = dataset(&[(0, 1), (0, 0), (1, 0), (1, 0)]);
        let r = report_from_scores(&ds, &[0.9, 0.1, 0.3, 0.2], "m".into()).unwrap();
        assert_eq!(r.domain_auc[1], None);
        assert_eq!(r.overall_auc, Some(1.0));
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("null"));
        assert!(r.render_table(&["a".into(), "b".into()]).contains("n/a"));
    }

    #[test]
    fn evaluate_checks_schema() {
        let ds = dataset(&[(0, 1), (1, 0)]);
        let other = FeatureSchema::new(3, vec![FeatureSpec::categorical("c", vec!["a".into()])]).unwrap();
        let model = BaseDnn::new(&other, 2, &[2], 0);
        assert!(matches!(evaluate(&model, &ds), Err(Error::Compatibility(_))));
        let ok = BaseDnn::new(&ds.schema, 2, &[2], 0);
        assert_eq!(evaluate(&ok, &ds).unwrap().domain_counts, vec![1, 1]);
    }
}
