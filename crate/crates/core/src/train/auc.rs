use crate::error::{Error, Result};

/// ROC AUC as the Mann–Whitney statistic with midranks for tied scores.
///
/// Ranks are handled doubled so the numerator stays an exact integer.
pub fn auc(labels: &[u8], scores: &[f64]) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(Error::Shape(format!(
            "{} labels for {} scores",
            labels.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Value("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc(format!(
            "{n_pos} positives and {n_neg} negatives"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // sum over positives of 2·midrank (1-based)
    let mut twice_rank_sum: u64 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && scores[order[end + 1]] == scores[order[start]] {
            end += 1;
        }
        let twice_midrank = (start + 1 + end + 1) as u64;
        let pos_in_group = order[start..=end].iter().filter(|&&i| labels[i] == 1).count() as u64;
        twice_rank_sum += twice_midrank * pos_in_group;
        start = end + 1;
    }
    let twice_u = twice_rank_sum - n_pos * (n_pos + 1);
    Ok(twice_u as f64 / (2 * n_pos * n_neg) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairwise(labels: &[u8], scores: &[f64]) -> f64 {
        let mut twice = 0u64;
        let (mut p, mut n) = (0u64, 0u64);
        for i in 0..labels.len() {
            if labels[i] == 1 {
                p += 1;
            } else {
                n += 1;
            }
        }
        for i in 0..labels.len() {
            for j in 0..labels.len() {
                if labels[i] == 1 && labels[j] == 0 {
                    if scores[i] > scores[j] {
                        twice += 2;
                    } else if scores[i] == scores[j] {
                        twice += 1;
                    }
                }
            }
        }
        twice as f64 / (2 * p * n) as f64
    }

    #[test]
    fn anchors() {
        assert_eq!(auc(&[1, 0], &[0.9, 0.1]).unwrap(), 1.0);
        assert_eq!(auc(&[1, 0, 1, 0], &[0.3; 4]).unwrap(), 0.5);
        let labels = [1, 0, 1, 1, 0, 0, 1];
        let scores = [0.8, 0.8, 0.1, 0.5, 0.5, 0.2, 0.9];
        assert_eq!(auc(&labels, &scores).unwrap(), pairwise(&labels, &scores));
        assert!(matches!(auc(&[1, 1], &[0.1, 0.2]), Err(Error::UndefinedAuc(_))));
        assert!(auc(&[1], &[0.1, 0.2]).is_err());
    }
}
