use crate::error::{Error, Result};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Binary cross-entropy of one logit: `softplus(l) - y·l`.
#[inline]
pub fn bce_single(label: u8, logit: f64) -> f64 {
    if label == 1 {
        softplus(-logit)
    } else {
        softplus(logit)
    }
}

/// Derivative of `bce_single` w.r.t. the logit.
#[inline]
pub fn bce_grad(label: u8, logit: f64) -> f64 {
    sigmoid(logit) - label as f64
}

/// Mean binary cross-entropy over a batch.
pub fn bce_loss(labels: &[u8], logits: &[f64]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::Value("empty batch".into()));
    }
    if labels.len() != logits.len() {
        return Err(Error::Shape(format!(
            "{} labels vs {} logits",
            labels.len(),
            logits.len()
        )));
    }
    let total: f64 = labels
        .iter()
        .zip(logits)
        .map(|(&y, &l)| bce_single(y, l))
        .sum();
    Ok(total / labels.len() as f64)
}
