//! Distances between per-domain distributions.

use crate::error::{Error, Result};

const NORMALIZATION_TOL: f64 = 1e-9;

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::Value(format!("{what} has negative or non-finite mass")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::Value(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

/// Jensen–Shannon divergence with natural logarithms; bounded by ln 2.
pub fn js_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!(
            "distributions of length {} and {}",
            p.len(),
            q.len()
        )));
    }
    check_distribution(p, "P")?;
    check_distribution(q, "Q")?;
    let term = |a: f64, m: f64| if a > 0.0 { a * (a / m).ln() } else { 0.0 };
    let mut js = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        js += 0.5 * term(a, m) + 0.5 * term(b, m);
    }
    Ok(js.max(0.0))
}

/// Weights placed on real locations.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    pub locations: Vec<f64>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(locations: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if locations.len() != weights.len() {
            return Err(Error::Shape(format!(
                "{} locations for {} weights",
                locations.len(),
                weights.len()
            )));
        }
        if locations.iter().any(|x| !x.is_finite()) {
            return Err(Error::Value("locations must be finite".into()));
        }
        check_distribution(&weights, "measure")?;
        Ok(DiscreteMeasure { locations, weights })
    }

    pub fn point_mass(at: f64) -> Self {
        DiscreteMeasure {
            locations: vec![at],
            weights: vec![1.0],
        }
    }
}

/// 1-Wasserstein distance under |x − y|, as the integral of the absolute
/// CDF difference over the merged support. O(n log n) for the sort.
pub fn wasserstein_1d(p: &DiscreteMeasure, q: &DiscreteMeasure) -> Result<f64> {
    check_distribution(&p.weights, "P")?;
    check_distribution(&q.weights, "Q")?;
    // signed events: +w for P, -w for Q
    let mut events: Vec<(f64, f64)> = p
        .locations
        .iter()
        .zip(&p.weights)
        .map(|(&x, &w)| (x, w))
        .chain(q.locations.iter().zip(&q.weights).map(|(&x, &w)| (x, -w)))
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cdf_gap = 0.0;
    let mut total = 0.0;
    for pair in events.windows(2) {
        cdf_gap += pair[0].1;
        total += cdf_gap.abs() * (pair[1].0 - pair[0].0);
    }
    Ok(total)
}

/// Same-support convenience: both weight vectors live on `locations`.
pub fn wasserstein_on_support(locations: &[f64], p: &[f64], q: &[f64]) -> Result<f64> {
    let a = DiscreteMeasure::new(locations.to_vec(), p.to_vec())?;
    let b = DiscreteMeasure::new(locations.to_vec(), q.to_vec())?;
    wasserstein_1d(&a, &b)
}
