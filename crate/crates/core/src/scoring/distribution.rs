use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Thresholds reported next to the mean (inclusive).
pub const PORTION_THRESHOLDS: [u32; 2] = [50, 90];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    pub values: Vec<f64>,
    pub mean: f64,
    /// Fraction of values `>=` each threshold.
    pub portion_ge: BTreeMap<u32, f64>,
    /// `cdf[k]` is the fraction of values `<= k` for `k` in 0..=100.
    pub cdf: Vec<f64>,
}

impl ScoreDistribution {
    pub fn portion(&self, threshold: u32) -> f64 {
        portion_ge(&self.values, f64::from(threshold))
    }
}

fn portion_ge(values: &[f64], t: f64) -> f64 {
    values.iter().filter(|&&v| v >= t).count() as f64 / values.len() as f64
}

pub fn score_distribution(values: &[f64]) -> Result<ScoreDistribution> {
    if values.is_empty() {
        return Err(Error::Invalid("score distribution of an empty list".into()));
    }
    if let Some(v) = values.iter().find(|v| !(0.0..=100.0).contains(*v)) {
        return Err(Error::Invalid(format!("score {v} outside [0, 100]")));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let portion_ge = PORTION_THRESHOLDS
        .iter()
        .map(|&t| (t, portion_ge(values, f64::from(t))))
        .collect();
    let cdf = (0..=100)
        .map(|k| values.iter().filter(|&&v| v <= f64::from(k)).count() as f64 / n)
        .collect();
    Ok(ScoreDistribution {
        values: values.to_vec(),
        mean,
        portion_ge,
        cdf,
    })
}
