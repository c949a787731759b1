//! Preference pairs from instructions a model answers poorly: a pair is
//! kept when the model output scores low Rouge-L against the reference or is
//! much longer than it. The reference is chosen, the output rejected.

use serde::{Deserialize, Serialize};

use super::items::{PreferencePair, SelectionMetric};
use super::ForgeError;
use crate::scoring::rouge_l;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceCandidate {
    pub prompt: String,
    pub ground_truth: String,
    pub model_output: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreferenceThresholds {
    pub rouge_l: f64,
    pub length_ratio: f64,
}

impl Default for PreferenceThresholds {
    fn default() -> Self {
        Self {
            rouge_l: 0.3,
            length_ratio: 3.0,
        }
    }
}

impl PreferenceThresholds {
    pub fn validate(&self) -> Result<(), ForgeError> {
        if !(self.rouge_l > 0.0 && self.length_ratio > 0.0) {
            return Err(ForgeError::Invalid(format!(
                "preference thresholds must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PreferenceOutcome {
    pub pairs: Vec<PreferencePair>,
    pub warnings: Vec<String>,
}

pub fn build_preference_pairs(
    items: &[PreferenceCandidate],
    thresholds: &PreferenceThresholds,
) -> Result<PreferenceOutcome, ForgeError> {
    thresholds.validate()?;
    let mut out = PreferenceOutcome::default();
    for (i, c) in items.iter().enumerate() {
        if c.ground_truth.trim().is_empty() {
            out.warnings.push(format!("candidate {i}: empty ground truth; skipped"));
            continue;
        }
        if c.model_output.trim().is_empty() || c.model_output == c.ground_truth {
            continue;
        }
        let rl = rouge_l(&c.model_output, &c.ground_truth).f_measure;
        let ratio = word_count(&c.model_output) as f64 / word_count(&c.ground_truth) as f64;
        let metric = if rl < thresholds.rouge_l {
            SelectionMetric {
                name: "rougeL_f".into(),
                value: rl,
            }
        } else if ratio > thresholds.length_ratio {
            SelectionMetric {
                name: "length_ratio".into(),
                value: ratio,
            }
        } else {
            continue;
        };
        out.pairs.push(PreferencePair {
            prompt: c.prompt.clone(),
            chosen: c.ground_truth.clone(),
            rejected: c.model_output.clone(),
            selection_metric: metric,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(gt: &str, out: &str) -> PreferenceCandidate {
        PreferenceCandidate {
            prompt: "p".into(),
            ground_truth: gt.into(),
            model_output: out.into(),
        }
    }

    #[test]
    fn selection_rules() {
        let t = PreferenceThresholds::default();
        let gt = "the gnb schedules uplink grants";
        let items = vec![
            cand(gt, "a completely unrelated reply about weather today"),
            cand(gt, gt),
            cand(gt, &format!("{gt} {gt} {gt} {gt} {gt}")),
            cand("", "x"),
            cand(gt, "the gnb schedules uplink grants quickly"),
        ];
        let out = build_preference_pairs(&items, &t).unwrap();
        assert_eq!(out.pairs.len(), 2);
        assert_eq!(out.pairs[0].selection_metric.name, "rougeL_f");
        assert!(out.pairs[0].selection_metric.value < 0.3);
        assert_eq!(out.pairs[1].selection_metric.name, "length_ratio");
        assert_eq!(out.pairs[1].selection_metric.value, 5.0);
        assert_eq!(out.warnings.len(), 1);
        for p in &out.pairs {
            p.validate().unwrap();
            assert_eq!(p.chosen, gt);
        }
        assert!(build_preference_pairs(
            &items,
            &PreferenceThresholds {
                rouge_l: 0.0,
                length_ratio: 3.0
            }
        )
        .is_err());
    }
}
