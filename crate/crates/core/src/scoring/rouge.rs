//! Rouge-1 and Rouge-L over case-folded alphanumeric tokens, no stemming.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::exec::{self, Exec};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RougeResult {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

impl RougeResult {
    fn from_counts(hits: usize, cand_len: usize, ref_len: usize) -> Self {
        if hits == 0 || cand_len == 0 || ref_len == 0 {
            return Self::default();
        }
        let precision = hits as f64 / cand_len as f64;
        let recall = hits as f64 / ref_len as f64;
        Self {
            precision,
            recall,
            f_measure: 2.0 * precision * recall / (precision + recall),
        }
    }
}

/// Lower-cased maximal alphanumeric runs.
pub fn rouge_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn rouge_1(candidate: &str, reference: &str) -> RougeResult {
    let cand = rouge_tokens(candidate);
    let refr = rouge_tokens(reference);
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &refr {
        *counts.entry(t).or_default() += 1;
    }
    let mut hits = 0;
    for t in &cand {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                hits += 1;
            }
        }
    }
    RougeResult::from_counts(hits, cand.len(), refr.len())
}

/// Longest common subsequence length, two-row dynamic programme.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l(candidate: &str, reference: &str) -> RougeResult {
    let cand = rouge_tokens(candidate);
    let refr = rouge_tokens(reference);
    RougeResult::from_counts(lcs_len(&cand, &refr), cand.len(), refr.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RougePair {
    pub rouge_1: RougeResult,
    pub rouge_l: RougeResult,
}

/// Scores `(candidate, reference)` pairs, preserving order.
pub fn score_batch(pairs: &[(String, String)], exec: Exec) -> Vec<RougePair> {
    exec::map(exec, pairs, |(c, r)| RougePair {
        rouge_1: rouge_1(c, r),
        rouge_l: rouge_l(c, r),
    })
}

/// Mean Rouge-1 and Rouge-L F-measures.
pub fn mean_f(scores: &[RougePair]) -> (f64, f64) {
    if scores.is_empty() {
        return (0.0, 0.0);
    }
    let n = scores.len() as f64;
    (
        scores.iter().map(|s| s.rouge_1.f_measure).sum::<f64>() / n,
        scores.iter().map(|s| s.rouge_l.f_measure).sum::<f64>() / n,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rouge_1_examples() {
        assert_eq!(rouge_1("5G NR uplink", "5G NR uplink").f_measure, 1.0);
        assert_eq!(rouge_1("alpha beta", "gamma delta").f_measure, 0.0);
        let r = rouge_1("the cat sat", "the cat sat down");
        assert_eq!(r.precision, 1.0);
        assert_eq!(r.recall, 0.75);
        assert!((r.f_measure - 6.0 / 7.0).abs() < 1e-12);
        assert_eq!(rouge_1("", "x"), RougeResult::default());
        assert_eq!(rouge_1("x", ""), RougeResult::default());
    }

    #[test]
    fn rouge_l_examples() {
        assert_eq!(rouge_l("a b c", "a b c").f_measure, 1.0);
        let r = rouge_l("a b c d", "a c b d");
        assert_eq!((r.precision, r.recall, r.f_measure), (0.75, 0.75, 0.75));
        assert_eq!(rouge_l("", "a b"), RougeResult::default());
    }

    #[test]
    fn tokenization_case_folds_and_splits_punctuation() {
        assert_eq!(rouge_tokens("Hello, WORLD!5g-NR"), vec!["hello", "world", "5g", "nr"]);
        assert_eq!(rouge_1("HELLO world", "hello, world.").f_measure, 1.0);
    }

    #[test]
    fn clipped_counts() {
        // candidate repeats "the" three times, reference has it once
        let r = rouge_1("the the the", "the cat");
        assert!((r.precision - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.recall, 0.5);
    }

    #[test]
    fn batch_means() {
        let pairs = vec![
            ("a b".to_string(), "a b".to_string()),
            ("x".to_string(), "y".to_string()),
        ];
        let s = score_batch(&pairs, Exec::Parallel);
        assert_eq!(mean_f(&s), (0.5, 0.5));
        assert_eq!(mean_f(&[]), (0.0, 0.0));
    }
}
