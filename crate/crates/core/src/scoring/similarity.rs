//! Normalized embedding-similarity score for predicted equations.
//!
//! The raw cosine between a ground-truth equation and a prediction is
//! rebased against the cosine between the ground truth and an empty answer,
//! rescaled so the ground truth itself scores 100, and clamped at 0.

use crate::clients::embed::{cosine_similarity, EmbedError, Embedder};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimilarityError {
    #[error("empty-answer baseline cosine {0} is degenerate (>= 1 - 1e-12)")]
    DegenerateBaseline(f64),
    #[error("cosine {0} outside [-1, 1]")]
    OutOfRange(f64),
}

pub const DEGENERATE_EPS: f64 = 1e-12;

/// `max{(cos_pred − cos_empty) / (1 − cos_empty), 0} × 100`.
pub fn normalized_similarity_score(cos_truth_pred: f64, cos_truth_empty: f64) -> Result<f64, SimilarityError> {
    for c in [cos_truth_pred, cos_truth_empty] {
        if !(-1.0..=1.0).contains(&c) {
            return Err(SimilarityError::OutOfRange(c));
        }
    }
    if cos_truth_empty >= 1.0 - DEGENERATE_EPS {
        return Err(SimilarityError::DegenerateBaseline(cos_truth_empty));
    }
    let rebased = (cos_truth_pred - cos_truth_empty) / (1.0 - cos_truth_empty);
    Ok(rebased.max(0.0) * 100.0)
}

#[derive(Debug, thiserror::Error)]
pub enum EquationScoreError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// Scores a predicted equation against its ground truth with `embedder`.
/// A degenerate baseline maps to 0 with a warning.
pub fn score_equation(truth: &str, predicted: &str, embedder: &dyn Embedder) -> Result<f64, EquationScoreError> {
    let e_truth = embedder.embed_text(truth)?;
    let e_pred = embedder.embed_text(predicted)?;
    let e_empty = embedder.embed_text("")?;
    let cos_pred = cosine_similarity(&e_truth, &e_pred)?.clamp(-1.0, 1.0);
    let cos_empty = cosine_similarity(&e_truth, &e_empty)?.clamp(-1.0, 1.0);
    match normalized_similarity_score(cos_pred, cos_empty) {
        Ok(s) => Ok(s),
        Err(e) => {
            log::warn!("equation score set to 0: {e}");
            Ok(0.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clients::embed::StubEmbedder;

    #[test]
    fn tabulated_cases() {
        assert_eq!(normalized_similarity_score(1.0, 0.7).unwrap(), 100.0);
        assert_eq!(normalized_similarity_score(0.7, 0.7).unwrap(), 0.0);
        assert_eq!(normalized_similarity_score(0.85, 0.7).unwrap(), 50.0);
    }

    #[test]
    fn clamps_and_errors() {
        assert_eq!(normalized_similarity_score(0.2, 0.7).unwrap(), 0.0);
        assert!(matches!(
            normalized_similarity_score(0.9, 1.0),
            Err(SimilarityError::DegenerateBaseline(_))
        ));
        assert!(matches!(
            normalized_similarity_score(1.5, 0.0),
            Err(SimilarityError::OutOfRange(_))
        ));
        assert!(normalized_similarity_score(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn equation_scoring_with_stub() {
        let e = StubEmbedder::default();
        let s = score_equation("y = H x + n", "y = H x + n", &e).unwrap();
        assert!((s - 100.0).abs() < 1e-9);
        let s = score_equation("y = H x + n", "", &e).unwrap();
        assert!(s.abs() < 1e-9);
    }
}
