//! Scoring of model outputs: Rouge, answer parsing, accuracy grading, the
//! normalized equation-similarity score and score distributions.

pub mod answers;
pub mod distribution;
pub mod grading;
pub mod report;
pub mod rouge;
pub mod similarity;

pub use answers::parse_option_answer;
pub use distribution::{score_distribution, ScoreDistribution};
pub use grading::{grade_classification_run, grade_mcq_run, Accuracy, ClassificationGrade, McqGrade};
pub use rouge::{rouge_1, rouge_l, RougeResult};
pub use similarity::{normalized_similarity_score, score_equation, SimilarityError};

use serde::{Deserialize, Serialize};

/// One per-item metric value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub item_id: String,
    pub metric: String,
    pub value: f64,
}

impl ScoreRecord {
    pub fn new(item_id: impl Into<String>, metric: impl Into<String>, value: f64) -> Self {
        debug_assert!(value.is_finite());
        Self {
            item_id: item_id.into(),
            metric: metric.into(),
            value,
        }
    }
}
