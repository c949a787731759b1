//! Accuracy grading for multiple-choice and working-group classification
//! runs. Responses are matched to items by id; a missing response counts as
//! incorrect.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::answers::parse_option_answer;
use crate::forge::items::{McqCategory, McqItem, TdocClassItem, Tsg, WorkingGroup};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
}

impl Accuracy {
    fn record(&mut self, ok: bool) {
        self.total += 1;
        if ok {
            self.correct += 1;
        }
    }

    /// Percentage at full precision; `None` when nothing was graded.
    pub fn percent(&self) -> Option<f64> {
        (self.total > 0).then(|| 100.0 * self.correct as f64 / self.total as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct McqGrade {
    pub per_category: BTreeMap<McqCategory, Accuracy>,
    pub overall: Accuracy,
    pub missing: Vec<String>,
}

pub fn grade_mcq_run(items: &[(String, McqItem)], responses: &BTreeMap<String, String>) -> McqGrade {
    let mut grade = McqGrade::default();
    for (id, item) in items {
        let ok = match responses.get(id) {
            Some(r) => parse_option_answer(r, item.options.len()) == Some(item.answer_index),
            None => {
                log::warn!("no response for mcq item {id}; graded incorrect");
                grade.missing.push(id.clone());
                false
            }
        };
        grade.per_category.entry(item.category).or_default().record(ok);
        grade.overall.record(ok);
    }
    grade
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassificationGrade {
    pub per_wg: BTreeMap<WorkingGroup, Accuracy>,
    pub per_tsg: BTreeMap<Tsg, Accuracy>,
    pub overall: Accuracy,
    pub missing: Vec<String>,
    pub out_of_set: Vec<String>,
}

pub fn grade_classification_run(
    items: &[(String, TdocClassItem)],
    predictions: &BTreeMap<String, String>,
) -> ClassificationGrade {
    let mut grade = ClassificationGrade::default();
    for (id, item) in items {
        let ok = match predictions.get(id) {
            Some(p) => match WorkingGroup::parse_normalized(p) {
                Some(wg) => wg == item.label,
                None => {
                    log::warn!("prediction {p:?} for {id} is not a working group");
                    grade.out_of_set.push(id.clone());
                    false
                }
            },
            None => {
                log::warn!("no prediction for tdoc item {id}; graded incorrect");
                grade.missing.push(id.clone());
                false
            }
        };
        grade.per_wg.entry(item.label).or_default().record(ok);
        grade.per_tsg.entry(item.label.tsg()).or_default().record(ok);
        grade.overall.record(ok);
    }
    grade
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mcq(cat: McqCategory, answer: usize) -> McqItem {
        McqItem {
            question: "q".into(),
            options: vec!["a".into(), "b".into(), "c".into(), "d".into()],
            answer_index: answer,
            explanation: String::new(),
            category: cat,
        }
    }

    fn responses(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn mcq_examples() {
        let items: Vec<_> = (0..4)
            .map(|i| (format!("q{i}"), mcq(McqCategory::Lexicon, 1)))
            .collect();
        let all = responses(&[("q0", "Option 1"), ("q1", "Option 1"), ("q2", "option 1"), ("q3", "1")]);
        assert_eq!(grade_mcq_run(&items, &all).overall.percent(), Some(100.0));
        let one = responses(&[("q0", "Option 1"), ("q1", "Option 2"), ("q2", "unsure")]);
        let g = grade_mcq_run(&items, &one);
        assert_eq!(g.overall.percent(), Some(25.0));
        assert_eq!(g.missing, vec!["q3"]);
    }

    #[test]
    fn mcq_per_category() {
        let items = vec![
            ("a".to_string(), mcq(McqCategory::Lexicon, 1)),
            ("b".to_string(), mcq(McqCategory::Lexicon, 2)),
            ("c".to_string(), mcq(McqCategory::StandardsSpecifications, 3)),
            ("d".to_string(), mcq(McqCategory::StandardsSpecifications, 4)),
        ];
        let r = responses(&[
            ("a", "Option 1"),
            ("b", "Option 2"),
            ("c", "Option 1"),
            ("d", "Option 1"),
        ]);
        let g = grade_mcq_run(&items, &r);
        assert_eq!(g.per_category[&McqCategory::Lexicon].percent(), Some(100.0));
        assert_eq!(
            g.per_category[&McqCategory::StandardsSpecifications].percent(),
            Some(0.0)
        );
        assert_eq!(g.overall.percent(), Some(50.0));
    }

    #[test]
    fn classification_examples() {
        let items = vec![
            (
                "x".to_string(),
                TdocClassItem {
                    text: "t".into(),
                    label: WorkingGroup::RAN1,
                },
            ),
            (
                "y".to_string(),
                TdocClassItem {
                    text: "t".into(),
                    label: WorkingGroup::SA2,
                },
            ),
            (
                "z".to_string(),
                TdocClassItem {
                    text: "t".into(),
                    label: WorkingGroup::CT1,
                },
            ),
        ];
        let echo = responses(&[("x", "RAN1"), ("y", "SA2"), ("z", "CT1")]);
        let g = grade_classification_run(&items, &echo);
        assert_eq!(g.overall.percent(), Some(100.0));
        assert!(g.per_tsg.values().all(|a| a.percent() == Some(100.0)));

        let mixed = responses(&[("x", " ran1 "), ("y", "SA9")]);
        let g = grade_classification_run(&items, &mixed);
        assert_eq!(g.per_wg[&WorkingGroup::RAN1].percent(), Some(100.0));
        assert_eq!(g.per_wg[&WorkingGroup::SA2].percent(), Some(0.0));
        assert_eq!(g.out_of_set, vec!["y"]);
        assert_eq!(g.missing, vec!["z"]);
        assert_eq!(g.overall.correct, 1);
    }
}
