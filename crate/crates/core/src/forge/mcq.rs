//! Two-agent multiple-choice generation: a generator drafts questions from a
//! passage, a validator answers each one with the passage at hand, and only
//! questions the validator answers correctly survive.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::items::{InstructItem, InstructKind, McqCategory, McqItem};
use super::templates::{render_prompt_template, render_with};
use crate::clients::{ChatClient, ClientError};
use crate::scoring::parse_option_answer;

/// Why a candidate did not survive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqDrop {
    pub candidate: usize,
    pub question: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct McqOutcome {
    pub candidates: usize,
    /// Validated; awaiting human review.
    pub kept: Vec<McqItem>,
    pub drops: Vec<McqDrop>,
}

#[derive(Debug, thiserror::Error)]
#[error("mcq generation stopped after {} kept item(s): {source}", partial.kept.len())]
pub struct McqFlowError {
    #[source]
    pub source: ClientError,
    pub partial: McqOutcome,
}

pub struct McqAgents<'a> {
    pub generator: &'a ChatClient,
    pub generator_model: &'a str,
    pub validator: &'a ChatClient,
    pub validator_model: &'a str,
}

#[derive(Debug, Default)]
struct Draft {
    question: Option<String>,
    options: BTreeMap<usize, String>,
    answer: Option<String>,
    explanation: Option<String>,
}

#[derive(Debug, Clone, Copy)]
enum Field {
    Question,
    Option(usize),
    Answer,
    Explanation,
}

static LABEL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^(question|option\s*(\d+)|answer|explanation)\s*:\s*(.*)$").expect("label regex")
});
static BULLET: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(?:[-*•]|\d+[.)])\s+").expect("bullet regex"));

/// A parsed candidate, or the reason it is malformed.
pub type Candidate = Result<McqItem, (String, String)>;

impl Draft {
    fn field(&mut self, f: Field) -> &mut String {
        match f {
            Field::Question => self.question.get_or_insert_with(String::new),
            Field::Option(k) => self.options.entry(k).or_default(),
            Field::Answer => self.answer.get_or_insert_with(String::new),
            Field::Explanation => self.explanation.get_or_insert_with(String::new),
        }
    }

    fn finish(self, category: McqCategory) -> Candidate {
        let question = self.question.unwrap_or_default().trim().to_string();
        let fail = |reason: String| Err((question.clone(), reason));
        if question.is_empty() {
            return fail("missing question".into());
        }
        let n = self.options.len();
        if n < 2 {
            return fail(format!("{n} option(s); need at least two"));
        }
        if self.options.keys().copied().ne(1..=n) {
            return fail("options are not numbered 1..n".into());
        }
        let Some(answer) = self.answer else {
            return fail("missing answer".into());
        };
        let Some(answer_index) = parse_option_answer(&answer, n) else {
            return fail(format!("answer {:?} is not one of {n} options", answer.trim()));
        };
        let item = McqItem {
            question: question.clone(),
            options: self.options.into_values().map(|o| o.trim().to_string()).collect(),
            answer_index,
            explanation: self.explanation.unwrap_or_default().trim().to_string(),
            category,
        };
        match item.validate() {
            Ok(()) => Ok(item),
            Err(e) => fail(e.reason),
        }
    }
}

/// Splits generator output into candidates. Each `Question:` line starts a
/// new candidate; bullets, numbering and bold markers are tolerated and
/// unlabeled lines continue the previous field.
pub fn parse_mcq_candidates(output: &str, category: McqCategory) -> Vec<Candidate> {
    let mut drafts: Vec<Draft> = Vec::new();
    let mut current: Option<Field> = None;
    for raw in output.lines() {
        let line = raw.trim().replace("**", "");
        let line = BULLET.replace(line.trim(), "");
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = LABEL.captures(line) {
            let label = c[1].to_ascii_lowercase();
            let field = if label == "question" {
                drafts.push(Draft::default());
                Field::Question
            } else if let Some(k) = c.get(2) {
                Field::Option(k.as_str().parse().unwrap_or(0))
            } else if label == "answer" {
                Field::Answer
            } else {
                Field::Explanation
            };
            if let Some(d) = drafts.last_mut() {
                d.field(field).push_str(&c[3]);
                current = Some(field);
            }
        } else if let (Some(d), Some(f)) = (drafts.last_mut(), current) {
            let s = d.field(f);
            if !s.is_empty() {
                s.push(' ');
            }
            s.push_str(line);
        }
    }
    drafts.into_iter().map(|d| d.finish(category)).collect()
}

/// The question as shown to the validator.
pub fn format_question(item: &McqItem) -> String {
    let mut s = format!("Question: {}", item.question);
    for (i, o) in item.options.iter().enumerate() {
        s.push_str(&format!("\nOption {}: {o}", i + 1));
    }
    s
}

pub fn generate_validated_mcqs(
    text: &str,
    category: McqCategory,
    agents: &McqAgents<'_>,
) -> Result<McqOutcome, McqFlowError> {
    let mut outcome = McqOutcome::default();
    let gen_prompt = render_with("mcq-generate", "text", text).expect("mcq-generate template renders");
    let generated = match agents.generator.ask(agents.generator_model, &gen_prompt) {
        Ok(g) => g,
        Err(source) => {
            return Err(McqFlowError {
                source,
                partial: outcome,
            })
        }
    };
    let candidates = parse_mcq_candidates(&generated, category);
    outcome.candidates = candidates.len();
    for (idx, cand) in candidates.into_iter().enumerate() {
        let item = match cand {
            Ok(item) => item,
            Err((question, reason)) => {
                log::info!("dropping malformed mcq candidate {idx}: {reason}");
                outcome.drops.push(McqDrop {
                    candidate: idx,
                    question,
                    reason: format!("malformed: {reason}"),
                });
                continue;
            }
        };
        let question = format_question(&item);
        let prompt = render_prompt_template(
            "mcq-validate",
            &BTreeMap::from([("text", text), ("question", &question)]),
        )
        .expect("mcq-validate template renders");
        let reply = match agents.validator.ask(agents.validator_model, &prompt) {
            Ok(r) => r,
            Err(source) => {
                return Err(McqFlowError {
                    source,
                    partial: outcome,
                })
            }
        };
        match parse_option_answer(&reply, item.options.len()) {
            Some(a) if a == item.answer_index => outcome.kept.push(item),
            other => outcome.drops.push(McqDrop {
                candidate: idx,
                question: item.question,
                reason: match other {
                    Some(a) => format!("validator chose option {a}, expected {}", item.answer_index),
                    None => "validator gave no parseable option".into(),
                },
            }),
        }
    }
    Ok(outcome)
}

/// Drops the options: the question becomes the instruction and the correct
/// option text the reference response.
pub fn derive_open_qa(mcq: &McqItem) -> InstructItem {
    InstructItem {
        kind: InstructKind::OpenQa,
        instruction: mcq.question.clone(),
        input: String::new(),
        response: mcq.correct_option().to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clients::FnProvider;
    use proptest::prelude::*;
    use std::sync::Arc;

    const GEN: &str = "\
- Question: Which layer handles HARQ retransmissions in LTE?
- Option 1: PDCP
- Option 2: MAC
- Option 3: RRC
- Option 4: NAS
- Answer: Option 2
- Explanation: Hybrid automatic repeat request is a medium access control function.

**Question:** What does OFDMA stand for?
**Option 1:** Orthogonal frequency-division multiple access
**Option 2:** Optical frequency-domain multiple access
**Answer:** Option 1
**Explanation:** Standard expansion.

Question: Broken one
Option 1: a
Option 2: b
Option 3: c
Option 4: d
Answer: Option 9

Question: What does the proposed scheme improve?
Option 1: rate
Option 2: delay
Answer: Option 1
";

    #[test]
    fn parses_candidates() {
        let c = parse_mcq_candidates(GEN, McqCategory::Lexicon);
        assert_eq!(c.len(), 4);
        let first = c[0].as_ref().unwrap();
        assert_eq!(first.answer_index, 2);
        assert_eq!(first.options.len(), 4);
        assert_eq!(
            c[1].as_ref().unwrap().options[0],
            "Orthogonal frequency-division multiple access"
        );
        assert!(c[2].as_ref().unwrap_err().1.contains("not one of 4"));
        assert!(c[3].as_ref().unwrap_err().1.contains("banned"));
    }

    fn agents_with(validator_says: &'static [(&'static str, &'static str)]) -> (ChatClient, ChatClient) {
        let generator = ChatClient::new(Arc::new(FnProvider::new("gen", |_| Ok(GEN.to_string()))));
        let validator = ChatClient::new(Arc::new(FnProvider::new("val", move |r| {
            Ok(validator_says
                .iter()
                .find(|(needle, _)| r.prompt.contains(needle))
                .map_or("I am not sure", |(_, a)| a)
                .to_string())
        })));
        (generator, validator)
    }

    #[test]
    fn keeps_only_validated() {
        let (g, v) = agents_with(&[("HARQ", "Option 2"), ("OFDMA", "The answer is Option 2")]);
        let agents = McqAgents {
            generator: &g,
            generator_model: "gen",
            validator: &v,
            validator_model: "val",
        };
        let out = generate_validated_mcqs("passage", McqCategory::Lexicon, &agents).unwrap();
        assert_eq!(out.candidates, 4);
        assert_eq!(out.kept.len(), 1);
        assert!(out.kept[0].question.contains("HARQ"));
        assert_eq!(out.drops.len(), 3);
        assert!(out
            .drops
            .iter()
            .any(|d| d.reason.starts_with("validator chose option 2")));
        // malformed and banned candidates never reach the validator
        assert_eq!(v.provider_calls(), 2);
    }

    #[test]
    fn client_failure_keeps_partial() {
        let g = ChatClient::new(Arc::new(FnProvider::new("gen", |_| Ok(GEN.to_string()))));
        let v = ChatClient::new(Arc::new(FnProvider::new("val", |r| {
            if r.prompt.contains("OFDMA") {
                Err(crate::clients::ProviderError::Fatal("down".into()))
            } else {
                Ok("Option 2".into())
            }
        })));
        let agents = McqAgents {
            generator: &g,
            generator_model: "gen",
            validator: &v,
            validator_model: "val",
        };
        let err = generate_validated_mcqs("passage", McqCategory::Lexicon, &agents).unwrap_err();
        assert_eq!(err.partial.kept.len(), 1);
    }

    #[test]
    fn open_qa_drops_options() {
        let m = parse_mcq_candidates(GEN, McqCategory::Lexicon).remove(0).unwrap();
        let o = derive_open_qa(&m);
        assert_eq!(o.response, "MAC");
        assert_eq!(o.kind, InstructKind::OpenQa);
        assert!(!o.instruction.contains("Option"));
    }

    proptest! {
        #[test]
        fn open_qa_valid_for_valid_mcq(opts in prop::collection::vec("[a-z]{1,8}", 2..6), pick: prop::sample::Index) {
            let m = McqItem {
                question: "Which one?".into(),
                answer_index: pick.index(opts.len()) + 1,
                options: opts,
                explanation: String::new(),
                category: McqCategory::Lexicon,
            };
            let o = derive_open_qa(&m);
            prop_assert!(o.validate().is_ok());
            prop_assert_eq!(&o.response, &m.options[m.answer_index - 1]);
        }
    }
}
