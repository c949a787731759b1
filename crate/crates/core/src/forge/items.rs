//! Benchmark and instruction item records.
//!
//! Items are stored one JSON object per line with a `kind` discriminator.
//! Task variants inside code and instruct items serialize as `task` so they
//! never collide with the discriminator.

use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub const MASK: &str = "<MASK>";
pub const FILL: &str = "<FILL>";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid {kind} item: {reason}")]
pub struct ItemError {
    pub kind: &'static str,
    pub reason: String,
}

impl ItemError {
    fn new(kind: &'static str, reason: impl Into<String>) -> Self {
        Self {
            kind,
            reason: reason.into(),
        }
    }
}

// ---------------------------------------------------------------------------
// Multiple choice

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum McqCategory {
    Lexicon,
    ResearchOverview,
    ResearchPublications,
    StandardsOverview,
    StandardsSpecifications,
}

impl McqCategory {
    pub const ALL: [McqCategory; 5] = [
        McqCategory::Lexicon,
        McqCategory::ResearchOverview,
        McqCategory::ResearchPublications,
        McqCategory::StandardsOverview,
        McqCategory::StandardsSpecifications,
    ];

    /// Column heading used in accuracy tables.
    pub fn title(self) -> &'static str {
        match self {
            McqCategory::Lexicon => "Lexicon",
            McqCategory::ResearchOverview => "Research Overview",
            McqCategory::ResearchPublications => "Research Publications",
            McqCategory::StandardsOverview => "Standards Overview",
            McqCategory::StandardsSpecifications => "Standards Specifications",
        }
    }
}

/// Words a generated question must not contain: they betray that the
/// question was written against a specific source document.
pub const BANNED_TOKENS: [&str; 4] = ["proposed", "the invention", "text", "paper"];

static BANNED: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(proposed|the\s+invention|text|paper)\b").unwrap());

/// Banned tokens found in `s`, lower-cased, in order of appearance.
pub fn banned_tokens_in(s: &str) -> Vec<String> {
    BANNED
        .find_iter(s)
        .map(|m| {
            m.as_str()
                .split_whitespace()
                .collect::<Vec<_>>()
                .join(" ")
                .to_lowercase()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqItem {
    pub question: String,
    pub options: Vec<String>,
    /// 1-based.
    pub answer_index: usize,
    #[serde(default)]
    pub explanation: String,
    pub category: McqCategory,
}

impl McqItem {
    pub fn correct_option(&self) -> &str {
        &self.options[self.answer_index - 1]
    }

    pub fn banned_tokens(&self) -> Vec<String> {
        let mut found = banned_tokens_in(&self.question);
        for o in &self.options {
            found.extend(banned_tokens_in(o));
        }
        found.extend(banned_tokens_in(&self.explanation));
        found
    }

    pub fn validate(&self) -> Result<(), ItemError> {
        if self.question.trim().is_empty() {
            return Err(ItemError::new("mcq", "empty question"));
        }
        if self.options.len() < 2 {
            return Err(ItemError::new("mcq", "fewer than two options"));
        }
        if self.options.iter().any(|o| o.trim().is_empty()) {
            return Err(ItemError::new("mcq", "empty option"));
        }
        if self.answer_index < 1 || self.answer_index > self.options.len() {
            return Err(ItemError::new(
                "mcq",
                format!("answer_index {} outside 1..={}", self.answer_index, self.options.len()),
            ));
        }
        let banned = self.banned_tokens();
        if !banned.is_empty() {
            return Err(ItemError::new("mcq", format!("contains banned tokens {banned:?}")));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Working-group classification

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WorkingGroup {
    CT1,
    CT3,
    CT4,
    CT6,
    RAN1,
    RAN2,
    RAN3,
    RAN4,
    RAN5,
    SA1,
    SA2,
    SA3,
    SA4,
    SA5,
    SA6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tsg {
    RAN,
    SA,
    CT,
}

impl Tsg {
    pub const ALL: [Tsg; 3] = [Tsg::RAN, Tsg::SA, Tsg::CT];
}

impl fmt::Display for Tsg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl WorkingGroup {
    pub const ALL: [WorkingGroup; 15] = [
        WorkingGroup::CT1,
        WorkingGroup::CT3,
        WorkingGroup::CT4,
        WorkingGroup::CT6,
        WorkingGroup::RAN1,
        WorkingGroup::RAN2,
        WorkingGroup::RAN3,
        WorkingGroup::RAN4,
        WorkingGroup::RAN5,
        WorkingGroup::SA1,
        WorkingGroup::SA2,
        WorkingGroup::SA3,
        WorkingGroup::SA4,
        WorkingGroup::SA5,
        WorkingGroup::SA6,
    ];

    pub fn tsg(self) -> Tsg {
        use WorkingGroup::*;
        match self {
            CT1 | CT3 | CT4 | CT6 => Tsg::CT,
            RAN1 | RAN2 | RAN3 | RAN4 | RAN5 => Tsg::RAN,
            SA1 | SA2 | SA3 | SA4 | SA5 | SA6 => Tsg::SA,
        }
    }

    /// Trims and upper-cases before matching; `None` outside the fixed set.
    pub fn parse_normalized(s: &str) -> Option<Self> {
        let n = s.trim().to_ascii_uppercase();
        WorkingGroup::ALL.into_iter().find(|wg| wg.to_string() == n)
    }
}

impl fmt::Display for WorkingGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for WorkingGroup {
    type Err = ItemError;

    fn from_str(s: &str) -> Result<Self, ItemError> {
        Self::parse_normalized(s).ok_or_else(|| ItemError::new("tdoc", format!("unknown working group {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TdocClassItem {
    pub text: String,
    pub label: WorkingGroup,
}

impl TdocClassItem {
    pub fn validate(&self) -> Result<(), ItemError> {
        if self.text.trim().is_empty() {
            return Err(ItemError::new("tdoc", "empty text"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Masked equations and code tasks

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedEquationItem {
    pub doc_id: String,
    pub context: String,
    pub ground_truth_equation: String,
    pub equation_ordinal: usize,
}

impl MaskedEquationItem {
    /// The context with the ground truth put back.
    pub fn splice(&self) -> String {
        self.context.replacen(MASK, &self.ground_truth_equation, 1)
    }

    pub fn validate(&self) -> Result<(), ItemError> {
        let n = self.context.matches(MASK).count();
        if n != 1 {
            return Err(ItemError::new(
                "masked-equation",
                format!("context holds {n} mask placeholders"),
            ));
        }
        if self.ground_truth_equation.trim().is_empty() {
            return Err(ItemError::new("masked-equation", "empty ground truth"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeTaskKind {
    Summary,
    Analysis,
    Infill,
    Generate,
}

impl CodeTaskKind {
    pub const ALL: [CodeTaskKind; 4] = [
        CodeTaskKind::Summary,
        CodeTaskKind::Analysis,
        CodeTaskKind::Infill,
        CodeTaskKind::Generate,
    ];

    pub fn title(self) -> &'static str {
        match self {
            CodeTaskKind::Summary => "Code Summary",
            CodeTaskKind::Analysis => "Code Analysis",
            CodeTaskKind::Infill => "Code Infilling",
            CodeTaskKind::Generate => "Code Generation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeLanguage {
    C,
    Cpp,
    Python,
    Matlab,
}

impl CodeLanguage {
    /// Guesses the language from a file name extension.
    pub fn from_path(name: &str) -> Option<Self> {
        let ext = name.rsplit_once('.')?.1.to_ascii_lowercase();
        Some(match ext.as_str() {
            "c" | "h" => CodeLanguage::C,
            "cc" | "cpp" | "cxx" | "hpp" | "hh" => CodeLanguage::Cpp,
            "py" => CodeLanguage::Python,
            "m" => CodeLanguage::Matlab,
            _ => return None,
        })
    }
}

impl FromStr for CodeLanguage {
    type Err = ItemError;

    fn from_str(s: &str) -> Result<Self, ItemError> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "c" => CodeLanguage::C,
            "cpp" | "c++" => CodeLanguage::Cpp,
            "python" | "py" => CodeLanguage::Python,
            "matlab" => CodeLanguage::Matlab,
            other => return Err(ItemError::new("code-task", format!("unknown language {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeTaskItem {
    #[serde(rename = "task")]
    pub kind: CodeTaskKind,
    pub language: CodeLanguage,
    pub prompt: String,
    pub ground_truth: String,
    pub source_id: String,
}

impl CodeTaskItem {
    /// Prompt with the ground truth spliced in at the fill placeholder.
    pub fn splice(&self) -> String {
        self.prompt.replacen(FILL, &self.ground_truth, 1)
    }

    pub fn validate(&self) -> Result<(), ItemError> {
        if self.prompt.trim().is_empty() || self.ground_truth.trim().is_empty() {
            return Err(ItemError::new("code-task", "empty prompt or ground truth"));
        }
        if self.kind == CodeTaskKind::Infill {
            let n = self.prompt.matches(FILL).count();
            if n != 1 {
                return Err(ItemError::new(
                    "code-task",
                    format!("infill prompt holds {n} fill placeholders"),
                ));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Instructions and preferences

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstructKind {
    General,
    Protocol,
    OpenQa,
}

impl InstructKind {
    pub fn title(self) -> &'static str {
        match self {
            InstructKind::General => "General Instruction",
            InstructKind::Protocol => "Protocol Instruction",
            InstructKind::OpenQa => "Open-ended QA",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructItem {
    #[serde(rename = "task")]
    pub kind: InstructKind,
    pub instruction: String,
    #[serde(default)]
    pub input: String,
    pub response: String,
}

impl InstructItem {
    pub fn validate(&self) -> Result<(), ItemError> {
        if self.instruction.trim().is_empty() {
            return Err(ItemError::new("instruct", "empty instruction"));
        }
        if self.response.trim().is_empty() {
            return Err(ItemError::new("instruct", "empty response"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionMetric {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
    pub selection_metric: SelectionMetric,
}

impl PreferencePair {
    pub fn validate(&self) -> Result<(), ItemError> {
        if self.chosen.trim().is_empty() || self.rejected.trim().is_empty() {
            return Err(ItemError::new("preference-pair", "empty response"));
        }
        if self.chosen == self.rejected {
            return Err(ItemError::new("preference-pair", "chosen equals rejected"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Tagged union and file records

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BenchItem {
    Mcq(McqItem),
    Instruct(InstructItem),
    Tdoc(TdocClassItem),
    MaskedEquation(MaskedEquationItem),
    CodeTask(CodeTaskItem),
    PreferencePair(PreferencePair),
}

impl BenchItem {
    pub fn kind(&self) -> &'static str {
        match self {
            BenchItem::Mcq(_) => "mcq",
            BenchItem::Instruct(_) => "instruct",
            BenchItem::Tdoc(_) => "tdoc",
            BenchItem::MaskedEquation(_) => "masked-equation",
            BenchItem::CodeTask(_) => "code-task",
            BenchItem::PreferencePair(_) => "preference-pair",
        }
    }

    pub fn validate(&self) -> Result<(), ItemError> {
        match self {
            BenchItem::Mcq(i) => i.validate(),
            BenchItem::Instruct(i) => i.validate(),
            BenchItem::Tdoc(i) => i.validate(),
            BenchItem::MaskedEquation(i) => i.validate(),
            BenchItem::CodeTask(i) => i.validate(),
            BenchItem::PreferencePair(i) => i.validate(),
        }
    }
}

/// A stored item: id, review flag and the item fields flattened in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub id: String,
    #[serde(default)]
    pub pending_review: bool,
    #[serde(flatten)]
    pub item: BenchItem,
}

impl ItemRecord {
    pub fn new(id: impl Into<String>, item: BenchItem, pending_review: bool) -> Self {
        Self {
            id: id.into(),
            pending_review,
            item,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mcq() -> McqItem {
        McqItem {
            question: "Which band is FR2?".into(),
            options: vec!["Sub-6 GHz".into(), "mmWave".into()],
            answer_index: 2,
            explanation: "FR2 covers millimetre waves.".into(),
            category: McqCategory::Lexicon,
        }
    }

    #[test]
    fn mcq_validation() {
        assert!(mcq().validate().is_ok());
        assert_eq!(mcq().correct_option(), "mmWave");
        let mut m = mcq();
        m.answer_index = 3;
        assert!(m.validate().is_err());
        m.answer_index = 0;
        assert!(m.validate().is_err());
        let mut m = mcq();
        m.options.truncate(1);
        m.answer_index = 1;
        assert!(m.validate().is_err());
        let mut m = mcq();
        m.explanation = "As the paper says".into();
        assert_eq!(m.banned_tokens(), vec!["paper"]);
        assert!(m.validate().is_err());
        let mut m = mcq();
        m.question = "What does THE  INVENTION claim, per the proposed text?".into();
        assert_eq!(m.banned_tokens(), vec!["the invention", "proposed", "text"]);
        // word boundaries: "context" and "papers" are fine
        let mut m = mcq();
        m.question = "In which context do papers use FR2?".into();
        assert!(m.validate().is_ok());
    }

    #[test]
    fn working_groups() {
        assert_eq!(WorkingGroup::parse_normalized(" ran1 "), Some(WorkingGroup::RAN1));
        assert_eq!(WorkingGroup::parse_normalized("RAN9"), None);
        assert_eq!(WorkingGroup::parse_normalized("SA9"), None);
        assert_eq!(WorkingGroup::ALL.len(), 15);
        assert_eq!(WorkingGroup::SA6.tsg(), Tsg::SA);
        assert_eq!(WorkingGroup::CT4.tsg(), Tsg::CT);
        assert!("CT2".parse::<WorkingGroup>().is_err());
    }

    #[test]
    fn record_serialization_uses_kind_tag() {
        let rec = ItemRecord::new(
            "x-1",
            BenchItem::Instruct(InstructItem {
                kind: InstructKind::OpenQa,
                instruction: "q".into(),
                input: String::new(),
                response: "a".into(),
            }),
            true,
        );
        let s = serde_json::to_string(&rec).unwrap();
        assert_eq!(
            s,
            r#"{"id":"x-1","pending_review":true,"kind":"instruct","task":"open-qa","instruction":"q","input":"","response":"a"}"#
        );
        let back: ItemRecord = serde_json::from_str(&s).unwrap();
        assert_eq!(back, rec);

        let rec = ItemRecord::new("m", BenchItem::Mcq(mcq()), false);
        let back: ItemRecord = serde_json::from_str(&serde_json::to_string(&rec).unwrap()).unwrap();
        assert_eq!(back, rec);
        assert_eq!(back.item.kind(), "mcq");
    }

    #[test]
    fn splice_and_placeholder_checks() {
        let m = MaskedEquationItem {
            doc_id: "d".into(),
            context: "a \\[ <MASK> \\] b".into(),
            ground_truth_equation: "y = Hx".into(),
            equation_ordinal: 0,
        };
        assert!(m.validate().is_ok());
        assert_eq!(m.splice(), "a \\[ y = Hx \\] b");
        let bad = MaskedEquationItem {
            context: "<MASK> <MASK>".into(),
            ..m
        };
        assert!(bad.validate().is_err());

        let c = CodeTaskItem {
            kind: CodeTaskKind::Infill,
            language: CodeLanguage::C,
            prompt: "a\n<FILL>\nc\n".into(),
            ground_truth: "b".into(),
            source_id: "s".into(),
        };
        assert!(c.validate().is_ok());
        assert_eq!(c.splice(), "a\nb\nc\n");
        assert_eq!(CodeLanguage::from_path("x/y.py"), Some(CodeLanguage::Python));
        assert_eq!(CodeLanguage::from_path("Makefile"), None);
    }

    #[test]
    fn preference_pair_invariants() {
        let p = PreferencePair {
            prompt: "x".into(),
            chosen: "a".into(),
            rejected: "a".into(),
            selection_metric: SelectionMetric {
                name: "rougeL-f".into(),
                value: 1.0,
            },
        };
        assert!(p.validate().is_err());
    }
}
