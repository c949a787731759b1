//! Scoring of model responses against forged items, per model.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::clients::Embedder;
use crate::exec::{self, Exec};
use crate::forge::items::{BenchItem, CodeTaskKind, InstructKind, ItemRecord, McqItem, TdocClassItem};
use crate::scoring::grading::{grade_classification_run, grade_mcq_run, ClassificationGrade, McqGrade};
use crate::scoring::report;
use crate::scoring::similarity::{score_equation, EquationScoreError};
use crate::scoring::{rouge_1, rouge_l, score_distribution, ScoreDistribution, ScoreRecord};

/// One line of a model's response file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub item_id: String,
    pub response: String,
}

#[derive(Debug, Clone, Default)]
pub struct ModelScores {
    pub model: String,
    pub records: Vec<ScoreRecord>,
    pub mcq: Option<McqGrade>,
    pub classification: Option<ClassificationGrade>,
    pub math: Option<ScoreDistribution>,
    pub code: Vec<(CodeTaskKind, (f64, f64))>,
    pub instruct: Vec<(InstructKind, (f64, f64))>,
}

enum Rouged<'a> {
    Code(CodeTaskKind, &'a str),
    Instruct(InstructKind, &'a str),
}

fn means<K: Ord + Copy>(rows: impl IntoIterator<Item = (K, f64, f64)>) -> Vec<(K, (f64, f64))> {
    let mut acc: BTreeMap<K, (f64, f64, usize)> = BTreeMap::new();
    for (k, r1, rl) in rows {
        let e = acc.entry(k).or_insert((0.0, 0.0, 0));
        e.0 += r1;
        e.1 += rl;
        e.2 += 1;
    }
    acc.into_iter()
        .map(|(k, (a, b, n))| (k, (a / n as f64, b / n as f64)))
        .collect()
}

pub fn score_model(
    model: &str,
    items: &[ItemRecord],
    responses: &BTreeMap<String, String>,
    embedder: &dyn Embedder,
    exec_mode: Exec,
) -> Result<ModelScores, PipelineError> {
    let mut out = ModelScores {
        model: model.to_string(),
        ..Default::default()
    };
    let mut mcqs: Vec<(String, McqItem)> = Vec::new();
    let mut tdocs: Vec<(String, TdocClassItem)> = Vec::new();
    let mut rouge_jobs: Vec<(&str, Rouged<'_>)> = Vec::new();
    let mut equations = Vec::new();
    for r in items {
        match &r.item {
            BenchItem::Mcq(m) => mcqs.push((r.id.clone(), m.clone())),
            BenchItem::Tdoc(t) => tdocs.push((r.id.clone(), t.clone())),
            BenchItem::CodeTask(c) => rouge_jobs.push((&r.id, Rouged::Code(c.kind, &c.ground_truth))),
            BenchItem::Instruct(i) => rouge_jobs.push((&r.id, Rouged::Instruct(i.kind, &i.response))),
            BenchItem::MaskedEquation(e) => equations.push((&r.id, &e.ground_truth_equation)),
            BenchItem::PreferencePair(_) => {}
        }
    }

    if !mcqs.is_empty() {
        let g = grade_mcq_run(&mcqs, responses);
        let correct: std::collections::BTreeSet<&str> = mcqs
            .iter()
            .filter(|(id, m)| {
                responses
                    .get(id)
                    .and_then(|r| crate::scoring::parse_option_answer(r, m.options.len()))
                    == Some(m.answer_index)
            })
            .map(|(id, _)| id.as_str())
            .collect();
        for (id, _) in &mcqs {
            out.records.push(ScoreRecord::new(
                id,
                "accuracy",
                f64::from(u8::from(correct.contains(id.as_str()))),
            ));
        }
        out.mcq = Some(g);
    }
    if !tdocs.is_empty() {
        out.classification = Some(grade_classification_run(&tdocs, responses));
    }

    let rouge = exec::map(exec_mode, &rouge_jobs, |(id, job)| {
        let truth = match job {
            Rouged::Code(_, t) | Rouged::Instruct(_, t) => *t,
        };
        let pred = responses.get(*id).map_or("", String::as_str);
        (rouge_1(pred, truth).f_measure, rouge_l(pred, truth).f_measure)
    });
    let mut code_rows = Vec::new();
    let mut instruct_rows = Vec::new();
    for ((id, job), (r1, rl)) in rouge_jobs.iter().zip(&rouge) {
        out.records.push(ScoreRecord::new(*id, "rouge1_f", *r1));
        out.records.push(ScoreRecord::new(*id, "rougeL_f", *rl));
        match job {
            Rouged::Code(k, _) => code_rows.push((*k, *r1, *rl)),
            Rouged::Instruct(k, _) => instruct_rows.push((*k, *r1, *rl)),
        }
    }
    out.code = means(code_rows);
    out.instruct = means(instruct_rows);

    if !equations.is_empty() {
        let scores = exec::map(exec_mode, &equations, |(id, truth)| {
            let pred = responses.get(*id).map_or("", String::as_str);
            score_equation(truth, pred, embedder)
        });
        let mut values = Vec::with_capacity(scores.len());
        for ((id, _), s) in equations.iter().zip(scores) {
            let s =
                s.map_err(|EquationScoreError::Embed(e)| PipelineError::Config(format!("embedding failed: {e}")))?;
            out.records.push(ScoreRecord::new(*id, "equation_score", s));
            values.push(s);
        }
        out.math = Some(score_distribution(&values)?);
    }
    Ok(out)
}

/// Report tables keyed by file name; tables with no rows are omitted.
pub fn render_tables(models: &[ModelScores]) -> BTreeMap<&'static str, String> {
    let mut t = BTreeMap::new();
    let mcq: Vec<_> = models
        .iter()
        .filter_map(|m| Some((m.model.as_str(), m.mcq.as_ref()?)))
        .collect();
    if !mcq.is_empty() {
        t.insert("mcq.tsv", report::mcq_table(&mcq));
    }
    let cls: Vec<_> = models
        .iter()
        .filter_map(|m| Some((m.model.as_str(), m.classification.as_ref()?)))
        .collect();
    if !cls.is_empty() {
        t.insert("tdoc_tsg.tsv", report::tsg_table(&cls));
        t.insert("tdoc_working_groups.tsv", report::working_group_table(&cls));
    }
    let math: Vec<_> = models
        .iter()
        .filter_map(|m| Some((m.model.as_str(), m.math.as_ref()?)))
        .collect();
    if !math.is_empty() {
        t.insert("math.tsv", report::math_table(&math));
        t.insert("math_cdf.tsv", report::cdf_table(&math));
    }
    let code: Vec<_> = models
        .iter()
        .filter(|m| !m.code.is_empty())
        .map(|m| (m.model.as_str(), m.code.as_slice()))
        .collect();
    if !code.is_empty() {
        t.insert("code.tsv", report::code_table(&code));
    }
    let instruct: Vec<_> = models
        .iter()
        .filter(|m| !m.instruct.is_empty())
        .map(|m| (m.model.as_str(), m.instruct.as_slice()))
        .collect();
    if !instruct.is_empty() {
        t.insert("instruct.tsv", report::instruct_table(&instruct));
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clients::StubEmbedder;
    use crate::forge::items::{CodeLanguage, CodeTaskItem, MaskedEquationItem, McqCategory, WorkingGroup};

    fn items() -> Vec<ItemRecord> {
        vec![
            ItemRecord::new(
                "q",
                BenchItem::Mcq(McqItem {
                    question: "Q?".into(),
                    options: vec!["a".into(), "b".into()],
                    answer_index: 2,
                    explanation: String::new(),
                    category: McqCategory::Lexicon,
                }),
                false,
            ),
            ItemRecord::new(
                "t",
                BenchItem::Tdoc(TdocClassItem {
                    text: "x".into(),
                    label: WorkingGroup::CT4,
                }),
                false,
            ),
            ItemRecord::new(
                "c",
                BenchItem::CodeTask(CodeTaskItem {
                    kind: CodeTaskKind::Infill,
                    language: CodeLanguage::C,
                    prompt: "a <FILL> b".into(),
                    ground_truth: "int x = 1;".into(),
                    source_id: "s".into(),
                }),
                false,
            ),
            ItemRecord::new(
                "e",
                BenchItem::MaskedEquation(MaskedEquationItem {
                    doc_id: "d".into(),
                    context: "<MASK>".into(),
                    ground_truth_equation: "y = H x + n".into(),
                    equation_ordinal: 0,
                }),
                false,
            ),
        ]
    }

    #[test]
    fn scores_every_family() {
        let responses: BTreeMap<String, String> = [
            ("q", "Option 2"),
            ("t", "CT4"),
            ("c", "int x = 1;"),
            ("e", "y = H x + n"),
        ]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
        let s = score_model("m", &items(), &responses, &StubEmbedder::default(), Exec::Sequential).unwrap();
        assert_eq!(s.mcq.as_ref().unwrap().overall.percent(), Some(100.0));
        assert_eq!(s.classification.as_ref().unwrap().overall.percent(), Some(100.0));
        assert_eq!(s.code, vec![(CodeTaskKind::Infill, (1.0, 1.0))]);
        assert!((s.math.as_ref().unwrap().mean - 100.0).abs() < 1e-9);
        let tables = render_tables(&[s]);
        assert_eq!(
            tables.keys().copied().collect::<Vec<_>>(),
            [
                "code.tsv",
                "math.tsv",
                "math_cdf.tsv",
                "mcq.tsv",
                "tdoc_tsg.tsv",
                "tdoc_working_groups.tsv"
            ]
        );

        let empty = score_model(
            "m",
            &items(),
            &BTreeMap::new(),
            &StubEmbedder::default(),
            Exec::Parallel,
        )
        .unwrap();
        assert_eq!(empty.mcq.unwrap().overall.percent(), Some(0.0));
        assert_eq!(empty.math.unwrap().mean, 0.0);
    }
}
