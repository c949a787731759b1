//! Tab-separated report tables. Percentages are rounded to two decimals and
//! Rouge F-measures to four, only here at rendering time.

use std::fmt::Write;

use super::distribution::ScoreDistribution;
use super::grading::{Accuracy, ClassificationGrade, McqGrade};
use crate::forge::items::{CodeTaskKind, InstructKind, McqCategory, Tsg, WorkingGroup};

fn pct(a: Option<&Accuracy>) -> String {
    match a.and_then(Accuracy::percent) {
        Some(p) => format!("{p:.2}"),
        None => "-".to_string(),
    }
}

fn table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join("\t");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out
}

/// Multiple-choice accuracy per category plus overall.
pub fn mcq_table(rows: &[(&str, &McqGrade)]) -> String {
    let mut header = vec!["LLMs"];
    header.extend(McqCategory::ALL.iter().map(|c| c.title()));
    header.push("Overall");
    table(
        &header,
        rows.iter().map(|(name, g)| {
            let mut r = vec![name.to_string()];
            r.extend(McqCategory::ALL.iter().map(|c| pct(g.per_category.get(c))));
            r.push(pct(Some(&g.overall)));
            r
        }),
    )
}

/// Classification accuracy per technical specification group.
pub fn tsg_table(rows: &[(&str, &ClassificationGrade)]) -> String {
    table(
        &["LLMs", "RAN", "SA", "CT", "Overall"],
        rows.iter().map(|(name, g)| {
            let mut r = vec![name.to_string()];
            r.extend(Tsg::ALL.iter().map(|t| pct(g.per_tsg.get(t))));
            r.push(pct(Some(&g.overall)));
            r
        }),
    )
}

/// Classification accuracy per working group.
pub fn working_group_table(rows: &[(&str, &ClassificationGrade)]) -> String {
    let names: Vec<String> = WorkingGroup::ALL.iter().map(ToString::to_string).collect();
    let mut header = vec!["LLMs"];
    header.extend(names.iter().map(String::as_str));
    table(
        &header,
        rows.iter().map(|(name, g)| {
            let mut r = vec![name.to_string()];
            r.extend(WorkingGroup::ALL.iter().map(|w| pct(g.per_wg.get(w))));
            r
        }),
    )
}

/// Equation-score summary: mean and portions at or above 90 and 50.
pub fn math_table(rows: &[(&str, &ScoreDistribution)]) -> String {
    table(
        &["LLMs", "Average Score", "≥ 90%", "≥ 50%"],
        rows.iter().map(|(name, d)| {
            vec![
                name.to_string(),
                format!("{:.2}", d.mean),
                format!("{:.2}", 100.0 * d.portion(90)),
                format!("{:.2}", 100.0 * d.portion(50)),
            ]
        }),
    )
}

/// CDF sample points, one row per integer score.
pub fn cdf_table(rows: &[(&str, &ScoreDistribution)]) -> String {
    let mut header = vec!["Score"];
    header.extend(rows.iter().map(|(n, _)| *n));
    table(
        &header,
        (0..=100).map(|k| {
            let mut r = vec![k.to_string()];
            r.extend(rows.iter().map(|(_, d)| format!("{:.4}", d.cdf[k])));
            r
        }),
    )
}

/// Mean Rouge-1/Rouge-L F-measures of one model per task column.
pub type RougeRow<'a, K> = (&'a str, &'a [(K, (f64, f64))]);

fn rouge_table<K: PartialEq + Copy>(columns: &[(K, &str)], rows: &[RougeRow<'_, K>]) -> String {
    let mut out = String::from("LLMs");
    for (_, title) in columns {
        let _ = write!(out, "\t{title} Rouge1\t{title} RougeL");
    }
    out.push('\n');
    for (name, scores) in rows {
        out.push_str(name);
        for (k, _) in columns {
            match scores.iter().find(|(sk, _)| sk == k) {
                Some((_, (r1, rl))) => {
                    let _ = write!(out, "\t{r1:.4}\t{rl:.4}");
                }
                None => out.push_str("\t-\t-"),
            }
        }
        out.push('\n');
    }
    out
}

pub fn code_table(rows: &[RougeRow<'_, CodeTaskKind>]) -> String {
    let cols: Vec<_> = CodeTaskKind::ALL.iter().map(|k| (*k, k.title())).collect();
    rouge_table(&cols, rows)
}

pub fn instruct_table(rows: &[RougeRow<'_, InstructKind>]) -> String {
    let cols = [
        (InstructKind::OpenQa, InstructKind::OpenQa.title()),
        (InstructKind::General, InstructKind::General.title()),
        (InstructKind::Protocol, InstructKind::Protocol.title()),
    ];
    rouge_table(&cols, rows)
}
