//! Batch evaluation of objective records, one JSON object per line.

use std::io::{BufRead, Write};

use anyhow::{Context, Result};
use telekit_core::exec::{self, Exec};
use telekit_core::objectives::{dpo_batch, evaluate, DpoBatchSummary, ObjectiveRecord};

#[derive(Debug, Default)]
pub struct EvalSummary {
    pub records: usize,
    pub dpo: Option<DpoBatchSummary>,
}

/// Reads records from `input`, writes one result per line to `output`.
/// Any malformed or invalid record aborts with its line number.
pub fn eval_jsonl(input: impl BufRead, mut output: impl Write, exec_mode: Exec) -> Result<EvalSummary> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.context("reading input")?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ObjectiveRecord =
            serde_json::from_str(&line).with_context(|| format!("line {}: malformed record", i + 1))?;
        records.push((i + 1, rec));
    }
    let results = exec::map(exec_mode, &records, |(_, r)| evaluate(r));
    for ((line, _), res) in records.iter().zip(results.iter()) {
        let res = res.as_ref().map_err(|e| anyhow::anyhow!("line {line}: {e}"))?;
        serde_json::to_writer(&mut output, res)?;
        output.write_all(b"\n")?;
    }
    output.flush()?;

    let dpo: Vec<_> = records
        .iter()
        .filter_map(|(_, r)| match r {
            ObjectiveRecord::Dpo(d) => Some(*d),
            _ => None,
        })
        .collect();
    Ok(EvalSummary {
        records: records.len(),
        dpo: if dpo.is_empty() { None } else { Some(dpo_batch(&dpo)?) },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_each_line() {
        let input = concat!(
            r#"{"objective":"clm","logprobs":[-0.5,-1.0]}"#,
            "\n\n",
            r#"{"objective":"sft","logprobs":[-0.2,-0.3]}"#,
            "\n",
            r#"{"objective":"dpo","logp_theta_chosen":-3,"logp_theta_rejected":-4,"logp_ref_chosen":-3,"logp_ref_rejected":-4}"#,
            "\n"
        );
        let mut out = Vec::new();
        let s = eval_jsonl(input.as_bytes(), &mut out, Exec::Sequential).unwrap();
        assert_eq!(s.records, 3);
        let lines: Vec<serde_json::Value> = String::from_utf8(out)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines[0]["loss"], 1.5);
        assert_eq!(lines[1]["loss"], 0.5);
        assert!((lines[2]["loss"].as_f64().unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((s.dpo.unwrap().mean_loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn reports_the_offending_line() {
        let input = "{\"objective\":\"sft\",\"logprobs\":[-0.1]}\n{\"objective\":\"sft\",\"logprobs\":[]}\n";
        let err = eval_jsonl(input.as_bytes(), Vec::new(), Exec::Sequential).unwrap_err();
        assert!(err.to_string().starts_with("line 2"), "{err}");
        let err = eval_jsonl("not json\n".as_bytes(), Vec::new(), Exec::Sequential).unwrap_err();
        assert!(err.to_string().starts_with("line 1"), "{err}");
    }
}
