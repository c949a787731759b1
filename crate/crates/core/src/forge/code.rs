//! Code task items: fill-in-the-middle infilling and LLM-assisted summary,
//! analysis and generation requests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::items::{CodeLanguage, CodeTaskItem, CodeTaskKind, FILL};
use super::templates::render_with;
use super::ForgeError;
use crate::clients::ChatClient;

pub const MIN_INFILL_LINES: usize = 10;
pub const MAX_SPAN_LINES: usize = 7;

/// Line range (0-based, end-exclusive) an infill span may occupy: the first
/// and last 20% of lines are excluded.
pub fn infill_window(lines: usize) -> (usize, usize) {
    let edge = lines.div_ceil(5);
    (edge, lines - edge)
}

fn line_terminator(line: &str) -> &str {
    if line.ends_with("\r\n") {
        "\r\n"
    } else if line.ends_with('\n') {
        "\n"
    } else {
        ""
    }
}

/// Replaces 1–7 consecutive lines from the middle of `code` with `<FILL>`.
/// The removed lines, minus the final line terminator, are the ground truth,
/// so splicing it back at the placeholder reproduces `code` byte-exactly.
pub fn make_code_infill_item(
    source_id: &str,
    code: &str,
    language: CodeLanguage,
    seed: u64,
) -> Result<CodeTaskItem, ForgeError> {
    if code.contains(FILL) {
        return Err(ForgeError::PlaceholderInSource(FILL));
    }
    let lines: Vec<&str> = code.split_inclusive('\n').collect();
    if lines.len() < MIN_INFILL_LINES {
        return Err(ForgeError::TooShort {
            lines: lines.len(),
            min: MIN_INFILL_LINES,
        });
    }
    let (lo, hi) = infill_window(lines.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = rng.random_range(1..=MAX_SPAN_LINES.min(hi - lo));
    let start = rng.random_range(lo..=hi - len);
    let removed = lines[start..start + len].concat();
    let term = line_terminator(lines[start + len - 1]);

    let mut prompt = lines[..start].concat();
    prompt.push_str(FILL);
    prompt.push_str(term);
    prompt.push_str(&lines[start + len..].concat());
    Ok(CodeTaskItem {
        kind: CodeTaskKind::Infill,
        language,
        prompt,
        ground_truth: removed[..removed.len() - term.len()].to_string(),
        source_id: source_id.to_string(),
    })
}

/// The model declined the script as not telecom-relevant.
pub fn is_irrelevant_response(response: &str) -> bool {
    let r = response.trim().trim_matches(['"', '.', ' ']).to_ascii_lowercase();
    r == "irrelevant" || r.ends_with("\"irrelevant") || r.ends_with(": irrelevant")
}

/// Extracts the request body from `"response": "…"` replies; falls back to
/// the trimmed reply.
pub fn parse_code_request(response: &str) -> String {
    let t = response.trim();
    let body = t
        .split_once("\"response\"")
        .map(|(_, rest)| rest.trim_start().trim_start_matches(':').trim())
        .unwrap_or(t);
    body.trim_matches(|c: char| c == '"' || c.is_whitespace()).to_string()
}

/// Builds an LLM-assisted code item. For summary and analysis the script is
/// embedded in the prompt and the model's answer is the reference; for
/// generation the model writes the request and the script is the reference.
/// Returns `Ok(None)` when the model judges the script irrelevant.
pub fn make_code_llm_item(
    kind: CodeTaskKind,
    source_id: &str,
    script: &str,
    language: CodeLanguage,
    client: &ChatClient,
    model_id: &str,
) -> Result<Option<CodeTaskItem>, ForgeError> {
    let template = match kind {
        CodeTaskKind::Summary => "code-summary",
        CodeTaskKind::Analysis => "code-analysis",
        CodeTaskKind::Generate => "code-request",
        CodeTaskKind::Infill => {
            return Err(ForgeError::Invalid("infill items are built without a model".into()));
        }
    };
    let prompt = render_with(template, "script", script)?;
    let response = client.ask(model_id, &prompt)?;
    if is_irrelevant_response(&response) {
        return Ok(None);
    }
    let item = match kind {
        CodeTaskKind::Generate => CodeTaskItem {
            kind,
            language,
            prompt: parse_code_request(&response),
            ground_truth: script.to_string(),
            source_id: source_id.to_string(),
        },
        _ => CodeTaskItem {
            kind,
            language,
            prompt,
            ground_truth: response.trim().to_string(),
            source_id: source_id.to_string(),
        },
    };
    item.validate()?;
    Ok(Some(item))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clients::FnProvider;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn numbered(n: usize) -> String {
        (1..=n).map(|i| format!("line {i}\n")).collect()
    }

    #[test]
    fn twenty_line_window() {
        assert_eq!(infill_window(20), (4, 16));
        let src = numbered(20);
        for seed in 0..200 {
            let it = make_code_infill_item("f", &src, CodeLanguage::C, seed).unwrap();
            assert_eq!(it.splice(), src);
            let removed: Vec<usize> = it
                .ground_truth
                .lines()
                .map(|l| l.trim_start_matches("line ").parse().unwrap())
                .collect();
            assert!((1..=7).contains(&removed.len()));
            assert!(removed.iter().all(|l| (5..=16).contains(l)), "{removed:?}");
        }
    }

    #[test]
    fn deterministic_and_errors() {
        let src = numbered(30);
        assert_eq!(
            make_code_infill_item("f", &src, CodeLanguage::Python, 7).unwrap(),
            make_code_infill_item("f", &src, CodeLanguage::Python, 7).unwrap()
        );
        assert!(matches!(
            make_code_infill_item("f", &numbered(8), CodeLanguage::C, 1),
            Err(ForgeError::TooShort { lines: 8, .. })
        ));
        let bad = format!("{}<FILL>\n", numbered(12));
        assert!(make_code_infill_item("f", &bad, CodeLanguage::C, 1).is_err());
    }

    #[test]
    fn crlf_and_missing_final_newline() {
        let src = (1..=12).map(|i| format!("l{i}\r\n")).collect::<String>() + "end";
        for seed in 0..50 {
            let it = make_code_infill_item("f", &src, CodeLanguage::Matlab, seed).unwrap();
            assert_eq!(it.splice(), src);
        }
    }

    #[test]
    fn llm_items() {
        let client = ChatClient::new(Arc::new(FnProvider::new("f", |r| {
            Ok(if r.prompt.contains("craft a concise yet comprehensive request") {
                if r.prompt.contains("noop") {
                    "\"response\": \"irrelevant\"".into()
                } else {
                    "\"response\": \"Write a C function that computes a CRC-24A.\"".into()
                }
            } else {
                "Computes a CRC.".into()
            })
        })));
        let g = make_code_llm_item(
            CodeTaskKind::Generate,
            "s",
            "int crc(){}",
            CodeLanguage::C,
            &client,
            "m",
        )
        .unwrap()
        .unwrap();
        assert_eq!(g.prompt, "Write a C function that computes a CRC-24A.");
        assert_eq!(g.ground_truth, "int crc(){}");
        let s = make_code_llm_item(CodeTaskKind::Summary, "s", "int crc(){}", CodeLanguage::C, &client, "m")
            .unwrap()
            .unwrap();
        assert!(s.prompt.ends_with("int crc(){}\n"));
        assert_eq!(s.ground_truth, "Computes a CRC.");
        assert!(
            make_code_llm_item(CodeTaskKind::Generate, "s", "noop", CodeLanguage::C, &client, "m")
                .unwrap()
                .is_none()
        );
    }

    proptest! {
        #[test]
        fn infill_round_trips(lines in prop::collection::vec("[ -~]{0,30}", 10..60), seed: u64, final_nl: bool) {
            let mut src = lines.join("\n");
            if final_nl { src.push('\n'); }
            prop_assume!(!src.contains(FILL));
            // a trailing empty line without a final newline is not a line
            if src.split_inclusive('\n').count() < MIN_INFILL_LINES {
                let too_short = matches!(
                    make_code_infill_item("p", &src, CodeLanguage::Cpp, seed),
                    Err(ForgeError::TooShort { .. })
                );
                prop_assert!(too_short);
                return Ok(());
            }
            let it = make_code_infill_item("p", &src, CodeLanguage::Cpp, seed).unwrap();
            prop_assert_eq!(it.splice(), src);
            prop_assert_eq!(it.prompt.matches(FILL).count(), 1);
        }
    }
}
