//! Regenerates the bundled fixture's mock provider replies and model
//! response files.
//!
//! A scripted responder answers every prompt the forge stage sends for the
//! fixture corpus; each reply is recorded under `fixtures/mock/` so that the
//! mock provider can replay it offline. Two synthetic models then "answer"
//! the forged items, giving the score stage something to grade.
//!
//!     cargo run -p telekit-core --example record_fixture_mocks

use std::path::{Path, PathBuf};
use std::sync::Arc;

use telekit_core::clients::{ChatClient, FnProvider, MockDirProvider};
use telekit_core::forge::items::{BenchItem, ItemRecord, WorkingGroup};
use telekit_core::io::{read_jsonl, write_jsonl};
use telekit_core::pipeline::score::ModelResponse;
use telekit_core::pipeline::{run_forge_with, run_stage, PipelineConfig, Stage};

struct Topic {
    key: &'static str,
    question: &'static str,
    options: [&'static str; 4],
    answer: usize,
}

const TOPICS: &[Topic] = &[
    Topic {
        key: "HARQ",
        question: "Which two mechanisms does hybrid automatic repeat request combine?",
        options: [
            "Forward error correction and retransmission",
            "Beamforming and power control",
            "Scrambling and interleaving",
            "Paging and cell reselection",
        ],
        answer: 1,
    },
    Topic {
        key: "OFDM",
        question: "What is the purpose of the cyclic prefix in OFDM?",
        options: [
            "To carry pilot symbols",
            "To absorb multipath delay spread and keep subcarriers orthogonal",
            "To encrypt the payload",
            "To signal the modulation order",
        ],
        answer: 2,
    },
    Topic {
        key: "MIMO",
        question: "How does the high-SNR capacity of a MIMO link scale with the antenna counts Nt and Nr?",
        options: [
            "With Nt + Nr",
            "With Nt times Nr",
            "Linearly with min(Nt, Nr)",
            "It does not scale",
        ],
        answer: 3,
    },
    Topic {
        key: "RRC",
        question: "Which RRC states exist in NR?",
        options: [
            "Idle and connected only",
            "Idle, inactive and connected",
            "Dormant and active",
            "Detached, registered and roaming",
        ],
        answer: 2,
    },
    Topic {
        key: "AMF",
        question: "Which 5G core network function handles registration and mobility of the UE?",
        options: ["SMF", "UPF", "PCF", "AMF"],
        answer: 4,
    },
    Topic {
        key: "beam",
        question: "Which measurement does a UE report to support beam selection?",
        options: ["RSRP per beam", "Battery level", "GPS position", "Packet loss rate"],
        answer: 1,
    },
    Topic {
        key: "NOMA",
        question: "Which receiver technique lets the near user in power-domain NOMA remove the far user's signal?",
        options: [
            "Maximum ratio combining",
            "Successive interference cancellation",
            "Frequency hopping",
            "Cyclic delay diversity",
        ],
        answer: 2,
    },
    Topic {
        key: "RIS",
        question: "How does the received SNR scale with the number L of coherently aligned RIS elements?",
        options: [
            "With L",
            "With the square root of L",
            "With L squared",
            "It is independent of L",
        ],
        answer: 3,
    },
    Topic {
        key: "LTE",
        question: "Which multiple access scheme does the LTE uplink use?",
        options: ["OFDMA", "SC-FDMA", "CDMA", "TDMA"],
        answer: 2,
    },
    Topic {
        key: "OFDMA",
        question: "What unit does an 802.11ax access point allocate to stations in OFDMA?",
        options: [
            "Resource units",
            "Time slots of 1 ms",
            "Spreading codes",
            "Carrier components",
        ],
        answer: 1,
    },
];

/// The validator is scripted to disagree on this one.
const CONTESTED: &str = "Which organization develops the LTE and NR specifications?";

fn section<'a>(prompt: &'a str, header: &str) -> &'a str {
    prompt.split_once(header).map_or("", |(_, rest)| rest)
}

fn topic_of(text: &str) -> &'static Topic {
    TOPICS
        .iter()
        .filter_map(|t| text.find(t.key).map(|pos| (pos, t)))
        .min_by_key(|(pos, _)| *pos)
        .map_or(&TOPICS[0], |(_, t)| t)
}

fn mcq_generate(text: &str) -> String {
    let t = topic_of(text);
    let mut s = format!("- Question: {}\n", t.question);
    for (i, o) in t.options.iter().enumerate() {
        s.push_str(&format!("- Option {}: {o}\n", i + 1));
    }
    s.push_str(&format!(
        "- Answer: Option {}\n- Explanation: Option {} is the standard definition.\n\n",
        t.answer, t.answer
    ));
    s.push_str(&format!(
        "- Question: {CONTESTED}\n- Option 1: IETF\n- Option 2: 3GPP\n- Option 3: ITU-T SG15\n- Option 4: W3C\n\
         - Answer: Option 2\n- Explanation: 3GPP publishes the LTE and NR technical specifications.\n\n"
    ));
    s.push_str(
        "- Question: What does the proposed scheme improve?\n- Option 1: Latency\n- Option 2: Coverage\n\
         - Answer: Option 1\n- Explanation: It lowers latency.\n",
    );
    s
}

fn mcq_validate(prompt: &str) -> String {
    let q = section(prompt, "QUESTION:\n");
    let first = q.lines().next().unwrap_or_default().trim_start_matches("Question: ");
    if first == CONTESTED {
        return "Option 4".into();
    }
    match TOPICS.iter().find(|t| t.question == first) {
        Some(t) => format!("Option {}", t.answer),
        None => "Option 1".into(),
    }
}

fn leading_comment(script: &str) -> String {
    script
        .lines()
        .map(str::trim)
        .find_map(|l| {
            ["#", "//", "/*", "%"]
                .iter()
                .find_map(|m| l.strip_prefix(m))
                .map(|c| c.trim().trim_end_matches("*/").trim().to_string())
        })
        .filter(|c| !c.is_empty())
        .unwrap_or_else(|| "processes telecom signals".into())
}

fn sentences(text: &str) -> Vec<String> {
    text.split(". ")
        .map(|s| s.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|s| s.split_whitespace().count() >= 4)
        .collect()
}

fn json(v: serde_json::Value) -> String {
    v.to_string()
}

fn respond(prompt: &str) -> String {
    let head = prompt.lines().next().unwrap_or_default();
    let text = section(prompt, "TEXT:\n");
    let script = section(prompt, "SCRIPT:\n");
    let comment = leading_comment(script);
    let short = script.lines().filter(|l| !l.trim().is_empty()).count() < 5;
    match head {
        "Prompt Template for Telecom Question Answering" => mcq_generate(text),
        "Prompt Template for Telecom Question Validation" => mcq_validate(prompt),
        "Prompt Template for Telecom Code Summary" => format!("The script {comment}"),
        "Prompt Template for Telecom Code Analysis" => format!(
            "Inputs: the arguments of the main function. Steps: it {comment}. Relevance: the logic follows common practice in LTE and NR link-level software."
        ),
        "Prompt Template for Telecom Code Generation" if short => "\"response\": \"irrelevant\"".into(),
        "Prompt Template for Telecom Code Generation" => {
            format!("\"response\": \"Write a function that {}\"", comment.to_lowercase())
        }
        "Prompt Template for Telecom General Instruction" if text.contains("802.11ax") => {
            "I cannot turn this passage into an instruction.".into()
        }
        "Prompt Template for Telecom General Instruction" => {
            let s = sentences(text);
            json(serde_json::json!({
                "instruction": "Explain the main technical point of the passage in one sentence.",
                "input": s.first().cloned().unwrap_or_default(),
                "output": s.get(1).or(s.first()).cloned().unwrap_or_default(),
            }))
        }
        "Prompt Template for Telecom Instruction Following" => {
            let steps: Vec<String> = sentences(text)
                .into_iter()
                .take(4)
                .enumerate()
                .map(|(i, s)| format!("{}. {}", i + 1, s.trim_end_matches('.')))
                .collect();
            json(serde_json::json!({
                "instruction": "List the steps of the procedure described in the passage.",
                "output": steps.join(" "),
            }))
        }
        other => panic!("no scripted reply for prompt starting {other:?}"),
    }
}

/// Deterministic answers of two synthetic models with different skill.
fn answer(model: usize, n: usize, rec: &ItemRecord) -> Option<String> {
    let good = model == 0;
    Some(match &rec.item {
        BenchItem::Mcq(m) => {
            let pick = if good && n % 4 != 3 {
                m.answer_index
            } else {
                1 + n % m.options.len()
            };
            format!("Option {pick}")
        }
        BenchItem::Tdoc(t) => {
            if good && n % 3 != 2 {
                t.label.to_string()
            } else {
                WorkingGroup::ALL[n % WorkingGroup::ALL.len()].to_string()
            }
        }
        BenchItem::MaskedEquation(e) => {
            if !good && n.is_multiple_of(2) {
                return None;
            }
            let truth = e.ground_truth_equation.as_str();
            match n % 3 {
                0 => truth.to_string(),
                1 => truth.replace('+', "-"),
                _ => truth.split('=').next().unwrap_or(truth).to_string() + "= 0",
            }
        }
        BenchItem::CodeTask(c) => {
            let words: Vec<&str> = c.ground_truth.split_whitespace().collect();
            let keep = if good { words.len() * 3 / 4 } else { words.len() / 3 };
            words[..keep.max(1).min(words.len())].join(" ")
        }
        BenchItem::Instruct(i) => {
            let words: Vec<&str> = i.response.split_whitespace().collect();
            let keep = if good { words.len() * 2 / 3 } else { words.len() / 4 };
            words[..keep.max(1).min(words.len())].join(" ")
        }
        BenchItem::PreferencePair(_) => return None,
    })
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let tmp = tempfile::tempdir()?;
    let out = tmp.path().to_path_buf();
    let text = std::fs::read_to_string(fixtures.join("config.toml"))?;
    let env = move |k: &str| (k == "TELEKIT_OUT").then(|| out.display().to_string());
    let cfg = PipelineConfig::from_toml_str(&text, &fixtures, &env)?;

    let mock_dir = fixtures.join("mock");
    if mock_dir.exists() {
        std::fs::remove_dir_all(&mock_dir)?;
    }
    std::fs::create_dir_all(&mock_dir)?;

    for stage in [Stage::Ingest, Stage::Filter, Stage::Dedup] {
        let r = run_stage(&cfg, stage)?;
        println!("{stage}: {} -> {}, drops {:?}", r.inputs, r.outputs, r.drops);
    }
    let recorder = MockDirProvider::new(&mock_dir);
    let scripted = FnProvider::new("scripted", move |req| {
        let reply = respond(&req.prompt);
        recorder.record(&req.prompt, &reply).expect("write mock reply");
        Ok(reply)
    });
    run_forge_with(&cfg, ChatClient::new(Arc::new(scripted)))?;
    // replay through the configured mock provider to prove coverage
    let rep = run_stage(&cfg, Stage::Forge)?;
    println!("forged {} items, drops {:?}", rep.outputs, rep.drops);

    let items: Vec<ItemRecord> = read_jsonl(&cfg.out("forge/items.jsonl"))?;
    if std::env::var_os("SHOW_ITEMS").is_some() {
        for r in &items {
            println!("{}\t{}", r.id, serde_json::to_string(&r.item)?);
        }
        print!("{}", std::fs::read_to_string(cfg.out("forge/drops.jsonl"))?);
        print!("{}", std::fs::read_to_string(cfg.out("filter/relevance.jsonl"))?);
        print!("{}", std::fs::read_to_string(cfg.out("dedup/report.tsv"))?);
    }
    for (m, name) in ["model-a", "model-b"].iter().enumerate() {
        let responses: Vec<ModelResponse> = items
            .iter()
            .enumerate()
            .filter_map(|(n, r)| {
                answer(m, n, r).map(|response| ModelResponse {
                    item_id: r.id.clone(),
                    response,
                })
            })
            .collect();
        let path: PathBuf = fixtures.join("responses").join(format!("{name}.jsonl"));
        write_jsonl(&path, &responses)?;
        println!("{}: {} responses", path.display(), responses.len());
    }
    let files = std::fs::read_dir(&mock_dir)?.count();
    println!("{files} mock replies in {}", mock_dir.display());
    Ok(())
}
