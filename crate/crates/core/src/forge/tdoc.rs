//! Working-group classification items sampled from 3GPP Tdocs.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;

use super::items::{TdocClassItem, WorkingGroup};
use crate::ingest::{segment_text, Document};

/// Meta keys that may carry a document's working group.
pub const WG_META_KEYS: [&str; 2] = ["working_group", "wg"];

static HEADER_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)^\s*(3GPP\s+TSG|TSG[-\s]|Tdoc\b|R[1-5P]-\d|S[1-6P]-\d|C[1-6P]-\d|Agenda\s+item|Source\s*:|Title\s*:|Document\s+for\s*:|Release\s*:|Meeting\s*#|Work\s+item)",
    )
    .expect("header regex")
});

/// Drops lines that would reveal the working group (meeting headers, Tdoc
/// numbers, source/title/agenda fields).
pub fn strip_tdoc_header(text: &str) -> String {
    text.lines()
        .filter(|l| !HEADER_LINE.is_match(l))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn document_working_group(doc: &Document) -> Option<&str> {
    WG_META_KEYS.iter().find_map(|k| doc.meta.get(*k)).map(String::as_str)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TdocOutcome {
    pub items: Vec<TdocClassItem>,
    pub warnings: Vec<String>,
}

/// Up to `per_wg_quota` segments per working group, sampled with `seed`.
/// Output is ordered by working group, then by sample order.
pub fn make_tdoc_items(docs: &[Document], per_wg_quota: usize, segment_words: usize, seed: u64) -> TdocOutcome {
    let mut out = TdocOutcome::default();
    let mut pools: BTreeMap<WorkingGroup, Vec<String>> = BTreeMap::new();
    for doc in docs {
        let Some(raw_wg) = document_working_group(doc) else {
            out.warnings
                .push(format!("{}: no working group in metadata; skipped", doc.id));
            continue;
        };
        let Some(wg) = WorkingGroup::parse_normalized(raw_wg) else {
            out.warnings
                .push(format!("{}: unknown working group {raw_wg:?}; skipped", doc.id));
            continue;
        };
        let body = strip_tdoc_header(doc.text());
        match segment_text(&doc.id, &body, &[segment_words]) {
            Ok(segs) => pools.entry(wg).or_default().extend(segs.into_iter().map(|s| s.text)),
            Err(e) => out.warnings.push(format!("{}: {e}", doc.id)),
        }
    }
    for (i, (wg, mut pool)) in pools.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        pool.shuffle(&mut rng);
        pool.truncate(per_wg_quota);
        out.items
            .extend(pool.into_iter().map(|text| TdocClassItem { text, label: wg }));
    }
    out
}
