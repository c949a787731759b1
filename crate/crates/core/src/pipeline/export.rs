//! Dataset export from the review store.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::review::{ReviewStore, OPEN_QA};
use super::PipelineError;
use crate::io::{write_jsonl, write_string};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KindManifest {
    pub file: String,
    pub records: usize,
    /// Source items by review state (auto, accepted, edited, rejected,
    /// pending_included, pending_excluded).
    pub counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExportManifest {
    pub config_hash: String,
    /// Pending items were included on request.
    pub forced: bool,
    pub kinds: BTreeMap<String, KindManifest>,
}

/// Every kind present in the store, plus open-qa when MCQs exist.
pub fn default_kinds(store: &ReviewStore) -> Vec<String> {
    let mut kinds: Vec<String> = store.items().iter().map(|r| r.item.kind().to_string()).collect();
    if kinds.iter().any(|k| k == "mcq") {
        kinds.push(OPEN_QA.to_string());
    }
    kinds.sort();
    kinds.dedup();
    kinds
}

/// Writes `<kind>.jsonl` per kind and `manifest.json` into `out_dir`.
/// A kind with no exportable records still gets an (empty) file.
pub fn export_dataset(
    store: &ReviewStore,
    kinds: &[String],
    include_pending: bool,
    out_dir: &Path,
    config_hash: &str,
) -> Result<ExportManifest, PipelineError> {
    let mut manifest = ExportManifest {
        config_hash: config_hash.to_string(),
        forced: include_pending,
        kinds: BTreeMap::new(),
    };
    for kind in kinds {
        if kind.is_empty() || kind.contains(['/', '\\', '.']) {
            return Err(PipelineError::Config(format!("invalid export kind {kind:?}")));
        }
        let records = store.exportable(Some(kind), include_pending);
        if records.is_empty() {
            log::warn!("export of kind {kind} has no records; writing an empty file");
        }
        let file = format!("{kind}.jsonl");
        write_jsonl(&out_dir.join(&file), &records)?;
        let counts = store
            .export_counts(Some(kind), include_pending)
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        manifest.kinds.insert(
            kind.clone(),
            KindManifest {
                file,
                records: records.len(),
                counts,
            },
        );
    }
    let json = serde_json::to_string_pretty(&manifest).map_err(crate::Error::from)?;
    write_string(&out_dir.join("manifest.json"), &(json + "\n"))?;
    Ok(manifest)
}
