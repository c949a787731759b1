//! Human review of forged items. Decisions are appended to a JSONL journal
//! (fsync per record) by a single writer; replaying the journal over the
//! forged items reproduces queue and export state.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::forge::derive_open_qa;
use crate::forge::items::{BenchItem, ItemError, ItemRecord};
use crate::io::read_jsonl;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
    Edit,
}

/// A decision as submitted by a reviewer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionRequest {
    pub item_id: String,
    pub verdict: Verdict,
    #[serde(default)]
    pub edited_item: Option<BenchItem>,
    pub reviewer: String,
    #[serde(default)]
    pub note: Option<String>,
}

/// A journaled decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewDecision {
    pub item_id: String,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edited_item: Option<BenchItem>,
    pub reviewer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub timestamp: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ReviewError {
    #[error("unknown item {0}")]
    UnknownItem(String),
    #[error("item {0} is not awaiting review")]
    NotReviewable(String),
    #[error("item {0} already has a decision")]
    AlreadyDecided(String),
    #[error("invalid decision: {0}")]
    InvalidDecision(String),
    #[error("edited item is invalid: {0}")]
    InvalidEdit(#[from] ItemError),
    #[error("journal {path}: {message}")]
    Journal { path: PathBuf, message: String },
    #[error(transparent)]
    Load(#[from] crate::Error),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewStats {
    pub total: usize,
    pub pending: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub edited: usize,
    /// Items that never needed review.
    pub auto: usize,
}

struct Inner {
    decisions: HashMap<String, ReviewDecision>,
    journal: File,
}

pub struct ReviewStore {
    items: Vec<ItemRecord>,
    index: HashMap<String, usize>,
    journal_path: PathBuf,
    inner: Mutex<Inner>,
}

fn journal_err(path: &Path, e: impl std::fmt::Display) -> ReviewError {
    ReviewError::Journal {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Reads journal records. A malformed final line (a torn write) is ignored
/// and reported through the returned valid length; a malformed line
/// elsewhere is an error.
fn replay(path: &Path) -> Result<(Vec<ReviewDecision>, u64), ReviewError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((Vec::new(), 0)),
        Err(e) => return Err(journal_err(path, e)),
    };
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    let last = lines.iter().rposition(|l| !l.trim().is_empty());
    let mut out = Vec::new();
    let mut offset = 0;
    for (i, line) in lines.iter().enumerate() {
        if !line.trim().is_empty() {
            match serde_json::from_str(line) {
                Ok(d) => out.push(d),
                Err(e) if Some(i) == last => {
                    log::warn!("dropping torn final journal line {} in {}: {e}", i + 1, path.display());
                    return Ok((out, offset as u64));
                }
                Err(e) => return Err(journal_err(path, format!("line {}: {e}", i + 1))),
            }
        }
        offset += line.len();
    }
    if !text.is_empty() && !text.ends_with('\n') {
        // complete record without its newline; keep it and terminate it
        return Ok((out, u64::MAX));
    }
    Ok((out, offset as u64))
}

impl ReviewStore {
    pub fn open(items_path: &Path, journal_path: &Path) -> Result<Self, ReviewError> {
        let items: Vec<ItemRecord> = read_jsonl(items_path)?;
        Self::with_items(items, journal_path)
    }

    pub fn with_items(items: Vec<ItemRecord>, journal_path: &Path) -> Result<Self, ReviewError> {
        let index: HashMap<String, usize> = items.iter().enumerate().map(|(i, r)| (r.id.clone(), i)).collect();
        if index.len() != items.len() {
            return Err(ReviewError::InvalidDecision("duplicate item ids in item file".into()));
        }
        let mut decisions = HashMap::new();
        let (replayed, valid_len) = replay(journal_path)?;
        for d in replayed {
            if !index.contains_key(&d.item_id) {
                log::warn!("journal decision for unknown item {} ignored", d.item_id);
                continue;
            }
            // first decision wins; later ones cannot have been accepted
            decisions.entry(d.item_id.clone()).or_insert(d);
        }
        if let Some(dir) = journal_path.parent() {
            fs::create_dir_all(dir).map_err(|e| journal_err(journal_path, e))?;
        }
        let mut journal = OpenOptions::new()
            .create(true)
            .append(true)
            .open(journal_path)
            .map_err(|e| journal_err(journal_path, e))?;
        let len = journal.metadata().map_err(|e| journal_err(journal_path, e))?.len();
        if valid_len == u64::MAX {
            journal.write_all(b"\n").map_err(|e| journal_err(journal_path, e))?;
        } else if len > valid_len {
            journal.set_len(valid_len).map_err(|e| journal_err(journal_path, e))?;
        }
        Ok(Self {
            items,
            index,
            journal_path: journal_path.to_path_buf(),
            inner: Mutex::new(Inner { decisions, journal }),
        })
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn items(&self) -> &[ItemRecord] {
        &self.items
    }

    pub fn item(&self, id: &str) -> Option<&ItemRecord> {
        self.index.get(id).map(|&i| &self.items[i])
    }

    pub fn decision(&self, id: &str) -> Option<ReviewDecision> {
        self.lock().decisions.get(id).cloned()
    }

    /// Undecided items awaiting review, in forge order.
    pub fn queue(&self, kind: Option<&str>, limit: Option<usize>) -> Vec<ItemRecord> {
        let inner = self.lock();
        self.items
            .iter()
            .filter(|r| r.pending_review && !inner.decisions.contains_key(&r.id))
            .filter(|r| kind.is_none_or(|k| r.item.kind() == k))
            .take(limit.unwrap_or(usize::MAX))
            .cloned()
            .collect()
    }

    pub fn decide(&self, req: DecisionRequest, timestamp: String) -> Result<ReviewDecision, ReviewError> {
        let record = self
            .item(&req.item_id)
            .ok_or_else(|| ReviewError::UnknownItem(req.item_id.clone()))?;
        if !record.pending_review {
            return Err(ReviewError::NotReviewable(req.item_id));
        }
        if req.reviewer.trim().is_empty() {
            return Err(ReviewError::InvalidDecision("reviewer is required".into()));
        }
        match (req.verdict, &req.edited_item) {
            (Verdict::Edit, None) => {
                return Err(ReviewError::InvalidDecision("edit verdict needs edited_item".into()));
            }
            (Verdict::Edit, Some(edit)) => {
                if edit.kind() != record.item.kind() {
                    return Err(ReviewError::InvalidDecision(format!(
                        "edited item kind {} does not match {}",
                        edit.kind(),
                        record.item.kind()
                    )));
                }
                edit.validate()?;
            }
            (_, Some(_)) => {
                return Err(ReviewError::InvalidDecision(
                    "edited_item is only allowed with edit".into(),
                ));
            }
            (_, None) => {}
        }
        let decision = ReviewDecision {
            item_id: req.item_id,
            verdict: req.verdict,
            edited_item: req.edited_item,
            reviewer: req.reviewer,
            note: req.note,
            timestamp,
        };

        let mut inner = self.lock();
        if inner.decisions.contains_key(&decision.item_id) {
            return Err(ReviewError::AlreadyDecided(decision.item_id));
        }
        let mut line = serde_json::to_vec(&decision).map_err(|e| journal_err(&self.journal_path, e))?;
        line.push(b'\n');
        let before = inner.journal.metadata().map(|m| m.len()).ok();
        let written = inner.journal.write_all(&line).and_then(|()| inner.journal.sync_data());
        if let Err(e) = written {
            // roll back a partial append so replay never sees half a record
            if let Some(len) = before {
                let _ = inner.journal.set_len(len);
            }
            return Err(journal_err(&self.journal_path, e));
        }
        inner.decisions.insert(decision.item_id.clone(), decision.clone());
        Ok(decision)
    }

    pub fn stats(&self) -> ReviewStats {
        let inner = self.lock();
        let mut s = ReviewStats {
            total: self.items.len(),
            ..Default::default()
        };
        for r in &self.items {
            if !r.pending_review {
                s.auto += 1;
                continue;
            }
            match inner.decisions.get(&r.id).map(|d| d.verdict) {
                None => s.pending += 1,
                Some(Verdict::Accept) => s.accepted += 1,
                Some(Verdict::Reject) => s.rejected += 1,
                Some(Verdict::Edit) => s.edited += 1,
            }
        }
        s
    }

    /// Items that make it into a dataset: items that never needed review,
    /// accepted ones, and edited ones with the edit applied. Pending items
    /// only when `include_pending`. The `open-qa` kind derives open-ended
    /// questions from the exported MCQs.
    pub fn exportable(&self, kind: Option<&str>, include_pending: bool) -> Vec<ItemRecord> {
        let inner = self.lock();
        let mut out = Vec::new();
        let derive = kind == Some(OPEN_QA);
        for r in &self.items {
            let item = if !r.pending_review {
                r.item.clone()
            } else {
                match inner.decisions.get(&r.id) {
                    Some(d) if d.verdict == Verdict::Accept => r.item.clone(),
                    Some(d) if d.verdict == Verdict::Edit => d.edited_item.clone().unwrap_or_else(|| r.item.clone()),
                    Some(_) => continue,
                    None if include_pending => r.item.clone(),
                    None => continue,
                }
            };
            if derive {
                if let BenchItem::Mcq(m) = &item {
                    out.push(ItemRecord::new(
                        format!("{}/open-qa", r.id),
                        BenchItem::Instruct(derive_open_qa(m)),
                        false,
                    ));
                }
            } else if kind.is_none_or(|k| item.kind() == k) {
                out.push(ItemRecord::new(r.id.clone(), item, false));
            }
        }
        out
    }

    /// Tally used by export manifests.
    pub fn export_counts(&self, kind: Option<&str>, include_pending: bool) -> BTreeMap<&'static str, usize> {
        let inner = self.lock();
        let mut c = BTreeMap::new();
        let source_kind = if kind == Some(OPEN_QA) { Some("mcq") } else { kind };
        for r in self
            .items
            .iter()
            .filter(|r| source_kind.is_none_or(|k| r.item.kind() == k))
        {
            let key = if !r.pending_review {
                "auto"
            } else {
                match inner.decisions.get(&r.id).map(|d| d.verdict) {
                    Some(Verdict::Accept) => "accepted",
                    Some(Verdict::Edit) => "edited",
                    Some(Verdict::Reject) => "rejected",
                    None if include_pending => "pending_included",
                    None => "pending_excluded",
                }
            };
            *c.entry(key).or_insert(0) += 1;
        }
        c
    }
}

pub const OPEN_QA: &str = "open-qa";
