//! Stage execution. Every stage reads its inputs from the previous stage's
//! files under the output directory, so stages can also run one at a time.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ForgeTask, PipelineConfig};
use super::export::{default_kinds, export_dataset};
use super::review::ReviewStore;
use super::score::{render_tables, score_model, ModelResponse};
use super::PipelineError;
use crate::clients::ChatClient;
use crate::dedup::{exact_dedup, near_dedup};
use crate::exec;
use crate::filter::{filter_corpus, KeywordLexicon};
use crate::forge::items::{BenchItem, CodeLanguage, CodeTaskKind, InstructKind, ItemRecord, McqCategory};
use crate::forge::tdoc::document_working_group;
use crate::forge::ForgeError;
use crate::forge::{
    build_preference_pairs, generate_validated_mcqs, make_code_infill_item, make_code_llm_item, make_instruct_item,
    make_masked_equation_items, make_tdoc_items, McqAgents, PreferenceCandidate,
};
use crate::ingest::{
    clean_document, is_latex, segment_text, should_keep_document, validate_corpus_ids, CleaningConfig, CorpusRecord,
    Document, Source,
};
use crate::io::{read_jsonl, write_jsonl, write_string};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Ingest,
    Filter,
    Dedup,
    Forge,
    Score,
    Export,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Ingest,
        Stage::Filter,
        Stage::Dedup,
        Stage::Forge,
        Stage::Score,
        Stage::Export,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Filter => "filter",
            Stage::Dedup => "dedup",
            Stage::Forge => "forge",
            Stage::Score => "score",
            Stage::Export => "export",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Counts for one stage. Wall time is logged but kept out of the written
/// report so that reruns produce identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: Stage,
    pub inputs: usize,
    pub outputs: usize,
    pub drops: BTreeMap<String, usize>,
    #[serde(skip)]
    pub wall: Duration,
}

impl StageReport {
    fn new(stage: Stage) -> Self {
        Self {
            stage,
            inputs: 0,
            outputs: 0,
            drops: BTreeMap::new(),
            wall: Duration::ZERO,
        }
    }

    fn drop_n(&mut self, reason: impl Into<String>, n: usize) {
        if n > 0 {
            *self.drops.entry(reason.into()).or_default() += n;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub seed: u64,
    pub stages: Vec<StageReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<Stage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub const CLEANED: &str = "ingest/cleaned.jsonl";
pub const SEGMENTS: &str = "ingest/segments.jsonl";
pub const FILTERED: &str = "filter/kept.jsonl";
pub const RELEVANCE: &str = "filter/relevance.jsonl";
pub const DEDUPED: &str = "dedup/kept.jsonl";
pub const DEDUP_REPORT: &str = "dedup/report.tsv";
pub const ITEMS: &str = "forge/items.jsonl";
pub const FORGE_DROPS: &str = "forge/drops.jsonl";
pub const RUN_REPORT: &str = "run_report.json";

fn read_docs(path: &Path) -> Result<Vec<Document>, PipelineError> {
    Ok(read_jsonl::<CorpusRecord>(path)?
        .into_iter()
        .map(Document::from_cleaned_record)
        .collect())
}

fn write_docs(path: &Path, docs: &[Document]) -> Result<(), PipelineError> {
    let recs: Vec<CorpusRecord> = docs.iter().map(Document::to_record).collect();
    Ok(write_jsonl(path, &recs)?)
}

fn ingest(cfg: &PipelineConfig, rep: &mut StageReport) -> Result<(), PipelineError> {
    let mut docs = Vec::new();
    for p in &cfg.corpus.paths {
        docs.extend(
            read_jsonl::<CorpusRecord>(p)?
                .into_iter()
                .map(Document::from_raw_record),
        );
    }
    rep.inputs = docs.len();
    validate_corpus_ids(&docs)?;
    let before = docs.len();
    docs.retain(|d| should_keep_document(&d.meta));
    rep.drop_n("excluded-kind", before - docs.len());

    let cleaning = CleaningConfig {
        boilerplate: cfg.boilerplate()?,
    };
    let mut cleaned = exec::map(cfg.exec(), &docs, |d| clean_document(d, &cleaning));
    let before = cleaned.len();
    cleaned.retain(|d| !d.text().trim().is_empty());
    rep.drop_n("empty-after-cleaning", before - cleaned.len());

    let targets = &cfg.corpus.segment_targets;
    let segments = exec::map(cfg.exec(), &cleaned, |d| segment_text(&d.id, d.text(), targets));
    let mut all = Vec::new();
    for s in segments {
        all.extend(s?);
    }
    write_docs(&cfg.out(CLEANED), &cleaned)?;
    write_jsonl(&cfg.out(SEGMENTS), &all)?;
    rep.outputs = cleaned.len();
    Ok(())
}

fn filter(cfg: &PipelineConfig, rep: &mut StageReport) -> Result<(), PipelineError> {
    let docs = read_docs(&cfg.out(CLEANED))?;
    rep.inputs = docs.len();
    let lex = KeywordLexicon::load(&cfg.filter.lexicon, cfg.filter.exclusions.as_deref())?;
    let t = cfg.filter.thresholds;
    let out = filter_corpus(&docs, &lex, t, cfg.exec())?;
    for r in &out.reports {
        if r.unique_keywords < t.min_keywords {
            rep.drop_n("too-few-keywords", 1);
        } else if r.density < t.min_density {
            rep.drop_n("low-density", 1);
        }
    }
    write_docs(&cfg.out(FILTERED), &out.kept)?;
    write_jsonl(&cfg.out(RELEVANCE), &out.reports)?;
    rep.outputs = out.kept.len();
    Ok(())
}

fn dedup(cfg: &PipelineConfig, rep: &mut StageReport) -> Result<(), PipelineError> {
    let docs = read_docs(&cfg.out(FILTERED))?;
    rep.inputs = docs.len();
    let exact = exact_dedup(&docs);
    let near = near_dedup(&exact.kept, &cfg.dedup, cfg.exec())?;
    rep.drop_n("exact-duplicate", exact.removed.len());
    rep.drop_n("near-duplicate", near.removed.len());
    write_docs(&cfg.out(DEDUPED), &near.kept)?;
    write_string(&cfg.out(DEDUP_REPORT), &(exact.report() + &near.report()))?;
    rep.outputs = near.kept.len();
    Ok(())
}

/// A source document or candidate that yielded no item, and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForgeDrop {
    pub task: String,
    pub source: String,
    pub reason: String,
}

struct Forge<'a> {
    cfg: &'a PipelineConfig,
    docs: &'a [Document],
    items: Vec<ItemRecord>,
    drops: Vec<ForgeDrop>,
    client: Option<ChatClient>,
}

/// Per-document seed: stable across runs and independent of corpus order.
fn doc_seed(seed: u64, doc_id: &str) -> u64 {
    let d = Sha256::new()
        .chain_update(seed.to_le_bytes())
        .chain_update(doc_id.as_bytes())
        .finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

fn code_language(doc: &Document) -> Option<CodeLanguage> {
    if let Some(l) = doc.meta.get("language") {
        return l.parse().ok();
    }
    ["filename", "path"]
        .iter()
        .find_map(|k| doc.meta.get(*k))
        .and_then(|f| CodeLanguage::from_path(f))
}

impl<'a> Forge<'a> {
    fn drop(&mut self, task: ForgeTask, source: &str, reason: impl Into<String>) {
        self.drops.push(ForgeDrop {
            task: task.name().into(),
            source: source.into(),
            reason: reason.into(),
        });
    }

    fn client(&mut self) -> Result<&ChatClient, PipelineError> {
        if self.client.is_none() {
            self.client = Some(self.cfg.chat_client()?);
        }
        Ok(self.client.as_ref().expect("client set"))
    }

    fn code_docs(&self) -> Vec<&'a Document> {
        self.docs.iter().filter(|d| d.source == Source::Code).collect()
    }

    fn run(&mut self, task: ForgeTask) -> Result<(), PipelineError> {
        match task {
            ForgeTask::MaskedEquation => self.masked_equations(),
            ForgeTask::CodeInfill => self.code_infill(),
            ForgeTask::CodeSummary => self.code_llm(task, CodeTaskKind::Summary),
            ForgeTask::CodeAnalysis => self.code_llm(task, CodeTaskKind::Analysis),
            ForgeTask::CodeGenerate => self.code_llm(task, CodeTaskKind::Generate),
            ForgeTask::Mcq => self.mcq(),
            ForgeTask::GeneralInstruct => self.instruct(task, InstructKind::General),
            ForgeTask::ProtocolInstruct => self.instruct(task, InstructKind::Protocol),
            ForgeTask::Tdoc => self.tdoc(),
            ForgeTask::Preference => self.preference(),
        }
    }

    fn masked_equations(&mut self) -> Result<(), PipelineError> {
        let max = self.cfg.forge.max_equations_per_doc;
        let docs: Vec<&Document> = self.docs.iter().filter(|d| is_latex(&d.meta)).collect();
        let made = exec::map(self.cfg.exec(), &docs, |d| {
            make_masked_equation_items(&d.id, d.text(), max)
        });
        for (d, (items, warnings)) in docs.iter().zip(made) {
            for w in warnings {
                self.drop(ForgeTask::MaskedEquation, &d.id, w);
            }
            for (n, it) in items.into_iter().enumerate() {
                self.items.push(ItemRecord::new(
                    format!("{}#eq{n}", d.id),
                    BenchItem::MaskedEquation(it),
                    false,
                ));
            }
        }
        Ok(())
    }

    fn code_infill(&mut self) -> Result<(), PipelineError> {
        let seed = self.cfg.seed;
        let docs = self.code_docs();
        let made = exec::map(self.cfg.exec(), &docs, |d| match code_language(d) {
            Some(lang) => {
                make_code_infill_item(&d.id, d.text(), lang, doc_seed(seed, &d.id)).map_err(|e| e.to_string())
            }
            None => Err("unknown language".to_string()),
        });
        for (d, r) in docs.iter().zip(made) {
            match r {
                Ok(it) => self.items.push(ItemRecord::new(
                    format!("{}#fill", d.id),
                    BenchItem::CodeTask(it),
                    false,
                )),
                Err(e) => self.drop(ForgeTask::CodeInfill, &d.id, e),
            }
        }
        Ok(())
    }

    fn code_llm(&mut self, task: ForgeTask, kind: CodeTaskKind) -> Result<(), PipelineError> {
        let docs = self.code_docs();
        let model = self.cfg.provider.generator_model.clone();
        let exec_mode = self.cfg.exec();
        let client = self.client()?;
        let made = exec::map(exec_mode, &docs, |d| match code_language(d) {
            Some(lang) => make_code_llm_item(kind, &d.id, d.text(), lang, client, &model).map(Some),
            None => Ok(None),
        });
        for (d, r) in docs.iter().zip(made) {
            match r {
                Ok(Some(Some(it))) => self.items.push(ItemRecord::new(
                    format!("{}#{}", d.id, task.name()),
                    BenchItem::CodeTask(it),
                    true,
                )),
                Ok(Some(None)) => self.drop(task, &d.id, "model judged the script irrelevant"),
                Ok(None) => self.drop(task, &d.id, "unknown language"),
                Err(ForgeError::Client(e)) => return Err(e.into()),
                Err(e) => self.drop(task, &d.id, e.to_string()),
            }
        }
        Ok(())
    }

    fn mcq_category(&self, d: &Document) -> Option<McqCategory> {
        if let Some(c) = d.meta.get("mcq_category") {
            return serde_json::from_value(serde_json::Value::String(c.clone())).ok();
        }
        self.cfg.forge.mcq_categories.get(d.source.as_str()).copied()
    }

    fn mcq(&mut self) -> Result<(), PipelineError> {
        let docs: Vec<(&Document, McqCategory)> = self
            .docs
            .iter()
            .filter(|d| d.source != Source::Code)
            .filter_map(|d| Some((d, self.mcq_category(d)?)))
            .collect();
        let p = &self.cfg.provider;
        let (gm, vm) = (p.generator_model.clone(), p.validator_model.clone());
        let exec_mode = self.cfg.exec();
        let client = self.client()?;
        let agents = McqAgents {
            generator: client,
            generator_model: &gm,
            validator: client,
            validator_model: &vm,
        };
        let made = exec::map(exec_mode, &docs, |(d, cat)| {
            generate_validated_mcqs(d.text(), *cat, &agents)
        });
        for ((d, _), r) in docs.iter().zip(made) {
            let out = r.map_err(|e| PipelineError::Client(e.source))?;
            for drop in out.drops {
                self.drop(
                    ForgeTask::Mcq,
                    &d.id,
                    format!("candidate {}: {}", drop.candidate, drop.reason),
                );
            }
            for (n, it) in out.kept.into_iter().enumerate() {
                self.items
                    .push(ItemRecord::new(format!("{}#mcq{n}", d.id), BenchItem::Mcq(it), true));
            }
        }
        Ok(())
    }

    fn instruct(&mut self, task: ForgeTask, kind: InstructKind) -> Result<(), PipelineError> {
        let sources: BTreeSet<&str> = self.cfg.forge.instruct_sources.iter().map(String::as_str).collect();
        let docs: Vec<&Document> = self
            .docs
            .iter()
            .filter(|d| match kind {
                InstructKind::Protocol => d.source == Source::Standard3gpp && document_working_group(d).is_none(),
                _ => sources.contains(d.source.as_str()),
            })
            .collect();
        let model = self.cfg.provider.generator_model.clone();
        let exec_mode = self.cfg.exec();
        let client = self.client()?;
        let made = exec::map(exec_mode, &docs, |d| make_instruct_item(kind, d.text(), client, &model));
        let suffix = if kind == InstructKind::Protocol {
            "protocol"
        } else {
            "general"
        };
        for (d, r) in docs.iter().zip(made) {
            match r {
                Ok(it) => self.items.push(ItemRecord::new(
                    format!("{}#{suffix}", d.id),
                    BenchItem::Instruct(it),
                    true,
                )),
                Err(ForgeError::Client(e)) => return Err(e.into()),
                Err(e) => self.drop(task, &d.id, e.to_string()),
            }
        }
        Ok(())
    }

    fn tdoc(&mut self) -> Result<(), PipelineError> {
        let docs: Vec<Document> = self
            .docs
            .iter()
            .filter(|d| document_working_group(d).is_some())
            .cloned()
            .collect();
        let f = &self.cfg.forge;
        let out = make_tdoc_items(&docs, f.tdoc_quota, f.tdoc_segment_words, self.cfg.seed);
        for w in out.warnings {
            self.drop(ForgeTask::Tdoc, "", w);
        }
        let mut per_wg: BTreeMap<String, usize> = BTreeMap::new();
        for it in out.items {
            let n = per_wg.entry(it.label.to_string()).or_default();
            self.items.push(ItemRecord::new(
                format!("tdoc-{}-{n}", it.label),
                BenchItem::Tdoc(it),
                false,
            ));
            *n += 1;
        }
        Ok(())
    }

    fn preference(&mut self) -> Result<(), PipelineError> {
        let path = self
            .cfg
            .forge
            .preference_candidates
            .as_ref()
            .ok_or_else(|| PipelineError::Config("preference task needs forge.preference_candidates".into()))?;
        let cands: Vec<PreferenceCandidate> = read_jsonl(path)?;
        let out = build_preference_pairs(&cands, &self.cfg.forge.preference)?;
        for w in out.warnings {
            self.drop(ForgeTask::Preference, "", w);
        }
        let kept = out.pairs.len();
        for (n, p) in out.pairs.into_iter().enumerate() {
            self.items
                .push(ItemRecord::new(format!("pref{n}"), BenchItem::PreferencePair(p), true));
        }
        let unselected = cands
            .len()
            .saturating_sub(kept + self.drops.iter().filter(|d| d.task == "preference").count());
        if unselected > 0 {
            log::info!("{unselected} preference candidate(s) did not meet the selection thresholds");
        }
        Ok(())
    }
}

fn forge(cfg: &PipelineConfig, rep: &mut StageReport, client: Option<ChatClient>) -> Result<(), PipelineError> {
    let docs = read_docs(&cfg.out(DEDUPED))?;
    rep.inputs = docs.len();
    let tasks: BTreeSet<ForgeTask> = cfg.forge.tasks.iter().copied().collect();
    let mut f = Forge {
        cfg,
        docs: &docs,
        items: Vec::new(),
        drops: Vec::new(),
        client,
    };
    for t in tasks {
        f.run(t)?;
    }
    for d in &f.drops {
        rep.drop_n(d.task.clone(), 1);
    }
    let ids: BTreeSet<&str> = f.items.iter().map(|r| r.id.as_str()).collect();
    if ids.len() != f.items.len() {
        return Err(PipelineError::Config("forge produced duplicate item ids".into()));
    }
    write_jsonl(&cfg.out(ITEMS), &f.items)?;
    write_jsonl(&cfg.out(FORGE_DROPS), &f.drops)?;
    rep.outputs = f.items.len();
    if let Some(c) = &f.client {
        log::info!(
            "forge: {} provider call(s), {} cache hit(s)",
            c.provider_calls(),
            c.cache_hits()
        );
    }
    Ok(())
}

fn is_safe_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) && !s.starts_with('.')
}

fn score(cfg: &PipelineConfig, rep: &mut StageReport) -> Result<(), PipelineError> {
    let items: Vec<ItemRecord> = read_jsonl(&cfg.items_path())?;
    rep.inputs = items.len();
    if cfg.score.responses.is_empty() {
        log::info!("score: no response files configured; nothing to score");
        return Ok(());
    }
    let known: BTreeSet<&str> = items.iter().map(|r| r.id.as_str()).collect();
    let embedder = cfg.embedder()?;
    let mut all = Vec::new();
    for (model, path) in &cfg.score.responses {
        if !is_safe_name(model) {
            return Err(PipelineError::Config(format!(
                "model name {model:?} is not usable as a file name"
            )));
        }
        let mut responses = BTreeMap::new();
        for r in read_jsonl::<ModelResponse>(path)? {
            if !known.contains(r.item_id.as_str()) {
                rep.drop_n("unknown-item", 1);
                continue;
            }
            if responses.insert(r.item_id.clone(), r.response).is_some() {
                return Err(PipelineError::Config(format!(
                    "{}: duplicate response for item {}",
                    path.display(),
                    r.item_id
                )));
            }
        }
        let s = score_model(model, &items, &responses, embedder.as_ref(), cfg.exec())?;
        write_jsonl(&cfg.out(&format!("score/{model}.scores.jsonl")), &s.records)?;
        rep.outputs += s.records.len();
        all.push(s);
    }
    for (name, table) in render_tables(&all) {
        write_string(&cfg.out(&format!("score/{name}")), &table)?;
    }
    Ok(())
}

fn export(cfg: &PipelineConfig, rep: &mut StageReport) -> Result<(), PipelineError> {
    let store = ReviewStore::open(&cfg.items_path(), &cfg.journal_path())?;
    rep.inputs = store.items().len();
    let kinds = if cfg.export.kinds.is_empty() {
        default_kinds(&store)
    } else {
        cfg.export.kinds.clone()
    };
    let m = export_dataset(
        &store,
        &kinds,
        cfg.export.include_pending,
        &cfg.out("export"),
        cfg.config_hash(),
    )?;
    rep.outputs = m.kinds.values().map(|k| k.records).sum();
    let held = store.items().len().saturating_sub(
        m.kinds
            .iter()
            .filter(|(k, _)| k.as_str() != super::review::OPEN_QA)
            .map(|(_, k)| k.records)
            .sum::<usize>(),
    );
    rep.drop_n("not-exported", held);
    Ok(())
}

/// Runs one stage against the files left by earlier stages.
pub fn run_stage(cfg: &PipelineConfig, stage: Stage) -> Result<StageReport, PipelineError> {
    let mut rep = StageReport::new(stage);
    let start = Instant::now();
    match stage {
        Stage::Ingest => ingest(cfg, &mut rep),
        Stage::Filter => filter(cfg, &mut rep),
        Stage::Dedup => dedup(cfg, &mut rep),
        Stage::Forge => forge(cfg, &mut rep, None),
        Stage::Score => score(cfg, &mut rep),
        Stage::Export => export(cfg, &mut rep),
    }?;
    rep.wall = start.elapsed();
    log::info!(
        "{stage}: {} in, {} out, drops {:?} ({:.2?})",
        rep.inputs,
        rep.outputs,
        rep.drops,
        rep.wall
    );
    Ok(rep)
}

/// The forge stage with a caller-supplied client in place of the configured
/// provider (recording, scripted or instrumented clients).
pub fn run_forge_with(cfg: &PipelineConfig, client: ChatClient) -> Result<StageReport, PipelineError> {
    let mut rep = StageReport::new(Stage::Forge);
    let start = Instant::now();
    forge(cfg, &mut rep, Some(client))?;
    rep.wall = start.elapsed();
    Ok(rep)
}

fn write_report(cfg: &PipelineConfig, report: &RunReport) -> Result<(), PipelineError> {
    let json = serde_json::to_string_pretty(report).map_err(crate::Error::from)?;
    Ok(write_string(&cfg.out(RUN_REPORT), &(json + "\n"))?)
}

/// Validates the configuration, then runs every stage in order. On failure
/// the partial report is still written and returned inside the error.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport, PipelineError> {
    cfg.validate()?;
    let mut report = RunReport {
        config_hash: cfg.config_hash().to_string(),
        seed: cfg.seed,
        ..Default::default()
    };
    for stage in Stage::ALL {
        match run_stage(cfg, stage) {
            Ok(r) => report.stages.push(r),
            Err(e) => {
                report.failed_stage = Some(stage);
                report.error = Some(e.to_string());
                if let Err(w) = write_report(cfg, &report) {
                    log::error!("could not write partial run report: {w}");
                }
                return Err(PipelineError::Stage {
                    stage,
                    source: Box::new(e),
                    report: Box::new(report),
                });
            }
        }
    }
    write_report(cfg, &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doc_seed_is_stable_and_distinct() {
        assert_eq!(doc_seed(1, "a"), doc_seed(1, "a"));
        assert_ne!(doc_seed(1, "a"), doc_seed(2, "a"));
        assert_ne!(doc_seed(1, "a"), doc_seed(1, "b"));
    }

    #[test]
    fn language_detection() {
        let d = Document::cleaned("x", Source::Code, "").with_meta("filename", "lib/ofdm.py");
        assert_eq!(code_language(&d), Some(CodeLanguage::Python));
        let d = d.with_meta("language", "matlab");
        assert_eq!(code_language(&d), Some(CodeLanguage::Matlab));
        assert_eq!(code_language(&Document::cleaned("y", Source::Code, "")), None);
    }

    #[test]
    fn report_has_no_timings() {
        let mut r = StageReport::new(Stage::Dedup);
        r.wall = Duration::from_secs(3);
        r.drop_n("x", 0);
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(s, r#"{"stage":"dedup","inputs":0,"outputs":0,"drops":{}}"#);
    }
}
