//! Pipeline configuration: one TOML file. String values may reference
//! environment variables as `${NAME}` or `${NAME:-default}`; relative paths
//! resolve against the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::sync::LazyLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::clients::{
    ChatClient, ChatProvider, Embedder, MockDirProvider, RemoteChatProvider, RemoteEmbedder, ResponseCache,
    RetryPolicy, StubEmbedder,
};
use crate::dedup::DedupParams;
use crate::exec::Exec;
use crate::filter::FilterThresholds;
use crate::forge::items::McqCategory;
use crate::forge::PreferenceThresholds;
use crate::ingest::{BoilerplatePatterns, DEFAULT_BOILERPLATE, DEFAULT_SEGMENT_TARGETS};

fn default_seed() -> u64 {
    42
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "yes")]
    pub parallel: bool,
    pub corpus: CorpusSection,
    pub filter: FilterSection,
    #[serde(default)]
    pub dedup: DedupParams,
    #[serde(default)]
    pub forge: ForgeSection,
    #[serde(default)]
    pub provider: ProviderSection,
    #[serde(default)]
    pub score: ScoreSection,
    #[serde(default)]
    pub review: ReviewSection,
    #[serde(default)]
    pub export: ExportSection,
    #[serde(skip)]
    config_hash: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    /// JSONL files of `{"id","source","text","meta"}` records.
    pub paths: Vec<PathBuf>,
    #[serde(default)]
    pub boilerplate: Option<Vec<String>>,
    #[serde(default = "default_targets")]
    pub segment_targets: Vec<usize>,
}

fn default_targets() -> Vec<usize> {
    DEFAULT_SEGMENT_TARGETS.to_vec()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    pub lexicon: PathBuf,
    #[serde(default)]
    pub exclusions: Option<PathBuf>,
    #[serde(flatten)]
    pub thresholds: FilterThresholds,
}

/// Item families the forge stage can build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForgeTask {
    MaskedEquation,
    CodeInfill,
    CodeSummary,
    CodeAnalysis,
    CodeGenerate,
    Mcq,
    GeneralInstruct,
    ProtocolInstruct,
    Tdoc,
    Preference,
}

impl ForgeTask {
    pub fn name(self) -> &'static str {
        match self {
            ForgeTask::MaskedEquation => "masked-equation",
            ForgeTask::CodeInfill => "code-infill",
            ForgeTask::CodeSummary => "code-summary",
            ForgeTask::CodeAnalysis => "code-analysis",
            ForgeTask::CodeGenerate => "code-generate",
            ForgeTask::Mcq => "mcq",
            ForgeTask::GeneralInstruct => "general-instruct",
            ForgeTask::ProtocolInstruct => "protocol-instruct",
            ForgeTask::Tdoc => "tdoc",
            ForgeTask::Preference => "preference",
        }
    }

    pub fn needs_model(self) -> bool {
        !matches!(
            self,
            ForgeTask::MaskedEquation | ForgeTask::CodeInfill | ForgeTask::Tdoc | ForgeTask::Preference
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForgeSection {
    pub tasks: Vec<ForgeTask>,
    pub max_equations_per_doc: usize,
    pub tdoc_quota: usize,
    pub tdoc_segment_words: usize,
    /// Source → MCQ category; a document's `mcq_category` meta overrides.
    pub mcq_categories: BTreeMap<String, McqCategory>,
    /// Sources used for general instructions.
    pub instruct_sources: Vec<String>,
    /// JSONL of `{prompt, ground_truth, model_output}` for preference pairs.
    pub preference_candidates: Option<PathBuf>,
    pub preference: PreferenceThresholds,
}

impl Default for ForgeSection {
    fn default() -> Self {
        Self {
            tasks: vec![ForgeTask::MaskedEquation, ForgeTask::CodeInfill, ForgeTask::Tdoc],
            max_equations_per_doc: 3,
            tdoc_quota: 1000,
            tdoc_segment_words: 128,
            mcq_categories: BTreeMap::from([
                ("wiki".into(), McqCategory::Lexicon),
                ("stackexchange".into(), McqCategory::Lexicon),
                ("book".into(), McqCategory::ResearchOverview),
                ("paper".into(), McqCategory::ResearchPublications),
                ("patent".into(), McqCategory::ResearchPublications),
                ("standard-ieee".into(), McqCategory::StandardsOverview),
                ("standard-3gpp".into(), McqCategory::StandardsSpecifications),
            ]),
            instruct_sources: vec!["paper".into(), "patent".into(), "standard-ieee".into(), "book".into()],
            preference_candidates: None,
            preference: PreferenceThresholds::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Mock,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    Stub,
    Remote,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProviderSection {
    pub kind: ProviderKind,
    pub mock_dir: Option<PathBuf>,
    pub base_url: String,
    pub api_key: String,
    pub generator_model: String,
    pub validator_model: String,
    pub max_in_flight: usize,
    pub retries: u32,
    pub backoff_base_ms: u64,
    pub timeout_secs: u64,
    pub cache_dir: Option<PathBuf>,
    pub embedder: EmbedderKind,
    pub embedding_model: String,
    pub embedding_dim: usize,
}

impl Default for ProviderSection {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Mock,
            mock_dir: None,
            base_url: String::new(),
            api_key: String::new(),
            generator_model: "generator".into(),
            validator_model: "validator".into(),
            max_in_flight: 4,
            retries: 3,
            backoff_base_ms: 1000,
            timeout_secs: 120,
            cache_dir: None,
            embedder: EmbedderKind::Stub,
            embedding_model: String::new(),
            embedding_dim: 64,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoreSection {
    /// Items to score; defaults to the forge output.
    pub items: Option<PathBuf>,
    /// Model name → JSONL of `{item_id, response}`.
    pub responses: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReviewSection {
    pub journal: Option<PathBuf>,
    pub bind: String,
    pub static_dir: Option<PathBuf>,
    /// Shared bearer token; empty disables auth.
    pub token: String,
}

impl Default for ReviewSection {
    fn default() -> Self {
        Self {
            journal: None,
            bind: "127.0.0.1:8787".into(),
            static_dir: None,
            token: String::new(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExportSection {
    pub include_pending: bool,
    /// Kinds to export; empty means every kind present plus open-qa.
    pub kinds: Vec<String>,
}

static ENV_REF: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\$\{([A-Za-z_][A-Za-z0-9_]*)(?::-([^}]*))?\}").expect("env regex"));

/// Expands `${NAME}` / `${NAME:-default}`; an unset variable without a
/// default is an error.
pub fn interpolate_env(s: &str, lookup: &dyn Fn(&str) -> Option<String>) -> Result<String, PipelineError> {
    let mut missing = None;
    let out = ENV_REF.replace_all(s, |c: &regex::Captures<'_>| match (lookup(&c[1]), c.get(2)) {
        (Some(v), _) => v,
        (None, Some(d)) => d.as_str().to_string(),
        (None, None) => {
            missing.get_or_insert_with(|| c[1].to_string());
            String::new()
        }
    });
    match missing {
        Some(name) => Err(PipelineError::Config(format!("environment variable {name} is not set"))),
        None => Ok(out.into_owned()),
    }
}

fn interpolate_value(v: &mut toml::Value, lookup: &dyn Fn(&str) -> Option<String>) -> Result<(), PipelineError> {
    match v {
        toml::Value::String(s) => *s = interpolate_env(s, lookup)?,
        toml::Value::Array(a) => {
            for x in a {
                interpolate_value(x, lookup)?;
            }
        }
        toml::Value::Table(t) => {
            for (_, x) in t.iter_mut() {
                interpolate_value(x, lookup)?;
            }
        }
        _ => {}
    }
    Ok(())
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, &base, &|k| std::env::var(k).ok())
    }

    /// Parses, interpolates and resolves paths against `base_dir`. The config
    /// hash covers the raw text, so secrets never enter it.
    pub fn from_toml_str(
        text: &str,
        base_dir: &Path,
        env: &dyn Fn(&str) -> Option<String>,
    ) -> Result<Self, PipelineError> {
        let mut value: toml::Value =
            toml::from_str(text).map_err(|e| PipelineError::Config(format!("invalid TOML: {e}")))?;
        interpolate_value(&mut value, env)?;
        let mut cfg: PipelineConfig = value
            .try_into()
            .map_err(|e: toml::de::Error| PipelineError::Config(e.message().to_string()))?;
        cfg.config_hash = hex::encode(Sha256::digest(text.as_bytes()));
        cfg.resolve_paths(base_dir);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.output_dir);
        self.corpus.paths.iter_mut().for_each(|p| resolve(base, p));
        resolve(base, &mut self.filter.lexicon);
        let opts = [
            &mut self.filter.exclusions,
            &mut self.forge.preference_candidates,
            &mut self.provider.mock_dir,
            &mut self.provider.cache_dir,
            &mut self.score.items,
            &mut self.review.journal,
            &mut self.review.static_dir,
        ];
        for p in opts.into_iter().flatten() {
            resolve(base, p);
        }
        self.score.responses.values_mut().for_each(|p| resolve(base, p));
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn exec(&self) -> Exec {
        Exec::from_flag(self.parallel)
    }

    pub fn out(&self, rel: &str) -> PathBuf {
        self.output_dir.join(rel)
    }

    /// Forged items consumed by scoring, review and export.
    pub fn items_path(&self) -> PathBuf {
        self.score.items.clone().unwrap_or_else(|| self.out(super::run::ITEMS))
    }

    pub fn journal_path(&self) -> PathBuf {
        self.review
            .journal
            .clone()
            .unwrap_or_else(|| self.out("review/journal.jsonl"))
    }

    pub fn boilerplate(&self) -> Result<BoilerplatePatterns, PipelineError> {
        Ok(match &self.corpus.boilerplate {
            Some(p) => BoilerplatePatterns::new(p)?,
            None => BoilerplatePatterns::new(DEFAULT_BOILERPLATE)?,
        })
    }

    /// Checks ranges and that every referenced input exists, before any
    /// stage runs.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let must_exist = |what: &str, p: &Path| {
            if p.exists() {
                Ok(())
            } else {
                Err(PipelineError::Config(format!("{what} {} does not exist", p.display())))
            }
        };
        if self.corpus.paths.is_empty() {
            return Err(PipelineError::Config("corpus.paths is empty".into()));
        }
        for p in &self.corpus.paths {
            must_exist("corpus file", p)?;
        }
        if self.corpus.segment_targets.is_empty() || self.corpus.segment_targets.contains(&0) {
            return Err(PipelineError::Config("corpus.segment_targets must be positive".into()));
        }
        must_exist("lexicon", &self.filter.lexicon)?;
        if let Some(x) = &self.filter.exclusions {
            must_exist("exclusions file", x)?;
        }
        self.filter.thresholds.validate()?;
        self.dedup.validate()?;
        self.boilerplate()?;
        self.forge.preference.validate()?;
        if self.forge.tdoc_segment_words == 0 {
            return Err(PipelineError::Config(
                "forge.tdoc_segment_words must be positive".into(),
            ));
        }
        if self.forge.tasks.contains(&ForgeTask::Preference) {
            match &self.forge.preference_candidates {
                Some(p) => must_exist("preference candidates", p)?,
                None => {
                    return Err(PipelineError::Config(
                        "preference task needs forge.preference_candidates".into(),
                    ))
                }
            }
        }
        if self.forge.tasks.iter().any(|t| t.needs_model()) {
            self.validate_provider()?;
        }
        for p in self.score.responses.values() {
            must_exist("responses file", p)?;
        }
        Ok(())
    }

    fn validate_provider(&self) -> Result<(), PipelineError> {
        let p = &self.provider;
        match p.kind {
            ProviderKind::Mock => match &p.mock_dir {
                Some(d) if d.is_dir() => Ok(()),
                Some(d) => Err(PipelineError::Config(format!(
                    "mock_dir {} is not a directory",
                    d.display()
                ))),
                None => Err(PipelineError::Config("mock provider needs provider.mock_dir".into())),
            },
            ProviderKind::Remote if p.base_url.is_empty() => {
                Err(PipelineError::Config("remote provider needs provider.base_url".into()))
            }
            ProviderKind::Remote => Ok(()),
        }
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            retries: self.provider.retries,
            backoff_base_ms: self.provider.backoff_base_ms,
        }
    }

    fn api_key(&self) -> Option<String> {
        (!self.provider.api_key.is_empty()).then(|| self.provider.api_key.clone())
    }

    pub fn chat_client(&self) -> Result<ChatClient, PipelineError> {
        self.validate_provider()?;
        let p = &self.provider;
        let provider: Arc<dyn ChatProvider> = match p.kind {
            ProviderKind::Mock => Arc::new(MockDirProvider::new(p.mock_dir.clone().unwrap_or_default())),
            ProviderKind::Remote => Arc::new(RemoteChatProvider::new(
                &p.base_url,
                self.api_key(),
                Duration::from_secs(p.timeout_secs),
            )),
        };
        let cache = match &p.cache_dir {
            Some(d) => ResponseCache::on_disk(d),
            None => ResponseCache::in_memory(),
        };
        Ok(ChatClient::new(provider)
            .with_cache(cache)
            .with_retry(self.retry_policy())
            .with_max_in_flight(p.max_in_flight))
    }

    pub fn embedder(&self) -> Result<Box<dyn Embedder>, PipelineError> {
        let p = &self.provider;
        Ok(match p.embedder {
            EmbedderKind::Stub => Box::new(StubEmbedder { dim: p.embedding_dim }),
            EmbedderKind::Remote => {
                if p.base_url.is_empty() || p.embedding_model.is_empty() {
                    return Err(PipelineError::Config(
                        "remote embedder needs provider.base_url and provider.embedding_model".into(),
                    ));
                }
                Box::new(RemoteEmbedder::new(
                    &p.base_url,
                    &p.embedding_model,
                    self.api_key(),
                    p.embedding_dim,
                    self.retry_policy(),
                ))
            }
        })
    }
}
