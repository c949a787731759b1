//! Document cleaning: markup and table removal, URL removal, boilerplate and
//! reference-section stripping, document-kind screening and segmentation.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    #[serde(rename = "standard-3gpp")]
    Standard3gpp,
    StandardIeee,
    Paper,
    Book,
    Patent,
    Stackexchange,
    Wiki,
    Code,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Standard3gpp => "standard-3gpp",
            Source::StandardIeee => "standard-ieee",
            Source::Paper => "paper",
            Source::Book => "book",
            Source::Patent => "patent",
            Source::Stackexchange => "stackexchange",
            Source::Wiki => "wiki",
            Source::Code => "code",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One line of a corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub source: Source,
    pub text: String,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub source: Source,
    pub raw: String,
    pub cleaned: Option<String>,
    pub meta: BTreeMap<String, String>,
}

impl Document {
    pub fn new(id: impl Into<String>, source: Source, raw: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            source,
            raw: raw.into(),
            cleaned: None,
            meta: BTreeMap::new(),
        }
    }

    /// A document whose text is already cleaned (e.g. read back from a
    /// cleaned corpus file).
    pub fn cleaned(id: impl Into<String>, source: Source, text: impl Into<String>) -> Self {
        let text = text.into();
        Self {
            id: id.into(),
            source,
            raw: text.clone(),
            cleaned: Some(text),
            meta: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: &str) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    /// Cleaned text, or the raw text when cleaning has not run.
    pub fn text(&self) -> &str {
        self.cleaned.as_deref().unwrap_or(&self.raw)
    }

    pub fn from_raw_record(rec: CorpusRecord) -> Self {
        Self {
            id: rec.id,
            source: rec.source,
            raw: rec.text,
            cleaned: None,
            meta: rec.meta,
        }
    }

    pub fn from_cleaned_record(rec: CorpusRecord) -> Self {
        Self {
            id: rec.id,
            source: rec.source,
            raw: rec.text.clone(),
            cleaned: Some(rec.text),
            meta: rec.meta,
        }
    }

    /// Record carrying the cleaned text (raw text when uncleaned).
    pub fn to_record(&self) -> CorpusRecord {
        CorpusRecord {
            id: self.id.clone(),
            source: self.source,
            text: self.text().to_string(),
            meta: self.meta.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub doc_id: String,
    pub index: usize,
    pub text: String,
    pub word_count: usize,
}

/// Ensures ids are non-empty and unique within a corpus.
pub fn validate_corpus_ids(docs: &[Document]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for d in docs {
        if d.id.is_empty() {
            return Err(Error::Invalid("document with empty id".into()));
        }
        if !seen.insert(d.id.as_str()) {
            return Err(Error::Invalid(format!("duplicate document id {:?}", d.id)));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Markup

static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<[A-Za-z/!?][^<>]*>").unwrap());
static TAG_NAME: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^</?\s*([A-Za-z][A-Za-z0-9]*)").unwrap());
static DANGLING_TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<([A-Za-z/!?][^<>]*)(<|$)").unwrap());

const BLOCK_TAGS: &[&str] = &[
    "address",
    "article",
    "aside",
    "blockquote",
    "br",
    "dd",
    "div",
    "dl",
    "dt",
    "figcaption",
    "figure",
    "footer",
    "h1",
    "h2",
    "h3",
    "h4",
    "h5",
    "h6",
    "header",
    "hr",
    "li",
    "main",
    "nav",
    "ol",
    "p",
    "pre",
    "section",
    "td",
    "th",
    "tr",
    "ul",
];

/// Elements removed together with their content.
const DROPPED_ELEMENTS: &[&str] = &["table", "script", "style"];

/// Removes markup tags, HTML comments and whole tables. Text outside tags
/// keeps its order; block-level tags become line breaks. Input without any
/// markup is returned unchanged.
pub fn strip_markup(raw: &str) -> String {
    let mut cur = raw.to_string();
    let mut changed = false;
    loop {
        let mut next = remove_comments(&cur);
        for name in DROPPED_ELEMENTS {
            next = remove_element(&next, name);
        }
        next = TAG
            .replace_all(&next, |caps: &regex::Captures| {
                let tag = &caps[0];
                let is_block = TAG_NAME
                    .captures(tag)
                    .map(|c| BLOCK_TAGS.contains(&c[1].to_ascii_lowercase().as_str()))
                    .unwrap_or(false);
                if is_block {
                    "\n"
                } else {
                    ""
                }
            })
            .into_owned();
        // Unterminated tags: drop the opening bracket only.
        next = DANGLING_TAG.replace_all(&next, "$1$2").into_owned();
        next = next.replace("&nbsp;", " ");
        if next == cur {
            break;
        }
        changed = true;
        cur = next;
    }
    if changed {
        normalize_lines(&cur)
    } else {
        cur
    }
}

fn remove_comments(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(start) = rest.find("<!--") {
        out.push_str(&rest[..start]);
        match rest[start + 4..].find("-->") {
            Some(end) => rest = &rest[start + 4 + end + 3..],
            None => {
                // unterminated comment: drop the marker, keep the text
                rest = &rest[start + 4..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// Removes `<name ...> ... </name>` blocks, honoring nesting. An opening tag
/// without a matching close is left for the generic tag stripper.
fn remove_element(s: &str, name: &str) -> String {
    let lower = s.to_ascii_lowercase();
    let open = format!("<{name}");
    let close = format!("</{name}");
    let is_tag_at = |pat: &str, i: usize| -> bool {
        lower[i..].starts_with(pat)
            && lower[i + pat.len()..]
                .chars()
                .next()
                .is_some_and(|c| c == '>' || c == '/' || c.is_whitespace())
    };

    let mut out = String::with_capacity(s.len());
    let mut i = 0;
    let mut copied_to = 0;
    while let Some(off) = lower[i..].find(&open) {
        let start = i + off;
        if !is_tag_at(&open, start) {
            i = start + 1;
            continue;
        }
        // scan for the matching close
        let mut depth = 0usize;
        let mut j = start;
        let mut end = None;
        while j < lower.len() {
            if is_tag_at(&open, j) {
                depth += 1;
                j += open.len();
            } else if is_tag_at(&close, j) {
                depth -= 1;
                let gt = lower[j..].find('>').map(|g| j + g + 1);
                match gt {
                    Some(after) if depth == 0 => {
                        end = Some(after);
                        break;
                    }
                    Some(after) => j = after,
                    None => break,
                }
            } else {
                j += lower[j..].chars().next().map_or(1, char::len_utf8);
            }
        }
        match end {
            Some(after) => {
                out.push_str(&s[copied_to..start]);
                copied_to = after;
                i = after;
            }
            None => i = start + 1,
        }
    }
    out.push_str(&s[copied_to..]);
    out
}

/// Trims line ends, collapses runs of blank lines and trims the text.
fn normalize_lines(s: &str) -> String {
    let mut out: Vec<&str> = Vec::new();
    let mut blank = false;
    for line in s.lines() {
        let line = line.trim_end();
        if line.trim().is_empty() {
            if !blank && !out.is_empty() {
                out.push("");
            }
            blank = true;
        } else {
            out.push(line);
            blank = false;
        }
    }
    out.join("\n").trim().to_string()
}

// ---------------------------------------------------------------------------
// URLs

static URL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"https?://\S*").unwrap());

/// Removes every token starting with `http://` or `https://`. Whitespace on
/// an affected line collapses to single spaces; other lines are untouched.
pub fn remove_urls(text: &str) -> String {
    if !URL.is_match(text) {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    for piece in text.split_inclusive('\n') {
        let (line, nl) = match piece.strip_suffix('\n') {
            Some(l) => (l, "\n"),
            None => (piece, ""),
        };
        if URL.is_match(line) {
            let stripped = URL.replace_all(line, " ");
            let collapsed: Vec<&str> = stripped.split_whitespace().collect();
            out.push_str(&collapsed.join(" "));
        } else {
            out.push_str(line);
        }
        out.push_str(nl);
    }
    if text.lines().count() <= 1 {
        out.trim().to_string()
    } else {
        out
    }
}

// ---------------------------------------------------------------------------
// Boilerplate

/// Line patterns treated as headers, footers or captions.
#[derive(Debug, Clone)]
pub struct BoilerplatePatterns {
    patterns: Vec<Regex>,
}

pub const DEFAULT_BOILERPLATE: &[&str] = &[
    r"(?i)^page\s+\d+(\s+of\s+\d+)?$",
    r"(?i)^(figure|fig\.|table)\s+[0-9A-Z][\w.\-]*\s*[:.\-–]",
    r"(?i)^(3gpp|etsi)\s+t[sr]\s+\d{2,3}[ .]\d{3}.*(version|v)\s*\d+\.\d+\.\d+",
    r"(?i)^(©|\(c\)|copyright\b).*all rights reserved",
];

impl Default for BoilerplatePatterns {
    fn default() -> Self {
        Self::new(DEFAULT_BOILERPLATE).expect("default boilerplate patterns compile")
    }
}

impl BoilerplatePatterns {
    pub fn new<S: AsRef<str>>(patterns: &[S]) -> Result<Self> {
        let patterns = patterns
            .iter()
            .map(|p| {
                Regex::new(p.as_ref())
                    .map_err(|e| Error::Config(format!("bad boilerplate pattern {:?}: {e}", p.as_ref())))
            })
            .collect::<Result<_>>()?;
        Ok(Self { patterns })
    }

    fn matches(&self, line: &str) -> bool {
        let t = line.trim();
        !t.is_empty() && self.patterns.iter().any(|p| p.is_match(t))
    }
}

fn is_reference_heading(line: &str) -> bool {
    let t = line.trim();
    t.eq_ignore_ascii_case("references") || t.eq_ignore_ascii_case("bibliography")
}

/// Drops boilerplate lines and truncates at the first `References` or
/// `Bibliography` heading line.
pub fn strip_boilerplate(text: &str, patterns: &BoilerplatePatterns) -> String {
    let mut kept = Vec::new();
    let mut changed = false;
    for line in text.lines() {
        if is_reference_heading(line) {
            changed = true;
            break;
        }
        if patterns.matches(line) {
            changed = true;
            continue;
        }
        kept.push(line);
    }
    if changed {
        kept.join("\n").trim().to_string()
    } else {
        text.to_string()
    }
}

// ---------------------------------------------------------------------------
// Document screening

const EXCLUDED_KINDS: &[&str] = &["cr", "change-request", "change request", "draft", "template"];
const EXCLUDED_FILENAME_TOKENS: &[&str] = &["cr", "draft", "drafts", "template", "templates"];

/// False for change requests, drafts and templates, judged from the `kind`
/// and `filename` metadata.
pub fn should_keep_document(meta: &BTreeMap<String, String>) -> bool {
    let kind = meta.get("kind");
    let filename = meta.get("filename");
    if kind.is_none() && filename.is_none() {
        log::debug!("document without kind/filename metadata kept");
        return true;
    }
    if let Some(kind) = kind {
        let k = kind.trim().to_ascii_lowercase();
        if EXCLUDED_KINDS.contains(&k.as_str()) {
            return false;
        }
    }
    if let Some(name) = filename {
        let lower = name.to_ascii_lowercase();
        if lower
            .split(|c: char| !c.is_ascii_alphanumeric())
            .any(|tok| EXCLUDED_FILENAME_TOKENS.contains(&tok))
        {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Full cleaning pass

#[derive(Debug, Clone, Default)]
pub struct CleaningConfig {
    pub boilerplate: BoilerplatePatterns,
}

/// LaTeX sources (meta `format` of `latex`/`tex`, or a `.tex` filename).
/// Their `<` and `>` are math, not markup.
pub fn is_latex(meta: &BTreeMap<String, String>) -> bool {
    meta.get("format")
        .is_some_and(|f| f.eq_ignore_ascii_case("latex") || f.eq_ignore_ascii_case("tex"))
        || meta
            .get("filename")
            .is_some_and(|f| f.to_ascii_lowercase().ends_with(".tex"))
}

/// Runs markup, URL and boilerplate cleaning and stores the result in
/// `cleaned`. Source code keeps its angle brackets: only URL removal applies.
/// LaTeX skips tag stripping.
pub fn clean_document(doc: &Document, cfg: &CleaningConfig) -> Document {
    let cleaned = if doc.source == Source::Code {
        remove_urls(&doc.raw)
    } else {
        let text = if is_latex(&doc.meta) {
            doc.raw.clone()
        } else {
            strip_markup(&doc.raw)
        };
        let text = remove_urls(&text);
        strip_boilerplate(&text, &cfg.boilerplate)
    };
    Document {
        cleaned: Some(cleaned),
        ..doc.clone()
    }
}

// ---------------------------------------------------------------------------
// Segmentation

pub const DEFAULT_SEGMENT_TARGETS: &[usize] = &[64, 128, 256, 512];

/// Splits whitespace tokens into sentences: a token ending in `.`, `?` or `!`
/// closes a sentence when the next token starts with an uppercase letter.
fn sentences<'a>(words: &[&'a str]) -> Vec<Vec<&'a str>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    for (i, w) in words.iter().enumerate() {
        cur.push(*w);
        let ends = w.ends_with(['.', '?', '!']);
        let next_upper = words
            .get(i + 1)
            .and_then(|n| n.chars().next())
            .is_some_and(char::is_uppercase);
        if ends && next_upper {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Packs sentences greedily into segments. Segment `i` aims at
/// `targets[i % targets.len()]` words and never exceeds 1.5x that target;
/// sentences longer than the cap are cut into target-sized pieces.
pub fn segment_text(doc_id: &str, text: &str, targets: &[usize]) -> Result<Vec<Segment>> {
    if targets.is_empty() || targets.contains(&0) {
        return Err(Error::Invalid("segment targets must be non-empty and positive".into()));
    }
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.is_empty() {
        return Ok(Vec::new());
    }

    let mut segments: Vec<Vec<&str>> = Vec::new();
    let mut cur: Vec<&str> = Vec::new();
    let target_of = |i: usize| targets[i % targets.len()];
    let cap_of = |t: usize| t + t / 2;

    let mut pending: std::collections::VecDeque<Vec<&str>> = sentences(&words).into();
    while let Some(sent) = pending.pop_front() {
        let target = target_of(segments.len());
        let cap = cap_of(target);
        if cur.is_empty() {
            if sent.len() > cap {
                // split an overlong sentence; the remainder is re-queued
                let (head, tail) = sent.split_at(target);
                segments.push(head.to_vec());
                pending.push_front(tail.to_vec());
            } else {
                cur = sent;
            }
            continue;
        }
        let with = cur.len() + sent.len();
        let closer = with.abs_diff(target) < cur.len().abs_diff(target);
        if with <= cap && closer {
            cur.extend(sent);
        } else {
            segments.push(std::mem::take(&mut cur));
            pending.push_front(sent);
        }
    }
    if !cur.is_empty() {
        segments.push(cur);
    }

    Ok(segments
        .into_iter()
        .enumerate()
        .map(|(index, ws)| Segment {
            doc_id: doc_id.to_string(),
            index,
            word_count: ws.len(),
            text: ws.join(" "),
        })
        .collect())
}
