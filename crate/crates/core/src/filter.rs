//! Keyword-based telecom relevance filtering.
//!
//! A document's relevance is summarized by the number of distinct lexicon
//! entries it mentions (`M`) and the keyword density `M / ln(N + 1)` where
//! `N` is its whitespace word count. Full terms match case-insensitively as
//! contiguous token sequences; abbreviations match case-sensitively, and
//! abbreviations on the exclusion list never match.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::ingest::Document;

/// The keyword selection criteria. Recorded per entry for documentation;
/// nothing classifies against them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    DomainSpecificity,
    Frequency,
    Distinctiveness,
    Authority,
    Timeliness,
    Clarity,
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "domain-specificity" | "specificity" => Criterion::DomainSpecificity,
            "frequency" => Criterion::Frequency,
            "distinctiveness" => Criterion::Distinctiveness,
            "authority" | "standards" => Criterion::Authority,
            "timeliness" | "emerging" => Criterion::Timeliness,
            "clarity" => Criterion::Clarity,
            other => return Err(Error::Config(format!("unknown keyword criterion {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconEntry {
    pub term: String,
    pub abbreviations: Vec<String>,
    pub criteria: BTreeSet<Criterion>,
}

#[derive(Debug, Clone)]
pub struct KeywordLexicon {
    entries: Vec<LexiconEntry>,
    excluded: BTreeSet<String>,
    by_term: HashMap<String, Vec<(usize, Vec<String>)>>,
    by_abbrev: HashMap<String, Vec<(usize, Vec<String>)>>,
}

/// Tokens used for matching: whitespace-separated words with surrounding
/// punctuation removed (`"(5G),"` becomes `"5G"`; `"802.11"` is kept whole).
pub fn match_tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !(c.is_alphanumeric() || c == '+' || c == '#')))
        .filter(|w| !w.is_empty())
}

impl KeywordLexicon {
    pub fn new(entries: Vec<LexiconEntry>, excluded: BTreeSet<String>) -> Result<Self> {
        let mut merged: Vec<LexiconEntry> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        for e in entries {
            let term = e.term.trim().to_string();
            if term.is_empty() {
                return Err(Error::Config("lexicon entry with empty term".into()));
            }
            let key = term.to_lowercase();
            match index.get(&key) {
                Some(&i) => {
                    let m = &mut merged[i];
                    for a in e.abbreviations {
                        if !m.abbreviations.contains(&a) {
                            m.abbreviations.push(a);
                        }
                    }
                    m.criteria.extend(e.criteria);
                }
                None => {
                    index.insert(key, merged.len());
                    let mut abbreviations: Vec<String> = Vec::new();
                    for a in e.abbreviations {
                        if !abbreviations.contains(&a) {
                            abbreviations.push(a);
                        }
                    }
                    merged.push(LexiconEntry {
                        term,
                        abbreviations,
                        criteria: e.criteria,
                    });
                }
            }
        }
        if merged.is_empty() {
            return Err(Error::Config("lexicon has no entries".into()));
        }

        let mut by_term: HashMap<String, Vec<(usize, Vec<String>)>> = HashMap::new();
        let mut by_abbrev: HashMap<String, Vec<(usize, Vec<String>)>> = HashMap::new();
        for (i, e) in merged.iter().enumerate() {
            let toks: Vec<String> = match_tokens(&e.term).map(str::to_lowercase).collect();
            if let Some(first) = toks.first() {
                by_term.entry(first.clone()).or_default().push((i, toks));
            }
            for a in &e.abbreviations {
                if excluded.contains(a) {
                    continue;
                }
                let toks: Vec<String> = match_tokens(a).map(str::to_string).collect();
                if let Some(first) = toks.first() {
                    by_abbrev.entry(first.clone()).or_default().push((i, toks));
                }
            }
        }
        Ok(Self {
            entries: merged,
            excluded,
            by_term,
            by_abbrev,
        })
    }

    /// Parses the tab-separated lexicon format plus an optional exclusion
    /// list (one abbreviation per line).
    pub fn parse(lexicon: &str, exclusions: Option<&str>) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in lexicon.lines().enumerate() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let term = cols.next().unwrap_or_default().trim();
            if term.is_empty() {
                return Err(Error::Config(format!("lexicon line {}: empty term", n + 1)));
            }
            let abbreviations = split_list(cols.next());
            let criteria = split_list(cols.next())
                .iter()
                .map(|c| c.parse())
                .collect::<Result<BTreeSet<Criterion>>>()?;
            entries.push(LexiconEntry {
                term: term.to_string(),
                abbreviations,
                criteria,
            });
        }
        let excluded = exclusions
            .map(|s| {
                s.lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .map(str::to_string)
                    .collect()
            })
            .unwrap_or_default();
        Self::new(entries, excluded)
    }

    pub fn load(path: &Path, exclusions: Option<&Path>) -> Result<Self> {
        let lex = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let excl = exclusions
            .map(|p| fs::read_to_string(p).map_err(|e| Error::io(p, e)))
            .transpose()?;
        Self::parse(&lex, excl.as_deref())
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn excluded(&self) -> &BTreeSet<String> {
        &self.excluded
    }

    /// Abbreviations of `entry` that are allowed to match.
    pub fn active_abbreviations<'a>(&'a self, entry: &'a LexiconEntry) -> impl Iterator<Item = &'a str> {
        entry
            .abbreviations
            .iter()
            .filter(|a| !self.excluded.contains(*a))
            .map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Indices of the entries mentioned in `text`.
    fn matched_entries(&self, text: &str) -> HashSet<usize> {
        let toks: Vec<&str> = match_tokens(text).collect();
        let lower: Vec<String> = toks.iter().map(|t| t.to_lowercase()).collect();
        let mut hits = HashSet::new();
        for i in 0..toks.len() {
            if let Some(cands) = self.by_term.get(&lower[i]) {
                for (entry, seq) in cands {
                    if lower.len() - i >= seq.len() && lower[i..i + seq.len()] == seq[..] {
                        hits.insert(*entry);
                    }
                }
            }
            if let Some(cands) = self.by_abbrev.get(toks[i]) {
                for (entry, seq) in cands {
                    if toks.len() - i >= seq.len() && toks[i..i + seq.len()].iter().zip(seq).all(|(a, b)| *a == b) {
                        hits.insert(*entry);
                    }
                }
            }
        }
        hits
    }
}

fn split_list(col: Option<&str>) -> Vec<String> {
    col.map(|c| {
        c.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect()
    })
    .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceReport {
    pub doc_id: String,
    pub unique_keywords: usize,
    pub total_words: usize,
    pub density: f64,
    pub matched_terms: BTreeSet<String>,
}

/// `m / ln(n + 1)`, defined as 0 for an empty text.
pub fn keyword_density(unique_keywords: usize, total_words: usize) -> f64 {
    if total_words == 0 {
        return 0.0;
    }
    unique_keywords as f64 / (total_words as f64 + 1.0).ln()
}

pub fn analyze_text(doc_id: &str, text: &str, lex: &KeywordLexicon) -> RelevanceReport {
    let hits = lex.matched_entries(text);
    let matched_terms: BTreeSet<String> = hits.iter().map(|&i| lex.entries[i].term.clone()).collect();
    let total_words = text.split_whitespace().count();
    let unique_keywords = matched_terms.len();
    RelevanceReport {
        doc_id: doc_id.to_string(),
        unique_keywords,
        total_words,
        density: keyword_density(unique_keywords, total_words),
        matched_terms,
    }
}

pub fn analyze_relevance(doc: &Document, lex: &KeywordLexicon) -> RelevanceReport {
    analyze_text(&doc.id, doc.text(), lex)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterThresholds {
    pub min_keywords: usize,
    pub min_density: f64,
}

impl Default for FilterThresholds {
    fn default() -> Self {
        Self {
            min_keywords: 2,
            min_density: 0.3,
        }
    }
}

impl FilterThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_density >= 0.0 && self.min_density.is_finite()) {
            return Err(Error::Config(format!(
                "min_density must be a non-negative number, got {}",
                self.min_density
            )));
        }
        Ok(())
    }

    /// Inclusive on both thresholds.
    pub fn accepts(&self, report: &RelevanceReport) -> bool {
        report.unique_keywords >= self.min_keywords && report.density >= self.min_density
    }
}

#[derive(Debug, Clone)]
pub struct FilterOutcome {
    pub kept: Vec<Document>,
    /// One report per input document, in input order.
    pub reports: Vec<RelevanceReport>,
}

pub fn filter_corpus(
    docs: &[Document],
    lex: &KeywordLexicon,
    thresholds: FilterThresholds,
    exec: Exec,
) -> Result<FilterOutcome> {
    thresholds.validate()?;
    let reports = exec::map(exec, docs, |d| analyze_relevance(d, lex));
    let kept = docs
        .iter()
        .zip(&reports)
        .filter(|(_, r)| thresholds.accepts(r))
        .map(|(d, _)| d.clone())
        .collect();
    Ok(FilterOutcome { kept, reports })
}
