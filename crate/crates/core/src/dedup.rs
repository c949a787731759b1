//! Exact and near-duplicate removal.
//!
//! Near duplicates use word shingles, MinHash signatures built from
//! universal hash permutations `(a·x + b) mod (2^61 − 1)`, and LSH banding
//! to find candidate pairs. Candidates whose estimated Jaccard similarity
//! reaches the threshold are merged with union-find; the longest document of
//! each cluster survives.

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::ingest::Document;

const MERSENNE_61: u64 = (1 << 61) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DedupParams {
    pub shingle_words: usize,
    pub permutations: usize,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for DedupParams {
    fn default() -> Self {
        Self {
            shingle_words: 5,
            permutations: 128,
            threshold: 0.85,
            seed: 0x5eed_0001,
        }
    }
}

impl DedupParams {
    pub fn validate(&self) -> Result<()> {
        if self.shingle_words == 0 {
            return Err(Error::Config("shingle_words must be >= 1".into()));
        }
        if self.permutations == 0 {
            return Err(Error::Config("permutations must be >= 1".into()));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::Config(format!(
                "jaccard threshold must be in (0, 1], got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShingleSignature {
    pub doc_id: String,
    pub minhash: Vec<u64>,
    pub shingle_count: usize,
}

/// One removed document and the document that replaced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Removal {
    pub removed: String,
    pub kept: String,
}

#[derive(Debug, Clone)]
pub struct DedupOutcome {
    pub kept: Vec<Document>,
    pub removed: Vec<Removal>,
}

impl DedupOutcome {
    /// Tab-separated `removed<TAB>kept` lines.
    pub fn report(&self) -> String {
        self.removed
            .iter()
            .map(|r| format!("{}\t{}\n", r.removed, r.kept))
            .collect()
    }
}

fn normalized(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Keeps the first document of every group whose whitespace-normalized,
/// case-folded text hashes identically.
pub fn exact_dedup(docs: &[Document]) -> DedupOutcome {
    let mut first: HashMap<[u8; 32], usize> = HashMap::new();
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for (i, d) in docs.iter().enumerate() {
        let digest: [u8; 32] = Sha256::digest(normalized(d.text()).as_bytes()).into();
        match first.get(&digest) {
            Some(&k) => removed.push(Removal {
                removed: d.id.clone(),
                kept: docs[k].id.clone(),
            }),
            None => {
                first.insert(digest, i);
                kept.push(d.clone());
            }
        }
    }
    DedupOutcome { kept, removed }
}

/// Word shingles of the case-folded text. Texts shorter than one shingle
/// yield a single shingle of all their words.
pub fn word_shingles(text: &str, shingle_words: usize) -> Vec<String> {
    let words: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
    if words.len() <= shingle_words {
        return vec![words.join(" ")];
    }
    words.windows(shingle_words).map(|w| w.join(" ")).collect()
}

fn fnv1a(bytes: &[u8], seed: u64) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone)]
pub struct MinHasher {
    shingle_words: usize,
    seed: u64,
    coeffs: Vec<(u64, u64)>,
}

impl MinHasher {
    pub fn new(params: &DedupParams) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let coeffs = (0..params.permutations)
            .map(|_| (rng.random_range(1..MERSENNE_61), rng.random_range(0..MERSENNE_61)))
            .collect();
        Self {
            shingle_words: params.shingle_words,
            seed: params.seed,
            coeffs,
        }
    }

    pub fn permutations(&self) -> usize {
        self.coeffs.len()
    }

    pub fn signature(&self, doc_id: &str, text: &str) -> ShingleSignature {
        let shingles: HashSet<u64> = word_shingles(text, self.shingle_words)
            .iter()
            .map(|s| fnv1a(s.as_bytes(), self.seed) % MERSENNE_61)
            .collect();
        let minhash = self
            .coeffs
            .iter()
            .map(|&(a, b)| {
                shingles
                    .iter()
                    .map(|&x| ((u128::from(a) * u128::from(x) + u128::from(b)) % u128::from(MERSENNE_61)) as u64)
                    .min()
                    .unwrap_or(u64::MAX)
            })
            .collect();
        ShingleSignature {
            doc_id: doc_id.to_string(),
            minhash,
            shingle_count: shingles.len(),
        }
    }
}

/// Fraction of agreeing signature positions.
pub fn estimate_jaccard(a: &ShingleSignature, b: &ShingleSignature) -> f64 {
    assert_eq!(a.minhash.len(), b.minhash.len(), "signature lengths differ");
    if a.minhash.is_empty() {
        return 0.0;
    }
    let same = a.minhash.iter().zip(&b.minhash).filter(|(x, y)| x == y).count();
    same as f64 / a.minhash.len() as f64
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

fn rows_per_band(permutations: usize) -> usize {
    [4, 2, 1]
        .into_iter()
        .find(|r| permutations.is_multiple_of(*r))
        .unwrap_or(1)
}

/// Clusters documents with estimated Jaccard >= threshold and keeps one
/// representative per cluster: the longest text, ties broken by smallest id.
/// Survivors keep input order.
pub fn near_dedup(docs: &[Document], params: &DedupParams, exec: Exec) -> Result<DedupOutcome> {
    params.validate()?;
    let hasher = MinHasher::new(params);
    let sigs = exec::map(exec, docs, |d| hasher.signature(&d.id, d.text()));

    let rows = rows_per_band(params.permutations);
    let mut uf = UnionFind::new(docs.len());
    for band in 0..params.permutations / rows {
        let span = band * rows..(band + 1) * rows;
        let mut buckets: HashMap<&[u64], Vec<usize>> = HashMap::new();
        for (i, sig) in sigs.iter().enumerate() {
            let members = buckets.entry(&sig.minhash[span.clone()]).or_default();
            for &j in members.iter() {
                if uf.find(i) != uf.find(j) && estimate_jaccard(&sigs[i], &sigs[j]) >= params.threshold {
                    uf.union(i, j);
                }
            }
            members.push(i);
        }
    }

    let mut best: HashMap<usize, usize> = HashMap::new();
    for i in 0..docs.len() {
        let root = uf.find(i);
        let len = docs[i].text().chars().count();
        best.entry(root)
            .and_modify(|cur| {
                let cur_len = docs[*cur].text().chars().count();
                if len > cur_len || (len == cur_len && docs[i].id < docs[*cur].id) {
                    *cur = i;
                }
            })
            .or_insert(i);
    }

    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for (i, d) in docs.iter().enumerate() {
        let rep = best[&uf.find(i)];
        if rep == i {
            kept.push(d.clone());
        } else {
            removed.push(Removal {
                removed: d.id.clone(),
                kept: docs[rep].id.clone(),
            });
        }
    }
    Ok(DedupOutcome { kept, removed })
}
