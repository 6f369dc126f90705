//! One-dimensional word lists.
//!
//! A list is a permutation of an embedding vocabulary laid out so that
//! neighboring indices hold words that are close in the original embedding
//! space. Construction chains greedily: start from a random seed word and
//! repeatedly append the nearest not-yet-used word to the last appended one.
//! The list realizes the word→index map and its inverse; the index distance
//! `|i - j|` is the metric every mechanism in this crate is calibrated to.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embedding::{euclidean_sq, EmbeddingModel};
use crate::error::{Error, Result};
use crate::knn::KdTree;

/// Nearest-neighbor backend for list construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend {
    /// Linear scan over the remaining words at every step. Deterministic;
    /// ties break toward the smallest original vocabulary index.
    Exact,
    /// Kd-tree search returning a word within `(1 + rho)` of the true
    /// nearest remaining distance.
    Approximate { rho: f64 },
}

impl Backend {
    pub fn tag(&self) -> String {
        match self {
            Backend::Exact => "exact".to_string(),
            Backend::Approximate { rho } => format!("approximate(rho={rho})"),
        }
    }
}

/// Metadata persisted with every list file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListMeta {
    pub source_model: String,
    pub seed_word: String,
    pub rng_seed: u64,
    pub metric: String,
    pub backend: String,
    pub checksum: String,
}

/// An ordered permutation of a vocabulary with its exact inverse map.
#[derive(Debug, Clone)]
pub struct WordList {
    words: Vec<String>,
    index: HashMap<String, usize>,
    meta: ListMeta,
}

impl PartialEq for WordList {
    fn eq(&self, other: &Self) -> bool {
        self.words == other.words && self.meta == other.meta
    }
}

fn checksum_of(words: &[String]) -> String {
    let mut hasher = Sha256::new();
    for w in words {
        hasher.update(w.as_bytes());
        hasher.update(b"\n");
    }
    format!("sha256:{:x}", hasher.finalize())
}

impl WordList {
    fn from_order(words: Vec<String>, mut meta: ListMeta) -> Result<Self> {
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if w.is_empty() {
                return Err(Error::Format(format!("empty token at index {i}")));
            }
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate token {w:?}")));
            }
        }
        meta.checksum = checksum_of(&words);
        Ok(WordList { words, index, meta })
    }

    /// A list in the given explicit order. Used for hand-built fixtures and
    /// for benchmarks where the chaining order is irrelevant. Unlike
    /// [`build_list`] this permits degenerate single-word lists.
    pub fn from_words(source: impl Into<String>, words: Vec<String>) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::Contract("a list needs at least 1 word".into()));
        }
        let seed_word = words[0].clone();
        Self::from_order(
            words,
            ListMeta {
                source_model: source.into(),
                seed_word,
                rng_seed: 0,
                metric: "euclidean".into(),
                backend: "manual".into(),
                checksum: String::new(),
            },
        )
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, idx: usize) -> &str {
        &self.words[idx]
    }

    pub fn meta(&self) -> &ListMeta {
        &self.meta
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// Position of `word`, i.e. the forward map of the list.
    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Index distance `|i - j|` between two member words.
    pub fn distance(&self, w: &str, w2: &str) -> Result<usize> {
        let i = self.index_of(w).ok_or_else(|| Error::Membership(w.into()))?;
        let j = self.index_of(w2).ok_or_else(|| Error::Membership(w2.into()))?;
        Ok(i.abs_diff(j))
    }

    /// Write the list: one metadata line, one token per line in index order,
    /// one trailing integrity checksum line.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io_err = |source| Error::Io { path: path.into(), source };
        let file = File::create(path).map_err(io_err)?;
        let mut out = BufWriter::new(file);
        let meta = serde_json::to_string(&self.meta)
            .expect("list metadata always serializes");
        writeln!(out, "{meta}").map_err(io_err)?;
        for w in &self.words {
            writeln!(out, "{w}").map_err(io_err)?;
        }
        writeln!(out, "{}", self.meta.checksum).map_err(io_err)?;
        out.flush().map_err(io_err)
    }

    /// Read a list produced by [`WordList::save`], verifying its checksum.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| Error::Io { path: path.into(), source })?;
        let mut lines = Vec::new();
        for line in BufReader::new(file).lines() {
            lines.push(line.map_err(|source| Error::Io { path: path.into(), source })?);
        }
        while lines.last().is_some_and(|l| l.is_empty()) {
            lines.pop();
        }
        if lines.len() < 3 {
            return Err(Error::Corrupt("file too short for metadata + words + checksum".into()));
        }
        let meta: ListMeta = serde_json::from_str(&lines[0])
            .map_err(|e| Error::Format(format!("bad metadata record: {e}")))?;
        let trailer = lines.last().expect("len checked");
        if !trailer.starts_with("sha256:") {
            return Err(Error::Corrupt("missing trailing checksum record".into()));
        }
        let words: Vec<String> = lines[1..lines.len() - 1].to_vec();
        let computed = checksum_of(&words);
        if computed != *trailer {
            return Err(Error::Corrupt(format!(
                "checksum mismatch: file says {trailer}, contents hash to {computed}"
            )));
        }
        if meta.checksum != computed {
            return Err(Error::Corrupt("metadata checksum disagrees with contents".into()));
        }
        let list = Self::from_order(words, meta)?;
        Ok(list)
    }
}

/// Build a list by greedy nearest-neighbor chaining from a uniformly random
/// seed word. Deterministic given `(model, rng_seed)` with the exact backend.
pub fn build_list(model: &EmbeddingModel, rng_seed: u64, backend: Backend) -> Result<WordList> {
    if model.len() < 2 {
        return Err(Error::Contract("model must contain at least 2 words".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let start = rng.random_range(0..model.len());
    chain(model, start, rng_seed, backend)
}

/// Build a list starting from an explicit seed word.
pub fn build_list_from(
    model: &EmbeddingModel,
    seed_word: &str,
    backend: Backend,
) -> Result<WordList> {
    if model.len() < 2 {
        return Err(Error::Contract("model must contain at least 2 words".into()));
    }
    let start = model
        .index_of(seed_word)
        .ok_or_else(|| Error::Membership(seed_word.into()))?;
    chain(model, start, 0, backend)
}

fn chain(model: &EmbeddingModel, start: usize, rng_seed: u64, backend: Backend) -> Result<WordList> {
    let order = match backend {
        Backend::Exact => chain_exact(model, start),
        Backend::Approximate { rho } => {
            if !(rho >= 0.0) {
                return Err(Error::Contract(format!("rho must be non-negative, got {rho}")));
            }
            chain_kdtree(model, start, rho)
        }
    };
    let words = order.iter().map(|&i| model.word(i as usize).to_string()).collect();
    WordList::from_order(
        words,
        ListMeta {
            source_model: model.name().to_string(),
            seed_word: model.word(start).to_string(),
            rng_seed,
            metric: "euclidean".into(),
            backend: backend.tag(),
            checksum: String::new(),
        },
    )
}

// Threshold below which the per-step scan is not worth parallelizing.
const PAR_SCAN_MIN: usize = 8192;

fn chain_exact(model: &EmbeddingModel, start: usize) -> Vec<u32> {
    let n = model.len();
    let mut order = Vec::with_capacity(n);
    let mut remaining: Vec<u32> = (0..n as u32).filter(|&i| i as usize != start).collect();
    let mut current = start;
    order.push(start as u32);
    while !remaining.is_empty() {
        let cv = model.vector(current);
        // Argmin by (distance, original index); the index component makes
        // tie-breaking deterministic under any reduction order.
        let key = |&p: &u32| (euclidean_sq(cv, model.vector(p as usize)), p);
        let best = if remaining.len() >= PAR_SCAN_MIN {
            *remaining
                .par_iter()
                .min_by(|a, b| key(a).partial_cmp(&key(b)).expect("finite distances"))
                .expect("remaining non-empty")
        } else {
            *remaining
                .iter()
                .min_by(|a, b| key(a).partial_cmp(&key(b)).expect("finite distances"))
                .expect("remaining non-empty")
        };
        let pos = remaining.iter().position(|&p| p == best).expect("best came from remaining");
        remaining.swap_remove(pos);
        order.push(best);
        current = best as usize;
    }
    order
}

fn chain_kdtree(model: &EmbeddingModel, start: usize, rho: f64) -> Vec<u32> {
    let n = model.len();
    let mut tree = KdTree::build(model, rho);
    let mut order = Vec::with_capacity(n);
    tree.remove(start);
    order.push(start as u32);
    let mut current = start;
    while tree.alive() > 0 {
        let next = tree
            .nearest(model.vector(current))
            .expect("tree has alive points");
        tree.remove(next);
        order.push(next as u32);
        current = next;
    }
    order
}
