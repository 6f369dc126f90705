//! Text-format word embedding models.
//!
//! Reads the plain-text format shared by word2vec and GloVe distributions:
//! an optional `count dim` header line, then one `token v1 v2 ... vdim` row
//! per word. Vectors are stored row-major in one contiguous buffer.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

/// Squared Euclidean distance, accumulated in f64. All distance comparisons
/// in this crate go through this one definition so that the exact backend,
/// the kd-tree backend and the test oracles agree bit-for-bit.
pub fn euclidean_sq(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let d = *x as f64 - *y as f64;
        acc += d * d;
    }
    acc
}

/// Squared Euclidean distance between an f64 point and an f32 embedding row.
pub fn euclidean_sq_mixed(a: &[f64], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let d = *x - *y as f64;
        acc += d * d;
    }
    acc
}

/// Options for [`load_embeddings`].
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Keep at most this many words, in file order.
    pub limit: Option<usize>,
    /// Case-fold tokens; on duplicates the first occurrence wins.
    pub lowercase: bool,
}

/// An immutable embedding model: a vocabulary plus one dense vector per word.
#[derive(Debug, Clone)]
pub struct EmbeddingModel {
    name: String,
    dim: usize,
    words: Vec<String>,
    vectors: Vec<f32>,
    index: HashMap<String, usize>,
    lowercase: bool,
}

impl EmbeddingModel {
    /// Build a model from parallel word/vector arrays. `vectors` is row-major
    /// `words.len() * dim`. Intended for tests and synthetic benchmarks; file
    /// loading goes through [`load_embeddings`].
    pub fn from_parts(
        name: impl Into<String>,
        dim: usize,
        words: Vec<String>,
        vectors: Vec<f32>,
        lowercase: bool,
    ) -> Result<Self> {
        if words.len() < 2 {
            return Err(Error::EmptyModel);
        }
        if vectors.len() != words.len() * dim {
            return Err(Error::Format(format!(
                "vector buffer holds {} values, expected {} words x {} dims",
                vectors.len(),
                words.len(),
                dim
            )));
        }
        if let Some(bad) = vectors.iter().find(|v| !v.is_finite()) {
            return Err(Error::Format(format!("non-finite vector entry {bad}")));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate token {w:?}")));
            }
        }
        Ok(EmbeddingModel { name: name.into(), dim, words, vectors, index, lowercase })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
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

    /// Row for the word at vocabulary position `idx`.
    pub fn vector(&self, idx: usize) -> &[f32] {
        &self.vectors[idx * self.dim..(idx + 1) * self.dim]
    }

    /// Vocabulary position of `word` under the model's normalization policy.
    pub fn index_of(&self, word: &str) -> Option<usize> {
        if self.lowercase && word.chars().any(char::is_uppercase) {
            self.index.get(&word.to_lowercase()).copied()
        } else {
            self.index.get(word).copied()
        }
    }

    /// Embedding row for `word`, or `None` when out of vocabulary.
    pub fn vector_of(&self, word: &str) -> Option<&[f32]> {
        self.index_of(word).map(|i| self.vector(i))
    }
}

/// Load a text-format embedding file.
///
/// The first line may be a `count dim` header; every other line is a token
/// followed by exactly `dim` whitespace-separated decimal floats. The token
/// is everything before the first whitespace (tokens with internal
/// whitespace are unsupported by the format). NaN/Inf entries are an error.
pub fn load_embeddings(path: impl AsRef<Path>, opts: LoadOptions) -> Result<EmbeddingModel> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io { path: path.into(), source })?;
    let reader = BufReader::new(file);
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "embeddings".to_string());

    let mut dim: Option<usize> = None;
    let mut declared_count: Option<usize> = None;
    let mut words: Vec<String> = Vec::new();
    let mut vectors: Vec<f32> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let limit = opts.limit.unwrap_or(usize::MAX);
    if limit == 0 {
        return Err(Error::Contract("limit must be positive".into()));
    }

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|source| Error::Io { path: path.into(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let first = fields.next().expect("non-empty line has a first field");

        // A two-integer first line is the "count dim" header.
        if lineno == 1 {
            let rest: Vec<&str> = fields.clone().collect();
            if rest.len() == 1 {
                if let (Ok(count), Ok(d)) = (first.parse::<usize>(), rest[0].parse::<usize>()) {
                    declared_count = Some(count);
                    if d == 0 {
                        return Err(Error::Format("header declares dim 0".into()));
                    }
                    dim = Some(d);
                    continue;
                }
            }
        }

        let token = if opts.lowercase { first.to_lowercase() } else { first.to_string() };
        let mut row: Vec<f32> = Vec::with_capacity(dim.unwrap_or(8));
        for f in fields {
            let v: f32 = f.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("invalid float {f:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("non-finite vector entry {f:?}"),
                });
            }
            row.push(v);
        }
        if row.is_empty() {
            return Err(Error::Parse { line: lineno, msg: "row has no vector entries".into() });
        }
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(if declared_count.is_some() && words.is_empty() {
                    Error::Format(format!(
                        "row at line {lineno} has {} entries, header declares dim {d}",
                        row.len()
                    ))
                } else {
                    Error::Parse {
                        line: lineno,
                        msg: format!("expected {d} vector entries, found {}", row.len()),
                    }
                });
            }
            _ => {}
        }

        // Case folding can create duplicates; first occurrence wins.
        if index.contains_key(&token) {
            continue;
        }
        index.insert(token.clone(), words.len());
        words.push(token);
        vectors.extend_from_slice(&row);
        if words.len() >= limit {
            break;
        }
    }

    // the model invariant requires at least 2 words
    if words.len() < 2 {
        return Err(Error::EmptyModel);
    }
    let dim = dim.expect("dim set once any row parsed");
    Ok(EmbeddingModel { name, dim, words, vectors, index, lowercase: opts.lowercase })
}
