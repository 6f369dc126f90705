//! The diffraction mechanism: perturb a word through every list that
//! contains it, then release exactly one of the per-list candidates,
//! selected uniformly at random.
//!
//! Only the selected candidate is released per word, so running the index
//! mechanism once per list costs no additional privacy budget; across lists
//! the output ratio is bounded by the worst per-list index distance (see
//! [`ListBank::d_max`]).

use std::borrow::Cow;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::list::WordList;
use crate::mechanisms::MechanismConfig;
use crate::rng::SeedStream;
use crate::tokenize::{join, tokenize};

/// List configuration label carried through CSV reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConfigTag {
    L0,
    L1,
    L2,
    #[default]
    Custom,
}

impl ConfigTag {
    pub fn tag(&self) -> &'static str {
        match self {
            ConfigTag::L0 => "L0",
            ConfigTag::L1 => "L1",
            ConfigTag::L2 => "L2",
            ConfigTag::Custom => "custom",
        }
    }
}

impl std::str::FromStr for ConfigTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "L0" => Ok(ConfigTag::L0),
            "L1" => Ok(ConfigTag::L1),
            "L2" => Ok(ConfigTag::L2),
            "CUSTOM" => Ok(ConfigTag::Custom),
            other => Err(Error::Config(vec![format!(
                "config_tag: unknown tag {other:?} (expected L0|L1|L2|custom)"
            )])),
        }
    }
}

/// A non-empty collection of word lists. Lists may have differing
/// vocabularies; a word is diffracted through the subset of lists that
/// contain it.
#[derive(Debug, Clone)]
pub struct ListBank {
    lists: Vec<WordList>,
    tag: ConfigTag,
}

impl ListBank {
    pub fn new(lists: Vec<WordList>, tag: ConfigTag) -> Result<Self> {
        if lists.is_empty() {
            return Err(Error::Contract("a list bank needs at least one list".into()));
        }
        Ok(ListBank { lists, tag })
    }

    pub fn lists(&self) -> &[WordList] {
        &self.lists
    }

    pub fn tag(&self) -> ConfigTag {
        self.tag
    }

    /// Sorted union of the vocabularies of all lists.
    pub fn vocabulary_union(&self) -> Vec<&str> {
        let mut union: Vec<&str> =
            self.lists.iter().flat_map(|l| l.words().iter().map(|s| s.as_str())).collect();
        union.sort_unstable();
        union.dedup();
        union
    }

    /// Maximum index distance between two words over the lists containing
    /// both. Errors when no list contains both.
    pub fn d_max(&self, w: &str, w2: &str) -> Result<usize> {
        let mut best: Option<usize> = None;
        for list in &self.lists {
            if let (Some(i), Some(j)) = (list.index_of(w), list.index_of(w2)) {
                let d = i.abs_diff(j);
                best = Some(best.map_or(d, |b| b.max(d)));
            }
        }
        best.ok_or_else(|| Error::Membership(format!("{w} / {w2} share no list")))
    }

    /// Sum of per-position `d_max` between two equal-length sentences.
    pub fn sentence_distance<S: AsRef<str>>(&self, s: &[S], s2: &[S]) -> Result<usize> {
        if s.len() != s2.len() {
            return Err(Error::Contract(format!(
                "sentence distance requires equal lengths, got {} and {}",
                s.len(),
                s2.len()
            )));
        }
        let mut total = 0;
        for (a, b) in s.iter().zip(s2) {
            total += self.d_max(a.as_ref(), b.as_ref())?;
        }
        Ok(total)
    }
}

/// What to do with words found in no list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OovPolicy {
    /// Emit the word unchanged (recorded so accounting can exclude it).
    #[default]
    Passthrough,
    /// Remove the token from the output.
    Drop,
}

/// How to normalize words before list lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CasePolicy {
    /// Lowercase before lookup; output keeps the list's (lowercase) form.
    #[default]
    Lowercase,
    /// Look the word up as written.
    PreserveAttempt,
}

/// One perturbed token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerturbationRecord {
    pub original: String,
    pub output: String,
    /// Position in the bank of the list whose candidate was released.
    pub chosen_list: Option<usize>,
    pub was_oov: bool,
    /// Per-list candidates, retained only in debug mode.
    pub candidates: Option<Vec<(usize, String)>>,
}

/// The configured mechanism: bank + index mechanism + policies.
#[derive(Debug, Clone)]
pub struct Diffractor {
    mechanism: MechanismConfig,
    bank: ListBank,
    oov_policy: OovPolicy,
    case_policy: CasePolicy,
    /// Retain per-list candidates in each record (debug mode).
    keep_candidates: bool,
}

impl Diffractor {
    pub fn new(mechanism: MechanismConfig, bank: ListBank) -> Result<Self> {
        mechanism.validate()?;
        Ok(Diffractor {
            mechanism,
            bank,
            oov_policy: OovPolicy::default(),
            case_policy: CasePolicy::default(),
            keep_candidates: false,
        })
    }

    pub fn with_oov_policy(mut self, p: OovPolicy) -> Self {
        self.oov_policy = p;
        self
    }

    pub fn with_case_policy(mut self, p: CasePolicy) -> Self {
        self.case_policy = p;
        self
    }

    pub fn with_candidates(mut self, keep: bool) -> Self {
        self.keep_candidates = keep;
        self
    }

    pub fn bank(&self) -> &ListBank {
        &self.bank
    }

    pub fn mechanism(&self) -> &MechanismConfig {
        &self.mechanism
    }

    pub fn oov_policy(&self) -> OovPolicy {
        self.oov_policy
    }

    /// Stream factory seeded by the mechanism's master seed.
    pub fn seeds(&self) -> SeedStream {
        SeedStream::new(self.mechanism.rng_seed)
    }

    fn normalize<'a>(&self, word: &'a str) -> Cow<'a, str> {
        match self.case_policy {
            CasePolicy::Lowercase if word.chars().any(char::is_uppercase) => {
                Cow::Owned(word.to_lowercase())
            }
            _ => Cow::Borrowed(word),
        }
    }

    /// Run the index mechanism through every containing list and release one
    /// candidate chosen uniformly at random. Returns `(chosen list, chosen
    /// index)` or `None` when the word is out of vocabulary everywhere.
    ///
    /// The uniform pick is drawn up front (it is independent of the
    /// per-list outputs), which keeps this path allocation-free; the
    /// mechanism still runs once per containing list, and exactly one
    /// output leaves this function.
    fn diffract(&self, word: &str, rng: &mut ChaCha8Rng) -> Option<(usize, usize)> {
        let containing = self.bank.lists.iter().filter(|l| l.contains(word)).count();
        if containing == 0 {
            return None;
        }
        let pick = rng.random_range(0..containing);
        let mut chosen: Option<(usize, usize)> = None;
        let mut k = 0;
        for (l, list) in self.bank.lists.iter().enumerate() {
            if let Some(idx) = list.index_of(word) {
                let noisy = self
                    .mechanism
                    .perturb_index(idx, list.len(), rng)
                    .expect("member index is in range");
                if k == pick {
                    chosen = Some((l, noisy));
                }
                k += 1;
            }
        }
        chosen
    }

    /// Perturb one word, producing a full record.
    pub fn perturb_word(&self, word: &str, rng: &mut ChaCha8Rng) -> PerturbationRecord {
        let normalized = self.normalize(word);
        let candidates = if self.keep_candidates {
            let mut all = Vec::new();
            for (l, list) in self.bank.lists.iter().enumerate() {
                if let Some(idx) = list.index_of(&normalized) {
                    // Draw debug candidates on a forked ChaCha stream; the
                    // main stream is untouched, so the released output is
                    // identical with and without debug mode.
                    let mut fork = rng.clone();
                    fork.set_stream(rng.get_stream().wrapping_add(1 + l as u64));
                    let noisy = self
                        .mechanism
                        .perturb_index(idx, list.len(), &mut fork)
                        .expect("member index is in range");
                    all.push((l, list.word(noisy).to_string()));
                }
            }
            Some(all)
        } else {
            None
        };
        match self.diffract(&normalized, rng) {
            Some((l, idx)) => PerturbationRecord {
                original: word.to_string(),
                output: self.bank.lists[l].word(idx).to_string(),
                chosen_list: Some(l),
                was_oov: false,
                candidates,
            },
            None => PerturbationRecord {
                original: word.to_string(),
                output: match self.oov_policy {
                    OovPolicy::Passthrough => word.to_string(),
                    OovPolicy::Drop => String::new(),
                },
                chosen_list: None,
                was_oov: true,
                candidates: None,
            },
        }
    }

    /// Allocation-free perturbation path used by benchmarks: the returned
    /// token is borrowed from the bank (or is the input itself on OOV
    /// passthrough). Case normalization is skipped, so inputs must already
    /// be in vocabulary form.
    pub fn perturb_word_borrowed<'a>(&'a self, word: &'a str, rng: &mut ChaCha8Rng) -> &'a str {
        match self.diffract(word, rng) {
            Some((l, idx)) => self.bank.lists[l].word(idx),
            None => match self.oov_policy {
                OovPolicy::Passthrough => word,
                OovPolicy::Drop => "",
            },
        }
    }

    /// Perturb a line of text. Word tokens are perturbed independently, each
    /// with its own RNG stream derived from `(line_index, token_index)`;
    /// punctuation and numeric tokens pass through unchanged. Output tokens
    /// are joined with single spaces. Token count is preserved under the
    /// passthrough OOV policy; the count itself is inherently visible to an
    /// observer.
    pub fn perturb_text(&self, text: &str, line_index: u64) -> (String, Vec<PerturbationRecord>) {
        let seeds = self.seeds();
        let tokens = tokenize(text);
        let mut records = Vec::new();
        let mut out = Vec::with_capacity(tokens.len());
        for (t, token) in tokens.into_iter().enumerate() {
            if token.is_word {
                let mut rng = seeds.rng(line_index, t as u64);
                let rec = self.perturb_word(&token.text, &mut rng);
                out.push(rec.output.clone());
                records.push(rec);
            } else {
                out.push(token.text);
            }
        }
        (join(out), records)
    }

    /// `d_max` after case normalization.
    pub fn d_max(&self, w: &str, w2: &str) -> Result<usize> {
        self.bank.d_max(&self.normalize(w), &self.normalize(w2))
    }

    /// Sentence distance after case normalization.
    pub fn sentence_distance<S: AsRef<str>>(&self, s: &[S], s2: &[S]) -> Result<usize> {
        if s.len() != s2.len() {
            return Err(Error::Contract(format!(
                "sentence distance requires equal lengths, got {} and {}",
                s.len(),
                s2.len()
            )));
        }
        let a: Vec<Cow<str>> = s.iter().map(|w| self.normalize(w.as_ref())).collect();
        let b: Vec<Cow<str>> = s2.iter().map(|w| self.normalize(w.as_ref())).collect();
        let mut total = 0;
        for (x, y) in a.iter().zip(&b) {
            total += self.bank.d_max(x, y)?;
        }
        Ok(total)
    }
}
