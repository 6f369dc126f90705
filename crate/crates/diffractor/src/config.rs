//! Declarative run configuration.
//!
//! A flat `key = value` text file ('#' starts a comment) describing one
//! mechanism run: which mechanism and parameters, where the lists come from
//! (pre-built files, or embedding models plus seeds to build on the fly),
//! and the policies. CLI flags override file values.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::diffract::{CasePolicy, ConfigTag, Diffractor, ListBank, OovPolicy};
use crate::embedding::{load_embeddings, LoadOptions};
use crate::error::{Error, Result};
use crate::list::{build_list, Backend, WordList};
use crate::mechanisms::{MechanismConfig, MechanismKind, DEFAULT_BETA};

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mechanism: MechanismKind,
    pub epsilon: f64,
    pub beta: f64,
    pub master_seed: u64,
    /// Pre-built list files.
    pub lists: Vec<PathBuf>,
    /// Embedding models to build lists from, one list per (model, seed).
    pub embeddings: Vec<PathBuf>,
    pub seeds: Vec<u64>,
    pub limit: Option<usize>,
    pub backend: Backend,
    pub lowercase: bool,
    pub oov_policy: OovPolicy,
    pub case_policy: CasePolicy,
    pub config_tag: ConfigTag,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mechanism: MechanismKind::Geometric,
            epsilon: 1.0,
            beta: DEFAULT_BETA,
            master_seed: 0,
            lists: Vec::new(),
            embeddings: Vec::new(),
            seeds: vec![0],
            limit: None,
            backend: Backend::Exact,
            lowercase: true,
            oov_policy: OovPolicy::Passthrough,
            case_policy: CasePolicy::Lowercase,
            config_tag: ConfigTag::Custom,
            output: None,
        }
    }
}

fn parse_backend(s: &str) -> Result<Backend> {
    match s.to_ascii_lowercase().as_str() {
        "exact" => Ok(Backend::Exact),
        "approx" | "approximate" => Ok(Backend::Approximate { rho: 0.1 }),
        other => {
            if let Some(rho) = other
                .strip_prefix("approx:")
                .or_else(|| other.strip_prefix("approximate:"))
            {
                let rho: f64 = rho.parse().map_err(|_| {
                    Error::Config(vec![format!("backend: bad rho in {s:?}")])
                })?;
                if rho < 0.0 {
                    return Err(Error::Config(vec![
                        "backend: rho must be non-negative".to_string()
                    ]));
                }
                Ok(Backend::Approximate { rho })
            } else {
                Err(Error::Config(vec![format!(
                    "backend: unknown backend {s:?} (expected exact|approx[:rho])"
                )]))
            }
        }
    }
}

fn parse_paths(v: &str) -> Vec<PathBuf> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(PathBuf::from).collect()
}

impl RunConfig {
    /// Parse config text, collecting every field error before failing.
    pub fn parse_str(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut errors: Vec<String> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(format!("line {}: expected key = value", lineno + 1));
                continue;
            };
            let key = key.trim();
            let value = value.trim();
            let mut field_err = |msg: String| errors.push(msg);
            match key {
                "mechanism" => match MechanismKind::from_str(value) {
                    Ok(k) => cfg.mechanism = k,
                    Err(Error::Config(mut v)) => errors.append(&mut v),
                    Err(e) => field_err(e.to_string()),
                },
                "epsilon" => match value.parse::<f64>() {
                    Ok(e) => cfg.epsilon = e,
                    Err(_) => field_err(format!("epsilon: not a number: {value:?}")),
                },
                "beta" => match value.parse::<f64>() {
                    Ok(b) => cfg.beta = b,
                    Err(_) => field_err(format!("beta: not a number: {value:?}")),
                },
                "master_seed" => match value.parse::<u64>() {
                    Ok(s) => cfg.master_seed = s,
                    Err(_) => field_err(format!("master_seed: not an integer: {value:?}")),
                },
                "lists" => cfg.lists = parse_paths(value),
                "embeddings" => cfg.embeddings = parse_paths(value),
                "seeds" => {
                    let mut seeds = Vec::new();
                    let mut ok = true;
                    for s in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                        match s.parse::<u64>() {
                            Ok(v) => seeds.push(v),
                            Err(_) => {
                                field_err(format!("seeds: not an integer: {s:?}"));
                                ok = false;
                            }
                        }
                    }
                    if ok {
                        cfg.seeds = seeds;
                    }
                }
                "limit" => match value.parse::<usize>() {
                    Ok(l) if l > 0 => cfg.limit = Some(l),
                    _ => field_err(format!("limit: not a positive integer: {value:?}")),
                },
                "backend" => match parse_backend(value) {
                    Ok(b) => cfg.backend = b,
                    Err(Error::Config(mut v)) => errors.append(&mut v),
                    Err(e) => field_err(e.to_string()),
                },
                "lowercase" => match value.parse::<bool>() {
                    Ok(b) => cfg.lowercase = b,
                    Err(_) => field_err(format!("lowercase: expected true|false: {value:?}")),
                },
                "oov_policy" => match value.to_ascii_lowercase().as_str() {
                    "passthrough" => cfg.oov_policy = OovPolicy::Passthrough,
                    "drop" => cfg.oov_policy = OovPolicy::Drop,
                    other => field_err(format!(
                        "oov_policy: unknown policy {other:?} (expected passthrough|drop)"
                    )),
                },
                "case_policy" => match value.to_ascii_lowercase().as_str() {
                    "lowercase" => cfg.case_policy = CasePolicy::Lowercase,
                    "preserve" | "preserve-attempt" => {
                        cfg.case_policy = CasePolicy::PreserveAttempt
                    }
                    other => field_err(format!(
                        "case_policy: unknown policy {other:?} (expected lowercase|preserve)"
                    )),
                },
                "config_tag" => match ConfigTag::from_str(value) {
                    Ok(t) => cfg.config_tag = t,
                    Err(Error::Config(mut v)) => errors.append(&mut v),
                    Err(e) => field_err(e.to_string()),
                },
                "output" => cfg.output = Some(PathBuf::from(value)),
                other => field_err(format!("unknown key {other:?}")),
            }
        }
        if let Err(Error::Config(mut v)) = cfg.validate() {
            errors.append(&mut v);
        }
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.into(), source })?;
        Self::parse_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            errors.push(format!("epsilon: must be a positive finite real, got {}", self.epsilon));
        }
        if self.mechanism == MechanismKind::Tem1D && !(self.beta > 0.0 && self.beta < 0.5) {
            errors.push(format!("beta: must lie in (0, 0.5), got {}", self.beta));
        }
        if self.lists.is_empty() && self.embeddings.is_empty() {
            errors.push("lists/embeddings: at least one list source is required".to_string());
        }
        if !self.embeddings.is_empty() && self.seeds.is_empty() {
            errors.push("seeds: building from embeddings requires at least one seed".to_string());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn mechanism_config(&self) -> Result<MechanismConfig> {
        match self.mechanism {
            MechanismKind::Geometric => MechanismConfig::geometric(self.epsilon, self.master_seed),
            MechanismKind::Tem1D => {
                MechanismConfig::tem(self.epsilon, self.beta, self.master_seed)
            }
        }
    }

    /// Load every list file and build one list per (embedding, seed) pair.
    pub fn build_bank(&self) -> Result<ListBank> {
        let mut lists = Vec::new();
        for path in &self.lists {
            lists.push(WordList::load(path)?);
        }
        for path in &self.embeddings {
            let model = load_embeddings(
                path,
                LoadOptions { limit: self.limit, lowercase: self.lowercase },
            )?;
            for &seed in &self.seeds {
                lists.push(build_list(&model, seed, self.backend)?);
            }
        }
        ListBank::new(lists, self.config_tag)
    }

    /// Assemble the configured diffractor.
    pub fn diffractor(&self) -> Result<Diffractor> {
        let bank = self.build_bank()?;
        Ok(Diffractor::new(self.mechanism_config()?, bank)?
            .with_oov_policy(self.oov_policy)
            .with_case_policy(self.case_policy))
    }
}
