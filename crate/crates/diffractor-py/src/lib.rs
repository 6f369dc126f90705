//! Python bindings: embedding models, word lists, the diffractor itself and
//! the exact-PMF helpers, exposed as the `diffractor_py` module.

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use pyo3::exceptions::{PyIOError, PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand_chacha::ChaCha8Rng;

use diffractor::diffract::{CasePolicy, ConfigTag, ListBank, OovPolicy, PerturbationRecord};
use diffractor::embedding::LoadOptions;
use diffractor::list::Backend;
use diffractor::mechanisms::MechanismConfig;
use diffractor::SeedStream;

fn to_py_err(e: diffractor::Error) -> PyErr {
    use diffractor::Error as E;
    match &e {
        E::Io { .. } => PyIOError::new_err(e.to_string()),
        E::Membership(_) => PyKeyError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_backend(backend: &str, rho: f64) -> PyResult<Backend> {
    match backend {
        "exact" => Ok(Backend::Exact),
        "approx" | "approximate" => Ok(Backend::Approximate { rho }),
        other => Err(PyValueError::new_err(format!(
            "unknown backend {other:?} (expected 'exact' or 'approx')"
        ))),
    }
}

/// A word embedding model loaded from a text-format file.
#[pyclass(name = "EmbeddingModel")]
struct PyEmbeddingModel {
    inner: diffractor::EmbeddingModel,
}

#[pymethods]
impl PyEmbeddingModel {
    /// Load a text-format embedding file (optional `count dim` header).
    #[staticmethod]
    #[pyo3(signature = (path, limit=None, lowercase=true))]
    fn load(path: PathBuf, limit: Option<usize>, lowercase: bool) -> PyResult<Self> {
        let inner = diffractor::load_embeddings(&path, LoadOptions { limit, lowercase })
            .map_err(to_py_err)?;
        Ok(PyEmbeddingModel { inner })
    }

    #[getter]
    fn name(&self) -> &str {
        self.inner.name()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn words(&self) -> Vec<String> {
        self.inner.words().to_vec()
    }

    /// Embedding row for a word, or None when out of vocabulary.
    fn vector_of(&self, word: &str) -> Option<Vec<f32>> {
        self.inner.vector_of(word).map(|v| v.to_vec())
    }

    fn __repr__(&self) -> String {
        format!(
            "EmbeddingModel(name={:?}, words={}, dim={})",
            self.inner.name(),
            self.inner.len(),
            self.inner.dim()
        )
    }
}

/// An ordered permutation of a vocabulary with its inverse index map.
#[pyclass(name = "WordList", from_py_object)]
#[derive(Clone)]
struct PyWordList {
    inner: diffractor::WordList,
}

#[pymethods]
impl PyWordList {
    /// Build by greedy nearest-neighbor chaining from a random seed word.
    #[staticmethod]
    #[pyo3(signature = (model, seed=0, backend="exact", rho=0.1))]
    fn build(model: &PyEmbeddingModel, seed: u64, backend: &str, rho: f64) -> PyResult<Self> {
        let backend = parse_backend(backend, rho)?;
        let inner = diffractor::build_list(&model.inner, seed, backend).map_err(to_py_err)?;
        Ok(PyWordList { inner })
    }

    /// Build starting from an explicit seed word.
    #[staticmethod]
    #[pyo3(signature = (model, seed_word, backend="exact", rho=0.1))]
    fn build_from(
        model: &PyEmbeddingModel,
        seed_word: &str,
        backend: &str,
        rho: f64,
    ) -> PyResult<Self> {
        let backend = parse_backend(backend, rho)?;
        let inner =
            diffractor::build_list_from(&model.inner, seed_word, backend).map_err(to_py_err)?;
        Ok(PyWordList { inner })
    }

    /// Construct directly from an ordered sequence of unique words.
    #[staticmethod]
    #[pyo3(signature = (words, source="manual"))]
    fn from_words(words: Vec<String>, source: &str) -> PyResult<Self> {
        let inner = diffractor::WordList::from_words(source, words).map_err(to_py_err)?;
        Ok(PyWordList { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = diffractor::WordList::load(&path).map_err(to_py_err)?;
        Ok(PyWordList { inner })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn words(&self) -> Vec<String> {
        self.inner.words().to_vec()
    }

    fn word_at(&self, index: usize) -> PyResult<String> {
        if index >= self.inner.len() {
            return Err(PyValueError::new_err(format!(
                "index {index} out of range for list of {}",
                self.inner.len()
            )));
        }
        Ok(self.inner.word(index).to_string())
    }

    fn index_of(&self, word: &str) -> Option<usize> {
        self.inner.index_of(word)
    }

    /// Index distance |i - j| between two member words.
    fn distance(&self, w: &str, w2: &str) -> PyResult<usize> {
        self.inner.distance(w, w2).map_err(to_py_err)
    }

    fn meta<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let m = self.inner.meta();
        let d = PyDict::new(py);
        d.set_item("source_model", &m.source_model)?;
        d.set_item("seed_word", &m.seed_word)?;
        d.set_item("rng_seed", m.rng_seed)?;
        d.set_item("metric", &m.metric)?;
        d.set_item("backend", &m.backend)?;
        d.set_item("checksum", &m.checksum)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("WordList(source={:?}, words={})", self.inner.meta().source_model, self.inner.len())
    }
}

fn record_to_dict<'py>(py: Python<'py>, r: &PerturbationRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("original", &r.original)?;
    d.set_item("output", &r.output)?;
    d.set_item("chosen_list", r.chosen_list)?;
    d.set_item("was_oov", r.was_oov)?;
    if let Some(cands) = &r.candidates {
        d.set_item("candidates", cands.clone())?;
    }
    Ok(d)
}

/// The configured mechanism: a bank of word lists plus an index mechanism.
///
/// Stateful: `perturb_word`/`perturb_text` advance an internal counter so
/// repeated calls see fresh randomness; `perturb_text_at(text, line)`
/// reproduces a specific line's output deterministically.
#[pyclass(name = "Diffractor")]
struct PyDiffractor {
    inner: diffractor::Diffractor,
    word_rng: Mutex<ChaCha8Rng>,
    next_line: AtomicU64,
}

#[pymethods]
impl PyDiffractor {
    #[new]
    #[pyo3(signature = (lists, mechanism="geometric", epsilon=1.0, beta=0.001, seed=0,
                        oov_policy="passthrough", case_policy="lowercase", config_tag="custom",
                        keep_candidates=false))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        lists: Vec<PyWordList>,
        mechanism: &str,
        epsilon: f64,
        beta: f64,
        seed: u64,
        oov_policy: &str,
        case_policy: &str,
        config_tag: &str,
        keep_candidates: bool,
    ) -> PyResult<Self> {
        let mech = match mechanism {
            "geometric" => MechanismConfig::geometric(epsilon, seed),
            "tem" => MechanismConfig::tem(epsilon, beta, seed),
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown mechanism {other:?} (expected 'geometric' or 'tem')"
                )))
            }
        }
        .map_err(to_py_err)?;
        let oov = match oov_policy {
            "passthrough" => OovPolicy::Passthrough,
            "drop" => OovPolicy::Drop,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown oov_policy {other:?} (expected 'passthrough' or 'drop')"
                )))
            }
        };
        let case = match case_policy {
            "lowercase" => CasePolicy::Lowercase,
            "preserve" => CasePolicy::PreserveAttempt,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown case_policy {other:?} (expected 'lowercase' or 'preserve')"
                )))
            }
        };
        let tag: ConfigTag = config_tag
            .parse()
            .map_err(|_| PyValueError::new_err(format!("unknown config_tag {config_tag:?}")))?;
        let bank = ListBank::new(lists.into_iter().map(|l| l.inner).collect(), tag)
            .map_err(to_py_err)?;
        let inner = diffractor::Diffractor::new(mech, bank)
            .map_err(to_py_err)?
            .with_oov_policy(oov)
            .with_case_policy(case)
            .with_candidates(keep_candidates);
        let word_rng = Mutex::new(inner.seeds().rng(u64::MAX, 0));
        Ok(PyDiffractor { inner, word_rng, next_line: AtomicU64::new(0) })
    }

    /// Perturb one word; returns a record dict.
    fn perturb_word<'py>(&self, py: Python<'py>, word: &str) -> PyResult<Bound<'py, PyDict>> {
        let mut rng = self.word_rng.lock().expect("rng lock");
        let rec = self.inner.perturb_word(word, &mut rng);
        record_to_dict(py, &rec)
    }

    /// Perturb a line of text; consumes the next line index.
    fn perturb_text(&self, text: &str) -> String {
        let line = self.next_line.fetch_add(1, Ordering::Relaxed);
        self.inner.perturb_text(text, line).0
    }

    /// Perturb a line at an explicit line index (deterministic).
    fn perturb_text_at<'py>(
        &self,
        py: Python<'py>,
        text: &str,
        line: u64,
    ) -> PyResult<(String, Vec<Bound<'py, PyDict>>)> {
        let (out, recs) = self.inner.perturb_text(text, line);
        let dicts =
            recs.iter().map(|r| record_to_dict(py, r)).collect::<PyResult<Vec<_>>>()?;
        Ok((out, dicts))
    }

    /// Maximum index distance between two words across containing lists.
    fn d_max(&self, w: &str, w2: &str) -> PyResult<usize> {
        self.inner.d_max(w, w2).map_err(to_py_err)
    }

    /// Sum of per-position d_max between equal-length sentences.
    fn sentence_distance(&self, s: Vec<String>, s2: Vec<String>) -> PyResult<usize> {
        self.inner.sentence_distance(&s, &s2).map_err(to_py_err)
    }

    /// Closed-form probability that a word is returned unperturbed.
    fn expected_n_w(&self, word: &str) -> PyResult<f64> {
        diffractor::expected_n_w(&self.inner, word).map_err(to_py_err)
    }

    /// Monte Carlo deniability stats over sampled vocabulary words.
    #[pyo3(signature = (sample_size=100, trials=100, sample_seed=0))]
    fn estimate_deniability<'py>(
        &self,
        py: Python<'py>,
        sample_size: usize,
        trials: usize,
        sample_seed: u64,
    ) -> PyResult<(Vec<Bound<'py, PyDict>>, Bound<'py, PyDict>)> {
        let (rows, agg) =
            diffractor::estimate_deniability(&self.inner, sample_size, trials, sample_seed)
                .map_err(to_py_err)?;
        let mut dicts = Vec::with_capacity(rows.len());
        for r in &rows {
            let d = PyDict::new(py);
            d.set_item("word", &r.word)?;
            d.set_item("epsilon", r.epsilon)?;
            d.set_item("trials", r.trials)?;
            d.set_item("n_w", r.n_w)?;
            d.set_item("s_w", r.s_w)?;
            dicts.push(d);
        }
        let a = PyDict::new(py);
        a.set_item("mean_n_w", agg.mean_n_w)?;
        a.set_item("mean_s_w", agg.mean_s_w)?;
        a.set_item("words", agg.words)?;
        a.set_item("trials", agg.trials)?;
        Ok((dicts, a))
    }

    fn __repr__(&self) -> String {
        format!(
            "Diffractor(mechanism={:?}, epsilon={}, lists={})",
            self.inner.mechanism().kind.tag(),
            self.inner.mechanism().epsilon,
            self.inner.bank().lists().len()
        )
    }
}

/// Draw `n` samples from the two-sided geometric noise distribution.
#[pyfunction]
#[pyo3(signature = (epsilon, n=1, seed=0))]
fn sample_two_sided_geometric(epsilon: f64, n: usize, seed: u64) -> PyResult<Vec<i64>> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(PyValueError::new_err("epsilon must be a positive finite real"));
    }
    let mut rng = SeedStream::new(seed).root();
    Ok((0..n)
        .map(|_| diffractor::mechanisms::sample_two_sided_geometric(epsilon, &mut rng))
        .collect())
}

/// Exact output distribution of the truncated geometric mechanism.
#[pyfunction]
fn geometric_exact_pmf(index: usize, epsilon: f64, v: usize) -> PyResult<Vec<f64>> {
    if v == 0 || index >= v {
        return Err(PyValueError::new_err("index out of range"));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(PyValueError::new_err("epsilon must be a positive finite real"));
    }
    Ok(diffractor::mechanisms::geometric_exact_pmf(index, epsilon, v))
}

/// Exact output distribution of the 1-D truncated exponential mechanism.
#[pyfunction]
fn tem_exact_pmf(index: usize, epsilon: f64, beta: f64, v: usize) -> PyResult<Vec<f64>> {
    if v == 0 || index >= v {
        return Err(PyValueError::new_err("index out of range"));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(PyValueError::new_err("epsilon must be a positive finite real"));
    }
    if !(beta > 0.0 && beta < 0.5) {
        return Err(PyValueError::new_err("beta must lie in (0, 0.5)"));
    }
    Ok(diffractor::mechanisms::tem_exact_pmf(index, epsilon, beta, v))
}

/// TEM truncation threshold for the given parameters.
#[pyfunction]
fn tem_gamma(epsilon: f64, beta: f64, v: usize) -> PyResult<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(PyValueError::new_err("epsilon must be a positive finite real"));
    }
    if !(beta > 0.0 && beta < 0.5) {
        return Err(PyValueError::new_err("beta must lie in (0, 0.5)"));
    }
    Ok(diffractor::mechanisms::tem_gamma(epsilon, beta, v))
}

/// Tokenize a line the way `perturb_text` does: `(token, is_word)` pairs.
#[pyfunction]
fn tokenize(text: &str) -> Vec<(String, bool)> {
    diffractor::tokenize::tokenize(text).into_iter().map(|t| (t.text, t.is_word)).collect()
}

#[pymodule]
fn diffractor_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEmbeddingModel>()?;
    m.add_class::<PyWordList>()?;
    m.add_class::<PyDiffractor>()?;
    m.add_function(wrap_pyfunction!(sample_two_sided_geometric, m)?)?;
    m.add_function(wrap_pyfunction!(geometric_exact_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(tem_exact_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(tem_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    Ok(())
}
