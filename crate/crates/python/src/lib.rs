//! Python bindings. Sentences, projected datapoints and reports cross the
//! boundary as plain dicts in the same shape as the JSONL files.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pythonize::{depythonize, pythonize};
use serde_json::Value;

use labelproj::backends::{
    self, CacheMode, DictionaryContextual, PhraseTable, PhraseTableTranslator, RemoteConfig, RemoteContextual,
    RemoteTranslator, ReplayCache,
};
use labelproj::baselines::{
    self, parse_pharaoh_line, project_alignment, project_constrained, project_independent, project_marker, tokenize,
    AlignmentSet, MarkerScheme,
};
use labelproj::contextual::{
    self as clap_core, generate_incontext_examples, project_clap, ClapConfig, InContextExample,
};
use labelproj::corpus::{
    nfc, parse_projected, read_corpus, write_corpus, write_projected, Corpus, LabeledSentence, Method,
    ProjectedDatapoint, RoleRegistry, TRIGGER_ROLE,
};
use labelproj::evaluation;
use labelproj::projection::{ProjectionError, RunContext};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn backend_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn projection_err(e: ProjectionError) -> PyErr {
    match e {
        ProjectionError::Backend { .. } => backend_err(e),
        ProjectionError::Invalid { .. } => value_err(e),
    }
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    pythonize(py, value).map_err(value_err)
}

fn from_py<T: serde::de::DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    depythonize(obj).map_err(value_err)
}

fn jsonl(values: &[Value]) -> String {
    values.iter().map(|v| v.to_string() + "\n").collect()
}

fn lines_to_py<'py>(py: Python<'py>, bytes: &[u8]) -> PyResult<Vec<Bound<'py, PyAny>>> {
    std::str::from_utf8(bytes)
        .map_err(value_err)?
        .lines()
        .map(|line| to_py(py, &serde_json::from_str::<Value>(line).map_err(value_err)?))
        .collect()
}

/// Parses sentence dicts into a validated corpus. Argument roles are taken
/// from `roles` when given, otherwise from the sentences themselves.
fn sentences_from_py(sentences: &Bound<'_, PyAny>, roles: Option<Vec<String>>) -> PyResult<Corpus> {
    let values: Vec<Value> = from_py(sentences)?;
    let roles = roles.unwrap_or_else(|| {
        let mut found: BTreeSet<String> = values
            .iter()
            .flat_map(|v| v["events"].as_array().cloned().unwrap_or_default())
            .flat_map(|e| e["arguments"].as_array().cloned().unwrap_or_default())
            .filter_map(|a| a["role"].as_str().map(str::to_string))
            .collect();
        found.insert(TRIGGER_ROLE.to_string());
        found.into_iter().collect()
    });
    let registry = RoleRegistry::new(roles).map_err(value_err)?;
    read_corpus(jsonl(&values).as_bytes(), &registry).map_err(value_err)
}

fn sentences_to_py<'py>(py: Python<'py>, corpus: &Corpus) -> PyResult<Vec<Bound<'py, PyAny>>> {
    let mut bytes = Vec::new();
    write_corpus(&mut bytes, corpus).map_err(value_err)?;
    lines_to_py(py, &bytes)
}

fn projected_from_py(projected: &Bound<'_, PyAny>) -> PyResult<Vec<ProjectedDatapoint>> {
    let values: Vec<Value> = from_py(projected)?;
    parse_projected(jsonl(&values).as_bytes()).map_err(value_err)
}

fn projected_to_py<'py>(py: Python<'py>, datapoints: &[ProjectedDatapoint]) -> PyResult<Vec<Bound<'py, PyAny>>> {
    let mut bytes = Vec::new();
    write_projected(&mut bytes, datapoints).map_err(value_err)?;
    lines_to_py(py, &bytes)
}

fn open_cache(path: Option<&str>, mode: &str) -> PyResult<Option<Arc<ReplayCache>>> {
    let mode: CacheMode = mode.parse().map_err(value_err)?;
    path.map(|p| ReplayCache::open(p, mode).map(Arc::new).map_err(backend_err))
        .transpose()
}

fn remote_config(endpoint: &str, id: Option<String>) -> RemoteConfig {
    let mut config = RemoteConfig::new(endpoint);
    config.id = id;
    config
}

/// Sentence-level machine translation backend.
#[pyclass(name = "Translator", frozen, from_py_object)]
#[derive(Clone)]
struct PyTranslator {
    inner: Arc<dyn backends::Translator>,
}

#[pymethods]
impl PyTranslator {
    /// Copies text through unchanged.
    #[staticmethod]
    fn identity() -> Self {
        Self {
            inner: Arc::new(PhraseTableTranslator::identity()),
        }
    }

    /// Phrase-table translator for one direction; the reverse direction uses the inverted table.
    #[staticmethod]
    #[pyo3(signature = (entries, src, tgt, pass_through = false, id = "lexicon"))]
    fn phrase_table(
        entries: BTreeMap<String, String>,
        src: &str,
        tgt: &str,
        pass_through: bool,
        id: &str,
    ) -> PyResult<Self> {
        let table = PhraseTable::new(entries, pass_through).map_err(value_err)?;
        Ok(Self {
            inner: Arc::new(PhraseTableTranslator::new(id).with_table(src, tgt, table)),
        })
    }

    /// Loads a phrase-table translator file.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(PhraseTableTranslator::load(path).map_err(value_err)?),
        })
    }

    #[staticmethod]
    #[pyo3(signature = (endpoint, id = None, cache = None, cache_mode = "replay"))]
    fn remote(endpoint: &str, id: Option<String>, cache: Option<&str>, cache_mode: &str) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(RemoteTranslator::new(
                remote_config(endpoint, id),
                open_cache(cache, cache_mode)?,
            )),
        })
    }

    #[getter]
    fn backend_id(&self) -> String {
        self.inner.backend_id().to_string()
    }

    fn translate(&self, py: Python<'_>, text: &str, src: &str, tgt: &str) -> PyResult<String> {
        py.detach(|| self.inner.translate(text, src, tgt)).map_err(backend_err)
    }
}

/// Completion model that translates a label given the translated sentence.
#[pyclass(name = "ContextualTranslator", frozen, from_py_object)]
#[derive(Clone)]
struct PyContextual {
    inner: Arc<dyn backends::ContextualTranslator>,
}

#[pymethods]
impl PyContextual {
    /// Per-label renderings; labels without an entry go through `fallback` if given.
    #[staticmethod]
    #[pyo3(signature = (alternatives, id = "dictionary", fallback = None))]
    fn dictionary(alternatives: BTreeMap<String, Vec<String>>, id: &str, fallback: Option<PyTranslator>) -> Self {
        let mut model = DictionaryContextual::new(id, alternatives);
        if let Some(t) = fallback {
            model = model.with_fallback(t.inner);
        }
        Self { inner: Arc::new(model) }
    }

    #[staticmethod]
    #[pyo3(signature = (path, fallback = None))]
    fn load(path: &str, fallback: Option<PyTranslator>) -> PyResult<Self> {
        let mut model = DictionaryContextual::load(path).map_err(value_err)?;
        if let Some(t) = fallback {
            model = model.with_fallback(t.inner);
        }
        Ok(Self { inner: Arc::new(model) })
    }

    #[staticmethod]
    #[pyo3(signature = (endpoint, id = None, cache = None, cache_mode = "replay"))]
    fn remote(endpoint: &str, id: Option<String>, cache: Option<&str>, cache_mode: &str) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(RemoteContextual::new(
                remote_config(endpoint, id),
                open_cache(cache, cache_mode)?,
            )),
        })
    }

    #[getter]
    fn backend_id(&self) -> String {
        self.inner.backend_id().to_string()
    }
}

fn clap_config(config: Option<&Bound<'_, PyAny>>) -> PyResult<ClapConfig> {
    let config: ClapConfig = match config {
        Some(c) => from_py(c)?,
        None => ClapConfig::default(),
    };
    config.validate().map_err(PyValueError::new_err)?;
    Ok(config)
}

/// Projects sentence dicts into `target_language` with one method and
/// returns projected datapoint dicts. `alignments` holds one Pharaoh line
/// per sentence for the `align` method.
#[pyfunction]
#[pyo3(signature = (method, sentences, translator, target_language, contextual = None, examples = None, config = None, alignments = None, roles = None))]
#[allow(clippy::too_many_arguments)]
fn project<'py>(
    py: Python<'py>,
    method: &str,
    sentences: &Bound<'py, PyAny>,
    translator: PyTranslator,
    target_language: &str,
    contextual: Option<PyContextual>,
    examples: Option<&Bound<'py, PyAny>>,
    config: Option<&Bound<'py, PyAny>>,
    alignments: Option<Vec<String>>,
    roles: Option<Vec<String>>,
) -> PyResult<Vec<Bound<'py, PyAny>>> {
    let method: Method = method.parse().map_err(value_err)?;
    let corpus = sentences_from_py(sentences, roles)?;
    let run = RunContext::new(target_language.to_string(), String::new());
    let mt = translator.inner.as_ref();
    let projected: Vec<ProjectedDatapoint> = match method {
        Method::Clap => {
            let model = contextual.ok_or_else(|| PyValueError::new_err("clap needs a contextual translator"))?;
            let examples: Vec<InContextExample> = examples.map(from_py).transpose()?.unwrap_or_default();
            let cfg = clap_config(config)?;
            py.detach(|| {
                corpus
                    .sentences
                    .iter()
                    .map(|s| project_clap(s, mt, model.inner.as_ref(), &examples, &cfg, &run))
                    .collect::<Result<_, _>>()
            })
        }
        Method::Marker => {
            let scheme: MarkerScheme = config.map(from_py).transpose()?.unwrap_or_default();
            scheme.validate().map_err(PyValueError::new_err)?;
            py.detach(|| {
                corpus
                    .sentences
                    .iter()
                    .map(|s| project_marker(s, mt, &scheme, &run))
                    .collect()
            })
        }
        Method::Independent => py.detach(|| {
            corpus
                .sentences
                .iter()
                .map(|s| project_independent(s, mt, &run))
                .collect()
        }),
        Method::Constrained => py.detach(|| {
            corpus
                .sentences
                .iter()
                .map(|s| project_constrained(s, mt, &run))
                .collect()
        }),
        Method::Align => {
            let lines =
                alignments.ok_or_else(|| PyValueError::new_err("align needs one alignment line per sentence"))?;
            if lines.len() != corpus.sentences.len() {
                return Err(PyValueError::new_err(format!(
                    "{} alignment lines for {} sentences",
                    lines.len(),
                    corpus.sentences.len()
                )));
            }
            corpus
                .sentences
                .iter()
                .zip(&lines)
                .enumerate()
                .map(|(i, (s, line))| align_one(s, line, i + 1, mt, &run))
                .collect::<PyResult<Vec<_>>>()?
                .into_iter()
                .map(Ok)
                .collect()
        }
    }
    .map_err(projection_err)?;
    projected_to_py(py, &projected)
}

fn align_one(
    sentence: &LabeledSentence,
    line: &str,
    line_no: usize,
    mt: &dyn backends::Translator,
    run: &RunContext,
) -> PyResult<ProjectedDatapoint> {
    let target = nfc(&mt
        .translate(&sentence.text, &sentence.language, &run.target_language)
        .map_err(backend_err)?);
    let src_tokens = tokenize(&sentence.text, &sentence.language);
    let tgt_tokens = tokenize(&target, &run.target_language);
    let links = parse_pharaoh_line(line, line_no, src_tokens.len(), tgt_tokens.len()).map_err(value_err)?;
    let set = AlignmentSet::new(src_tokens, tgt_tokens, links).map_err(PyValueError::new_err)?;
    project_alignment(sentence, &target, &set, mt.backend_id(), run).map_err(projection_err)
}

/// Verified in-context examples drawn from a pool of sentence dicts.
#[pyfunction]
#[pyo3(signature = (pool, translator, contextual, target_language, config = None))]
fn generate_examples<'py>(
    py: Python<'py>,
    pool: &Bound<'py, PyAny>,
    translator: PyTranslator,
    contextual: PyContextual,
    target_language: &str,
    config: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let pool = sentences_from_py(pool, None)?;
    let cfg = clap_config(config)?;
    let examples = py
        .detach(|| {
            generate_incontext_examples(
                &pool,
                translator.inner.as_ref(),
                contextual.inner.as_ref(),
                &cfg,
                target_language,
            )
        })
        .map_err(value_err)?;
    to_py(py, &examples)
}

/// Datapoint- and label-level faithfulness of projected datapoint dicts.
#[pyfunction]
fn faithfulness_rate<'py>(py: Python<'py>, projected: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let report = evaluation::faithfulness_rate(&projected_from_py(projected)?).map_err(value_err)?;
    to_py(py, &report)
}

/// Fully faithful datapoints as target-language sentence dicts.
#[pyfunction]
fn filter_translate_train<'py>(py: Python<'py>, projected: &Bound<'py, PyAny>) -> PyResult<Vec<Bound<'py, PyAny>>> {
    sentences_to_py(py, &evaluation::filter_translate_train(&projected_from_py(projected)?))
}

#[pyfunction]
fn chr_sim(a: &str, b: &str) -> f64 {
    clap_core::chr_sim(a, b)
}

/// `(start, end, score)` of the best-matching substring, or None.
#[pyfunction]
fn best_substring(text: &str, reference: &str) -> Option<(usize, usize, f64)> {
    baselines::best_substring(text, reference).map(|(span, score)| (span.start(), span.end(), score))
}

/// Marked texts, one per variant, and the label-to-index map of each.
#[pyfunction]
#[pyo3(signature = (sentence, open = "[{i}]", close = "[/{i}]"))]
fn insert_markers(
    sentence: &Bound<'_, PyAny>,
    open: &str,
    close: &str,
) -> PyResult<Vec<(String, BTreeMap<String, usize>)>> {
    let list = pyo3::types::PyList::new(sentence.py(), [sentence])?;
    let corpus = sentences_from_py(list.as_any(), None)?;
    let scheme = MarkerScheme::new(open, close).map_err(PyValueError::new_err)?;
    let marked = baselines::insert_markers(&corpus.sentences[0], &scheme);
    Ok(marked.variants.into_iter().map(|v| (v.text, v.marker_map)).collect())
}

/// `(clean_text, {index: (text, start, end)}, problems)`.
#[pyfunction]
#[pyo3(signature = (translated, expected, open = "[{i}]", close = "[/{i}]"))]
#[allow(clippy::type_complexity)]
fn extract_markers(
    translated: &str,
    expected: Vec<usize>,
    open: &str,
    close: &str,
) -> PyResult<(String, BTreeMap<usize, (String, usize, usize)>, Vec<String>)> {
    let scheme = MarkerScheme::new(open, close).map_err(PyValueError::new_err)?;
    let e = baselines::extract_markers(translated, &expected, &scheme);
    let found = e
        .found
        .into_iter()
        .map(|(i, (t, s))| (i, (t, s.start(), s.end())))
        .collect();
    Ok((e.clean_text, found, e.problems))
}

#[pymodule]
#[pyo3(name = "labelproj")]
fn labelproj_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTranslator>()?;
    m.add_class::<PyContextual>()?;
    m.add_function(wrap_pyfunction!(project, m)?)?;
    m.add_function(wrap_pyfunction!(generate_examples, m)?)?;
    m.add_function(wrap_pyfunction!(faithfulness_rate, m)?)?;
    m.add_function(wrap_pyfunction!(filter_translate_train, m)?)?;
    m.add_function(wrap_pyfunction!(chr_sim, m)?)?;
    m.add_function(wrap_pyfunction!(best_substring, m)?)?;
    m.add_function(wrap_pyfunction!(insert_markers, m)?)?;
    m.add_function(wrap_pyfunction!(extract_markers, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
