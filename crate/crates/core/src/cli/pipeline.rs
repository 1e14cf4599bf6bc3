use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{absolute, sha256_file, AlignmentConfig, ContextualConfig, RunConfig, TranslatorConfig};
use super::{CliError, RunArgs};
use crate::backends::{
    file_stats, CacheStats, ContextualTranslator, DictionaryContextual, PhraseTable, PhraseTableTranslator,
    RemoteContextual, RemoteTranslator, ReplayCache, Translator,
};
use crate::baselines::{
    lexical_align, load_alignments, project_alignment, project_constrained, project_independent, project_marker,
};
use crate::contextual::{generate_incontext_examples, load_examples, project_clap, save_examples};
use crate::corpus::{
    load_corpus, nfc, read_projected, save_corpus, write_projected, Corpus, Method, ProjectedDatapoint, RoleRegistry,
    TRIGGER_ROLE,
};
use crate::evaluation::{
    export_ab, faithfulness_rate, filter_translate_train, read_annotations, read_sealed, save_annotations, save_sealed,
    score_ab, FaithfulnessReport,
};
use crate::projection::{ProjectionError, RunContext};

/// Run record written next to an output file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    /// "complete" or "partial".
    pub status: String,
    pub tool_version: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub corpus_sha256: String,
    pub output: PathBuf,
    pub output_sha256: String,
    pub records_written: usize,
    pub failed_sentences: Vec<String>,
    pub cache: Option<CacheStats>,
    pub faithfulness: Option<FaithfulnessReport>,
    pub error: Option<String>,
}

/// `<out>.manifest.json`
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

fn resolve(config_path: Option<&Path>, args: &RunArgs) -> Result<RunConfig, CliError> {
    let path = config_path.ok_or_else(|| CliError::Config("--config is required for this command".into()))?;
    let mut config = RunConfig::load(path)?;
    if let Some(method) = args.method {
        config.method = Some(method);
    }
    if let Some(corpus) = &args.corpus {
        config.corpus = Some(absolute(corpus));
    }
    if let Some(out) = &args.out {
        config.out = Some(absolute(out));
    }
    if let Some(cache) = &args.cache {
        let mode = config.cache.as_ref().map(|c| c.mode).unwrap_or_default();
        config.cache = Some(super::CacheConfig {
            path: absolute(cache),
            mode,
        });
    }
    if let Some(mode) = args.cache_mode {
        match &mut config.cache {
            Some(cache) => cache.mode = mode,
            None => return Err(CliError::Config("--cache-mode needs a cache path".into())),
        }
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
        config.clap.example_seed = seed;
    }
    if let Some(n) = args.concurrency {
        config.max_concurrency = n;
    }
    Ok(config)
}

fn required<'a>(value: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, CliError> {
    value
        .as_deref()
        .ok_or_else(|| CliError::Config(format!("no {what} path (set it in the config or pass --{what})")))
}

struct Backends {
    cache: Option<Arc<ReplayCache>>,
    translator: Arc<dyn Translator>,
    contextual: Option<Arc<dyn ContextualTranslator>>,
}

fn build_backends(config: &RunConfig) -> Result<Backends, CliError> {
    let cache = match &config.cache {
        Some(c) => Some(Arc::new(ReplayCache::open(&c.path, c.mode)?)),
        None => None,
    };
    let translator: Arc<dyn Translator> = match &config.translator {
        TranslatorConfig::Identity => Arc::new(PhraseTableTranslator::identity()),
        TranslatorConfig::PhraseTable(path) => Arc::new(PhraseTableTranslator::load(path)?),
        TranslatorConfig::Remote(remote) => Arc::new(RemoteTranslator::new(remote.clone(), cache.clone())),
    };
    let contextual: Option<Arc<dyn ContextualTranslator>> = match &config.contextual {
        None => None,
        Some(ContextualConfig::Dictionary { path, fallback }) => {
            let dictionary = DictionaryContextual::load(path)?;
            Some(Arc::new(if *fallback {
                dictionary.with_fallback(translator.clone())
            } else {
                dictionary
            }))
        }
        Some(ContextualConfig::Remote(remote)) => Some(Arc::new(RemoteContextual::new(remote.clone(), cache.clone()))),
    };
    Ok(Backends {
        cache,
        translator,
        contextual,
    })
}

/// Argument roles used in a corpus file, for runs without a configured registry.
fn roles_in_file(path: &Path) -> Result<BTreeSet<String>, CliError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut roles = BTreeSet::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(io_err(path))?;
        let Ok(value) = serde_json::from_str::<serde_json::Value>(&line) else {
            continue;
        };
        let events = value
            .get("events")
            .and_then(|e| e.as_array())
            .cloned()
            .unwrap_or_default();
        for event in events {
            let arguments = event
                .get("arguments")
                .and_then(|a| a.as_array())
                .cloned()
                .unwrap_or_default();
            roles.extend(
                arguments
                    .iter()
                    .filter_map(|a| a.get("role")?.as_str().map(str::to_string)),
            );
        }
    }
    Ok(roles)
}

fn registry(config: &RunConfig, corpus: &Path) -> Result<RoleRegistry, CliError> {
    if let Some(path) = &config.roles_path {
        return Ok(RoleRegistry::load(path)?);
    }
    if let Some(roles) = &config.roles {
        return Ok(RoleRegistry::new(roles.clone())?);
    }
    let mut roles = roles_in_file(corpus)?;
    if roles.is_empty() {
        roles.insert(TRIGGER_ROLE.to_string());
    }
    Ok(RoleRegistry::new(roles)?)
}

fn load_source(config: &RunConfig, path: &Path) -> Result<Corpus, CliError> {
    let corpus = load_corpus(path, &registry(config, path)?)?;
    if !corpus.is_empty() && corpus.language != config.source_language {
        return Err(CliError::Validation(format!(
            "corpus language {:?} differs from source_language {:?}",
            corpus.language, config.source_language
        )));
    }
    Ok(corpus)
}

fn thread_pool(config: &RunConfig) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(config.max_concurrency)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

type Outcome = Result<ProjectedDatapoint, ProjectionError>;

fn project_all(
    config: &RunConfig,
    method: Method,
    corpus: &Corpus,
    backends: &Backends,
    run: &RunContext,
) -> Result<Vec<Outcome>, CliError> {
    let pool = thread_pool(config)?;
    let translator = backends.translator.as_ref();
    let sentences = &corpus.sentences;
    let outcomes = match method {
        Method::Clap => {
            let contextual = backends.contextual.as_deref().expect("validated");
            let examples = match &config.examples_path {
                Some(path) if config.clap.num_incontext_examples > 0 => load_examples(path)?,
                _ => Vec::new(),
            };
            pool.install(|| {
                sentences
                    .par_iter()
                    .map(|s| project_clap(s, translator, contextual, &examples, &config.clap, run))
                    .collect()
            })
        }
        Method::Marker => pool.install(|| {
            sentences
                .par_iter()
                .map(|s| project_marker(s, translator, &config.marker_scheme, run))
                .collect()
        }),
        Method::Independent => pool.install(|| {
            sentences
                .par_iter()
                .map(|s| project_independent(s, translator, run))
                .collect()
        }),
        Method::Constrained => pool.install(|| {
            sentences
                .par_iter()
                .map(|s| project_constrained(s, translator, run))
                .collect()
        }),
        Method::Align => project_aligned(config, corpus, translator, run, &pool)?,
    };
    Ok(outcomes)
}

fn project_aligned(
    config: &RunConfig,
    corpus: &Corpus,
    translator: &dyn Translator,
    run: &RunContext,
    pool: &rayon::ThreadPool,
) -> Result<Vec<Outcome>, CliError> {
    let (src, tgt) = (config.source_language.as_str(), config.target_language.as_str());
    let translations: Vec<Result<String, ProjectionError>> = pool.install(|| {
        corpus
            .sentences
            .par_iter()
            .map(|s| {
                translator
                    .translate(&s.text, &s.language, tgt)
                    .map(|t| nfc(&t))
                    .map_err(ProjectionError::backend(&s.sent_id, None))
            })
            .collect()
    });
    let alignment = config.alignment.as_ref().expect("validated");
    let sets = match alignment {
        AlignmentConfig { path: Some(path), .. } => {
            let pairs: Vec<(&str, &str)> = corpus
                .sentences
                .iter()
                .zip(&translations)
                .map(|(s, t)| (s.text.as_str(), t.as_deref().unwrap_or("")))
                .collect();
            load_alignments(path, &pairs, src, tgt)?
        }
        AlignmentConfig {
            lexicon: Some(path), ..
        } => {
            let lexicon_file = PhraseTableTranslator::load(path)?;
            let lexicon = lexicon_file
                .table(src, tgt)
                .cloned()
                .unwrap_or_else(|| PhraseTable::new(Vec::<(String, String)>::new(), false).expect("empty table"));
            corpus
                .sentences
                .iter()
                .zip(&translations)
                .map(|(s, t)| lexical_align(&s.text, t.as_deref().unwrap_or(""), src, tgt, &lexicon))
                .collect()
        }
        _ => unreachable!("validated"),
    };
    let translator_id = translator.backend_id();
    Ok(pool.install(|| {
        corpus
            .sentences
            .par_iter()
            .zip(translations.into_par_iter())
            .zip(sets.par_iter())
            .map(|((s, t), set)| project_alignment(s, &t?, set, translator_id, run))
            .collect()
    }))
}

fn sort_key(dp: &ProjectedDatapoint) -> (&str, &str) {
    (&dp.doc_id, &dp.sent_id)
}

pub(super) fn cmd_project(config_path: Option<&Path>, args: &RunArgs) -> Result<(), CliError> {
    let config = resolve(config_path, args)?;
    let method = config.require_method()?;
    config.validate(method)?;
    let corpus_path = required(&config.corpus, "corpus")?.to_path_buf();
    let out = required(&config.out, "out")?.to_path_buf();
    let config_hash = config.hash()?;
    let corpus_sha256 = sha256_file(&corpus_path)?;
    let corpus = load_source(&config, &corpus_path)?;
    let backends = build_backends(&config)?;
    let run = RunContext::new(config.target_language.clone(), config_hash.clone());

    let outcomes = project_all(&config, method, &corpus, &backends, &run)?;
    let mut datapoints = Vec::with_capacity(outcomes.len());
    let mut failures: Vec<(String, ProjectionError)> = Vec::new();
    for (sentence, outcome) in corpus.sentences.iter().zip(outcomes) {
        match outcome {
            Ok(dp) => datapoints.push(dp),
            Err(e) => failures.push((sentence.sent_id.clone(), e)),
        }
    }
    datapoints.sort_by(|a, b| sort_key(a).cmp(&sort_key(b)));

    let file = File::create(&out).map_err(io_err(&out))?;
    write_projected(BufWriter::new(file), &datapoints).map_err(io_err(&out))?;
    let error = failures.first().map(|(_, e)| e.to_string());
    let manifest = Manifest {
        command: "project".into(),
        status: if failures.is_empty() { "complete" } else { "partial" }.into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config_hash,
        corpus_sha256,
        output_sha256: sha256_file(&out)?,
        output: out.clone(),
        records_written: datapoints.len(),
        failed_sentences: failures.iter().map(|(id, _)| id.clone()).collect(),
        cache: backends.cache.as_ref().map(|c| c.stats()),
        faithfulness: faithfulness_rate(&datapoints).ok(),
        error,
        config,
    };
    write_json(&manifest, &manifest_path(&out))?;

    match failures.into_iter().next() {
        None => {
            if let Some(report) = &manifest.faithfulness {
                eprint!("{}", report.to_table());
            }
            Ok(())
        }
        Some((_, e)) => Err(e.into()),
    }
}

pub(super) fn cmd_examples(config_path: Option<&Path>, args: &RunArgs) -> Result<(), CliError> {
    let mut config = resolve(config_path, args)?;
    config.validate(Method::Marker)?;
    let pool_path = required(&config.corpus, "corpus")?.to_path_buf();
    let out = required(&config.out, "out")?.to_path_buf();
    if config.contextual.is_none() {
        return Err(CliError::Config("examples needs a contextual translator".into()));
    }
    // the examples file is the output here, not an input
    config.examples_path = None;
    let config_hash = config.hash()?;
    let corpus_sha256 = sha256_file(&pool_path)?;
    let pool = load_source(&config, &pool_path)?;
    let backends = build_backends(&config)?;
    let contextual = backends.contextual.as_deref().expect("checked above");
    let result = generate_incontext_examples(
        &pool,
        backends.translator.as_ref(),
        contextual,
        &config.clap,
        &config.target_language,
    );
    let (examples, error) = match result {
        Ok(examples) => (examples, None),
        Err(e) => (Vec::new(), Some(e)),
    };
    save_examples(&examples, &out)?;
    let manifest = Manifest {
        command: "examples".into(),
        status: if error.is_none() { "complete" } else { "partial" }.into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config_hash,
        corpus_sha256,
        output_sha256: sha256_file(&out)?,
        output: out.clone(),
        records_written: examples.len(),
        failed_sentences: Vec::new(),
        cache: backends.cache.as_ref().map(|c| c.stats()),
        faithfulness: None,
        error: error.as_ref().map(ToString::to_string),
        config,
    };
    write_json(&manifest, &manifest_path(&out))?;
    match error {
        None => Ok(()),
        Some(e) => Err(e.into()),
    }
}

pub(super) fn cmd_filter(projected: &Path, out: &Path) -> Result<(), CliError> {
    let datapoints = read_projected(projected)?;
    let corpus = filter_translate_train(&datapoints);
    save_corpus(&corpus, out)?;
    eprintln!("kept {} of {} datapoints", corpus.len(), datapoints.len());
    Ok(())
}

pub(super) fn cmd_metrics(paths: &[PathBuf], out: Option<&Path>) -> Result<(), CliError> {
    let mut datapoints = Vec::new();
    for path in paths {
        datapoints.extend(read_projected(path)?);
    }
    let report = faithfulness_rate(&datapoints)?;
    print!("{}", report.to_table());
    if let Some(out) = out {
        write_json(&report, out)?;
    }
    Ok(())
}

pub(super) fn cmd_ab_export(
    run_a: &Path,
    run_b: &Path,
    n: usize,
    seed: u64,
    out: &Path,
    sealed: &Path,
) -> Result<(), CliError> {
    let dir = |p: &Path| absolute(p).parent().map(Path::to_path_buf);
    if dir(out) == dir(sealed) {
        return Err(CliError::Config(
            "the sealed assignment must be written to a different directory than the annotation file".into(),
        ));
    }
    let a = read_projected(run_a)?;
    let b = read_projected(run_b)?;
    let (annotations, assignment) = export_ab(&a, &b, n, seed)?;
    save_annotations(&annotations, out)?;
    save_sealed(&assignment, sealed)?;
    eprintln!("exported {} pairs", annotations.len());
    Ok(())
}

pub(super) fn cmd_ab_score(verdicts: &Path, sealed: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let score = score_ab(&read_annotations(verdicts)?, &read_sealed(sealed)?)?;
    print!("{}", score.to_table());
    if let Some(out) = out {
        write_json(&score, out)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CacheSummary {
    path: PathBuf,
    entries: u64,
    lines: usize,
    by_backend: std::collections::BTreeMap<String, usize>,
}

pub(super) fn cmd_cache_stats(cache: &Path) -> Result<(), CliError> {
    if !cache.is_file() {
        return Err(CliError::Io(format!("{}: no such cache file", cache.display())));
    }
    let (stats, entries) = file_stats(cache)?;
    let mut by_backend = std::collections::BTreeMap::new();
    for entry in &entries {
        *by_backend.entry(format!("{}/{}", entry.backend, entry.op)).or_insert(0) += 1;
    }
    let summary = CacheSummary {
        path: cache.to_path_buf(),
        entries: stats.entries,
        lines: entries.len(),
        by_backend,
    };
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, &summary).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(stdout).map_err(|e| CliError::Io(e.to_string()))
}
