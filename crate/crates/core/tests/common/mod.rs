#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use labelproj::backends::{dict_translate, DictionaryContextual, PhraseTable, PhraseTableTranslator, Translator};
use labelproj::corpus::{save_corpus, slice, Corpus, EventFrame, Label, LabeledSentence, Span};
use labelproj::projection::RunContext;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One-to-one word lexicon, so a phrase translates to a substring of its
/// sentence's translation.
pub const EN_FR: &[(&str, &str)] = &[
    ("the", "le"),
    ("big", "gros"),
    ("small", "petit"),
    ("cat", "chat"),
    ("dog", "chien"),
    ("man", "homme"),
    ("woman", "femme"),
    ("soldier", "soldat"),
    ("city", "ville"),
    ("house", "maison"),
    ("river", "fleuve"),
    ("army", "armée"),
    ("village", "hameau"),
    ("sleeps", "dort"),
    ("attacks", "attaque"),
    ("visits", "visite"),
    ("leaves", "quitte"),
    ("crosses", "traverse"),
    ("buys", "achète"),
    ("near", "près"),
    ("in", "dans"),
    ("with", "avec"),
    ("today", "aujourd'hui"),
    ("yesterday", "hier"),
    ("old", "vieux"),
    ("red", "rouge"),
    ("president", "président"),
    ("reporter", "journaliste"),
    ("bridge", "pont"),
    ("market", "marché"),
];

pub const ROLES: [&str; 3] = ["Agent", "Target", "Place"];

pub fn en_fr_table() -> PhraseTable {
    PhraseTable::new(EN_FR.iter().copied(), false).unwrap()
}

pub fn en_fr_translator() -> PhraseTableTranslator {
    PhraseTableTranslator::new("lexicon-en-fr").with_table("en", "fr", en_fr_table())
}

/// Contextual stand-in that translates every label with the sentence lexicon.
pub fn lexicon_contextual() -> DictionaryContextual {
    DictionaryContextual::new("lexicon-ctx", BTreeMap::new()).with_fallback(Arc::new(en_fr_translator()))
}

pub fn run_context(target: &str) -> RunContext {
    RunContext::new(target.to_string(), "test".to_string())
}

/// Builds a sentence whose first label is the event trigger.
pub fn sentence(sent_id: &str, language: &str, text: &str, labels: &[(&str, usize, usize)]) -> LabeledSentence {
    let label = |(id, s, e): &(&str, usize, usize), role: &str| {
        let span = Span::new(*s, *e).unwrap();
        Label {
            label_id: id.to_string(),
            role: role.to_string(),
            span,
            surface: slice(text, span).unwrap().to_string(),
        }
    };
    let events = match labels.split_first() {
        None => Vec::new(),
        Some((trigger, args)) => vec![EventFrame {
            event_type: "Event".into(),
            trigger: label(trigger, "trigger"),
            arguments: args
                .iter()
                .enumerate()
                .map(|(i, a)| label(a, ROLES[i % ROLES.len()]))
                .collect(),
        }],
    };
    LabeledSentence {
        doc_id: format!("doc-{}", &sent_id[..sent_id.len().min(3)]),
        sent_id: sent_id.to_string(),
        language: language.to_string(),
        text: text.to_string(),
        events,
    }
}

/// Word-level spans of `words` joined by `sep`: (start, end) per word.
fn word_spans(words: &[String], sep: &str) -> Vec<(usize, usize)> {
    let sep_len = sep.chars().count();
    let mut spans = Vec::with_capacity(words.len());
    let mut pos = 0;
    for w in words {
        let len = w.chars().count();
        spans.push((pos, pos + len));
        pos += len + sep_len;
    }
    spans
}

/// Picks up to `max_labels` non-overlapping runs of 1 to 3 consecutive words.
fn random_label_spans(rng: &mut ChaCha8Rng, spans: &[(usize, usize)], max_labels: usize) -> Vec<(usize, usize)> {
    let wanted = rng.random_range(0..=max_labels);
    let mut free = vec![true; spans.len()];
    let mut picked = Vec::new();
    for _ in 0..wanted * 4 {
        if picked.len() == wanted {
            break;
        }
        let first = rng.random_range(0..spans.len());
        let width = rng.random_range(1..=3usize).min(spans.len() - first);
        if free[first..first + width].iter().all(|f| *f) {
            free[first..first + width].iter_mut().for_each(|f| *f = false);
            picked.push((spans[first].0, spans[first + width - 1].1));
        }
    }
    picked
}

fn labelled(sent_id: &str, language: &str, text: &str, spans: &[(usize, usize)]) -> LabeledSentence {
    let ids: Vec<String> = (0..spans.len()).map(|i| format!("{sent_id}-l{i}")).collect();
    let labels: Vec<(&str, usize, usize)> = ids
        .iter()
        .zip(spans)
        .map(|(id, (s, e))| (id.as_str(), *s, *e))
        .collect();
    sentence(sent_id, language, text, &labels)
}

/// English sentences over the lexicon vocabulary with up to three labels.
pub fn bilingual_corpus(n: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sentences = (0..n)
        .map(|i| {
            let len = rng.random_range(4..=10);
            let words: Vec<String> = (0..len)
                .map(|_| EN_FR[rng.random_range(0..EN_FR.len())].0.to_string())
                .collect();
            let spans = random_label_spans(&mut rng, &word_spans(&words, " "), 3);
            labelled(&format!("s{i:04}"), "en", &words.join(" "), &spans)
        })
        .collect();
    Corpus::new("en", sentences)
}

const LATIN: &[&str] = &[
    "river", "Zürich", "café", "señor", "Ægir", "north", "bridge", "naïve", "Łódź", "gate",
];
const ARABIC: &[&str] = &["الجيش", "المدينة", "هاجم", "رئيس", "النهر", "يوم", "السوق", "جسر"];
const HEBREW: &[&str] = &["העיר", "הנהר", "צבא", "שוק", "גשר", "נשיא"];
const CJK: &[char] = &[
    '南', '佛', '州', '市', '長', '軍', '隊', '橋', '川', '東', 'の', 'カ', '京',
];

/// Synthetic single-script sentences for identity round trips; returns each
/// sentence with the language tag whose joining rule preserves its text.
pub fn multiscript_sentences(n: usize, seed: u64) -> Vec<LabeledSentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let id = format!("m{i:04}");
            let (language, words, sep): (&str, Vec<String>, &str) = match i % 4 {
                0 => ("en", pick(&mut rng, LATIN), " "),
                1 => ("ar", pick(&mut rng, ARABIC), " "),
                2 => ("he", pick(&mut rng, HEBREW), " "),
                _ => {
                    let len = rng.random_range(3..=12);
                    let chars = (0..len)
                        .map(|_| CJK[rng.random_range(0..CJK.len())].to_string())
                        .collect();
                    ("zh", chars, "")
                }
            };
            let spans = random_label_spans(&mut rng, &word_spans(&words, sep), 4);
            labelled(&id, language, &words.join(sep), &spans)
        })
        .collect()
}

fn pick(rng: &mut ChaCha8Rng, vocab: &[&str]) -> Vec<String> {
    let len = rng.random_range(3..=9);
    (0..len)
        .map(|_| vocab[rng.random_range(0..vocab.len())].to_string())
        .collect()
}

/// Writes the lexicon files, a corpus and a run config into `dir`.
pub struct FixtureDir {
    pub corpus: PathBuf,
    pub config: PathBuf,
}

pub fn write_fixture_dir(dir: &Path, corpus: &Corpus, method: &str) -> FixtureDir {
    let entries: BTreeMap<&str, &str> = EN_FR.iter().copied().collect();
    let table = serde_json::json!({
        "id": "lexicon-en-fr",
        "tables": [{"source": "en", "target": "fr", "entries": entries}],
    });
    std::fs::write(dir.join("lexicon.json"), table.to_string()).unwrap();
    std::fs::write(dir.join("contextual.json"), r#"{"id":"lexicon-ctx","alternatives":{}}"#).unwrap();
    let corpus_path = dir.join("corpus.jsonl");
    save_corpus(corpus, &corpus_path).unwrap();
    let config = serde_json::json!({
        "source_language": "en",
        "target_language": "fr",
        "method": method,
        "translator": {"phrase_table": "lexicon.json"},
        "contextual": {"dictionary": {"path": "contextual.json", "fallback": true}},
        "clap": {"num_incontext_examples": 0},
        "alignment": {"lexicon": "lexicon.json"},
        "roles": ROLES,
        "corpus": "corpus.jsonl",
        "out": "projected.jsonl",
    });
    let config_path = dir.join("run.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    FixtureDir {
        corpus: corpus_path,
        config: config_path,
    }
}

/// Local HTTP stand-in for the remote translation and completion services.
/// `/translate` and `/complete` both answer from the lexicon; the first
/// `fail_first` requests get a 500.
pub struct StubServer {
    pub url: String,
    pub hits: Arc<AtomicU64>,
    server: Arc<tiny_http::Server>,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    pub fn start(fail_first: u64) -> Self {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").unwrap());
        let url = format!("http://{}", server.server_addr().to_ip().unwrap());
        let hits = Arc::new(AtomicU64::new(0));
        let (srv, counter) = (server.clone(), hits.clone());
        let handle = std::thread::spawn(move || {
            let table = en_fr_table();
            for mut request in srv.incoming_requests() {
                let n = counter.fetch_add(1, Ordering::SeqCst);
                let mut body = String::new();
                request.as_reader().read_to_string(&mut body).unwrap();
                if n < fail_first {
                    let _ = request.respond(tiny_http::Response::from_string("busy").with_status_code(500));
                    continue;
                }
                let body: serde_json::Value = serde_json::from_str(&body).unwrap_or_default();
                let reply = match request.url() {
                    "/translate" => {
                        let text = body["text"].as_str().unwrap_or_default();
                        let tgt = body["target"].as_str().unwrap_or("fr");
                        dict_translate(&table, text, "en", tgt).map(|t| serde_json::json!({ "translation": t }))
                    }
                    "/complete" => {
                        let label = quoted_label(body["prompt"].as_str().unwrap_or_default());
                        dict_translate(&table, label, "en", "fr").map(|t| serde_json::json!({ "completion": t }))
                    }
                    _ => Ok(serde_json::json!({})),
                };
                let response = match reply {
                    Ok(value) => tiny_http::Response::from_string(value.to_string())
                        .with_header("Content-Type: application/json".parse::<tiny_http::Header>().unwrap()),
                    Err(e) => tiny_http::Response::from_string(e.to_string()).with_status_code(400),
                };
                let _ = request.respond(response);
            }
        });
        Self {
            url,
            hits,
            server,
            handle: Some(handle),
        }
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::SeqCst)
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

/// The label inside the last `phrase '...'` of a prompt.
fn quoted_label(prompt: &str) -> &str {
    let Some(start) = prompt.rfind("phrase '").map(|i| i + "phrase '".len()) else {
        return "";
    };
    let rest = &prompt[start..];
    &rest[..rest.find("' from").unwrap_or(rest.len())]
}

/// Translator wrapper that rewrites the translated text.
pub struct Rewriting<T, F> {
    pub inner: T,
    pub rewrite: F,
}

impl<T: Translator, F: Fn(String) -> String + Send + Sync> Translator for Rewriting<T, F> {
    fn backend_id(&self) -> &str {
        "rewriting"
    }

    fn translate(&self, text: &str, src: &str, tgt: &str) -> Result<String, labelproj::backends::BackendError> {
        self.inner.translate(text, src, tgt).map(&self.rewrite)
    }
}

/// Fills verdicts so the first system wins `wins_a` pairs, then `ties` ties,
/// then the second system wins the rest.
pub fn fill_verdicts(
    annotations: &mut [labelproj::evaluation::AbAnnotation],
    sealed: &[labelproj::evaluation::AbSealed],
    wins_a: usize,
    ties: usize,
) {
    use labelproj::evaluation::Verdict;
    for (k, (annotation, pair)) in annotations.iter_mut().zip(sealed).enumerate() {
        let first_on_side_a = pair.a == pair.run_a;
        annotation.verdict = Some(if k < wins_a {
            if first_on_side_a {
                Verdict::A
            } else {
                Verdict::B
            }
        } else if k < wins_a + ties {
            Verdict::Tie
        } else if first_on_side_a {
            Verdict::B
        } else {
            Verdict::A
        });
    }
}
