use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::matching::{find_label_span, parse_completion};
use super::prompt::{build_prompt, PromptError, PromptExample, PromptSpec};
use super::similarity::chr_sim;
use super::ClapConfig;
use crate::backends::{BackendError, ContextualQuery, ContextualTranslator, Translator};
use crate::corpus::{nfc, slice, Corpus, CorpusError};

/// A verified demonstration for the contextual translator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InContextExample {
    pub context: String,
    pub source_label: String,
    pub projected_label: String,
    pub backtranslation: String,
    pub similarity: f64,
}

impl InContextExample {
    pub fn to_prompt_example(&self) -> PromptExample {
        PromptExample {
            context: self.context.clone(),
            source_label: self.source_label.clone(),
            projected_label: self.projected_label.clone(),
        }
    }

    /// Re-checks both acceptance predicates.
    pub fn is_valid(&self, threshold: f64) -> bool {
        !self.projected_label.is_empty()
            && self.context.contains(&self.projected_label)
            && self.similarity >= threshold
            && (chr_sim(&self.backtranslation, &self.source_label) - self.similarity).abs() < 1e-9
    }
}

#[derive(Debug, Error)]
pub enum ExampleError {
    #[error("example pool is empty")]
    EmptyPool,
    #[error("only {accepted} of {required} in-context examples passed verification")]
    Insufficient { accepted: usize, required: usize },
    #[error("sentence {sent_id:?}: {source}")]
    Backend {
        sent_id: String,
        #[source]
        source: BackendError,
    },
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// Draws verified demonstrations from `pool`, visiting sentences in an order
/// shuffled by `cfg.example_seed` and labels within a sentence in span order.
pub fn generate_incontext_examples(
    pool: &Corpus,
    translator: &dyn Translator,
    contextual: &dyn ContextualTranslator,
    cfg: &ClapConfig,
    tgt_lang: &str,
) -> Result<Vec<InContextExample>, ExampleError> {
    let required = cfg.num_incontext_examples;
    if required == 0 {
        return Ok(Vec::new());
    }
    if pool.is_empty() {
        return Err(ExampleError::EmptyPool);
    }
    let src_lang = pool.language.as_str();
    let mut order: Vec<usize> = (0..pool.sentences.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.example_seed));

    let mut accepted = Vec::with_capacity(required);
    for index in order {
        let sentence = &pool.sentences[index];
        let backend = |source| ExampleError::Backend {
            sent_id: sentence.sent_id.clone(),
            source,
        };
        let labels = sentence.labels_in_span_order();
        if labels.is_empty() {
            continue;
        }
        let context = nfc(&translator
            .translate(&sentence.text, src_lang, tgt_lang)
            .map_err(backend)?);
        for label in labels {
            let spec = PromptSpec {
                instruction: cfg.instruction.clone(),
                src_lang: src_lang.to_string(),
                tgt_lang: tgt_lang.to_string(),
                examples: Vec::new(),
                query_label: label.surface.clone(),
                context: context.clone(),
            };
            let prompt = build_prompt(&spec)?;
            let raw = contextual
                .complete(&ContextualQuery {
                    prompt: &prompt,
                    label: &label.surface,
                    context: &context,
                    src_lang,
                    tgt_lang,
                    attempt: 1,
                })
                .map_err(backend)?;
            let Ok(candidate) = parse_completion(&raw) else {
                continue;
            };
            let Some(span) = find_label_span(&candidate, &context, &[], &cfg.matching_policy) else {
                continue;
            };
            let projected = slice(&context, span).expect("span found in context").to_string();
            let backtranslation = translator.translate(&projected, tgt_lang, src_lang).map_err(backend)?;
            let similarity = chr_sim(&backtranslation, &label.surface);
            if similarity < cfg.backtranslation_threshold {
                continue;
            }
            accepted.push(InContextExample {
                context: context.clone(),
                source_label: label.surface.clone(),
                projected_label: projected,
                backtranslation,
                similarity,
            });
            if accepted.len() == required {
                return Ok(accepted);
            }
        }
    }
    Err(ExampleError::Insufficient {
        accepted: accepted.len(),
        required,
    })
}

pub fn write_examples<W: Write>(mut writer: W, examples: &[InContextExample]) -> std::io::Result<()> {
    for example in examples {
        serde_json::to_writer(&mut writer, example)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn save_examples(examples: &[InContextExample], path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let io = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io)?;
    write_examples(BufWriter::new(file), examples).map_err(io)
}

pub fn load_examples(path: impl AsRef<Path>) -> Result<Vec<InContextExample>, CorpusError> {
    let path = path.as_ref();
    let io = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut examples = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let example = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: index + 1,
            message: e.to_string(),
        })?;
        examples.push(example);
    }
    Ok(examples)
}
