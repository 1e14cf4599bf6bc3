//! Contextual label projection: the sentence is translated once, then each
//! label is translated by a prompted model that sees the translated sentence
//! and must answer with a substring of it.

mod examples;
mod matching;
mod prompt;
mod similarity;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use examples::{
    generate_incontext_examples, load_examples, save_examples, write_examples, ExampleError, InContextExample,
};
pub use matching::{find_label_span, parse_completion, EmptyCandidate, MatchingPolicy};
pub use prompt::{build_prompt, language_name, PromptError, PromptExample, PromptSpec, DEFAULT_INSTRUCTION};
pub(crate) use similarity::WindowScorer;
pub use similarity::{chr_sim, ngram_f1};

use crate::backends::{ContextualQuery, ContextualTranslator, Translator};
use crate::corpus::{nfc, LabeledSentence, Method, ProjectedDatapoint, ProjectionRecord, Provenance, Span};
use crate::projection::{reuse_record, ProjectionError, RunContext};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClapConfig {
    pub num_incontext_examples: usize,
    pub max_attempts: u32,
    pub backtranslation_threshold: f64,
    pub example_seed: u64,
    pub matching_policy: MatchingPolicy,
    pub instruction: String,
}

impl Default for ClapConfig {
    fn default() -> Self {
        Self {
            num_incontext_examples: 2,
            max_attempts: 1,
            backtranslation_threshold: 0.5,
            example_seed: 0,
            matching_policy: MatchingPolicy::default(),
            instruction: DEFAULT_INSTRUCTION.to_string(),
        }
    }
}

impl ClapConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_attempts == 0 {
            return Err("max_attempts must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.backtranslation_threshold) {
            return Err(format!(
                "backtranslation_threshold must lie in [0, 1], got {}",
                self.backtranslation_threshold
            ));
        }
        let probe = PromptSpec {
            instruction: self.instruction.clone(),
            src_lang: String::new(),
            tgt_lang: String::new(),
            examples: Vec::new(),
            query_label: String::new(),
            context: String::new(),
        };
        build_prompt(&probe).map(|_| ()).map_err(|e| e.to_string())
    }

    fn settings(&self) -> std::collections::BTreeMap<String, serde_json::Value> {
        [
            ("max_attempts", serde_json::json!(self.max_attempts)),
            ("num_incontext_examples", serde_json::json!(self.num_incontext_examples)),
            ("casefold", serde_json::json!(self.matching_policy.casefold)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

/// Projects every label of `sentence` into its translation.
pub fn project_clap(
    sentence: &LabeledSentence,
    translator: &dyn Translator,
    contextual: &dyn ContextualTranslator,
    examples: &[InContextExample],
    cfg: &ClapConfig,
    run: &RunContext,
) -> Result<ProjectedDatapoint, ProjectionError> {
    let sent_id = sentence.sent_id.as_str();
    if examples.len() != cfg.num_incontext_examples {
        return Err(ProjectionError::invalid(
            sent_id,
            format!(
                "{} in-context examples supplied, configuration requires {}",
                examples.len(),
                cfg.num_incontext_examples
            ),
        ));
    }
    if let Some(bad) = examples.iter().position(|e| !e.is_valid(cfg.backtranslation_threshold)) {
        return Err(ProjectionError::invalid(
            sent_id,
            format!("in-context example {bad} fails verification"),
        ));
    }
    let src_lang = sentence.language.as_str();
    let tgt_lang = run.target_language.as_str();
    let target_text = nfc(&translator
        .translate(&sentence.text, src_lang, tgt_lang)
        .map_err(ProjectionError::backend(sent_id, None))?);
    let prompt_examples: Vec<PromptExample> = examples.iter().map(InContextExample::to_prompt_example).collect();

    let mut records = Vec::new();
    let mut by_span: HashMap<Span, usize> = HashMap::new();
    let mut taken: Vec<Span> = Vec::new();
    for label in sentence.labels_in_span_order() {
        if let Some(&index) = by_span.get(&label.span) {
            let record = reuse_record(&records[index], label);
            records.push(record);
            continue;
        }
        let spec = PromptSpec {
            instruction: cfg.instruction.clone(),
            src_lang: src_lang.to_string(),
            tgt_lang: tgt_lang.to_string(),
            examples: prompt_examples.clone(),
            query_label: label.surface.clone(),
            context: target_text.clone(),
        };
        let prompt = build_prompt(&spec).map_err(|e| ProjectionError::invalid(sent_id, e.to_string()))?;

        let mut record = ProjectionRecord::new(label, Method::Clap);
        let mut last_candidate = None;
        let mut found = None;
        for attempt in 1..=cfg.max_attempts {
            record.attempts = attempt;
            let raw = contextual
                .complete(&ContextualQuery {
                    prompt: &prompt,
                    label: &label.surface,
                    context: &target_text,
                    src_lang,
                    tgt_lang,
                    attempt,
                })
                .map_err(ProjectionError::backend(sent_id, Some(&label.label_id)))?;
            let candidate = match parse_completion(&raw) {
                Ok(c) => c,
                Err(e) => {
                    record = record.note(format!("attempt {attempt}: {e}"));
                    continue;
                }
            };
            match find_label_span(&candidate, &target_text, &taken, &cfg.matching_policy) {
                Some(span) => {
                    found = Some((candidate, span));
                    break;
                }
                None => {
                    record = record.note(format!("attempt {attempt}: {candidate:?} not found in target text"));
                    last_candidate = Some(candidate);
                }
            }
        }
        let record = match found {
            Some((candidate, span)) => {
                taken.push(span);
                record.matched(candidate, span)
            }
            None => record.unmatched(last_candidate),
        };
        by_span.insert(label.span, records.len());
        records.push(record);
    }

    let provenance = Provenance {
        method: Method::Clap,
        translator_id: translator.backend_id().to_string(),
        contextual_model_id: Some(contextual.backend_id().to_string()),
        config_hash: run.config_hash.clone(),
        settings: cfg.settings(),
    };
    Ok(ProjectedDatapoint::assemble(
        sentence,
        tgt_lang,
        target_text,
        records,
        provenance,
    ))
}
