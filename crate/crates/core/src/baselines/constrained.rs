use std::collections::HashMap;

use crate::backends::Translator;
use crate::contextual::WindowScorer;
use crate::corpus::{nfc, LabeledSentence, Method, ProjectedDatapoint, ProjectionRecord, Provenance, Span};
use crate::projection::{reuse_record, ProjectionError, RunContext};

pub const LENGTH_CAP_FACTOR: usize = 2;
pub const LENGTH_CAP_OFFSET: usize = 5;

/// Scores closer than this count as equal.
const TIE_EPSILON: f64 = 1e-12;

/// Longest substring considered for a reference of `reference_len` code points.
pub fn length_cap(text_len: usize, reference_len: usize) -> usize {
    text_len.min(LENGTH_CAP_FACTOR * reference_len + LENGTH_CAP_OFFSET)
}

/// Highest-scoring substring of `text` under chr_sim against `reference`,
/// preferring shorter, then leftmost, substrings on ties. `None` when the
/// best score is zero.
pub fn best_substring(text: &str, reference: &str) -> Option<(Span, f64)> {
    let text: Vec<char> = text.chars().collect();
    let reference: Vec<char> = reference.chars().collect();
    let scorer = WindowScorer::new(&text, &reference);
    let mut best: Option<(Span, f64)> = None;
    for len in 1..=length_cap(text.len(), reference.len()) {
        scorer.for_each_window(len, |start, score| {
            if best.is_none_or(|(_, b)| score > b + TIE_EPSILON) {
                best = Some((Span::new(start, start + len).expect("len >= 1"), score));
            }
        });
    }
    best.filter(|(_, score)| *score > 0.0)
}

/// Picks, for each label, the substring of the translated sentence most
/// similar to the label's stand-alone translation.
pub fn project_constrained(
    sentence: &LabeledSentence,
    translator: &dyn Translator,
    run: &RunContext,
) -> Result<ProjectedDatapoint, ProjectionError> {
    let sent_id = sentence.sent_id.as_str();
    let (src, tgt) = (sentence.language.as_str(), run.target_language.as_str());
    let target_text = nfc(&translator
        .translate(&sentence.text, src, tgt)
        .map_err(ProjectionError::backend(sent_id, None))?);
    let chars: Vec<char> = target_text.chars().collect();
    let mut by_span: HashMap<Span, usize> = HashMap::new();
    let mut records: Vec<ProjectionRecord> = Vec::new();
    for label in sentence.labels_in_span_order() {
        if let Some(&index) = by_span.get(&label.span) {
            let record = reuse_record(&records[index], label);
            records.push(record);
            continue;
        }
        let reference = nfc(&translator
            .translate(&label.surface, src, tgt)
            .map_err(ProjectionError::backend(sent_id, Some(&label.label_id)))?);
        let mut record = ProjectionRecord::new(label, Method::Constrained);
        record.attempts = 1;
        let record = match best_substring(&target_text, &reference) {
            Some((span, score)) => {
                let candidate: String = chars[span.start()..span.end()].iter().collect();
                record
                    .matched(candidate, span)
                    .note(format!("reference {reference:?}, similarity {score:.4}"))
            }
            None => record
                .unmatched(None)
                .note(format!("no substring shares a character with reference {reference:?}")),
        };
        by_span.insert(label.span, records.len());
        records.push(record);
    }
    let settings = [
        ("length_cap_factor", serde_json::json!(LENGTH_CAP_FACTOR)),
        ("length_cap_offset", serde_json::json!(LENGTH_CAP_OFFSET)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let provenance = Provenance {
        method: Method::Constrained,
        translator_id: translator.backend_id().to_string(),
        contextual_model_id: None,
        config_hash: run.config_hash.clone(),
        settings,
    };
    Ok(ProjectedDatapoint::assemble(
        sentence,
        tgt,
        target_text,
        records,
        provenance,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contextual::chr_sim;

    #[test]
    fn picks_exact_word() {
        let (span, score) = best_substring("le gros chat dort", "chat").unwrap();
        assert_eq!(span, Span::new(8, 12).unwrap());
        assert_eq!(score, 1.0);
    }

    #[test]
    fn disjoint_reference_has_no_answer() {
        assert_eq!(best_substring("le gros chat dort", "zzz"), None);
        assert_eq!(best_substring("", "chat"), None);
        assert_eq!(best_substring("chat", ""), None);
    }

    #[test]
    fn whole_sentence_when_equal() {
        let text = "le gros chat dort";
        let (span, _) = best_substring(text, text).unwrap();
        assert_eq!(span, Span::new(0, 17).unwrap());
    }

    #[test]
    fn ties_prefer_shorter_then_leftmost() {
        let (span, _) = best_substring("xab ab", "ab").unwrap();
        assert_eq!(span, Span::new(1, 3).unwrap());
        let (span, _) = best_substring("baab", "a").unwrap();
        assert_eq!(span, Span::new(1, 2).unwrap());
    }

    #[test]
    fn matches_naive_scan() {
        let text = "une grande maison blanche";
        let reference = "maisons";
        let chars: Vec<char> = text.chars().collect();
        let mut best = (0.0, 0, 0);
        for len in 1..=chars.len() {
            for start in 0..=chars.len() - len {
                let s: String = chars[start..start + len].iter().collect();
                let score = chr_sim(&s, reference);
                if score > best.0 + 1e-12 {
                    best = (score, start, start + len);
                }
            }
        }
        let (span, score) = best_substring(text, reference).unwrap();
        assert_eq!((span.start(), span.end()), (best.1, best.2));
        assert!((score - best.0).abs() < 1e-12);
    }
}
