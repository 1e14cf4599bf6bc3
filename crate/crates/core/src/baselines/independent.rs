use std::collections::HashMap;

use crate::backends::Translator;
use crate::contextual::{find_label_span, MatchingPolicy};
use crate::corpus::{nfc, LabeledSentence, Method, ProjectedDatapoint, ProjectionRecord, Provenance, Span};
use crate::projection::{reuse_record, ProjectionError, RunContext};

/// Translates each label on its own and looks for the result in the
/// translated sentence.
pub fn project_independent(
    sentence: &LabeledSentence,
    translator: &dyn Translator,
    run: &RunContext,
) -> Result<ProjectedDatapoint, ProjectionError> {
    let sent_id = sentence.sent_id.as_str();
    let (src, tgt) = (sentence.language.as_str(), run.target_language.as_str());
    let target_text = nfc(&translator
        .translate(&sentence.text, src, tgt)
        .map_err(ProjectionError::backend(sent_id, None))?);
    let policy = MatchingPolicy::default();
    let mut taken: Vec<Span> = Vec::new();
    let mut by_span: HashMap<Span, usize> = HashMap::new();
    let mut records: Vec<ProjectionRecord> = Vec::new();
    for label in sentence.labels_in_span_order() {
        if let Some(&index) = by_span.get(&label.span) {
            let record = reuse_record(&records[index], label);
            records.push(record);
            continue;
        }
        let candidate = nfc(&translator
            .translate(&label.surface, src, tgt)
            .map_err(ProjectionError::backend(sent_id, Some(&label.label_id)))?);
        let mut record = ProjectionRecord::new(label, Method::Independent);
        record.attempts = 1;
        let record = match find_label_span(&candidate, &target_text, &taken, &policy) {
            Some(span) => {
                taken.push(span);
                record.matched(candidate, span)
            }
            None => record
                .unmatched(Some(candidate))
                .note("label translation does not occur in the translated sentence"),
        };
        by_span.insert(label.span, records.len());
        records.push(record);
    }
    let provenance = Provenance {
        method: Method::Independent,
        translator_id: translator.backend_id().to_string(),
        contextual_model_id: None,
        config_hash: run.config_hash.clone(),
        settings: Default::default(),
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
    use crate::backends::{PhraseTable, PhraseTableTranslator};
    use crate::corpus::{slice, EventFrame, Label};

    fn sentence(events: bool) -> LabeledSentence {
        let text = "big cat sleeps";
        let label = |id: &str, role: &str, s, e| {
            let span = Span::new(s, e).unwrap();
            Label {
                label_id: id.to_string(),
                role: role.to_string(),
                span,
                surface: slice(text, span).unwrap().to_string(),
            }
        };
        LabeledSentence {
            doc_id: "d".into(),
            sent_id: "s".into(),
            language: "en".into(),
            text: text.into(),
            events: if events {
                vec![EventFrame {
                    event_type: "E".into(),
                    trigger: label("t", "trigger", 8, 14),
                    arguments: vec![label("a", "Arg", 0, 7)],
                }]
            } else {
                vec![]
            },
        }
    }

    fn translator(entries: &[(&str, &str)]) -> PhraseTableTranslator {
        PhraseTableTranslator::new("dict").with_table(
            "en",
            "fr",
            PhraseTable::new(entries.iter().copied(), false).unwrap(),
        )
    }

    #[test]
    fn consistent_dictionary_is_faithful() {
        let t = translator(&[("big cat", "gros chat"), ("sleeps", "dort")]);
        let dp = project_independent(&sentence(true), &t, &RunContext::new("fr", "h")).unwrap();
        assert_eq!(dp.target_text, "gros chat dort");
        assert!(dp.datapoint_faithful);
        assert_eq!(dp.records[0].matched_span, Some(Span::new(0, 9).unwrap()));
    }

    #[test]
    fn context_free_phrase_can_miss() {
        // sentence-level entry differs from the phrase-level one
        let t = translator(&[
            ("big cat sleeps", "gros chat dort"),
            ("big cat", "grand chat"),
            ("sleeps", "dort"),
        ]);
        let dp = project_independent(&sentence(true), &t, &RunContext::new("fr", "h")).unwrap();
        let a = dp.records.iter().find(|r| r.label_id == "a").unwrap();
        assert!(!a.faithful);
        assert_eq!(a.candidate.as_deref(), Some("grand chat"));
        assert!(!dp.datapoint_faithful);
    }

    #[test]
    fn no_labels_is_vacuous() {
        let t = translator(&[("big cat", "gros chat"), ("sleeps", "dort")]);
        let dp = project_independent(&sentence(false), &t, &RunContext::new("fr", "h")).unwrap();
        assert!(dp.records.is_empty() && dp.datapoint_faithful);
    }
}
