use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    nfc, Corpus, CorpusError, EventFrame, Label, LabeledSentence, OffsetMap, RoleRegistry, Span, ValidationError,
    TRIGGER_ROLE, UNDETERMINED_LANGUAGE,
};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct WireTrigger {
    pub label_id: String,
    pub span: [usize; 2],
    pub surface: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct WireArgument {
    pub label_id: String,
    pub role: String,
    pub span: [usize; 2],
    pub surface: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct WireEvent {
    pub event_type: String,
    pub trigger: WireTrigger,
    pub arguments: Vec<WireArgument>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct WireSentence {
    pub doc_id: String,
    pub sent_id: String,
    pub language: String,
    pub text: String,
    pub events: Vec<WireEvent>,
}

pub(crate) fn events_to_wire(events: &[EventFrame]) -> Vec<WireEvent> {
    events
        .iter()
        .map(|event| WireEvent {
            event_type: event.event_type.clone(),
            trigger: WireTrigger {
                label_id: event.trigger.label_id.clone(),
                span: event.trigger.span.into(),
                surface: event.trigger.surface.clone(),
            },
            arguments: event
                .arguments
                .iter()
                .map(|arg| WireArgument {
                    label_id: arg.label_id.clone(),
                    role: arg.role.clone(),
                    span: arg.span.into(),
                    surface: arg.surface.clone(),
                })
                .collect(),
        })
        .collect()
}

impl From<&LabeledSentence> for WireSentence {
    fn from(sentence: &LabeledSentence) -> Self {
        WireSentence {
            doc_id: sentence.doc_id.clone(),
            sent_id: sentence.sent_id.clone(),
            language: sentence.language.clone(),
            text: sentence.text.clone(),
            events: events_to_wire(&sentence.events),
        }
    }
}

/// Builds events against `text`, normalizing to NFC and remapping raw offsets.
/// Returns the normalized text alongside.
pub(crate) fn events_from_wire(
    sent_id: &str,
    raw_text: &str,
    events: Vec<WireEvent>,
) -> Result<(String, Vec<EventFrame>), ValidationError> {
    let map = OffsetMap::new(raw_text);
    let remap = |label_id: &str, [start, end]: [usize; 2], surface: String| {
        let err = |reason: String| ValidationError::label(sent_id, label_id, reason);
        let len = raw_text.chars().count();
        if start >= end || end > len {
            return Err(err(format!(
                "span out of bounds: ({start}, {end}) on text of {len} code points"
            )));
        }
        let (Some(s), Some(e)) = (map.map(start), map.map(end)) else {
            return Err(err(format!(
                "span ({start}, {end}) splits a character that composes under NFC"
            )));
        };
        let span = Span::new(s, e).map_err(|e| err(e.to_string()))?;
        let surface = if map.is_identity() { surface } else { nfc(&surface) };
        Ok((span, surface))
    };
    let mut frames = Vec::with_capacity(events.len());
    for event in events {
        let t = event.trigger;
        let (span, surface) = remap(&t.label_id, t.span, t.surface)?;
        let trigger = Label {
            label_id: t.label_id,
            role: TRIGGER_ROLE.to_string(),
            span,
            surface,
        };
        let mut arguments = Vec::with_capacity(event.arguments.len());
        for a in event.arguments {
            let (span, surface) = remap(&a.label_id, a.span, a.surface)?;
            arguments.push(Label {
                label_id: a.label_id,
                role: a.role,
                span,
                surface,
            });
        }
        frames.push(EventFrame {
            event_type: event.event_type,
            trigger,
            arguments,
        });
    }
    Ok((map.into_normalized(), frames))
}

fn sentence_from_wire(wire: WireSentence, registry: &RoleRegistry) -> Result<LabeledSentence, ValidationError> {
    let (text, events) = events_from_wire(&wire.sent_id, &wire.text, wire.events)?;
    let sentence = LabeledSentence {
        doc_id: wire.doc_id,
        sent_id: wire.sent_id,
        language: wire.language,
        text,
        events,
    };
    sentence.validate(Some(registry))?;
    Ok(sentence)
}

/// Reads corpus JSONL from any reader. Blank lines are skipped.
pub fn read_corpus<R: BufRead>(reader: R, registry: &RoleRegistry) -> Result<Corpus, CorpusError> {
    let mut language: Option<String> = None;
    let mut sentences = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: WireSentence = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let sentence =
            sentence_from_wire(wire, registry).map_err(|source| CorpusError::Invalid { line: line_no, source })?;
        match &language {
            None => language = Some(sentence.language.clone()),
            Some(lang) if *lang != sentence.language => {
                return Err(CorpusError::Invalid {
                    line: line_no,
                    source: ValidationError::sentence(
                        &sentence.sent_id,
                        format!("language {:?} differs from corpus language {lang:?}", sentence.language),
                    ),
                });
            }
            Some(_) => {}
        }
        sentences.push(sentence);
    }
    Ok(Corpus {
        language: language.unwrap_or_else(|| UNDETERMINED_LANGUAGE.to_string()),
        sentences,
    })
}

pub fn load_corpus(path: impl AsRef<Path>, registry: &RoleRegistry) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_corpus(BufReader::new(file), registry)
}

pub fn write_corpus<W: Write>(mut writer: W, corpus: &Corpus) -> std::io::Result<()> {
    for sentence in &corpus.sentences {
        serde_json::to_writer(&mut writer, &WireSentence::from(sentence))?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    write_corpus(BufWriter::new(file), corpus).map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn registry() -> RoleRegistry {
        RoleRegistry::new(["Agent", "Place", "Entity"]).unwrap()
    }

    fn line(span: [usize; 2], surface: &str) -> String {
        format!(
            r#"{{"doc_id":"d1","sent_id":"s1","language":"en","text":"big cat sleeps","events":[{{"event_type":"Life:Sleep","trigger":{{"label_id":"t1","span":[8,14],"surface":"sleeps"}},"arguments":[{{"label_id":"a1","role":"Agent","span":[{},{}],"surface":"{surface}"}}]}}]}}"#,
            span[0], span[1]
        )
    }

    #[test]
    fn loads_valid_line() {
        let corpus = read_corpus(line([0, 7], "big cat").as_bytes(), &registry()).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.language, "en");
        let args = &corpus.sentences[0].events[0].arguments;
        assert_eq!(args[0].span, Span::new(0, 7).unwrap());
    }

    #[test]
    fn out_of_bounds_names_label() {
        let err = read_corpus(line([0, 99], "big cat").as_bytes(), &registry()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("\"a1\""), "{msg}");
        assert!(msg.contains("out of bounds"), "{msg}");
        assert!(matches!(err, CorpusError::Invalid { line: 1, .. }));
    }

    #[test]
    fn surface_mismatch_rejected() {
        let err = read_corpus(line([0, 7], "big dog").as_bytes(), &registry()).unwrap_err();
        assert!(err.to_string().contains("surface mismatch"), "{err}");
    }

    #[test]
    fn unknown_role_is_an_error() {
        let registry = RoleRegistry::new(["Place"]).unwrap();
        let err = read_corpus(line([0, 7], "big cat").as_bytes(), &registry).unwrap_err();
        assert!(err.to_string().contains("unknown role \"Agent\""), "{err}");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let input = format!("{}\n\n{{not json\n", line([0, 7], "big cat"));
        let err = read_corpus(input.as_bytes(), &registry()).unwrap_err();
        assert!(matches!(err, CorpusError::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn mixed_languages_rejected() {
        let second = line([0, 7], "big cat").replace("\"en\"", "\"fr\"").replace("s1", "s2");
        let input = format!("{}\n{second}\n", line([0, 7], "big cat"));
        assert!(read_corpus(input.as_bytes(), &registry()).is_err());
    }

    #[test]
    fn decomposed_text_is_normalized_and_remapped() {
        // "cafe\u0301 noir" with the argument over "noir" at raw offsets (6, 10)
        let raw = r#"{"doc_id":"d","sent_id":"s","language":"fr","text":"cafe\u0301 noir","events":[{"event_type":"E","trigger":{"label_id":"t","span":[0,5],"surface":"cafe\u0301"},"arguments":[{"label_id":"a","role":"Entity","span":[6,10],"surface":"noir"}]}]}"#;
        let corpus = read_corpus(raw.as_bytes(), &registry()).unwrap();
        let sentence = &corpus.sentences[0];
        assert_eq!(sentence.text, "café noir");
        assert_eq!(sentence.events[0].trigger.span, Span::new(0, 4).unwrap());
        assert_eq!(sentence.events[0].trigger.surface, "café");
        assert_eq!(sentence.events[0].arguments[0].span, Span::new(5, 9).unwrap());
    }

    #[test]
    fn empty_input_is_empty_corpus() {
        let corpus = read_corpus("".as_bytes(), &registry()).unwrap();
        assert!(corpus.is_empty());
        let mut out = Vec::new();
        write_corpus(&mut out, &corpus).unwrap();
        assert!(out.is_empty());
    }
}
