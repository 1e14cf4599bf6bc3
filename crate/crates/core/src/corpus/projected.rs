use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::io::{events_from_wire, events_to_wire, WireEvent};
use super::{nfc, slice, CorpusError, EventFrame, Label, LabeledSentence, Span, ValidationError};

/// Label projection method that produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Clap,
    Marker,
    Align,
    Independent,
    Constrained,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Clap,
        Method::Marker,
        Method::Align,
        Method::Independent,
        Method::Constrained,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Clap => "clap",
            Method::Marker => "marker",
            Method::Align => "align",
            Method::Independent => "independent",
            Method::Constrained => "constrained",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| {
            format!("unknown method {s:?} (expected one of clap, marker, align, independent, constrained)")
        })
    }
}

/// Outcome of projecting one source label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionRecord {
    pub label_id: String,
    pub source_surface: String,
    pub method: Method,
    pub candidate: Option<String>,
    pub matched_span: Option<Span>,
    pub faithful: bool,
    pub attempts: u32,
    pub diagnostics: Vec<String>,
}

impl ProjectionRecord {
    pub fn new(label: &Label, method: Method) -> Self {
        Self {
            label_id: label.label_id.clone(),
            source_surface: label.surface.clone(),
            method,
            candidate: None,
            matched_span: None,
            faithful: false,
            attempts: 0,
            diagnostics: Vec::new(),
        }
    }

    pub fn matched(mut self, candidate: String, span: Span) -> Self {
        self.candidate = Some(candidate);
        self.matched_span = Some(span);
        self.faithful = true;
        self
    }

    pub fn unmatched(mut self, candidate: Option<String>) -> Self {
        self.candidate = candidate;
        self.matched_span = None;
        self.faithful = false;
        self
    }

    pub fn note(mut self, diagnostic: impl Into<String>) -> Self {
        self.diagnostics.push(diagnostic.into());
        self
    }

    fn validate(&self, sent_id: &str, target_text: &str) -> Result<(), ValidationError> {
        let err = |reason: String| ValidationError::label(sent_id, &self.label_id, reason);
        match (&self.matched_span, self.faithful) {
            (Some(span), true) => {
                let found = slice(target_text, *span).map_err(|e| err(e.to_string()))?;
                let candidate = self.candidate.as_deref().unwrap_or_default();
                if nfc(found) != nfc(candidate) && nfc(found).to_lowercase() != nfc(candidate).to_lowercase() {
                    return Err(err(format!(
                        "matched span {span} covers {found:?}, candidate is {candidate:?}"
                    )));
                }
                Ok(())
            }
            (None, false) => Ok(()),
            _ => Err(err("faithful flag disagrees with matched_span".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: Method,
    pub translator_id: String,
    pub contextual_model_id: Option<String>,
    pub config_hash: String,
    /// Method parameters that shape the output (attempt budgets, length caps, marker scheme).
    #[serde(default)]
    pub settings: BTreeMap<String, serde_json::Value>,
}

/// A sentence translated into the target language with its labels re-anchored.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedDatapoint {
    pub doc_id: String,
    pub sent_id: String,
    /// Target language tag.
    pub language: String,
    pub target_text: String,
    /// Only faithful labels; an event whose trigger failed to project is dropped.
    pub events: Vec<EventFrame>,
    pub records: Vec<ProjectionRecord>,
    pub datapoint_faithful: bool,
    pub provenance: Provenance,
}

impl ProjectedDatapoint {
    /// Re-anchors the source events at the matched spans in `records` and
    /// derives the datapoint-level faithfulness flag.
    pub fn assemble(
        source: &LabeledSentence,
        language: &str,
        target_text: String,
        records: Vec<ProjectionRecord>,
        provenance: Provenance,
    ) -> Self {
        let by_id: HashMap<&str, &ProjectionRecord> = records.iter().map(|r| (r.label_id.as_str(), r)).collect();
        let reanchor = |label: &Label| -> Option<Label> {
            let record = by_id.get(label.label_id.as_str())?;
            let span = record.matched_span.filter(|_| record.faithful)?;
            let surface = slice(&target_text, span).ok()?.to_string();
            Some(Label {
                label_id: label.label_id.clone(),
                role: label.role.clone(),
                span,
                surface,
            })
        };
        let events = source
            .events
            .iter()
            .filter_map(|event| {
                Some(EventFrame {
                    event_type: event.event_type.clone(),
                    trigger: reanchor(&event.trigger)?,
                    arguments: event.arguments.iter().filter_map(reanchor).collect(),
                })
            })
            .collect();
        let datapoint_faithful = records.iter().all(|r| r.faithful);
        Self {
            doc_id: source.doc_id.clone(),
            sent_id: source.sent_id.clone(),
            language: language.to_string(),
            target_text,
            events,
            records,
            datapoint_faithful,
            provenance,
        }
    }

    /// The projected datapoint as a target-language training sentence.
    pub fn to_labeled_sentence(&self) -> LabeledSentence {
        LabeledSentence {
            doc_id: self.doc_id.clone(),
            sent_id: self.sent_id.clone(),
            language: self.language.clone(),
            text: self.target_text.clone(),
            events: self.events.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        self.to_labeled_sentence().validate(None)?;
        for record in &self.records {
            record.validate(&self.sent_id, &self.target_text)?;
        }
        if self.datapoint_faithful != self.records.iter().all(|r| r.faithful) {
            return Err(ValidationError::sentence(
                &self.sent_id,
                "datapoint_faithful disagrees with records",
            ));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireProjected {
    doc_id: String,
    sent_id: String,
    language: String,
    text: String,
    events: Vec<WireEvent>,
    records: Vec<ProjectionRecord>,
    datapoint_faithful: bool,
    provenance: Provenance,
}

pub fn write_projected<W: Write>(mut writer: W, datapoints: &[ProjectedDatapoint]) -> std::io::Result<()> {
    for dp in datapoints {
        let wire = WireProjected {
            doc_id: dp.doc_id.clone(),
            sent_id: dp.sent_id.clone(),
            language: dp.language.clone(),
            text: dp.target_text.clone(),
            events: events_to_wire(&dp.events),
            records: dp.records.clone(),
            datapoint_faithful: dp.datapoint_faithful,
            provenance: dp.provenance.clone(),
        };
        serde_json::to_writer(&mut writer, &wire)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

/// Reads projected JSONL, checking every record and re-anchored label against its target text.
pub fn read_projected(path: impl AsRef<Path>) -> Result<Vec<ProjectedDatapoint>, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_projected(BufReader::new(file))
}

/// [`read_projected`] over any reader.
pub fn parse_projected<R: BufRead>(reader: R) -> Result<Vec<ProjectedDatapoint>, CorpusError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: WireProjected = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let invalid = |source| CorpusError::Invalid { line: line_no, source };
        let (text, events) = events_from_wire(&wire.sent_id, &wire.text, wire.events).map_err(invalid)?;
        let dp = ProjectedDatapoint {
            doc_id: wire.doc_id,
            sent_id: wire.sent_id,
            language: wire.language,
            target_text: text,
            events,
            records: wire.records,
            datapoint_faithful: wire.datapoint_faithful,
            provenance: wire.provenance,
        };
        dp.validate().map_err(invalid)?;
        out.push(dp);
    }
    Ok(out)
}

/// Writes projected JSONL to `path`.
pub fn save_projected(datapoints: &[ProjectedDatapoint], path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    write_projected(BufWriter::new(file), datapoints).map_err(io_err)
}
