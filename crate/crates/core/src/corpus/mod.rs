//! Span-annotated sentence model and its JSONL corpus format.
//!
//! Offsets are Unicode code points into NFC-normalized text. Spans are
//! half-open `[start, end)` and serialize as two-element integer arrays.

mod io;
mod normalize;
mod projected;

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{load_corpus, read_corpus, save_corpus, write_corpus};
pub use normalize::{is_nfc, nfc, OffsetMap};
pub use projected::{
    parse_projected, read_projected, save_projected, write_projected, Method, ProjectedDatapoint, ProjectionRecord,
    Provenance,
};

/// Role name reserved for event triggers.
pub const TRIGGER_ROLE: &str = "trigger";

/// Language tag used for a corpus that has no sentences.
pub const UNDETERMINED_LANGUAGE: &str = "und";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: parse error: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {source}")]
    Invalid {
        line: usize,
        #[source]
        source: ValidationError,
    },
    #[error("invalid role registry: {0}")]
    Registry(String),
}

/// A violated data-model invariant, pinned to the sentence and label it was found in.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("sentence {sent_id:?}{}: {reason}", label_suffix(.label_id))]
pub struct ValidationError {
    pub sent_id: String,
    pub label_id: Option<String>,
    pub reason: String,
}

fn label_suffix(label_id: &Option<String>) -> String {
    match label_id {
        Some(id) => format!(", label {id:?}"),
        None => String::new(),
    }
}

impl ValidationError {
    fn sentence(sent_id: &str, reason: impl Into<String>) -> Self {
        Self {
            sent_id: sent_id.to_string(),
            label_id: None,
            reason: reason.into(),
        }
    }

    fn label(sent_id: &str, label_id: &str, reason: impl Into<String>) -> Self {
        Self {
            sent_id: sent_id.to_string(),
            label_id: Some(label_id.to_string()),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SpanError {
    #[error("empty or inverted span ({start}, {end})")]
    Empty { start: usize, end: usize },
    #[error("span ({start}, {end}) out of bounds for text of {len} code points")]
    OutOfBounds { start: usize, end: usize, len: usize },
}

/// Half-open code-point range `[start, end)`, never empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    start: usize,
    end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Result<Self, SpanError> {
        if start >= end {
            return Err(SpanError::Empty { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// True when the two ranges share at least one code point.
    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn check_bounds(&self, text: &str) -> Result<(), SpanError> {
        let len = text.chars().count();
        if self.end > len {
            return Err(SpanError::OutOfBounds {
                start: self.start,
                end: self.end,
                len,
            });
        }
        Ok(())
    }
}

impl TryFrom<[usize; 2]> for Span {
    type Error = SpanError;

    fn try_from([start, end]: [usize; 2]) -> Result<Self, Self::Error> {
        Span::new(start, end)
    }
}

impl From<Span> for [usize; 2] {
    fn from(span: Span) -> Self {
        [span.start, span.end]
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.start, self.end)
    }
}

/// Code-point slice of `text`. Byte width of the script plays no role.
pub fn slice(text: &str, span: Span) -> Result<&str, SpanError> {
    let mut indices = text.char_indices().map(|(byte, _)| byte).chain([text.len()]);
    let start = indices.nth(span.start);
    let end = start.and_then(|_| indices.nth(span.end - span.start - 1));
    match (start, end) {
        (Some(start), Some(end)) => Ok(&text[start..end]),
        _ => Err(SpanError::OutOfBounds {
            start: span.start,
            end: span.end,
            len: text.chars().count(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Label {
    pub label_id: String,
    pub role: String,
    pub span: Span,
    pub surface: String,
}

impl Label {
    pub fn is_trigger(&self) -> bool {
        self.role == TRIGGER_ROLE
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventFrame {
    pub event_type: String,
    /// Role is always [`TRIGGER_ROLE`].
    pub trigger: Label,
    pub arguments: Vec<Label>,
}

impl EventFrame {
    pub fn labels(&self) -> impl Iterator<Item = &Label> {
        std::iter::once(&self.trigger).chain(self.arguments.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSentence {
    pub doc_id: String,
    pub sent_id: String,
    pub language: String,
    /// NFC-normalized.
    pub text: String,
    pub events: Vec<EventFrame>,
}

impl LabeledSentence {
    /// Every label in the sentence, triggers first per event, in file order.
    pub fn labels(&self) -> impl Iterator<Item = &Label> {
        self.events.iter().flat_map(EventFrame::labels)
    }

    /// Labels sorted by span, ties broken by `label_id`.
    pub fn labels_in_span_order(&self) -> Vec<&Label> {
        let mut labels: Vec<&Label> = self.labels().collect();
        labels.sort_by(|a, b| a.span.cmp(&b.span).then_with(|| a.label_id.cmp(&b.label_id)));
        labels
    }

    pub fn validate(&self, registry: Option<&RoleRegistry>) -> Result<(), ValidationError> {
        if !is_nfc(&self.text) {
            return Err(ValidationError::sentence(&self.sent_id, "text is not NFC-normalized"));
        }
        let mut seen = HashSet::new();
        for event in &self.events {
            if event.trigger.role != TRIGGER_ROLE {
                return Err(ValidationError::label(
                    &self.sent_id,
                    &event.trigger.label_id,
                    format!("trigger role must be {TRIGGER_ROLE:?}"),
                ));
            }
            for label in event.labels() {
                if !seen.insert(label.label_id.as_str()) {
                    return Err(ValidationError::label(
                        &self.sent_id,
                        &label.label_id,
                        "duplicate label_id",
                    ));
                }
                self.validate_label(label, registry)?;
            }
        }
        Ok(())
    }

    fn validate_label(&self, label: &Label, registry: Option<&RoleRegistry>) -> Result<(), ValidationError> {
        let err = |reason: String| ValidationError::label(&self.sent_id, &label.label_id, reason);
        let slice = slice(&self.text, label.span).map_err(|e| err(e.to_string()))?;
        if slice != label.surface {
            return Err(err(format!(
                "surface mismatch: span {} covers {slice:?}, surface is {:?}",
                label.span, label.surface
            )));
        }
        if let Some(registry) = registry {
            if !label.is_trigger() && !registry.contains(&label.role) {
                return Err(err(format!("unknown role {:?}", label.role)));
            }
        }
        Ok(())
    }
}

/// The closed set of argument role names a corpus may use.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleRegistry {
    roles: BTreeSet<String>,
}

impl RoleRegistry {
    pub fn new<I, S>(roles: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let roles: BTreeSet<String> = roles.into_iter().map(Into::into).collect();
        if roles.is_empty() {
            return Err(CorpusError::Registry("no roles".into()));
        }
        if roles.iter().any(|r| r.trim().is_empty()) {
            return Err(CorpusError::Registry("blank role name".into()));
        }
        Ok(Self { roles })
    }

    /// Reads a JSON array of role names, or an object with a `roles` array.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum RolesFile {
            List(Vec<String>),
            Object { roles: Vec<String> },
        }
        let parsed: RolesFile =
            serde_json::from_str(&raw).map_err(|e| CorpusError::Registry(format!("{}: {e}", path.display())))?;
        match parsed {
            RolesFile::List(roles) | RolesFile::Object { roles } => Self::new(roles),
        }
    }

    pub fn contains(&self, role: &str) -> bool {
        self.roles.contains(role)
    }

    pub fn roles(&self) -> impl Iterator<Item = &str> {
        self.roles.iter().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub language: String,
    pub sentences: Vec<LabeledSentence>,
}

impl Corpus {
    pub fn new(language: impl Into<String>, sentences: Vec<LabeledSentence>) -> Self {
        Self {
            language: language.into(),
            sentences,
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(s: usize, e: usize) -> Span {
        Span::new(s, e).unwrap()
    }

    #[test]
    fn slice_counts_code_points() {
        assert_eq!(slice("le gros chat dort", span(8, 12)).unwrap(), "chat");
        assert_eq!(slice("abc", span(0, 3)).unwrap(), "abc");
        assert_eq!(slice("南佛州", span(1, 2)).unwrap(), "佛");
        assert_eq!(slice("مرحبا بك", span(6, 8)).unwrap(), "بك");
    }

    #[test]
    fn slice_out_of_bounds() {
        assert_eq!(
            slice("abc", span(1, 4)),
            Err(SpanError::OutOfBounds {
                start: 1,
                end: 4,
                len: 3
            })
        );
        assert!(slice("abc", span(3, 4)).is_err());
        assert!(slice("", span(0, 1)).is_err());
    }

    #[test]
    fn span_rejects_empty() {
        assert!(Span::new(3, 3).is_err());
        assert!(Span::new(4, 3).is_err());
        assert!(serde_json::from_str::<Span>("[2, 2]").is_err());
        assert_eq!(serde_json::to_string(&span(0, 7)).unwrap(), "[0,7]");
    }

    #[test]
    fn overlap_is_half_open() {
        assert!(span(0, 7).overlaps(&span(4, 10)));
        assert!(!span(0, 4).overlaps(&span(4, 10)));
        assert!(span(2, 3).overlaps(&span(0, 10)));
    }

    #[test]
    fn registry_must_be_non_empty() {
        assert!(RoleRegistry::new(Vec::<String>::new()).is_err());
        let registry = RoleRegistry::new(["Agent", "Place"]).unwrap();
        assert!(registry.contains("Place"));
        assert!(!registry.contains("Victim"));
    }

    #[test]
    fn labels_sorted_by_span_then_id() {
        let label = |id: &str, s, e, text: &str| Label {
            label_id: id.into(),
            role: "Agent".into(),
            span: span(s, e),
            surface: text.into(),
        };
        let sentence = LabeledSentence {
            doc_id: "d".into(),
            sent_id: "s".into(),
            language: "en".into(),
            text: "big cat sleeps".into(),
            events: vec![EventFrame {
                event_type: "Life:Sleep".into(),
                trigger: Label {
                    role: TRIGGER_ROLE.into(),
                    ..label("t", 8, 14, "sleeps")
                },
                arguments: vec![label("b", 0, 7, "big cat"), label("a", 0, 7, "big cat")],
            }],
        };
        let ids: Vec<_> = sentence
            .labels_in_span_order()
            .iter()
            .map(|l| l.label_id.as_str())
            .collect();
        assert_eq!(ids, ["a", "b", "t"]);
        sentence.validate(None).unwrap();
    }
}
