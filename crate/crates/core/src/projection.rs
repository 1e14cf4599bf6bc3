//! Pieces shared by every projection method.

use thiserror::Error;

use crate::backends::BackendError;
use crate::corpus::{Label, ProjectionRecord};

/// Run-wide values stamped into every projected datapoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunContext {
    pub target_language: String,
    pub config_hash: String,
}

impl RunContext {
    pub fn new(target_language: impl Into<String>, config_hash: impl Into<String>) -> Self {
        Self {
            target_language: target_language.into(),
            config_hash: config_hash.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("sentence {sent_id:?}{}: {source}", label_suffix(.label_id))]
    Backend {
        sent_id: String,
        label_id: Option<String>,
        #[source]
        source: BackendError,
    },
    #[error("sentence {sent_id:?}: {message}")]
    Invalid { sent_id: String, message: String },
}

fn label_suffix(label_id: &Option<String>) -> String {
    label_id
        .as_ref()
        .map(|id| format!(", label {id:?}"))
        .unwrap_or_default()
}

impl ProjectionError {
    pub fn backend(sent_id: &str, label_id: Option<&str>) -> impl FnOnce(BackendError) -> Self + use<> {
        let sent_id = sent_id.to_string();
        let label_id = label_id.map(str::to_string);
        move |source| ProjectionError::Backend {
            sent_id,
            label_id,
            source,
        }
    }

    pub fn invalid(sent_id: &str, message: impl Into<String>) -> Self {
        ProjectionError::Invalid {
            sent_id: sent_id.to_string(),
            message: message.into(),
        }
    }

    pub fn backend_error(&self) -> Option<&BackendError> {
        match self {
            ProjectionError::Backend { source, .. } => Some(source),
            ProjectionError::Invalid { .. } => None,
        }
    }
}

/// Record for a label whose source span equals that of an already projected label.
pub(crate) fn reuse_record(original: &ProjectionRecord, label: &Label) -> ProjectionRecord {
    let mut record = original.clone();
    record.label_id = label.label_id.clone();
    record.source_surface = label.surface.clone();
    record.attempts = 0;
    record.diagnostics = vec![format!(
        "same source span as label {:?}; result reused",
        original.label_id
    )];
    record
}
