//! Translator (sentence MT) and contextual translator (prompted label MT)
//! contracts, plus the concrete backends behind them.
//!
//! Remote backends speak a two-endpoint JSON protocol and sit behind an
//! append-only record/replay cache so a run can be reproduced offline.

mod cache;
mod phrase_table;
mod remote;

use thiserror::Error;

pub use cache::{cache_key, canonical_json, file_stats, CacheEntry, CacheMode, CacheStats, ReplayCache};
pub use phrase_table::{dict_translate, is_space_delimited, DictionaryContextual, PhraseTable, PhraseTableTranslator};
pub use remote::{RemoteConfig, RemoteContextual, RemoteTranslator, BEARER_TOKEN_ENV};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("no phrase-table entry for token {token:?}")]
    UnmatchedToken { token: String },
    #[error("no phrase table for {src} -> {tgt}")]
    NoTable { src: String, tgt: String },
    #[error("invalid phrase table: {0}")]
    Table(String),
    #[error("transport error{} for request {digest}: {message}", status_suffix(.status))]
    Transport {
        status: Option<u16>,
        message: String,
        digest: String,
    },
    #[error("protocol error for request {digest}: {message}")]
    Protocol { message: String, digest: String },
    #[error("cache miss for key {digest}")]
    CacheMiss { digest: String },
    #[error("cache: {0}")]
    Cache(String),
}

fn status_suffix(status: &Option<u16>) -> String {
    status.map(|s| format!(" (status {s})")).unwrap_or_default()
}

/// Sentence-level machine translation.
pub trait Translator: Send + Sync {
    fn backend_id(&self) -> &str;

    fn translate(&self, text: &str, src_lang: &str, tgt_lang: &str) -> Result<String, BackendError>;
}

/// One contextual-translation request. Remote models only see `prompt`;
/// the structured fields let local test doubles answer without parsing it.
#[derive(Debug, Clone, Copy)]
pub struct ContextualQuery<'a> {
    pub prompt: &'a str,
    pub label: &'a str,
    pub context: &'a str,
    pub src_lang: &'a str,
    pub tgt_lang: &'a str,
    /// 1-based attempt number for this label.
    pub attempt: u32,
}

/// Completion model used to translate a label inside a target-language context.
pub trait ContextualTranslator: Send + Sync {
    fn backend_id(&self) -> &str;

    /// Raw completion text for the rendered prompt.
    fn complete(&self, query: &ContextualQuery<'_>) -> Result<String, BackendError>;
}

impl<T: Translator + ?Sized> Translator for std::sync::Arc<T> {
    fn backend_id(&self) -> &str {
        (**self).backend_id()
    }

    fn translate(&self, text: &str, src_lang: &str, tgt_lang: &str) -> Result<String, BackendError> {
        (**self).translate(text, src_lang, tgt_lang)
    }
}

impl<T: ContextualTranslator + ?Sized> ContextualTranslator for std::sync::Arc<T> {
    fn backend_id(&self) -> &str {
        (**self).backend_id()
    }

    fn complete(&self, query: &ContextualQuery<'_>) -> Result<String, BackendError> {
        (**self).complete(query)
    }
}
