use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{BackendError, ContextualQuery, ContextualTranslator, Translator};
use crate::baselines::tokenize;

/// Phrase-to-phrase lexicon applied by greedy longest match over tokens.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "WireTable", into = "WireTable")]
pub struct PhraseTable {
    entries: BTreeMap<String, String>,
    pass_through: bool,
    // first token -> (key tokens, translation), longest key first
    index: HashMap<String, Vec<(Vec<String>, String)>>,
}

#[derive(Serialize, Deserialize)]
struct WireTable {
    #[serde(default)]
    pass_through: bool,
    entries: BTreeMap<String, String>,
}

impl TryFrom<WireTable> for PhraseTable {
    type Error = BackendError;

    fn try_from(wire: WireTable) -> Result<Self, Self::Error> {
        PhraseTable::new(wire.entries, wire.pass_through)
    }
}

impl From<PhraseTable> for WireTable {
    fn from(table: PhraseTable) -> Self {
        WireTable {
            pass_through: table.pass_through,
            entries: table.entries,
        }
    }
}

fn token_strings(text: &str) -> Vec<String> {
    tokenize(text, "und").into_iter().map(|t| t.surface).collect()
}

impl PhraseTable {
    pub fn new<I, K, V>(entries: I, pass_through: bool) -> Result<Self, BackendError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        let entries: BTreeMap<String, String> = entries.into_iter().map(|(k, v)| (k.into(), v.into())).collect();
        let mut index: HashMap<String, Vec<(Vec<String>, String)>> = HashMap::new();
        for (key, value) in &entries {
            let tokens = token_strings(key);
            let Some(first) = tokens.first() else {
                return Err(BackendError::Table(format!("empty key {key:?}")));
            };
            let bucket = index.entry(first.clone()).or_default();
            if bucket.iter().all(|(existing, _)| *existing != tokens) {
                bucket.push((tokens, value.clone()));
            }
        }
        for bucket in index.values_mut() {
            // stable: equal lengths keep key order from the BTreeMap walk
            bucket.sort_by_key(|entry| std::cmp::Reverse(entry.0.len()));
        }
        Ok(Self {
            entries,
            pass_through,
            index,
        })
    }

    /// Empty table that copies every token through.
    pub fn identity() -> Self {
        Self::new(Vec::<(String, String)>::new(), true).expect("empty table is valid")
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    pub fn pass_through(&self) -> bool {
        self.pass_through
    }

    pub fn get(&self, phrase: &str) -> Option<&str> {
        self.entries.get(phrase).map(String::as_str)
    }

    /// Target-to-source table. When several sources share a target, the
    /// lexicographically first source wins.
    pub fn inverted(&self) -> Self {
        let mut inverse: BTreeMap<String, String> = BTreeMap::new();
        for (k, v) in &self.entries {
            if token_strings(v).is_empty() {
                continue;
            }
            inverse.entry(v.clone()).or_insert_with(|| k.clone());
        }
        Self::new(inverse, self.pass_through).expect("non-empty keys")
    }

    fn longest_match<'a>(&'a self, tokens: &[String]) -> Option<(usize, &'a str)> {
        let bucket = self.index.get(tokens.first()?)?;
        bucket
            .iter()
            .find(|(key, _)| tokens.len() >= key.len() && tokens[..key.len()] == key[..])
            .map(|(key, value)| (key.len(), value.as_str()))
    }

    /// Like `longest_match`, but compares token cores. Only the first token
    /// of the match may carry a prefix and only the last a suffix.
    fn longest_core_match<'a>(&'a self, pieces: &[Piece<'_>]) -> Option<(usize, &'a str)> {
        let bucket = self.index.get(pieces.first()?.core)?;
        bucket
            .iter()
            .find(|(key, _)| {
                let k = key.len();
                pieces.len() >= k
                    && pieces[..k].iter().zip(key).enumerate().all(|(j, (piece, word))| {
                        piece.core == word
                            && (j == 0 || piece.prefix.is_empty())
                            && (j + 1 == k || piece.suffix.is_empty())
                    })
            })
            .map(|(key, value)| (key.len(), value.as_str()))
    }
}

/// A token split into leading non-letters, the letter-bounded core, and
/// trailing non-letters: `[0]chat,` is `[0]`, `chat`, `,`.
struct Piece<'a> {
    prefix: &'a str,
    core: &'a str,
    suffix: &'a str,
}

impl<'a> Piece<'a> {
    fn new(token: &'a str) -> Self {
        match (token.find(char::is_alphabetic), token.rfind(char::is_alphabetic)) {
            (Some(first), Some(last)) => {
                let end = last + token[last..].chars().next().map_or(0, char::len_utf8);
                Piece {
                    prefix: &token[..first],
                    core: &token[first..end],
                    suffix: &token[end..],
                }
            }
            _ => Piece {
                prefix: token,
                core: "",
                suffix: "",
            },
        }
    }
}

/// Languages whose script separates words with spaces. Output segments are
/// joined with a single space for these and concatenated otherwise.
pub fn is_space_delimited(language: &str) -> bool {
    let primary = language
        .split(['-', '_'])
        .next()
        .unwrap_or_default()
        .to_ascii_lowercase();
    !matches!(primary.as_str(), "zh" | "ja" | "th" | "lo" | "my" | "km" | "bo")
}

/// Translates left to right, always taking the longest table key that
/// matches the upcoming tokens. Tokens that only match once stripped of
/// surrounding punctuation (markers included) keep that punctuation, and
/// tokens without letters are copied.
pub fn dict_translate(
    table: &PhraseTable,
    text: &str,
    _src_lang: &str,
    tgt_lang: &str,
) -> Result<String, BackendError> {
    let tokens = token_strings(text);
    let pieces: Vec<Piece<'_>> = tokens.iter().map(|t| Piece::new(t)).collect();
    let mut segments: Vec<String> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if let Some((consumed, value)) = table.longest_match(&tokens[i..]) {
            if !value.is_empty() {
                segments.push(value.to_string());
            }
            i += consumed;
        } else if let Some((consumed, value)) = table.longest_core_match(&pieces[i..]) {
            let segment = format!("{}{value}{}", pieces[i].prefix, pieces[i + consumed - 1].suffix);
            if !segment.is_empty() {
                segments.push(segment);
            }
            i += consumed;
        } else if table.pass_through || pieces[i].core.is_empty() {
            segments.push(tokens[i].clone());
            i += 1;
        } else {
            return Err(BackendError::UnmatchedToken {
                token: tokens[i].clone(),
            });
        }
    }
    let separator = if is_space_delimited(tgt_lang) { " " } else { "" };
    Ok(segments.join(separator))
}

#[derive(Deserialize)]
struct DirectedTableFile {
    source: String,
    target: String,
    #[serde(flatten)]
    table: PhraseTable,
}

#[derive(Deserialize)]
struct TranslatorFile {
    id: String,
    tables: Vec<DirectedTableFile>,
}

/// Deterministic [`Translator`] over per-direction phrase tables. A missing
/// direction falls back to the inverse of the opposite table.
#[derive(Debug, Clone)]
pub struct PhraseTableTranslator {
    id: String,
    tables: BTreeMap<(String, String), PhraseTable>,
    identity: bool,
}

impl PhraseTableTranslator {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            tables: BTreeMap::new(),
            identity: false,
        }
    }

    /// Copies text through unchanged (up to whitespace normalization) in every direction.
    pub fn identity() -> Self {
        Self {
            id: "identity".into(),
            tables: BTreeMap::new(),
            identity: true,
        }
    }

    pub fn with_table(mut self, src: &str, tgt: &str, table: PhraseTable) -> Self {
        let reverse = (tgt.to_string(), src.to_string());
        self.tables.entry(reverse).or_insert_with(|| table.inverted());
        self.tables.insert((src.to_string(), tgt.to_string()), table);
        self
    }

    /// Loads `{"id": .., "tables": [{"source", "target", "pass_through", "entries"}]}`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| BackendError::Table(format!("{}: {e}", path.display())))?;
        let file: TranslatorFile =
            serde_json::from_str(&raw).map_err(|e| BackendError::Table(format!("{}: {e}", path.display())))?;
        let mut translator = Self::new(file.id);
        // explicit tables override inverses regardless of file order
        for entry in &file.tables {
            translator = translator.with_table(&entry.source, &entry.target, entry.table.clone());
        }
        for entry in file.tables {
            translator.tables.insert((entry.source, entry.target), entry.table);
        }
        Ok(translator)
    }

    pub fn table(&self, src: &str, tgt: &str) -> Option<&PhraseTable> {
        self.tables.get(&(src.to_string(), tgt.to_string()))
    }
}

impl Translator for PhraseTableTranslator {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn translate(&self, text: &str, src_lang: &str, tgt_lang: &str) -> Result<String, BackendError> {
        if self.identity {
            return dict_translate(&PhraseTable::identity(), text, src_lang, tgt_lang);
        }
        let table = self.table(src_lang, tgt_lang).ok_or_else(|| BackendError::NoTable {
            src: src_lang.to_string(),
            tgt: tgt_lang.to_string(),
        })?;
        dict_translate(table, text, src_lang, tgt_lang)
    }
}

#[derive(Deserialize)]
struct DictionaryFile {
    id: String,
    #[serde(default)]
    alternatives: BTreeMap<String, Vec<String>>,
}

/// Context-aware lexicon standing in for the contextual translator.
///
/// Each source label may list several renderings; the first one present in
/// the context wins, otherwise the first listed. Labels without an entry go
/// through the fallback sentence translator.
#[derive(Clone)]
pub struct DictionaryContextual {
    id: String,
    alternatives: BTreeMap<String, Vec<String>>,
    fallback: Option<Arc<dyn Translator>>,
}

impl DictionaryContextual {
    pub fn new(id: impl Into<String>, alternatives: BTreeMap<String, Vec<String>>) -> Self {
        Self {
            id: id.into(),
            alternatives,
            fallback: None,
        }
    }

    pub fn with_fallback(mut self, translator: Arc<dyn Translator>) -> Self {
        self.fallback = Some(translator);
        self
    }

    /// Loads `{"id": .., "alternatives": {label: [rendering, ..]}}`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| BackendError::Table(format!("{}: {e}", path.display())))?;
        let file: DictionaryFile =
            serde_json::from_str(&raw).map_err(|e| BackendError::Table(format!("{}: {e}", path.display())))?;
        Ok(Self::new(file.id, file.alternatives))
    }
}

impl ContextualTranslator for DictionaryContextual {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn complete(&self, query: &ContextualQuery<'_>) -> Result<String, BackendError> {
        if let Some(options) = self.alternatives.get(query.label).filter(|o| !o.is_empty()) {
            let chosen = options
                .iter()
                .find(|o| query.context.contains(o.as_str()))
                .unwrap_or(&options[0]);
            return Ok(chosen.clone());
        }
        match &self.fallback {
            Some(t) => t.translate(query.label, query.src_lang, query.tgt_lang),
            None => Err(BackendError::UnmatchedToken {
                token: query.label.to_string(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> PhraseTable {
        PhraseTable::new([("big cat", "gros chat"), ("sleeps", "dort"), ("big", "grand")], false).unwrap()
    }

    #[test]
    fn longest_match_wins() {
        assert_eq!(
            dict_translate(&table(), "big cat sleeps", "en", "fr").unwrap(),
            "gros chat dort"
        );
        assert_eq!(
            dict_translate(&table(), "big cat big cat", "en", "fr").unwrap(),
            "gros chat gros chat"
        );
        assert_eq!(
            dict_translate(&table(), "big sleeps", "en", "fr").unwrap(),
            "grand dort"
        );
    }

    #[test]
    fn empty_text_is_empty() {
        assert_eq!(dict_translate(&table(), "", "en", "fr").unwrap(), "");
    }

    #[test]
    fn unmatched_token_names_it() {
        let err = dict_translate(&table(), "big dog", "en", "fr").unwrap_err();
        assert_eq!(err, BackendError::UnmatchedToken { token: "dog".into() });
    }

    #[test]
    fn pass_through_copies_tokens() {
        let t = PhraseTable::new([("cat", "chat")], true).unwrap();
        assert_eq!(dict_translate(&t, "the cat", "en", "fr").unwrap(), "the chat");
    }

    #[test]
    fn identity_preserves_cjk_without_spaces() {
        let id = PhraseTable::identity();
        assert_eq!(
            dict_translate(&id, "[0]南佛州[/0]的居民", "zh", "zh").unwrap(),
            "[0]南佛州[/0]的居民"
        );
        assert_eq!(dict_translate(&id, "a [0]b c[/0]", "en", "en").unwrap(), "a [0]b c[/0]");
    }

    #[test]
    fn attached_punctuation_and_markers_carry_over() {
        let t = table();
        assert_eq!(
            dict_translate(&t, "[0]big cat[/0] sleeps.", "en", "fr").unwrap(),
            "[0]gros chat[/0] dort."
        );
        assert_eq!(
            dict_translate(&t, "[0]big[/0] [1]sleeps[/1]", "en", "fr").unwrap(),
            "[0]grand[/0] [1]dort[/1]"
        );
        // a suffix inside the phrase blocks the multi-word entry
        assert_eq!(
            dict_translate(&t, "big, cat", "en", "fr").unwrap_err(),
            BackendError::UnmatchedToken { token: "cat".into() }
        );
        assert_eq!(dict_translate(&t, "sleeps 42 [3]", "en", "fr").unwrap(), "dort 42 [3]");
    }

    #[test]
    fn empty_key_rejected() {
        assert!(PhraseTable::new([("  ", "x")], false).is_err());
    }

    #[test]
    fn case_sensitive() {
        assert!(dict_translate(&table(), "Big cat", "en", "fr").is_err());
    }

    #[test]
    fn translator_uses_inverse_direction() {
        let t = PhraseTableTranslator::new("t").with_table("en", "fr", table());
        assert_eq!(t.translate("gros chat dort", "fr", "en").unwrap(), "big cat sleeps");
        assert!(matches!(
            t.translate("x", "en", "de"),
            Err(BackendError::NoTable { .. })
        ));
    }

    #[test]
    fn dictionary_prefers_alternative_in_context() {
        let mut alts = BTreeMap::new();
        alts.insert(
            "big cat".to_string(),
            vec!["grand chat".to_string(), "gros chat".to_string()],
        );
        let m = DictionaryContextual::new("m", alts);
        let q = |context| ContextualQuery {
            prompt: "",
            label: "big cat",
            context,
            src_lang: "en",
            tgt_lang: "fr",
            attempt: 1,
        };
        assert_eq!(m.complete(&q("le gros chat dort")).unwrap(), "gros chat");
        assert_eq!(m.complete(&q("rien")).unwrap(), "grand chat");
        let missing = ContextualQuery { label: "dog", ..q("x") };
        assert!(m.complete(&missing).is_err());
    }

    #[test]
    fn table_serde_round_trip() {
        let json = serde_json::to_string(&table()).unwrap();
        let back: PhraseTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back.entries(), table().entries());
        assert!(serde_json::from_str::<PhraseTable>(r#"{"entries":{"":"x"}}"#).is_err());
    }
}
