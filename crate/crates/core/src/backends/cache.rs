use std::collections::HashMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::BackendError;
use crate::corpus::nfc;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CacheMode {
    /// Serve hits, call the backend on a miss and append the result.
    Record,
    /// Serve hits, fail on a miss. Never calls the backend.
    #[default]
    Replay,
    /// Always call, never read or store.
    Passthrough,
}

impl FromStr for CacheMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "record" => Ok(CacheMode::Record),
            "replay" => Ok(CacheMode::Replay),
            "passthrough" => Ok(CacheMode::Passthrough),
            other => Err(format!(
                "unknown cache mode {other:?} (expected record, replay or passthrough)"
            )),
        }
    }
}

impl fmt::Display for CacheMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CacheMode::Record => "record",
            CacheMode::Replay => "replay",
            CacheMode::Passthrough => "passthrough",
        })
    }
}

/// One line of the cache file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub backend: String,
    pub op: String,
    pub inputs: Value,
    pub output: String,
    /// Seconds since the Unix epoch.
    #[serde(default)]
    pub created_at: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub mode: CacheMode,
    pub entries: u64,
    pub hits: u64,
    pub misses: u64,
    pub backend_calls: u64,
    pub appended: u64,
}

fn canonicalize(value: &Value) -> Value {
    match value {
        Value::String(s) => Value::String(nfc(s)),
        Value::Array(items) => Value::Array(items.iter().map(canonicalize).collect()),
        Value::Object(map) => Value::Object(map.iter().map(|(k, v)| (nfc(k), canonicalize(v))).collect()),
        other => other.clone(),
    }
}

/// Compact JSON with object keys sorted and every string NFC-normalized.
pub fn canonical_json(value: &Value) -> String {
    fn write(value: &Value, out: &mut String) {
        match value {
            Value::Object(map) => {
                let mut keys: Vec<&String> = map.keys().collect();
                keys.sort();
                out.push('{');
                for (i, key) in keys.into_iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push_str(&Value::String(key.clone()).to_string());
                    out.push(':');
                    write(&map[key], out);
                }
                out.push('}');
            }
            Value::Array(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    write(item, out);
                }
                out.push(']');
            }
            scalar => out.push_str(&scalar.to_string()),
        }
    }
    let mut out = String::new();
    write(&canonicalize(value), &mut out);
    out
}

/// SHA-256 hex digest of the canonical (backend, op, inputs) triple.
pub fn cache_key(backend_id: &str, op: &str, inputs: &Value) -> String {
    let envelope = serde_json::json!({ "backend": backend_id, "op": op, "inputs": inputs });
    hex::encode(Sha256::digest(canonical_json(&envelope).as_bytes()))
}

/// Append-only JSONL store of backend responses. Reads are concurrent;
/// appends are serialized and land as whole lines.
pub struct ReplayCache {
    mode: CacheMode,
    path: Option<PathBuf>,
    entries: RwLock<HashMap<String, String>>,
    writer: Mutex<Option<File>>,
    hits: AtomicU64,
    misses: AtomicU64,
    calls: AtomicU64,
    appended: AtomicU64,
}

impl fmt::Debug for ReplayCache {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReplayCache")
            .field("mode", &self.mode)
            .field("path", &self.path)
            .finish_non_exhaustive()
    }
}

impl ReplayCache {
    pub fn in_memory(mode: CacheMode) -> Self {
        Self {
            mode,
            path: None,
            entries: RwLock::new(HashMap::new()),
            writer: Mutex::new(None),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            calls: AtomicU64::new(0),
            appended: AtomicU64::new(0),
        }
    }

    /// Opens (or, in record mode, creates) the cache file. On duplicate keys
    /// the last line wins. A torn final line from an interrupted append is ignored.
    pub fn open(path: impl AsRef<Path>, mode: CacheMode) -> Result<Self, BackendError> {
        let path = path.as_ref().to_path_buf();
        let mut cache = Self::in_memory(mode);
        let entries = match File::open(&path) {
            Ok(file) => read_entries(BufReader::new(file), &path)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(BackendError::Cache(format!("{}: {e}", path.display()))),
        };
        {
            let map = cache.entries.get_mut().expect("fresh lock");
            for entry in entries {
                map.insert(entry.key, entry.output);
            }
        }
        if mode == CacheMode::Record {
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .map_err(|e| BackendError::Cache(format!("{}: {e}", path.display())))?;
            *cache.writer.get_mut().expect("fresh lock") = Some(file);
        }
        cache.path = Some(path);
        Ok(cache)
    }

    pub fn mode(&self) -> CacheMode {
        self.mode
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.entries.read().expect("cache lock").get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Resolves one backend operation according to the cache mode.
    pub fn fetch<F>(&self, backend: &str, op: &str, inputs: &Value, call: F) -> Result<String, BackendError>
    where
        F: FnOnce(&str) -> Result<String, BackendError>,
    {
        let key = cache_key(backend, op, inputs);
        if self.mode == CacheMode::Passthrough {
            self.calls.fetch_add(1, Ordering::Relaxed);
            return call(&key);
        }
        if let Some(hit) = self.get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        if self.mode == CacheMode::Replay {
            return Err(BackendError::CacheMiss { digest: key });
        }
        self.calls.fetch_add(1, Ordering::Relaxed);
        let output = call(&key)?;
        let entry = CacheEntry {
            key: key.clone(),
            backend: backend.to_string(),
            op: op.to_string(),
            inputs: canonicalize(inputs),
            output: output.clone(),
            created_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or_default(),
        };
        self.append(&entry)?;
        self.entries.write().expect("cache lock").insert(key, output.clone());
        Ok(output)
    }

    fn append(&self, entry: &CacheEntry) -> Result<(), BackendError> {
        let mut line = serde_json::to_string(entry).map_err(|e| BackendError::Cache(e.to_string()))?;
        line.push('\n');
        let mut writer = self.writer.lock().expect("cache writer lock");
        if let Some(file) = writer.as_mut() {
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|e| BackendError::Cache(e.to_string()))?;
        }
        self.appended.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            mode: self.mode,
            entries: self.len() as u64,
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            backend_calls: self.calls.load(Ordering::Relaxed),
            appended: self.appended.load(Ordering::Relaxed),
        }
    }
}

fn read_entries<R: BufRead>(reader: R, path: &Path) -> Result<Vec<CacheEntry>, BackendError> {
    let lines: Vec<String> = reader
        .lines()
        .collect::<Result<_, _>>()
        .map_err(|e| BackendError::Cache(format!("{}: {e}", path.display())))?;
    let last = lines.len();
    let mut entries = Vec::with_capacity(lines.len());
    for (idx, line) in lines.into_iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<CacheEntry>(&line) {
            Ok(entry) => entries.push(entry),
            Err(_) if idx + 1 == last => break,
            Err(e) => {
                return Err(BackendError::Cache(format!(
                    "{}: line {}: {e}",
                    path.display(),
                    idx + 1
                )))
            }
        }
    }
    Ok(entries)
}

/// Summarizes a cache file without opening it for writing.
pub fn file_stats(path: impl AsRef<Path>) -> Result<(CacheStats, Vec<CacheEntry>), BackendError> {
    let cache = ReplayCache::open(path.as_ref(), CacheMode::Replay)?;
    let file = File::open(path.as_ref()).map_err(|e| BackendError::Cache(e.to_string()))?;
    let entries = read_entries(BufReader::new(file), path.as_ref())?;
    Ok((cache.stats(), entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn key_ignores_field_order() {
        let a: Value = serde_json::from_str(r#"{"text":"big cat","source":"en","target":"fr"}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"target":"fr","source":"en","text":"big cat"}"#).unwrap();
        assert_eq!(cache_key("m2m", "translate", &a), cache_key("m2m", "translate", &b));
    }

    #[test]
    fn key_depends_on_backend() {
        let inputs = json!({"text": "big cat"});
        assert_ne!(
            cache_key("m2m", "translate", &inputs),
            cache_key("gmt", "translate", &inputs)
        );
        assert_ne!(
            cache_key("m2m", "translate", &inputs),
            cache_key("m2m", "complete", &inputs)
        );
    }

    #[test]
    fn key_is_nfc_insensitive() {
        let composed = json!({"text": "caf\u{e9}"});
        let decomposed = json!({"text": "cafe\u{301}"});
        assert_eq!(
            cache_key("b", "translate", &composed),
            cache_key("b", "translate", &decomposed)
        );
    }

    #[test]
    fn key_is_hex_sha256() {
        let key = cache_key("b", "op", &json!({}));
        assert_eq!(key.len(), 64);
        assert!(key.chars().all(|c| c.is_ascii_hexdigit()));
    }

    #[test]
    fn replay_miss_is_an_error() {
        let cache = ReplayCache::in_memory(CacheMode::Replay);
        let err = cache
            .fetch("b", "translate", &json!({"text": "x"}), |_| panic!("must not call"))
            .unwrap_err();
        assert!(matches!(err, BackendError::CacheMiss { .. }));
        assert_eq!(cache.stats().misses, 1);
    }

    #[test]
    fn record_then_replay_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let inputs = json!({"text": "big cat"});
        {
            let cache = ReplayCache::open(&path, CacheMode::Record).unwrap();
            assert_eq!(
                cache
                    .fetch("b", "translate", &inputs, |_| Ok("gros chat".into()))
                    .unwrap(),
                "gros chat"
            );
            // second lookup is a hit
            assert_eq!(
                cache
                    .fetch("b", "translate", &inputs, |_| panic!("hit expected"))
                    .unwrap(),
                "gros chat"
            );
            let stats = cache.stats();
            assert_eq!((stats.backend_calls, stats.hits, stats.appended), (1, 1, 1));
        }
        let replay = ReplayCache::open(&path, CacheMode::Replay).unwrap();
        assert_eq!(
            replay.fetch("b", "translate", &inputs, |_| panic!("no calls")).unwrap(),
            "gros chat"
        );
        assert_eq!(replay.stats().backend_calls, 0);
    }

    #[test]
    fn last_entry_wins_and_torn_tail_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let key = cache_key("b", "translate", &json!({"text": "x"}));
        let line = |out: &str| {
            format!(r#"{{"key":"{key}","backend":"b","op":"translate","inputs":{{"text":"x"}},"output":"{out}"}}"#)
        };
        std::fs::write(
            &path,
            format!("{}\n{}\n{{\"key\":\"trunc", line("first"), line("second")),
        )
        .unwrap();
        let cache = ReplayCache::open(&path, CacheMode::Replay).unwrap();
        assert_eq!(cache.get(&key).as_deref(), Some("second"));
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn passthrough_never_stores() {
        let cache = ReplayCache::in_memory(CacheMode::Passthrough);
        let inputs = json!({"text": "x"});
        cache.fetch("b", "t", &inputs, |_| Ok("y".into())).unwrap();
        cache.fetch("b", "t", &inputs, |_| Ok("y".into())).unwrap();
        assert_eq!(cache.stats().backend_calls, 2);
        assert!(cache.is_empty());
    }

    #[test]
    fn canonical_json_sorts_nested_keys() {
        let v = json!({"b": {"z": 1, "a": [true, null]}, "a": "x"});
        assert_eq!(canonical_json(&v), r#"{"a":"x","b":{"a":[true,null],"z":1}}"#);
    }
}
