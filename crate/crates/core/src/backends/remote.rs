use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{cache_key, BackendError, ContextualQuery, ContextualTranslator, ReplayCache, Translator};

/// Environment variable holding the optional bearer token.
pub const BEARER_TOKEN_ENV: &str = "LABELPROJ_BEARER_TOKEN";

fn default_timeout() -> f64 {
    60.0
}
fn default_attempts() -> u32 {
    3
}
fn default_backoff() -> u64 {
    200
}
fn default_in_flight() -> usize {
    4
}
fn default_parameters() -> Map<String, Value> {
    let mut params = Map::new();
    params.insert("temperature".into(), json!(0.0));
    params
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    /// Base URL; `/translate` or `/complete` is appended.
    pub endpoint: String,
    /// Backend identity used in cache keys and provenance. Defaults to the endpoint.
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    /// Total tries per request, counting the first. Only transport failures are retried.
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    /// First retry delay; doubles on each further retry.
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    /// Extra fields merged into `/complete` bodies (decoding settings).
    #[serde(default = "default_parameters")]
    pub parameters: Map<String, Value>,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            id: None,
            timeout_secs: default_timeout(),
            max_attempts: default_attempts(),
            backoff_ms: default_backoff(),
            max_in_flight: default_in_flight(),
            parameters: default_parameters(),
        }
    }

    pub fn backend_id(&self) -> String {
        self.id.clone().unwrap_or_else(|| self.endpoint.clone())
    }
}

struct Limiter {
    available: Mutex<usize>,
    freed: Condvar,
}

impl Limiter {
    fn new(permits: usize) -> Self {
        Self {
            available: Mutex::new(permits.max(1)),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut available = self.available.lock().expect("limiter lock");
        while *available == 0 {
            available = self.freed.wait(available).expect("limiter lock");
        }
        *available -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Limiter);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().expect("limiter lock") += 1;
        self.0.freed.notify_one();
    }
}

struct Client {
    config: RemoteConfig,
    backend_id: String,
    agent: ureq::Agent,
    token: Option<String>,
    limiter: Limiter,
    requests: AtomicU64,
    cache: Option<Arc<ReplayCache>>,
}

enum Failure {
    Retry(BackendError),
    Fatal(BackendError),
}

impl Client {
    fn new(config: RemoteConfig, cache: Option<Arc<ReplayCache>>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs.max(0.001))))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            backend_id: config.backend_id(),
            limiter: Limiter::new(config.max_in_flight),
            token: std::env::var(BEARER_TOKEN_ENV).ok().filter(|t| !t.is_empty()),
            config,
            agent,
            requests: AtomicU64::new(0),
            cache,
        }
    }

    fn post_once(&self, path: &str, body: &Value, digest: &str) -> Result<Value, Failure> {
        let url = format!("{}{path}", self.config.endpoint.trim_end_matches('/'));
        let _permit = self.limiter.acquire();
        self.requests.fetch_add(1, Ordering::Relaxed);
        let mut request = self.agent.post(&url);
        if let Some(token) = &self.token {
            request = request.header("Authorization", format!("Bearer {token}"));
        }
        let mut response = request.send_json(body).map_err(|e| {
            Failure::Retry(BackendError::Transport {
                status: None,
                message: e.to_string(),
                digest: digest.to_string(),
            })
        })?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            let message = response.body_mut().read_to_string().unwrap_or_default();
            let err = BackendError::Transport {
                status: Some(status),
                message: format!("{url}: {}", message.chars().take(200).collect::<String>()),
                digest: digest.to_string(),
            };
            return Err(if status >= 500 || status == 429 {
                Failure::Retry(err)
            } else {
                Failure::Fatal(err)
            });
        }
        response.body_mut().read_json::<Value>().map_err(|e| {
            Failure::Fatal(BackendError::Protocol {
                message: format!("{url}: response is not JSON: {e}"),
                digest: digest.to_string(),
            })
        })
    }

    fn post(&self, path: &str, body: &Value, digest: &str) -> Result<Value, BackendError> {
        let attempts = self.config.max_attempts.max(1);
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut attempt = 1;
        loop {
            match self.post_once(path, body, digest) {
                Ok(value) => return Ok(value),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retry(e)) if attempt >= attempts => return Err(e),
                Err(Failure::Retry(_)) => {
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
            }
        }
    }

    fn string_field(response: &Value, field: &str, digest: &str) -> Result<String, BackendError> {
        response
            .get(field)
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError::Protocol {
                message: format!("response lacks string field {field:?}"),
                digest: digest.to_string(),
            })
    }

    /// Runs `op` through the cache when one is attached.
    fn call(&self, op: &str, path: &str, inputs: Value, body: Value, field: &str) -> Result<String, BackendError> {
        let fetch = |digest: &str| -> Result<String, BackendError> {
            let response = self.post(path, &body, digest)?;
            Self::string_field(&response, field, digest)
        };
        match &self.cache {
            Some(cache) => cache.fetch(&self.backend_id, op, &inputs, fetch),
            None => fetch(&cache_key(&self.backend_id, op, &inputs)),
        }
    }
}

/// Sentence translator reached over `POST /translate`.
pub struct RemoteTranslator {
    client: Client,
}

impl RemoteTranslator {
    pub fn new(config: RemoteConfig, cache: Option<Arc<ReplayCache>>) -> Self {
        Self {
            client: Client::new(config, cache),
        }
    }

    /// HTTP requests issued so far, retries included.
    pub fn requests(&self) -> u64 {
        self.client.requests.load(Ordering::Relaxed)
    }
}

impl Translator for RemoteTranslator {
    fn backend_id(&self) -> &str {
        &self.client.backend_id
    }

    fn translate(&self, text: &str, src_lang: &str, tgt_lang: &str) -> Result<String, BackendError> {
        let body = json!({ "text": text, "source": src_lang, "target": tgt_lang });
        self.client
            .call("translate", "/translate", body.clone(), body, "translation")
    }
}

/// Completion model reached over `POST /complete`.
pub struct RemoteContextual {
    client: Client,
}

impl RemoteContextual {
    pub fn new(config: RemoteConfig, cache: Option<Arc<ReplayCache>>) -> Self {
        Self {
            client: Client::new(config, cache),
        }
    }

    pub fn requests(&self) -> u64 {
        self.client.requests.load(Ordering::Relaxed)
    }

    pub fn complete_prompt(&self, prompt: &str) -> Result<String, BackendError> {
        self.complete_attempt(prompt, 1)
    }

    /// Retries of the same prompt get their own cache key so a replayed
    /// run sees the same sequence of completions.
    fn complete_attempt(&self, prompt: &str, attempt: u32) -> Result<String, BackendError> {
        let params = Value::Object(self.client.config.parameters.clone());
        let mut inputs = json!({ "prompt": prompt, "parameters": params });
        if attempt > 1 {
            inputs["attempt"] = json!(attempt);
        }
        let mut body = self.client.config.parameters.clone();
        body.insert("prompt".into(), Value::String(prompt.to_string()));
        self.client
            .call("complete", "/complete", inputs, Value::Object(body), "completion")
    }
}

impl ContextualTranslator for RemoteContextual {
    fn backend_id(&self) -> &str {
        &self.client.backend_id
    }

    fn complete(&self, query: &ContextualQuery<'_>) -> Result<String, BackendError> {
        self.complete_attempt(query.prompt, query.attempt)
    }
}
