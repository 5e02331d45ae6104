//! Chat backends: an OpenAI-compatible HTTP client and a scripted mock.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cache::prompt_digest;
use crate::ZeroShotError;

/// Connection settings. The credential itself never appears here; only the
/// name of the environment variable holding it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClientConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model_id: String,
    pub credential_ref: String,
    pub max_retries: u32,
    pub min_interval_ms: u64,
    pub backoff_base_ms: u64,
    pub backoff_seed: i64,
    pub timeout_secs: u64,
    pub cache_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model_id: "gpt-3.5-turbo".into(),
            credential_ref: "OPENAI_API_KEY".into(),
            max_retries: 4,
            min_interval_ms: 1000,
            backoff_base_ms: 500,
            backoff_seed: 0,
            timeout_secs: 60,
            cache_dir: PathBuf::from("zeroshot-cache"),
            temperature: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatRequest {
    pub doc_id: String,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatResponse {
    pub content: String,
    pub model_version: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CallError {
    /// Credential rejected; retrying cannot help.
    Auth(u16),
    /// Transient failure (network, 429, 5xx).
    Retryable(String),
    /// Permanent failure other than authentication.
    Fatal(String),
}

impl fmt::Display for CallError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CallError::Auth(status) => write!(f, "authentication rejected (HTTP {status})"),
            CallError::Retryable(m) | CallError::Fatal(m) => f.write_str(m),
        }
    }
}

pub trait ChatBackend {
    fn model_id(&self) -> &str;
    fn complete(&mut self, request: &ChatRequest) -> Result<ChatResponse, CallError>;
}

pub struct HttpBackend {
    endpoint: String,
    model_id: String,
    api_key: String,
    temperature: Option<f64>,
    client: reqwest::blocking::Client,
}

impl fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpBackend")
            .field("endpoint", &self.endpoint)
            .field("model_id", &self.model_id)
            .field("api_key", &"<redacted>")
            .finish()
    }
}

impl HttpBackend {
    /// Resolves the credential from the environment variable named in the config.
    pub fn from_config(cfg: &ClientConfig) -> Result<Self, ZeroShotError> {
        let key = std::env::var(&cfg.credential_ref)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| ZeroShotError::MissingCredential(cfg.credential_ref.clone()))?;
        Self::with_key(cfg, key)
    }

    pub fn with_key(cfg: &ClientConfig, api_key: String) -> Result<Self, ZeroShotError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs.max(1)))
            .build()
            .map_err(|e| ZeroShotError::TransportFailure {
                doc_id: String::new(),
                attempts: 0,
                completed: 0,
                message: format!("cannot build http client: {e}"),
            })?;
        Ok(Self {
            endpoint: cfg.endpoint.clone(),
            model_id: cfg.model_id.clone(),
            api_key,
            temperature: cfg.temperature,
            client,
        })
    }
}

impl ChatBackend for HttpBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn complete(&mut self, request: &ChatRequest) -> Result<ChatResponse, CallError> {
        let mut body = json!({
            "model": self.model_id,
            "messages": [{"role": "user", "content": request.prompt}],
        });
        if let Some(t) = self.temperature {
            body["temperature"] = json!(t);
        }
        let resp = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| CallError::Retryable(format!("request failed: {e}")))?;
        let status = resp.status().as_u16();
        if status == 401 || status == 403 {
            return Err(CallError::Auth(status));
        }
        if status == 429 || resp.status().is_server_error() {
            return Err(CallError::Retryable(format!("HTTP {status}")));
        }
        if !resp.status().is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(CallError::Fatal(format!("HTTP {status}: {}", text.chars().take(200).collect::<String>())));
        }
        let v: serde_json::Value = resp
            .json()
            .map_err(|e| CallError::Retryable(format!("malformed response body: {e}")))?;
        let content = v["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| CallError::Fatal("response has no choices[0].message.content".into()))?;
        Ok(ChatResponse {
            content: content.to_string(),
            model_version: v["model"].as_str().map(str::to_string),
        })
    }
}

/// One scripted reply. A bare string is returned as-is; the object form can
/// fail transiently a few times first, or reject authentication.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptedReply {
    Text(String),
    Detailed {
        #[serde(default)]
        response: Option<String>,
        #[serde(default)]
        fail_times: u32,
        #[serde(default)]
        auth_error: bool,
    },
}

/// Mock script file:
///
/// ```json
/// { "model_id": "mock", "by_doc": {"doc-1": "Human"},
///   "by_prompt_digest": {"<sha256 hex>": "computer"}, "default": "human" }
/// ```
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default = "default_mock_id")]
    pub model_id: String,
    #[serde(default)]
    pub by_doc: BTreeMap<String, ScriptedReply>,
    #[serde(default)]
    pub by_prompt_digest: BTreeMap<String, ScriptedReply>,
    #[serde(default)]
    pub default: Option<String>,
}

fn default_mock_id() -> String {
    "mock".into()
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self, ZeroShotError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ZeroShotError::Script(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ZeroShotError::Script(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    script: MockScript,
    failures: BTreeMap<String, u32>,
    calls: Arc<AtomicUsize>,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        Self {
            script,
            failures: BTreeMap::new(),
            calls: Arc::new(AtomicUsize::new(0)),
        }
    }

    /// Number of `complete` invocations so far, including failed attempts.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Shared counter, handy when the backend is moved into a runner.
    pub fn call_counter(&self) -> Arc<AtomicUsize> {
        Arc::clone(&self.calls)
    }
}

impl ChatBackend for MockBackend {
    fn model_id(&self) -> &str {
        &self.script.model_id
    }

    fn complete(&mut self, request: &ChatRequest) -> Result<ChatResponse, CallError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let digest = prompt_digest(&request.prompt);
        let (key, reply) = match self.script.by_doc.get(&request.doc_id) {
            Some(r) => (format!("doc:{}", request.doc_id), Some(r)),
            None => (format!("digest:{digest}"), self.script.by_prompt_digest.get(&digest)),
        };
        let text = match reply {
            Some(ScriptedReply::Text(t)) => Some(t.clone()),
            Some(ScriptedReply::Detailed {
                response,
                fail_times,
                auth_error,
            }) => {
                if *auth_error {
                    return Err(CallError::Auth(401));
                }
                let seen = self.failures.entry(key).or_insert(0);
                if *seen < *fail_times {
                    *seen += 1;
                    return Err(CallError::Retryable("scripted transient failure".into()));
                }
                response.clone()
            }
            None => None,
        };
        let content = text
            .or_else(|| self.script.default.clone())
            .ok_or_else(|| CallError::Fatal(format!("no scripted reply for doc {}", request.doc_id)))?;
        Ok(ChatResponse {
            content,
            model_version: Some(format!("{}-script", self.script.model_id)),
        })
    }
}
