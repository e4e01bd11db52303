//! Chat-completion translation backends.
//!
//! Every backend speaks the same request/response shape; [`Translator`] adds
//! retries, rate limiting, auditing and back-translation caching on top.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::registry::{Registry, UnknownStrategy};

pub mod client;
pub mod http;
pub mod mock;
pub mod prompt;
pub mod replay;

pub use client::{AuditLog, CandidateTranslation, RateLimiter, RetryPolicy, Translator};
pub use http::HttpChatBackend;
pub use mock::{MockBackend, MockFixture};
pub use replay::ReplayBackend;
pub use prompt::{build_prompt, language_name, Exemplar, ExemplarSet, PromptError, PromptSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

/// Wire-level request body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub n: u32,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

impl ChatRequest {
    /// Content of the final user message, which mock fixtures key on.
    pub fn last_user_content(&self) -> Option<&str> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
    }

    /// Hex SHA-256 of the serialized request body.
    pub fn fingerprint(&self) -> String {
        let body = serde_json::to_vec(self).expect("request serializes");
        hex::encode(Sha256::digest(&body))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    /// Network failure, timeout, rate limiting, or a 5xx answer.
    #[error("transport error: {0}")]
    Transport(String),
    /// The provider answered but refused or returned something unusable.
    #[error("provider error{}: {payload}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Provider { status: Option<u16>, payload: String },
    #[error("giving up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: Box<BackendError> },
    #[error("rejected input: {0}")]
    Rejected(String),
    #[error("backend configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Unknown(#[from] UnknownStrategy),
}

impl BackendError {
    pub fn is_transient(&self) -> bool {
        matches!(self, BackendError::Transport(_))
    }
}

pub trait TranslationBackend: Send + Sync {
    fn name(&self) -> &str;
    /// Send one request and return the content of each returned choice, in
    /// provider order.
    fn complete(&self, request: &ChatRequest) -> Result<Vec<String>, BackendError>;
}

fn default_model() -> String {
    "gpt-4".into()
}
fn default_api_key_env() -> String {
    "ANNOPROJ_API_KEY".into()
}
fn default_timeout() -> u64 {
    120
}
fn default_translation_temperature() -> f64 {
    0.7
}

/// Backend settings as they appear in the run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendConfig {
    /// Registered backend name: `mock` or `chat-completion`.
    pub kind: String,
    pub endpoint: Option<String>,
    pub model: String,
    /// Environment variable holding the API key; the key itself never lives in config.
    pub api_key_env: String,
    pub mock_fixture: Option<PathBuf>,
    pub timeout_secs: u64,
    pub translation_temperature: f64,
    pub backtranslation_temperature: f64,
    pub max_tokens: Option<u32>,
    pub retry: RetryPolicy,
    pub requests_per_minute: Option<u32>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: "chat-completion".into(),
            endpoint: None,
            model: default_model(),
            api_key_env: default_api_key_env(),
            mock_fixture: None,
            timeout_secs: default_timeout(),
            translation_temperature: default_translation_temperature(),
            backtranslation_temperature: 0.0,
            max_tokens: None,
            retry: RetryPolicy::default(),
            requests_per_minute: None,
        }
    }
}

pub trait BackendFactory: Send + Sync {
    fn create(&self, config: &BackendConfig) -> Result<Arc<dyn TranslationBackend>, BackendError>;
}

impl<F> BackendFactory for F
where
    F: Fn(&BackendConfig) -> Result<Arc<dyn TranslationBackend>, BackendError> + Send + Sync,
{
    fn create(&self, config: &BackendConfig) -> Result<Arc<dyn TranslationBackend>, BackendError> {
        self(config)
    }
}

pub type BackendRegistry = Registry<dyn BackendFactory>;

/// Registry with `mock` and `chat-completion` (alias `openai`).
pub fn backend_registry() -> BackendRegistry {
    let mut r = BackendRegistry::new("translation backend");
    let mock = |cfg: &BackendConfig| -> Result<Arc<dyn TranslationBackend>, BackendError> {
        let path = cfg
            .mock_fixture
            .as_ref()
            .ok_or_else(|| BackendError::Config("mock backend needs `mock_fixture`".into()))?;
        Ok(Arc::new(MockBackend::from_path(path)?))
    };
    let chat = |cfg: &BackendConfig| -> Result<Arc<dyn TranslationBackend>, BackendError> {
        Ok(Arc::new(HttpChatBackend::from_config(cfg)?))
    };
    let chat: Arc<dyn BackendFactory> = Arc::new(chat);
    r.register("mock", Arc::new(mock));
    r.register("chat-completion", Arc::clone(&chat));
    r.register("openai", chat);
    r
}

/// Build the backend named by `config.kind` and wrap it in a [`Translator`].
pub fn translator_from_config(
    registry: &BackendRegistry,
    config: &BackendConfig,
    audit: AuditLog,
) -> Result<Translator, BackendError> {
    let backend = registry.get(&config.kind)?.create(config)?;
    Ok(Translator::new(backend, config, audit))
}
