//! Backend that answers from recorded audit logs, optionally delegating
//! unrecorded requests to another backend.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use super::{BackendError, ChatRequest, TranslationBackend};

#[derive(Deserialize)]
struct AuditLine {
    request: ChatRequest,
    #[serde(default)]
    response: Option<Vec<String>>,
}

#[derive(Default)]
pub struct ReplayBackend {
    by_fingerprint: HashMap<String, Vec<String>>,
    by_message: HashMap<(String, u32), Vec<String>>,
    fallback: Option<Arc<dyn TranslationBackend>>,
}

impl std::fmt::Debug for ReplayBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReplayBackend")
            .field("recorded", &self.by_fingerprint.len())
            .field("fallback", &self.fallback.as_ref().map(|b| b.name().to_string()))
            .finish()
    }
}

impl ReplayBackend {
    /// Load successful exchanges from audit JSONL files. Later records win.
    pub fn from_audit_logs(paths: &[impl AsRef<Path>]) -> Result<Self, BackendError> {
        let mut replay = Self::default();
        for path in paths {
            let path = path.as_ref();
            let text = std::fs::read_to_string(path).map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let rec: AuditLine = serde_json::from_str(line)
                    .map_err(|e| BackendError::Config(format!("{}:{}: {e}", path.display(), i + 1)))?;
                if let Some(response) = rec.response {
                    replay.record(&rec.request, response);
                }
            }
        }
        Ok(replay)
    }

    pub fn record(&mut self, request: &ChatRequest, response: Vec<String>) {
        let key = (request.last_user_content().unwrap_or_default().to_string(), request.n);
        self.by_message.insert(key, response.clone());
        self.by_fingerprint.insert(request.fingerprint(), response);
    }

    pub fn with_fallback(mut self, backend: Arc<dyn TranslationBackend>) -> Self {
        self.fallback = Some(backend);
        self
    }

    pub fn len(&self) -> usize {
        self.by_fingerprint.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_fingerprint.is_empty()
    }
}

impl TranslationBackend for ReplayBackend {
    fn name(&self) -> &str {
        "replay"
    }

    /// Exact request match first, then the same final user message with the
    /// same `n`.
    fn complete(&self, request: &ChatRequest) -> Result<Vec<String>, BackendError> {
        let key = (request.last_user_content().unwrap_or_default().to_string(), request.n);
        if let Some(out) = self.by_fingerprint.get(&request.fingerprint()).or_else(|| self.by_message.get(&key)) {
            return Ok(out.clone());
        }
        match &self.fallback {
            Some(b) => b.complete(request),
            None => Err(BackendError::Provider {
                status: None,
                payload: format!("no recorded response for `{}`", key.0),
            }),
        }
    }
}
