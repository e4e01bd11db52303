//! Deterministic offline backend driven by a JSON fixture.
//!
//! ```json
//! {
//!   "responses":    { "<final user message>": ["candidate 1", "candidate 2"] },
//!   "fingerprints": { "<sha256 of request body>": ["..."] },
//!   "failures":     { "<final user message>": { "kind": "transient", "times": 2 } },
//!   "fallback":     "error"
//! }
//! ```
//!
//! Lookup order is failures, fingerprints, responses, then the fallback
//! (`error` or `echo`, which returns the final user message unchanged).

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{BackendError, ChatRequest, TranslationBackend};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fallback {
    #[default]
    Error,
    Echo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureKind {
    /// Retryable transport failure.
    Transient,
    /// Non-retryable provider refusal.
    Refusal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectedFailure {
    pub kind: FailureKind,
    /// Fail only the first `times` calls; always fail when absent.
    #[serde(default)]
    pub times: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MockFixture {
    pub responses: BTreeMap<String, Vec<String>>,
    pub fingerprints: BTreeMap<String, Vec<String>>,
    pub failures: BTreeMap<String, InjectedFailure>,
    pub fallback: Fallback,
}

#[derive(Debug)]
pub struct MockBackend {
    fixture: MockFixture,
    failure_counts: Mutex<HashMap<String, usize>>,
    calls: Mutex<Vec<ChatRequest>>,
}

impl MockBackend {
    pub fn new(fixture: MockFixture) -> Self {
        Self {
            fixture,
            failure_counts: Mutex::new(HashMap::new()),
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self, BackendError> {
        let bytes = std::fs::read(path)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        let fixture = serde_json::from_slice(&bytes)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        Ok(Self::new(fixture))
    }

    /// Requests received so far, in arrival order.
    pub fn calls(&self) -> Vec<ChatRequest> {
        self.calls.lock().unwrap().clone()
    }
}

impl TranslationBackend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(&self, request: &ChatRequest) -> Result<Vec<String>, BackendError> {
        self.calls.lock().unwrap().push(request.clone());
        let key = request.last_user_content().unwrap_or_default();

        if let Some(failure) = self.fixture.failures.get(key) {
            let mut counts = self.failure_counts.lock().unwrap();
            let seen = counts.entry(key.to_string()).or_insert(0);
            *seen += 1;
            if failure.times.is_none_or(|t| *seen <= t) {
                return Err(match failure.kind {
                    FailureKind::Transient => BackendError::Transport(format!("injected outage for `{key}`")),
                    FailureKind::Refusal => BackendError::Provider {
                        status: Some(400),
                        payload: format!("injected refusal for `{key}`"),
                    },
                });
            }
        }

        let canned = self
            .fixture
            .fingerprints
            .get(&request.fingerprint())
            .or_else(|| self.fixture.responses.get(key));
        let mut outputs = match (canned, self.fixture.fallback) {
            (Some(c), _) => c.clone(),
            (None, Fallback::Echo) => vec![key.to_string()],
            (None, Fallback::Error) => {
                return Err(BackendError::Provider {
                    status: None,
                    payload: format!("mock has no response for `{key}`"),
                })
            }
        };
        outputs.truncate(request.n.max(1) as usize);
        Ok(outputs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ChatMessage;

    fn req(content: &str, n: u32) -> ChatRequest {
        ChatRequest {
            model: "m".into(),
            messages: vec![ChatMessage::user(content)],
            n,
            temperature: 0.0,
            max_tokens: None,
        }
    }

    fn fixture() -> MockFixture {
        let mut f = MockFixture::default();
        f.responses.insert("x".into(), vec!["a".into(), "b".into(), "c".into(), "d".into()]);
        f.failures.insert(
            "flaky".into(),
            InjectedFailure { kind: FailureKind::Transient, times: Some(1) },
        );
        f.responses.insert("flaky".into(), vec!["ok".into()]);
        f
    }

    #[test]
    fn canned_outputs_truncated_to_n() {
        let m = MockBackend::new(fixture());
        assert_eq!(m.complete(&req("x", 4)).unwrap(), ["a", "b", "c", "d"]);
        assert_eq!(m.complete(&req("x", 1)).unwrap(), ["a"]);
        assert_eq!(m.calls().len(), 2);
    }

    #[test]
    fn fallback_modes() {
        let m = MockBackend::new(fixture());
        assert!(matches!(m.complete(&req("nope", 1)), Err(BackendError::Provider { .. })));
        let mut f = fixture();
        f.fallback = Fallback::Echo;
        assert_eq!(MockBackend::new(f).complete(&req("nope", 3)).unwrap(), ["nope"]);
    }

    #[test]
    fn fingerprint_beats_content() {
        let mut f = fixture();
        f.fingerprints.insert(req("x", 2).fingerprint(), vec!["fp".into()]);
        let m = MockBackend::new(f);
        assert_eq!(m.complete(&req("x", 2)).unwrap(), ["fp"]);
        assert_eq!(m.complete(&req("x", 3)).unwrap(), ["a", "b", "c"]);
    }

    #[test]
    fn limited_failures_recover() {
        let m = MockBackend::new(fixture());
        assert!(m.complete(&req("flaky", 1)).unwrap_err().is_transient());
        assert_eq!(m.complete(&req("flaky", 1)).unwrap(), ["ok"]);
    }
}
