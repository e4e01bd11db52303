//! Retrying, rate-limited, audited front end over a [`TranslationBackend`].

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::prompt::language_name;
use super::{BackendConfig, BackendError, ChatMessage, ChatRequest, TranslationBackend};
use crate::codec::{parse_inline, ParsedInline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay_ms: 500,
            max_delay_ms: 30_000,
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        let ms = self
            .base_delay_ms
            .saturating_mul(1u64 << attempt.min(20))
            .min(self.max_delay_ms);
        Duration::from_millis(ms)
    }
}

/// Token bucket admitting `per_minute` requests per minute, with bursts up
/// to the same size.
#[derive(Debug)]
pub struct RateLimiter {
    capacity: f64,
    per_second: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn per_minute(per_minute: u32) -> Self {
        let capacity = f64::from(per_minute.max(1));
        Self {
            capacity,
            per_second: capacity / 60.0,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    /// Block until a request may be sent.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut state = self.state.lock().unwrap();
                let now = Instant::now();
                let elapsed = now.duration_since(state.1).as_secs_f64();
                state.0 = (state.0 + elapsed * self.per_second).min(self.capacity);
                state.1 = now;
                if state.0 >= 1.0 {
                    state.0 -= 1.0;
                    return;
                }
                (1.0 - state.0) / self.per_second
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

/// Append-only JSONL record of every backend exchange.
#[derive(Debug, Clone, Default)]
pub struct AuditLog {
    sink: Option<Arc<Mutex<File>>>,
    requests: Arc<AtomicUsize>,
}

impl AuditLog {
    /// Counts requests without writing anywhere.
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn to_file(path: &Path) -> std::io::Result<Self> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            sink: Some(Arc::new(Mutex::new(file))),
            requests: Arc::default(),
        })
    }

    /// Number of requests sent to the backend (retries included).
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    fn record(&self, backend: &str, attempt: u32, request: &ChatRequest, outcome: &Result<Vec<String>, BackendError>) {
        self.requests.fetch_add(1, Ordering::SeqCst);
        let Some(sink) = &self.sink else { return };
        let (response, error) = match outcome {
            Ok(out) => (Some(out), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let line = json!({
            "ts": chrono::Utc::now().to_rfc3339(),
            "backend": backend,
            "fingerprint": request.fingerprint(),
            "attempt": attempt,
            "request": request,
            "response": response,
            "error": error,
        });
        let mut file = sink.lock().unwrap();
        if let Err(e) = writeln!(file, "{line}") {
            log::warn!("audit log write failed: {e}");
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateTranslation {
    pub index: usize,
    pub tagged_text: String,
    pub parsed: ParsedInline,
}

impl CandidateTranslation {
    pub fn new(index: usize, tagged_text: String) -> Self {
        let parsed = parse_inline(&tagged_text);
        Self { index, tagged_text, parsed }
    }
}

pub struct Translator {
    backend: Arc<dyn TranslationBackend>,
    model: String,
    translation_temperature: f64,
    backtranslation_temperature: f64,
    max_tokens: Option<u32>,
    retry: RetryPolicy,
    limiter: Option<RateLimiter>,
    audit: AuditLog,
    cache: Mutex<HashMap<(String, String), String>>,
}

impl std::fmt::Debug for Translator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Translator")
            .field("backend", &self.backend.name())
            .field("model", &self.model)
            .finish_non_exhaustive()
    }
}

impl Translator {
    pub fn new(backend: Arc<dyn TranslationBackend>, config: &BackendConfig, audit: AuditLog) -> Self {
        Self {
            backend,
            model: config.model.clone(),
            translation_temperature: config.translation_temperature,
            backtranslation_temperature: config.backtranslation_temperature,
            max_tokens: config.max_tokens,
            retry: config.retry,
            limiter: config.requests_per_minute.map(RateLimiter::per_minute),
            audit,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn audit(&self) -> &AuditLog {
        &self.audit
    }

    fn send(&self, request: &ChatRequest) -> Result<Vec<String>, BackendError> {
        let mut attempt = 0;
        loop {
            if let Some(limiter) = &self.limiter {
                limiter.acquire();
            }
            let outcome = self.backend.complete(request);
            self.audit.record(self.backend.name(), attempt, request, &outcome);
            match outcome {
                Err(e) if e.is_transient() => {
                    if attempt >= self.retry.max_retries {
                        return Err(BackendError::Exhausted {
                            attempts: attempt + 1,
                            last: Box::new(e),
                        });
                    }
                    let delay = self.retry.delay(attempt);
                    log::debug!("transient backend error ({e}); retrying in {delay:?}");
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    /// Request `n` tagged translations. Returns however many the provider
    /// sent (at most `n`), in provider order.
    pub fn translate_nbest(&self, messages: &[ChatMessage], n: usize) -> Result<Vec<CandidateTranslation>, BackendError> {
        if n == 0 {
            return Err(BackendError::Rejected("n must be at least 1".into()));
        }
        let request = ChatRequest {
            model: self.model.clone(),
            messages: messages.to_vec(),
            n: n as u32,
            temperature: self.translation_temperature,
            max_tokens: self.max_tokens,
        };
        let outputs = self.send(&request)?;
        if outputs.len() < n {
            log::warn!("requested {n} candidates, provider returned {}", outputs.len());
        }
        Ok(outputs
            .into_iter()
            .take(n)
            .enumerate()
            .map(|(i, text)| CandidateTranslation::new(i, text))
            .collect())
    }

    /// Plain-text translation of `text` into `language`, cached per run.
    pub fn backtranslate(&self, text: &str, language: &str) -> Result<String, BackendError> {
        if text.trim().is_empty() {
            return Err(BackendError::Rejected("cannot back-translate empty text".into()));
        }
        let key = (text.to_string(), language.to_string());
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let request = ChatRequest {
            model: self.model.clone(),
            messages: vec![
                ChatMessage::system(format!(
                    "Translate the user's text into {}. Reply with the translation only.",
                    language_name(language)
                )),
                ChatMessage::user(text),
            ],
            n: 1,
            temperature: self.backtranslation_temperature,
            max_tokens: self.max_tokens,
        };
        let out = self
            .send(&request)?
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::Provider { status: None, payload: "no choices".into() })?;
        let out = out.trim().to_string();
        self.cache.lock().unwrap().insert(key, out.clone());
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::mock::{FailureKind, InjectedFailure, MockBackend, MockFixture};

    fn config() -> BackendConfig {
        BackendConfig {
            kind: "mock".into(),
            retry: RetryPolicy { max_retries: 2, base_delay_ms: 0, max_delay_ms: 0 },
            ..Default::default()
        }
    }

    fn translator(fixture: MockFixture) -> (Translator, Arc<MockBackend>) {
        let mock = Arc::new(MockBackend::new(fixture));
        (Translator::new(mock.clone(), &config(), AuditLog::in_memory()), mock)
    }

    fn canned(n: usize) -> MockFixture {
        let mut f = MockFixture::default();
        f.responses.insert("src".into(), (0..n).map(|i| format!("<CL1>c{i}</CL1>")).collect());
        f.responses.insert("piastrine".into(), vec!["platelets".into()]);
        f
    }

    #[test]
    fn four_candidates_in_order() {
        let (t, mock) = translator(canned(4));
        let c = t.translate_nbest(&[ChatMessage::user("src")], 4).unwrap();
        assert_eq!(c.len(), 4);
        assert_eq!(c.iter().map(|c| c.index).collect::<Vec<_>>(), [0, 1, 2, 3]);
        assert_eq!(c[2].tagged_text, "<CL1>c2</CL1>");
        assert_eq!(c[2].parsed.span_text("CL1"), Some("c2"));
        let sent = &mock.calls()[0];
        assert_eq!(sent.n, 4);
        assert_eq!(sent.temperature, 0.7);
    }

    #[test]
    fn n_one_and_short_lists() {
        let (t, _) = translator(canned(4));
        let c = t.translate_nbest(&[ChatMessage::user("src")], 1).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].tagged_text, "<CL1>c0</CL1>");

        let (t, _) = translator(canned(2));
        assert_eq!(t.translate_nbest(&[ChatMessage::user("src")], 4).unwrap().len(), 2);
    }

    #[test]
    fn backtranslation_is_cached() {
        let (t, mock) = translator(canned(1));
        assert_eq!(t.backtranslate("piastrine", "en").unwrap(), "platelets");
        assert_eq!(t.backtranslate("piastrine", "en").unwrap(), "platelets");
        assert_eq!(t.audit().request_count(), 1);
        assert_eq!(mock.calls()[0].temperature, 0.0);
        assert!(matches!(t.backtranslate("  ", "en"), Err(BackendError::Rejected(_))));
    }

    #[test]
    fn transient_errors_are_retried_then_exhausted() {
        let mut f = canned(1);
        f.failures.insert("piastrine".into(), InjectedFailure { kind: FailureKind::Transient, times: Some(2) });
        let (t, _) = translator(f.clone());
        assert_eq!(t.backtranslate("piastrine", "en").unwrap(), "platelets");
        assert_eq!(t.audit().request_count(), 3);

        f.failures.get_mut("piastrine").unwrap().times = None;
        let (t, _) = translator(f);
        match t.backtranslate("piastrine", "en").unwrap_err() {
            BackendError::Exhausted { attempts, .. } => assert_eq!(attempts, 3),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn refusals_are_not_retried() {
        let mut f = canned(1);
        f.failures.insert("src".into(), InjectedFailure { kind: FailureKind::Refusal, times: None });
        let (t, _) = translator(f);
        assert!(matches!(
            t.translate_nbest(&[ChatMessage::user("src")], 4),
            Err(BackendError::Provider { .. })
        ));
        assert_eq!(t.audit().request_count(), 1);
    }

    #[test]
    fn audit_file_is_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("audit/log.jsonl");
        let mock = Arc::new(MockBackend::new(canned(1)));
        let t = Translator::new(mock, &config(), AuditLog::to_file(&path).unwrap());
        t.backtranslate("piastrine", "en").unwrap();
        t.backtranslate("sconosciuto", "en").unwrap_err();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0]["response"][0], "platelets");
        assert!(lines[1]["error"].is_string());
        assert!(lines[0]["ts"].is_string());
    }

    #[test]
    fn retry_delay_is_exponential_and_capped() {
        let p = RetryPolicy { max_retries: 5, base_delay_ms: 100, max_delay_ms: 350 };
        assert_eq!(p.delay(0), Duration::from_millis(100));
        assert_eq!(p.delay(1), Duration::from_millis(200));
        assert_eq!(p.delay(2), Duration::from_millis(350));
    }

    #[test]
    fn rate_limiter_admits_burst() {
        let limiter = RateLimiter::per_minute(600);
        let start = Instant::now();
        for _ in 0..5 {
            limiter.acquire();
        }
        assert!(start.elapsed() < Duration::from_millis(100));
    }
}
