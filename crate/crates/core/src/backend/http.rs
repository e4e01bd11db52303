//! Chat-completion client over HTTP.

use std::time::Duration;

use serde::Deserialize;

use super::{BackendConfig, BackendError, ChatRequest, TranslationBackend};

#[derive(Debug)]
pub struct HttpChatBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: Option<String>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

impl HttpChatBackend {
    /// Reads the API key from the environment variable named in the config.
    /// Proxy variables (`HTTPS_PROXY`, ...) are honored by the HTTP client.
    pub fn from_config(cfg: &BackendConfig) -> Result<Self, BackendError> {
        let endpoint = cfg
            .endpoint
            .clone()
            .ok_or_else(|| BackendError::Config("chat-completion backend needs `endpoint`".into()))?;
        let api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
        Self::new(endpoint, api_key, Duration::from_secs(cfg.timeout_secs))
    }

    pub fn new(endpoint: String, api_key: Option<String>, timeout: Duration) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Self { client, endpoint, api_key })
    }
}

fn is_retryable_status(status: u16) -> bool {
    matches!(status, 408 | 429 | 500 | 502 | 503 | 504)
}

impl TranslationBackend for HttpChatBackend {
    fn name(&self) -> &str {
        "chat-completion"
    }

    fn complete(&self, request: &ChatRequest) -> Result<Vec<String>, BackendError> {
        let mut builder = self.client.post(&self.endpoint).json(request);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .text()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if is_retryable_status(status) {
            return Err(BackendError::Transport(format!("HTTP {status}: {body}")));
        }
        if !(200..300).contains(&status) {
            return Err(BackendError::Provider { status: Some(status), payload: body });
        }
        let parsed: ChatResponse = serde_json::from_str(&body).map_err(|_| BackendError::Provider {
            status: Some(status),
            payload: body.clone(),
        })?;
        let outputs: Vec<String> = parsed
            .choices
            .into_iter()
            .filter_map(|c| c.message.content)
            .collect();
        if outputs.is_empty() {
            return Err(BackendError::Provider { status: Some(status), payload: body });
        }
        Ok(outputs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ChatMessage;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::mpsc;

    /// Serve one canned HTTP response per entry and hand back each request body.
    fn serve(responses: Vec<(u16, String)>) -> (String, mpsc::Receiver<(String, String)>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for (status, body) in responses {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                let mut auth = String::new();
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    if lower.starts_with("authorization:") {
                        auth = line.trim().to_string();
                    }
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                tx.send((String::from_utf8(buf).unwrap(), auth)).unwrap();
                let mut stream = stream;
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
        });
        (format!("http://{addr}/v1/chat/completions"), rx)
    }

    fn request() -> ChatRequest {
        ChatRequest {
            model: "gpt-4".into(),
            messages: vec![ChatMessage::user("<CL1>nausea</CL1>")],
            n: 2,
            temperature: 0.7,
            max_tokens: None,
        }
    }

    #[test]
    fn posts_wire_body_and_reads_choices() {
        let body = r#"{"choices":[{"message":{"content":"<CL1>nausea</CL1>"}},{"message":{"content":"<CL1>la nausea</CL1>"}}]}"#;
        let (url, rx) = serve(vec![(200, body.into())]);
        let backend = HttpChatBackend::new(url, Some("sk-test".into()), Duration::from_secs(5)).unwrap();
        let out = backend.complete(&request()).unwrap();
        assert_eq!(out, ["<CL1>nausea</CL1>", "<CL1>la nausea</CL1>"]);
        let (sent, auth) = rx.recv().unwrap();
        let sent: serde_json::Value = serde_json::from_str(&sent).unwrap();
        assert_eq!(sent["n"], 2);
        assert_eq!(sent["messages"][0]["role"], "user");
        assert_eq!(auth, "authorization: Bearer sk-test");
    }

    #[test]
    fn status_classification() {
        let (url, _rx) = serve(vec![(503, "busy".into()), (400, r#"{"error":"refused"}"#.into())]);
        let backend = HttpChatBackend::new(url, None, Duration::from_secs(5)).unwrap();
        assert!(backend.complete(&request()).unwrap_err().is_transient());
        match backend.complete(&request()).unwrap_err() {
            BackendError::Provider { status, payload } => {
                assert_eq!(status, Some(400));
                assert!(payload.contains("refused"));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn connection_refused_is_transient() {
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let backend =
            HttpChatBackend::new(format!("http://127.0.0.1:{port}/"), None, Duration::from_secs(2)).unwrap();
        assert!(backend.complete(&request()).unwrap_err().is_transient());
    }
}
