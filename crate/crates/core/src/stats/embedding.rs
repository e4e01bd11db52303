//! Sentence-embedding providers for reporting-only similarity scores.
//!
//! Wire protocol: `POST {"texts": [..]}` → `{"vectors": [[..], ..]}`.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::registry::{Registry, UnknownStrategy};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbeddingError {
    #[error("embedding transport error: {0}")]
    Transport(String),
    #[error("embedding endpoint returned {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed embedding response: {0}")]
    Malformed(String),
    #[error("embedding configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Unknown(#[from] UnknownStrategy),
}

pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    /// One vector per input text, in input order.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbeddingError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingConfig {
    /// `http` or `mock`.
    pub kind: String,
    pub endpoint: Option<String>,
    /// JSON object mapping text to vector, for the mock provider.
    pub mock_vectors: Option<PathBuf>,
    pub timeout_secs: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            kind: "http".into(),
            endpoint: None,
            mock_vectors: None,
            timeout_secs: 60,
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

#[derive(Debug)]
pub struct HttpEmbedding {
    client: reqwest::blocking::Client,
    endpoint: String,
}

impl HttpEmbedding {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Result<Self, EmbeddingError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| EmbeddingError::Config(e.to_string()))?;
        Ok(Self {
            client,
            endpoint: endpoint.into(),
        })
    }
}

impl EmbeddingProvider for HttpEmbedding {
    fn name(&self) -> &str {
        "http"
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        let response = self
            .client
            .post(&self.endpoint)
            .json(&EmbedRequest { texts })
            .send()
            .map_err(|e| EmbeddingError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response.text().map_err(|e| EmbeddingError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(EmbeddingError::Status { status, body });
        }
        let parsed: EmbedResponse = serde_json::from_str(&body).map_err(|e| EmbeddingError::Malformed(e.to_string()))?;
        if parsed.vectors.len() != texts.len() {
            return Err(EmbeddingError::Malformed(format!(
                "{} vectors for {} texts",
                parsed.vectors.len(),
                texts.len()
            )));
        }
        Ok(parsed.vectors)
    }
}

/// Fixed vectors for known texts; any other text gets a hashed bag-of-words
/// vector, so equal texts always embed equally.
#[derive(Debug, Clone, Default)]
pub struct MockEmbedding {
    pub vectors: BTreeMap<String, Vec<f64>>,
}

const HASHED_DIMS: usize = 64;

fn hashed_vector(text: &str) -> Vec<f64> {
    let mut v = vec![0.0; HASHED_DIMS];
    for word in text.split_whitespace() {
        let digest = Sha256::digest(word.to_lowercase().as_bytes());
        let bucket = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes")) as usize % HASHED_DIMS;
        v[bucket] += 1.0;
    }
    v
}

impl EmbeddingProvider for MockEmbedding {
    fn name(&self) -> &str {
        "mock"
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        Ok(texts
            .iter()
            .map(|t| self.vectors.get(t).cloned().unwrap_or_else(|| hashed_vector(t)))
            .collect())
    }
}

pub trait EmbeddingFactory: Send + Sync {
    fn create(&self, config: &EmbeddingConfig) -> Result<Arc<dyn EmbeddingProvider>, EmbeddingError>;
}

impl<F> EmbeddingFactory for F
where
    F: Fn(&EmbeddingConfig) -> Result<Arc<dyn EmbeddingProvider>, EmbeddingError> + Send + Sync,
{
    fn create(&self, config: &EmbeddingConfig) -> Result<Arc<dyn EmbeddingProvider>, EmbeddingError> {
        self(config)
    }
}

pub type EmbeddingRegistry = Registry<dyn EmbeddingFactory>;

pub fn embedding_registry() -> EmbeddingRegistry {
    let mut r = EmbeddingRegistry::new("embedding provider");
    let http = |cfg: &EmbeddingConfig| -> Result<Arc<dyn EmbeddingProvider>, EmbeddingError> {
        let endpoint = cfg
            .endpoint
            .clone()
            .ok_or_else(|| EmbeddingError::Config("http embedding provider needs `endpoint`".into()))?;
        Ok(Arc::new(HttpEmbedding::new(endpoint, Duration::from_secs(cfg.timeout_secs))?))
    };
    let mock = |cfg: &EmbeddingConfig| -> Result<Arc<dyn EmbeddingProvider>, EmbeddingError> {
        let vectors = match &cfg.mock_vectors {
            Some(path) => {
                let bytes = std::fs::read(path).map_err(|e| EmbeddingError::Config(format!("{}: {e}", path.display())))?;
                serde_json::from_slice(&bytes).map_err(|e| EmbeddingError::Config(format!("{}: {e}", path.display())))?
            }
            None => BTreeMap::new(),
        };
        Ok(Arc::new(MockEmbedding { vectors }))
    };
    r.register("http", Arc::new(http));
    r.register("mock", Arc::new(mock));
    r
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub provider: String,
    pub available: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub pairs: usize,
    pub mean: Option<f64>,
    pub scores: Vec<f64>,
}

/// Mean cosine similarity between each source text and its back-translation.
/// Provider failures yield an unavailable report rather than an error.
pub fn similarity_report(pairs: &[(String, String)], provider: &dyn EmbeddingProvider) -> SimilarityReport {
    let mut report = SimilarityReport {
        provider: provider.name().to_string(),
        available: true,
        error: None,
        pairs: pairs.len(),
        mean: None,
        scores: Vec::new(),
    };
    if pairs.is_empty() {
        return report;
    }
    let texts: Vec<String> = pairs.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();
    let vectors = provider.embed(&texts).and_then(|v| {
        if v.len() == texts.len() {
            Ok(v)
        } else {
            Err(EmbeddingError::Malformed(format!("{} vectors for {} texts", v.len(), texts.len())))
        }
    });
    let vectors = match vectors {
        Ok(v) => v,
        Err(e) => {
            log::warn!("similarity report unavailable: {e}");
            report.available = false;
            report.error = Some(e.to_string());
            return report;
        }
    };
    report.scores = vectors.chunks(2).map(|p| cosine(&p[0], &p[1])).collect();
    report.mean = Some(report.scores.iter().sum::<f64>() / report.scores.len() as f64);
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(a: &str, b: &str) -> (String, String) {
        (a.to_string(), b.to_string())
    }

    #[test]
    fn identical_and_orthogonal() {
        let m = MockEmbedding {
            vectors: BTreeMap::from([("x".into(), vec![1.0, 0.0]), ("y".into(), vec![0.0, 2.0])]),
        };
        let r = similarity_report(&[pair("the platelets", "the platelets")], &m);
        assert!((r.mean.unwrap() - 1.0).abs() < 1e-12);
        let r = similarity_report(&[pair("x", "y")], &m);
        assert_eq!(r.mean, Some(0.0));
    }

    #[test]
    fn batch_mean() {
        let s = 0.5f64;
        let m = MockEmbedding {
            vectors: BTreeMap::from([
                ("a".into(), vec![1.0, 0.0]),
                ("b".into(), vec![1.0, 0.0]),
                ("c".into(), vec![1.0, 0.0]),
                ("d".into(), vec![s, (1.0 - s * s).sqrt()]),
            ]),
        };
        let r = similarity_report(&[pair("a", "b"), pair("c", "d")], &m);
        assert!((r.scores[1] - 0.5).abs() < 1e-12);
        assert!((r.mean.unwrap() - 0.75).abs() < 1e-12);
    }

    struct Down;
    impl EmbeddingProvider for Down {
        fn name(&self) -> &str {
            "down"
        }
        fn embed(&self, _: &[String]) -> Result<Vec<Vec<f64>>, EmbeddingError> {
            Err(EmbeddingError::Transport("refused".into()))
        }
    }

    #[test]
    fn failure_marks_unavailable() {
        let r = similarity_report(&[pair("a", "b")], &Down);
        assert!(!r.available);
        assert!(r.error.unwrap().contains("refused"));
        assert_eq!(r.mean, None);
    }

    #[test]
    fn registry_and_http_roundtrip() {
        use std::io::{BufRead, BufReader, Read, Write};
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            let body = r#"{"vectors":[[1,0],[1,0]]}"#;
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 200 OK\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            String::from_utf8(buf).unwrap()
        });
        let cfg = EmbeddingConfig {
            endpoint: Some(format!("http://{addr}/embed")),
            ..Default::default()
        };
        let provider = embedding_registry().get("http").unwrap().create(&cfg).unwrap();
        let r = similarity_report(&[pair("a", "b")], provider.as_ref());
        assert_eq!(r.mean, Some(1.0));
        let sent: serde_json::Value = serde_json::from_str(&server.join().unwrap()).unwrap();
        assert_eq!(sent, serde_json::json!({"texts": ["a", "b"]}));
        assert!(embedding_registry().get("bert").is_err());
    }
}
