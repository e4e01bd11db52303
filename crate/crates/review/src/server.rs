//! HTTP API over a [`ReviewState`] backed by a [`Journal`].

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use annoproj::codec::{codec_registry, CodecRegistry};
use annoproj::Status;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::decision::Decision;
use crate::journal::{Journal, JournalError};
use crate::state::{DecisionOutcome, DocumentSummary, DocumentView, QueueItem, ReviewError, ReviewState, RevisionReport};
use crate::stats::{LanguageRevision, RevisionStats};

/// Header carrying the shared token for mutating requests.
pub const TOKEN_HEADER: &str = "x-review-token";

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Review(#[from] ReviewError),
    #[error(transparent)]
    Journal(#[from] JournalError),
    #[error("replaying journal entry {index}: {source}")]
    Replay {
        index: usize,
        #[source]
        source: ReviewError,
    },
    #[error("cannot bind {addr}: {message}")]
    Bind { addr: SocketAddr, message: String },
    #[error("server error: {0}")]
    Server(String),
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub corpus: PathBuf,
    pub source: Option<PathBuf>,
    pub journal: PathBuf,
    /// Directory of built UI assets served at `/`.
    pub static_dir: Option<PathBuf>,
    pub token: Option<String>,
}

/// Review state plus the journal that persists it.
pub struct ReviewService {
    state: RwLock<ReviewState>,
    journal: Mutex<Journal>,
    codecs: CodecRegistry,
    token: Option<String>,
    static_dir: Option<PathBuf>,
}

impl ReviewService {
    /// Load the corpus and replay the journal.
    pub fn open(cfg: &ServiceConfig) -> Result<Self, ServeError> {
        let codecs = codec_registry();
        let mut state = ReviewState::load(&cfg.corpus, cfg.source.as_deref(), &codecs)?;
        let (journal, decisions) = Journal::open(&cfg.journal)?;
        for (index, d) in decisions.into_iter().enumerate() {
            state.apply(d).map_err(|source| ServeError::Replay { index: index + 1, source })?;
        }
        log::info!(
            "loaded {} documents, replayed {} decisions from {}",
            state.documents().len(),
            state.history_len(),
            cfg.journal.display()
        );
        Ok(Self {
            state: RwLock::new(state),
            journal: Mutex::new(journal),
            codecs,
            token: cfg.token.clone(),
            static_dir: cfg.static_dir.clone(),
        })
    }

    pub fn with_state<R>(&self, f: impl FnOnce(&ReviewState) -> R) -> R {
        f(&self.state.read().expect("state lock"))
    }

    /// Validate, journal, then apply. Writers are serialized by the journal lock.
    pub fn decide(&self, mut d: Decision) -> Result<DecisionOutcome, ApiError> {
        let mut journal = self.journal.lock().expect("journal lock");
        self.state.read().expect("state lock").validate(&d)?;
        d.timestamp.get_or_insert_with(chrono::Utc::now);
        journal.append(&d).map_err(|e| ApiError::Internal(e.to_string()))?;
        let outcome = self.state.write().expect("state lock").apply(d)?;
        Ok(outcome)
    }

    pub fn export(&self, out_dir: &Path) -> Result<RevisionReport, ReviewError> {
        let _writer = self.journal.lock().expect("journal lock");
        self.state.read().expect("state lock").export(out_dir, &self.codecs)
    }

    fn authorize(&self, headers: &HeaderMap) -> Result<(), ApiError> {
        match &self.token {
            None => Ok(()),
            Some(t) if headers.get(TOKEN_HEADER).and_then(|v| v.to_str().ok()) == Some(t.as_str()) => Ok(()),
            Some(_) => Err(ApiError::Unauthorized),
        }
    }
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    Invalid(String),
    Unauthorized,
    Internal(String),
}

impl From<ReviewError> for ApiError {
    fn from(e: ReviewError) -> Self {
        match e {
            ReviewError::NotFound(_) => ApiError::NotFound(e.to_string()),
            ReviewError::Invalid(_) => ApiError::Invalid(e.to_string()),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, error) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::Invalid(m) => (StatusCode::UNPROCESSABLE_ENTITY, m),
            ApiError::Unauthorized => (StatusCode::UNAUTHORIZED, format!("missing or wrong {TOKEN_HEADER} header")),
            ApiError::Internal(m) => {
                log::error!("{m}");
                (StatusCode::INTERNAL_SERVER_ERROR, m)
            }
        };
        (status, Json(ErrorBody { error })).into_response()
    }
}

type Shared = Arc<ReviewService>;

async fn list_documents(State(s): State<Shared>) -> Json<Vec<DocumentSummary>> {
    Json(s.with_state(|st| st.documents()))
}

async fn get_document(State(s): State<Shared>, UrlPath(doc_id): UrlPath<String>) -> Result<Json<DocumentView>, ApiError> {
    Ok(Json(s.with_state(|st| st.document(&doc_id))?))
}

#[derive(Deserialize)]
struct QueueQuery {
    status: Option<String>,
}

async fn get_queue(State(s): State<Shared>, Query(q): Query<QueueQuery>) -> Result<Json<Vec<QueueItem>>, ApiError> {
    let status = match q.status.as_deref() {
        None | Some("") => None,
        Some(raw) => match raw.parse::<Status>() {
            Ok(st @ (Status::MismatchCandidate | Status::Missing)) => Some(st),
            _ => return Err(ApiError::Invalid(format!("status must be MISMATCH_CANDIDATE or MISSING, got `{raw}`"))),
        },
    };
    Ok(Json(s.with_state(|st| st.queue(status))))
}

async fn post_decision(
    State(s): State<Shared>,
    headers: HeaderMap,
    body: Result<Json<Decision>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<DecisionOutcome>, ApiError> {
    s.authorize(&headers)?;
    let Json(d) = body.map_err(|e| ApiError::Invalid(e.body_text()))?;
    let svc = Arc::clone(&s);
    let outcome = tokio::task::spawn_blocking(move || svc.decide(d))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(Json(outcome))
}

/// Corpus-wide stats with the per-language breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsView {
    #[serde(flatten)]
    pub total: RevisionStats,
    pub error_rate_display: String,
    pub languages: Vec<LanguageRevision>,
}

async fn get_stats(State(s): State<Shared>) -> Json<StatsView> {
    let report = s.with_state(|st| st.report());
    Json(StatsView {
        error_rate_display: report.total.error_rate_display(),
        total: report.total,
        languages: report.languages,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExportRequest {
    output_dir: PathBuf,
}

async fn post_export(
    State(s): State<Shared>,
    headers: HeaderMap,
    body: Result<Json<ExportRequest>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<RevisionStats>, ApiError> {
    s.authorize(&headers)?;
    let Json(req) = body.map_err(|e| ApiError::Invalid(e.body_text()))?;
    let svc = Arc::clone(&s);
    let report = tokio::task::spawn_blocking(move || svc.export(&req.output_dir))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(Json(report.total))
}

/// Routes under `/api`, plus the UI assets at `/` when configured.
pub fn router(service: Arc<ReviewService>) -> Router {
    let api = Router::new()
        .route("/documents", get(list_documents))
        .route("/documents/{doc_id}", get(get_document))
        .route("/queue", get(get_queue))
        .route("/decisions", post(post_decision))
        .route("/stats", get(get_stats))
        .route("/export", post(post_export));
    let app = Router::new().nest("/api", api);
    let app = match &service.static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    };
    app.with_state(service)
}

/// Bind `addr` and serve until Ctrl-C.
pub async fn serve(cfg: ServiceConfig, addr: SocketAddr) -> Result<(), ServeError> {
    let service = Arc::new(ReviewService::open(&cfg)?);
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| ServeError::Bind {
        addr,
        message: e.to_string(),
    })?;
    log::info!("review service listening on http://{}", listener.local_addr().unwrap_or(addr));
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| ServeError::Server(e.to_string()))
}

/// [`serve`] on a fresh multi-threaded runtime.
pub fn serve_blocking(cfg: ServiceConfig, addr: SocketAddr) -> Result<(), ServeError> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| ServeError::Server(e.to_string()))?
        .block_on(serve(cfg, addr))
}
