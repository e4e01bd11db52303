//! Run configuration: JSON file, then environment overrides, then flags.

use std::path::{Path, PathBuf};

use annoproj::backend::BackendConfig;
use annoproj::pipeline::ProjectionConfig;
use annoproj::stats::EmbeddingConfig;
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReviewSettings {
    pub bind: String,
    /// Directory of built UI assets.
    pub static_dir: Option<PathBuf>,
    /// Environment variable holding the shared review token.
    pub token_env: String,
}

impl Default for ReviewSettings {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            static_dir: None,
            token_env: "ANNOPROJ_REVIEW_TOKEN".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub projection: ProjectionConfig,
    pub backend: BackendConfig,
    /// WordNet database directory (`index.*` and `data.*` files).
    pub wordnet: Option<PathBuf>,
    pub embedding: EmbeddingConfig,
    pub jobs: Option<usize>,
    pub review: ReviewSettings,
}

impl RunConfig {
    /// Read `path`, resolving relative paths inside it against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut de = serde_json::Deserializer::from_slice(&bytes);
        let mut cfg: RunConfig = serde_path_to_error::deserialize(&mut de)
            .map_err(|e| anyhow::anyhow!("config {}: `{}`: {}", path.display(), e.path(), e.inner()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p.as_mut().filter(|p| p.is_relative()) {
                *path = base.join(&*path);
            }
        };
        fix(&mut self.projection.exemplars);
        fix(&mut self.backend.mock_fixture);
        fix(&mut self.wordnet);
        fix(&mut self.embedding.mock_vectors);
        fix(&mut self.review.static_dir);
    }

    /// Apply overrides from `lookup` (the process environment in production).
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<()> {
        let get = |k: &str| lookup(k).filter(|v| !v.trim().is_empty());
        if let Some(v) = get("ANNOPROJ_TARGET_LANG") {
            self.projection.target_language = v;
        }
        if let Some(v) = get("ANNOPROJ_SOURCE_LANG") {
            self.projection.source_language = Some(v);
        }
        if let Some(v) = get("ANNOPROJ_N_BEST") {
            self.projection.n_best = v.parse().with_context(|| format!("ANNOPROJ_N_BEST={v}"))?;
        }
        if let Some(v) = get("ANNOPROJ_BACKEND") {
            self.backend.kind = v;
        }
        if let Some(v) = get("ANNOPROJ_ENDPOINT") {
            self.backend.endpoint = Some(v);
        }
        if let Some(v) = get("ANNOPROJ_MODEL") {
            self.backend.model = v;
        }
        if let Some(v) = get("ANNOPROJ_WORDNET") {
            self.wordnet = Some(v.into());
        }
        if let Some(v) = get("ANNOPROJ_EMBEDDING_ENDPOINT") {
            self.embedding.endpoint = Some(v);
        }
        if let Some(v) = get("ANNOPROJ_JOBS") {
            self.jobs = Some(v.parse().with_context(|| format!("ANNOPROJ_JOBS={v}"))?);
        }
        Ok(())
    }

    /// Hex SHA-256 of the resolved configuration as JSON.
    pub fn sha256(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}
