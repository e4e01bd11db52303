//! Machine-readable record of one CLI run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub annoproj: &'static str,
    pub training_grammar: &'static str,
    pub manifest: u32,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub argv: Vec<String>,
    pub versions: Versions,
    pub config_sha256: String,
    pub config: Value,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub timings_ms: BTreeMap<String, u64>,
    pub inputs: Vec<InputFile>,
    pub outputs: Vec<PathBuf>,
    pub summary: Value,
    pub exit_code: Option<i32>,
}

/// Collects timings and inputs while a command runs.
pub struct RunRecorder {
    manifest: Manifest,
    started: Instant,
    phase: Option<(String, Instant)>,
    stem: String,
}

fn timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunRecorder {
    pub fn start(command: &str, config: &crate::config::RunConfig) -> Self {
        let now = Utc::now();
        Self {
            stem: format!("{}-{}-{}", now.format("%Y%m%dT%H%M%S%.3fZ"), command, std::process::id()),
            manifest: Manifest {
                command: command.to_string(),
                argv: std::env::args().collect(),
                versions: Versions {
                    annoproj: env!("CARGO_PKG_VERSION"),
                    training_grammar: annoproj::eval::GRAMMAR_VERSION,
                    manifest: MANIFEST_VERSION,
                },
                config_sha256: config.sha256(),
                config: serde_json::to_value(config).expect("config serializes"),
                started_at: timestamp(now),
                finished_at: None,
                timings_ms: BTreeMap::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                summary: Value::Null,
                exit_code: None,
            },
            started: Instant::now(),
            phase: None,
        }
    }

    /// File name stem shared by this run's audit files.
    pub fn stem(&self) -> &str {
        &self.stem
    }

    /// Close the current phase (if any) and start timing `name`.
    pub fn phase(&mut self, name: &str) {
        self.end_phase();
        self.phase = Some((name.to_string(), Instant::now()));
    }

    fn end_phase(&mut self) {
        if let Some((name, t)) = self.phase.take() {
            self.manifest.timings_ms.insert(name, t.elapsed().as_millis() as u64);
        }
    }

    /// Hash a file, or every regular file directly inside a directory.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        let mut files = Vec::new();
        if path.is_dir() {
            for entry in std::fs::read_dir(path).with_context(|| format!("reading {}", path.display()))? {
                let p = entry?.path();
                if p.is_file() {
                    files.push(p);
                }
            }
            files.sort();
        } else {
            files.push(path.to_path_buf());
        }
        for f in files {
            let bytes = std::fs::read(&f).with_context(|| format!("reading {}", f.display()))?;
            self.manifest.inputs.push(InputFile {
                sha256: hex::encode(Sha256::digest(&bytes)),
                path: f,
            });
        }
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.manifest.outputs.push(path.to_path_buf());
    }

    pub fn summary(&mut self, value: Value) {
        self.manifest.summary = value;
    }

    /// Write `<audit_dir>/<stem>.manifest.json`.
    pub fn finish(mut self, audit_dir: &Path, exit_code: i32) -> Result<PathBuf> {
        self.end_phase();
        self.manifest
            .timings_ms
            .insert("total".into(), self.started.elapsed().as_millis() as u64);
        self.manifest.finished_at = Some(timestamp(Utc::now()));
        self.manifest.exit_code = Some(exit_code);
        std::fs::create_dir_all(audit_dir).with_context(|| format!("creating {}", audit_dir.display()))?;
        let path = audit_dir.join(format!("{}.manifest.json", self.stem));
        let mut json = serde_json::to_string_pretty(&self.manifest)?;
        json.push('\n');
        std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
