//! Append-only JSONL decision journal.
//!
//! Each accepted decision is written as one line and synced to disk before
//! the service acknowledges it. Opening a journal replays every line. A
//! final line without a terminating newline was never acknowledged; it is
//! dropped with a warning. Any other unreadable line is an error.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::decision::Decision;

#[derive(Debug, thiserror::Error)]
pub enum JournalError {
    #[error("journal {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("journal {path}, line {line}: {message}")]
    Malformed { path: PathBuf, line: usize, message: String },
}

pub struct Journal {
    path: PathBuf,
    file: File,
    appended: usize,
}

impl Journal {
    /// Open (creating if needed) and replay the journal at `path`.
    pub fn open(path: &Path) -> Result<(Journal, Vec<Decision>), JournalError> {
        let io = |e: std::io::Error| JournalError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(io)?;
        }
        let text = match fs::read(path) {
            Ok(bytes) => String::from_utf8(bytes).map_err(|e| JournalError::Malformed {
                path: path.to_path_buf(),
                line: 0,
                message: e.to_string(),
            })?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(io(e)),
        };
        let (decisions, keep) = replay(path, &text)?;
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        if keep < text.len() {
            log::warn!("{}: dropping unterminated final line", path.display());
            file.set_len(keep as u64).map_err(io)?;
            file.sync_data().map_err(io)?;
        }
        let journal = Journal {
            path: path.to_path_buf(),
            file,
            appended: 0,
        };
        Ok((journal, decisions))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Decisions appended since opening.
    pub fn appended(&self) -> usize {
        self.appended
    }

    /// Write one decision and sync it to disk.
    pub fn append(&mut self, decision: &Decision) -> Result<(), JournalError> {
        let mut line = serde_json::to_vec(decision).expect("decisions serialize");
        line.push(b'\n');
        self.file
            .write_all(&line)
            .and_then(|_| self.file.flush())
            .and_then(|_| self.file.sync_data())
            .map_err(|e| JournalError::Io {
                path: self.path.clone(),
                message: e.to_string(),
            })?;
        self.appended += 1;
        Ok(())
    }
}

/// Parse journal text. Returns the decisions and the byte length of the
/// intact prefix.
fn replay(path: &Path, text: &str) -> Result<(Vec<Decision>, usize), JournalError> {
    let mut decisions = Vec::new();
    let mut offset = 0;
    for (i, raw) in text.split_inclusive('\n').enumerate() {
        let terminated = raw.ends_with('\n');
        let line = raw.trim_end_matches(['\n', '\r']);
        if !line.trim().is_empty() {
            match serde_json::from_str::<Decision>(line) {
                Ok(d) => decisions.push(d),
                Err(_) if !terminated => return Ok((decisions, offset)),
                Err(e) => {
                    return Err(JournalError::Malformed {
                        path: path.to_path_buf(),
                        line: i + 1,
                        message: e.to_string(),
                    })
                }
            }
        }
        offset += raw.len();
    }
    Ok((decisions, offset))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decision::Action;

    #[test]
    fn append_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j/journal.jsonl");
        let (mut j, prior) = Journal::open(&path).unwrap();
        assert!(prior.is_empty());
        let a = Decision::new("d", "EV1", Action::Accept, "r");
        let b = Decision::new("d", "CL1", Action::Reject, "r");
        j.append(&a).unwrap();
        j.append(&b).unwrap();
        drop(j);
        let (_, replayed) = Journal::open(&path).unwrap();
        assert_eq!(replayed, [a, b]);
    }

    #[test]
    fn malformed_line_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("journal.jsonl");
        let ok = serde_json::to_string(&Decision::new("d", "EV1", Action::Accept, "r")).unwrap();
        fs::write(&path, format!("{ok}\n{{broken\n{ok}\n")).unwrap();
        let err = Journal::open(&path).err().unwrap();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn torn_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("journal.jsonl");
        let ok = serde_json::to_string(&Decision::new("d", "EV1", Action::Accept, "r")).unwrap();
        fs::write(&path, format!("{ok}\n{{\"doc_id\":\"d\",\"id")).unwrap();
        let (mut j, replayed) = Journal::open(&path).unwrap();
        assert_eq!(replayed.len(), 1);
        j.append(&Decision::new("d", "EV2", Action::Accept, "r")).unwrap();
        drop(j);
        assert_eq!(Journal::open(&path).unwrap().1.len(), 2);
    }
}
