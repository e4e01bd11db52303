//! Reading and writing standoff corpora as directories of files.

use std::fs;
use std::path::{Path, PathBuf};

use crate::codec::{codec_for_path, CodecError, CodecRegistry};
use crate::model::Document;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}: no codec for this file extension")]
    UnknownFormat { path: PathBuf },
    #[error("{path}: {source}")]
    Codec {
        path: PathBuf,
        #[source]
        source: CodecError,
    },
}

impl CorpusError {
    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            message: err.to_string(),
        }
    }
}

/// Regular files directly inside `dir` whose extension has a registered
/// codec, sorted by file name. Subdirectories are not visited.
pub fn list_corpus_files(dir: &Path, codecs: &CodecRegistry) -> Result<Vec<PathBuf>, CorpusError> {
    let entries = fs::read_dir(dir).map_err(|e| CorpusError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CorpusError::io(dir, e))?;
        let path = entry.path();
        let is_file = entry.file_type().map_err(|e| CorpusError::io(&path, e))?.is_file();
        if is_file && codec_for_path(codecs, &path).is_some() {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

pub fn read_document(path: &Path, codecs: &CodecRegistry) -> Result<Document, CorpusError> {
    let codec = codec_for_path(codecs, path).ok_or_else(|| CorpusError::UnknownFormat { path: path.to_path_buf() })?;
    let bytes = fs::read(path).map_err(|e| CorpusError::io(path, e))?;
    codec.parse(&bytes).map_err(|source| CorpusError::Codec {
        path: path.to_path_buf(),
        source,
    })
}

/// Serialize `doc` with the codec chosen by `path`'s extension.
pub fn write_document(path: &Path, doc: &Document, codecs: &CodecRegistry) -> Result<(), CorpusError> {
    let codec = codec_for_path(codecs, path).ok_or_else(|| CorpusError::UnknownFormat { path: path.to_path_buf() })?;
    let bytes = codec.serialize(doc).map_err(|source| CorpusError::Codec {
        path: path.to_path_buf(),
        source,
    })?;
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CorpusError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CorpusError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::codec_registry;

    #[test]
    fn lists_only_known_top_level_files() {
        let dir = tempfile::tempdir().unwrap();
        let codecs = codec_registry();
        let doc = Document::new("d", "en", "x");
        write_document(&dir.path().join("b.json"), &doc, &codecs).unwrap();
        write_document(&dir.path().join("a.xmi"), &doc, &codecs).unwrap();
        fs::write(dir.path().join("notes.txt"), "x").unwrap();
        write_document(&dir.path().join("sub/c.json"), &doc, &codecs).unwrap();
        let names: Vec<_> = list_corpus_files(dir.path(), &codecs)
            .unwrap()
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, ["a.xmi", "b.json"]);
        assert_eq!(read_document(&dir.path().join("a.xmi"), &codecs).unwrap(), doc);
    }

    #[test]
    fn missing_dir_names_path() {
        let err = list_corpus_files(Path::new("/nonexistent/corpus"), &codec_registry()).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/corpus"));
    }
}
