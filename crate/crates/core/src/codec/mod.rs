//! Conversions between standoff files, canonical JSON, and inline tagged
//! text.

use std::path::Path;
use std::sync::Arc;

use crate::model::Document;
use crate::registry::{Registry, UnknownStrategy};

pub mod inline;
pub mod json;
pub mod xmi;

pub use inline::{parse_inline, to_inline, InlineDoc, ParsedInline};
pub use json::{parse_json, serialize_json, JsonCodec};
pub use xmi::{parse_standoff_xmi, parse_standoff_xmi_with_warnings, serialize_standoff_xmi, XmiCodec};

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error("rejected input at {entity}: {reason}")]
    Rejected { entity: String, reason: String },
    #[error("malformed XML at line {line}, column {column}: {message}")]
    Xml {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid JSON at `{path}`: {message}")]
    Json { path: String, message: String },
    #[error(transparent)]
    UnknownFormat(#[from] UnknownStrategy),
}

impl CodecError {
    pub fn rejected(entity: impl Into<String>, reason: impl Into<String>) -> Self {
        CodecError::Rejected {
            entity: entity.into(),
            reason: reason.into(),
        }
    }
}

/// One standoff file format.
pub trait StandoffCodec: Send + Sync {
    fn name(&self) -> &'static str;
    /// File extensions (lowercase, without dot) this codec reads and writes.
    fn extensions(&self) -> &'static [&'static str];
    fn parse(&self, bytes: &[u8]) -> Result<Document, CodecError>;
    fn serialize(&self, doc: &Document) -> Result<Vec<u8>, CodecError>;
}

pub type CodecRegistry = Registry<dyn StandoffCodec>;

/// Registry holding the built-in `xmi` and `json` codecs.
pub fn codec_registry() -> CodecRegistry {
    let mut r = CodecRegistry::new("standoff format");
    r.register("xmi", Arc::new(XmiCodec));
    r.register("json", Arc::new(JsonCodec));
    r
}

/// Pick a codec from the file extension of `path`.
pub fn codec_for_path(registry: &CodecRegistry, path: &Path) -> Option<Arc<dyn StandoffCodec>> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    registry
        .iter()
        .find(|(_, c)| c.extensions().contains(&ext.as_str()))
        .map(|(_, c)| Arc::clone(c))
}
