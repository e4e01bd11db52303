//! Cross-lingual projection of span annotations.
//!
//! Standoff documents are rendered as inline tagged text, translated through an
//! n-best chat-completion backend, checked for missing and mismatched tags,
//! and rebuilt as flagged target-language standoff documents ready for human
//! revision. The crate also generates text-to-text training sequences and
//! scores extraction output.

pub mod backend;
pub mod codec;
pub mod corpus;
pub mod eval;
pub mod model;
pub mod pipeline;
pub mod qa;
pub mod registry;
pub mod stats;
pub mod text;

pub use model::{
    validate_document, Annotation, Attributes, Category, CategoryGroup, Document, Relation,
    RelationType, Span, Status, Violation,
};
