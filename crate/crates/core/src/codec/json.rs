//! Canonical JSON interchange format.
//!
//! Schema keys are emitted in sorted order with two-space indentation and a
//! trailing newline. Attribute objects keep their insertion order.

use serde::{Deserialize, Serialize};

use super::{CodecError, StandoffCodec};
use crate::model::{Annotation, Attributes, Category, Document, Relation, RelationType, Span, Status};

#[derive(Debug, Clone, Copy, Default)]
pub struct JsonCodec;

impl StandoffCodec for JsonCodec {
    fn name(&self) -> &'static str {
        "json"
    }

    fn extensions(&self) -> &'static [&'static str] {
        &["json"]
    }

    fn parse(&self, bytes: &[u8]) -> Result<Document, CodecError> {
        parse_json(bytes)
    }

    fn serialize(&self, doc: &Document) -> Result<Vec<u8>, CodecError> {
        Ok(serialize_json(doc))
    }
}

// Field order below is alphabetical; serde emits fields in declaration order.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocumentJson {
    annotations: Vec<AnnotationJson>,
    doc_id: String,
    language: String,
    relations: Vec<RelationJson>,
    text: String,
    #[serde(default)]
    tokens: Vec<Span>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationJson {
    #[serde(default)]
    attributes: Attributes,
    begin: Option<usize>,
    category: Category,
    end: Option<usize>,
    id: String,
    #[serde(default)]
    source_id: Option<String>,
    #[serde(default)]
    status: Status,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RelationJson {
    #[serde(default)]
    attributes: Attributes,
    id: String,
    #[serde(rename = "rel_type")]
    rel_type: RelationType,
    source: String,
    target: String,
}

pub fn parse_json(bytes: &[u8]) -> Result<Document, CodecError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let dto: DocumentJson = serde_path_to_error::deserialize(&mut de).map_err(|e| CodecError::Json {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    de.end().map_err(|e| CodecError::Json {
        path: ".".into(),
        message: e.to_string(),
    })?;

    let mut annotations = Vec::with_capacity(dto.annotations.len());
    for (i, a) in dto.annotations.into_iter().enumerate() {
        let span = match (a.begin, a.end) {
            (Some(b), Some(e)) => Some(Span::new(b, e)),
            (None, None) => None,
            _ => {
                return Err(CodecError::Json {
                    path: format!("annotations[{i}]"),
                    message: "begin and end must both be set or both be null".into(),
                })
            }
        };
        annotations.push(Annotation {
            id: a.id,
            category: a.category,
            span,
            attributes: a.attributes,
            status: a.status,
            source_id: a.source_id,
        });
    }
    let relations = dto
        .relations
        .into_iter()
        .map(|r| Relation {
            id: r.id,
            rel_type: r.rel_type,
            source: r.source,
            target: r.target,
            attributes: r.attributes,
        })
        .collect();
    Ok(Document {
        doc_id: dto.doc_id,
        language: dto.language,
        text: dto.text,
        annotations,
        relations,
        tokens: dto.tokens,
    })
}

pub fn serialize_json(doc: &Document) -> Vec<u8> {
    let dto = DocumentJson {
        annotations: doc
            .annotations
            .iter()
            .map(|a| AnnotationJson {
                attributes: a.attributes.clone(),
                begin: a.span.map(|s| s.begin),
                category: a.category,
                end: a.span.map(|s| s.end),
                id: a.id.clone(),
                source_id: a.source_id.clone(),
                status: a.status,
            })
            .collect(),
        doc_id: doc.doc_id.clone(),
        language: doc.language.clone(),
        relations: doc
            .relations
            .iter()
            .map(|r| RelationJson {
                attributes: r.attributes.clone(),
                id: r.id.clone(),
                rel_type: r.rel_type,
                source: r.source.clone(),
                target: r.target.clone(),
            })
            .collect(),
        text: doc.text.clone(),
        tokens: doc.tokens.clone(),
    };
    let mut out = serde_json::to_vec_pretty(&dto).expect("document serializes to JSON");
    out.push(b'\n');
    out
}
