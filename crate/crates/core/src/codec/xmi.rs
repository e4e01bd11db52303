//! Reader and writer for the supported UIMA CAS XMI subset.
//!
//! Recognized elements (matched on local name, namespace prefix ignored):
//!
//! * `Sofa` with `sofaString`: the document text
//! * `DocumentMetaData` with `documentId` and `language`
//! * `Token` with `begin`/`end`
//! * one element per category (`CLINICAL_ENTITY` or `CLINENTITY`, `BODYPART`,
//!   `RML`, `ACTOR`, `EVENT`, `TIMEX3`) carrying `xmi:id`, `begin`, `end` and
//!   any number of opaque attributes; `projectionStatus` and `sourceId` hold
//!   the projection flags, and MISSING rows have no `begin`/`end`
//! * `PERTAINS_TO` (or `PERTAINSTO`), `TLINK`, `ALINK` carrying `xmi:id` and
//!   `source`/`target` (or `Governor`/`Dependent`) references
//!
//! Offsets in the file are UTF-16 code units. Numeric `xmi:id`s are prefixed
//! with a category code (`EV`, `CL`, ...; `R` for relations) so they can serve
//! as inline tag names. Anything else is skipped with a warning.

use std::collections::HashMap;
use std::fmt::Write as _;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{CodecError, StandoffCodec};
use crate::model::{
    annotation_order, validate_document, Annotation, Attributes, Category, Document, Relation,
    RelationType, Span, Status,
};

const STATUS_ATTR: &str = "projectionStatus";
const SOURCE_ATTR: &str = "sourceId";
const RESERVED_ANNOTATION_ATTRS: [&str; 6] = ["xmi:id", "sofa", "begin", "end", STATUS_ATTR, SOURCE_ATTR];
const RESERVED_RELATION_ATTRS: [&str; 8] = [
    "xmi:id", "sofa", "begin", "end", "source", "target", "Governor", "Dependent",
];

const XMI_HEADER: &str = concat!(
    "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n",
    "<xmi:XMI xmlns:xmi=\"http://www.omg.org/XMI\"",
    " xmlns:cas=\"http:///uima/cas.ecore\"",
    " xmlns:type=\"http:///de/tudarmstadt/ukp/dkpro/core/api/metadata/type.ecore\"",
    " xmlns:type4=\"http:///de/tudarmstadt/ukp/dkpro/core/api/segmentation/type.ecore\"",
    " xmlns:custom=\"http:///webanno/custom.ecore\"",
    " xmi:version=\"2.0\">\n",
    "  <cas:NULL xmi:id=\"0\"/>\n",
);

#[derive(Debug, Clone, Copy, Default)]
pub struct XmiCodec;

impl StandoffCodec for XmiCodec {
    fn name(&self) -> &'static str {
        "xmi"
    }

    fn extensions(&self) -> &'static [&'static str] {
        &["xmi", "xml"]
    }

    fn parse(&self, bytes: &[u8]) -> Result<Document, CodecError> {
        parse_standoff_xmi(bytes)
    }

    fn serialize(&self, doc: &Document) -> Result<Vec<u8>, CodecError> {
        serialize_standoff_xmi(doc)
    }
}

fn category_for(local: &str) -> Option<Category> {
    Some(match local {
        "CLINICAL_ENTITY" | "CLINENTITY" => Category::ClinicalEntity,
        "BODYPART" => Category::Bodypart,
        "RML" => Category::Rml,
        "ACTOR" => Category::Actor,
        "EVENT" => Category::Event,
        "TIMEX3" => Category::Timex3,
        _ => return None,
    })
}

fn relation_for(local: &str) -> Option<RelationType> {
    Some(match local {
        "PERTAINS_TO" | "PERTAINSTO" => RelationType::PertainsTo,
        "TLINK" => RelationType::Tlink,
        "ALINK" => RelationType::Alink,
        _ => return None,
    })
}

/// Maps UTF-16 code-unit offsets to scalar offsets. Offsets falling inside
/// a surrogate pair have no mapping.
struct Utf16Index {
    to_scalar: Vec<Option<usize>>,
}

impl Utf16Index {
    fn new(text: &str) -> Self {
        let mut to_scalar = Vec::with_capacity(text.len() + 1);
        for (i, c) in text.chars().enumerate() {
            to_scalar.push(Some(i));
            if c.len_utf16() == 2 {
                to_scalar.push(None);
            }
        }
        to_scalar.push(Some(text.chars().count()));
        Self { to_scalar }
    }

    fn scalar(&self, unit: usize) -> Option<usize> {
        self.to_scalar.get(unit).copied().flatten()
    }
}

/// Prefix sums from scalar offset to UTF-16 code units.
fn scalar_to_utf16(text: &str) -> Vec<usize> {
    let mut out = Vec::with_capacity(text.len() + 1);
    let mut acc = 0;
    out.push(0);
    for c in text.chars() {
        acc += c.len_utf16();
        out.push(acc);
    }
    out
}

struct RawAnnotation {
    raw_id: String,
    category: Category,
    begin: Option<String>,
    end: Option<String>,
    status: Option<String>,
    source_id: Option<String>,
    attributes: Attributes,
}

struct RawRelation {
    raw_id: String,
    rel_type: RelationType,
    source: Option<String>,
    target: Option<String>,
    attributes: Attributes,
}

fn line_col(bytes: &[u8], pos: usize) -> (usize, usize) {
    let upto = &bytes[..pos.min(bytes.len())];
    let line = upto.iter().filter(|&&b| b == b'\n').count() + 1;
    let line_start = upto.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let column = String::from_utf8_lossy(&upto[line_start..]).chars().count() + 1;
    (line, column)
}

fn xml_error(bytes: &[u8], pos: u64, message: impl ToString) -> CodecError {
    let (line, column) = line_col(bytes, pos as usize);
    CodecError::Xml {
        line,
        column,
        message: message.to_string(),
    }
}

fn attributes_of(
    e: &BytesStart<'_>,
    bytes: &[u8],
    pos: u64,
) -> Result<Vec<(String, String)>, CodecError> {
    let mut out = Vec::new();
    for attr in e.attributes() {
        let attr = attr.map_err(|err| xml_error(bytes, pos, err))?;
        let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
        let value = attr
            .unescape_value()
            .map_err(|err| xml_error(bytes, pos, err))?
            .into_owned();
        out.push((key, value));
    }
    Ok(out)
}

fn take(attrs: &mut Vec<(String, String)>, key: &str) -> Option<String> {
    let i = attrs.iter().position(|(k, _)| k == key)?;
    Some(attrs.remove(i).1)
}

fn opaque(attrs: Vec<(String, String)>, reserved: &[&str]) -> Attributes {
    attrs
        .into_iter()
        .filter(|(k, _)| !reserved.contains(&k.as_str()) && !k.starts_with("xmlns"))
        .collect()
}

/// Parse an XMI document. Skipped elements are only logged; use
/// [`parse_standoff_xmi_with_warnings`] to inspect them.
pub fn parse_standoff_xmi(bytes: &[u8]) -> Result<Document, CodecError> {
    parse_standoff_xmi_with_warnings(bytes).map(|(doc, _)| doc)
}

pub fn parse_standoff_xmi_with_warnings(bytes: &[u8]) -> Result<(Document, Vec<String>), CodecError> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let (line, column) = line_col(bytes, e.valid_up_to());
        CodecError::Xml {
            line,
            column,
            message: format!("invalid UTF-8: {e}"),
        }
    })?;
    let mut reader = Reader::from_str(text);
    reader.config_mut().check_end_names = true;

    let mut sofa: Option<String> = None;
    let mut doc_id = String::new();
    let mut language = String::new();
    let mut raw_tokens: Vec<(String, String)> = Vec::new();
    let mut raw_annotations: Vec<RawAnnotation> = Vec::new();
    let mut raw_relations: Vec<RawRelation> = Vec::new();
    let mut warnings: Vec<String> = Vec::new();
    let mut depth = 0usize;
    let mut saw_root = false;

    loop {
        let pos = reader.buffer_position();
        let event = reader
            .read_event()
            .map_err(|e| xml_error(bytes, reader.error_position(), e))?;
        let (e, empty) = match event {
            Event::Eof => break,
            Event::Start(e) => (e, false),
            Event::Empty(e) => (e, true),
            Event::End(_) => {
                depth = depth.saturating_sub(1);
                continue;
            }
            _ => continue,
        };
        if !empty {
            depth += 1;
        }
        let element_depth = if empty { depth + 1 } else { depth };
        let qname = String::from_utf8_lossy(e.name().as_ref()).into_owned();
        let local = qname.rsplit(':').next().unwrap_or(&qname).to_string();
        if element_depth == 1 {
            saw_root = true;
            continue;
        }
        if element_depth > 2 {
            // children of feature structures carry nothing we model
            continue;
        }
        let mut attrs = attributes_of(&e, bytes, pos)?;
        match local.as_str() {
            "NULL" | "View" => {}
            "Sofa" => {
                sofa = Some(take(&mut attrs, "sofaString").unwrap_or_default());
            }
            "DocumentMetaData" => {
                doc_id = take(&mut attrs, "documentId").unwrap_or_default();
                language = take(&mut attrs, "language").unwrap_or_default();
            }
            "Token" => {
                let (line, _) = line_col(bytes, pos as usize);
                let b = take(&mut attrs, "begin")
                    .ok_or_else(|| CodecError::rejected(format!("Token@{line}"), "missing begin"))?;
                let en = take(&mut attrs, "end")
                    .ok_or_else(|| CodecError::rejected(format!("Token@{line}"), "missing end"))?;
                raw_tokens.push((b, en));
            }
            other => {
                if let Some(category) = category_for(other) {
                    let raw_id = take(&mut attrs, "xmi:id")
                        .ok_or_else(|| CodecError::rejected(&qname, "annotation without xmi:id"))?;
                    raw_annotations.push(RawAnnotation {
                        raw_id,
                        category,
                        begin: take(&mut attrs, "begin"),
                        end: take(&mut attrs, "end"),
                        status: take(&mut attrs, STATUS_ATTR),
                        source_id: take(&mut attrs, SOURCE_ATTR),
                        attributes: opaque(attrs, &RESERVED_ANNOTATION_ATTRS),
                    });
                } else if let Some(rel_type) = relation_for(other) {
                    let raw_id = take(&mut attrs, "xmi:id")
                        .ok_or_else(|| CodecError::rejected(&qname, "relation without xmi:id"))?;
                    let source = take(&mut attrs, "source").or_else(|| take(&mut attrs, "Governor"));
                    let target = take(&mut attrs, "target").or_else(|| take(&mut attrs, "Dependent"));
                    raw_relations.push(RawRelation {
                        raw_id,
                        rel_type,
                        source,
                        target,
                        attributes: opaque(attrs, &RESERVED_RELATION_ATTRS),
                    });
                } else {
                    let (line, _) = line_col(bytes, pos as usize);
                    log::warn!("skipping unsupported XMI element <{qname}> at line {line}");
                    warnings.push(format!("line {line}: unsupported element <{qname}> skipped"));
                }
            }
        }
    }
    if !saw_root {
        return Err(xml_error(bytes, bytes.len() as u64, "no root element"));
    }
    let text = sofa.ok_or_else(|| CodecError::rejected("Sofa", "document has no sofa"))?;
    let index = Utf16Index::new(&text);
    let text_units = index.to_scalar.len() - 1;

    let convert = |entity: &str, b: &str, e: &str| -> Result<Span, CodecError> {
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| CodecError::rejected(entity, format!("offset `{v}` is not a number")))
        };
        let (b, e) = (parse(b)?, parse(e)?);
        if b > text_units || e > text_units {
            return Err(CodecError::rejected(
                entity,
                format!("offsets ({b},{e}) outside sofa of {text_units} UTF-16 units"),
            ));
        }
        match (index.scalar(b), index.scalar(e)) {
            (Some(b), Some(e)) => Ok(Span::new(b, e)),
            _ => Err(CodecError::rejected(entity, "offset splits a surrogate pair")),
        }
    };

    let derive_id = |raw: &str, prefix: &str| {
        if !raw.is_empty() && raw.bytes().all(|b| b.is_ascii_digit()) {
            format!("{prefix}{raw}")
        } else {
            raw.to_string()
        }
    };
    let mut id_map: HashMap<String, String> = HashMap::new();

    let mut annotations = Vec::with_capacity(raw_annotations.len());
    for raw in raw_annotations {
        let id = derive_id(&raw.raw_id, raw.category.id_prefix());
        id_map.insert(raw.raw_id.clone(), id.clone());
        let status = match raw.status.as_deref() {
            None => Status::Ok,
            Some(s) => s
                .parse::<Status>()
                .map_err(|e| CodecError::rejected(&id, e.to_string()))?,
        };
        let span = match (raw.begin.as_deref(), raw.end.as_deref()) {
            (Some(b), Some(e)) => Some(convert(&id, b, e)?),
            (None, None) if status == Status::Missing => None,
            _ => return Err(CodecError::rejected(&id, "annotation needs both begin and end")),
        };
        annotations.push(Annotation {
            id,
            category: raw.category,
            span,
            attributes: raw.attributes,
            status,
            source_id: raw.source_id,
        });
    }

    let mut relations = Vec::with_capacity(raw_relations.len());
    for raw in raw_relations {
        let id = derive_id(&raw.raw_id, "R");
        let resolve = |r: Option<String>, which: &str| -> Result<String, CodecError> {
            let r = r.ok_or_else(|| CodecError::rejected(&id, format!("relation without {which}")))?;
            Ok(id_map.get(&r).cloned().unwrap_or(r))
        };
        relations.push(Relation {
            source: resolve(raw.source, "source")?,
            target: resolve(raw.target, "target")?,
            id,
            rel_type: raw.rel_type,
            attributes: raw.attributes,
        });
    }

    let mut tokens = Vec::with_capacity(raw_tokens.len());
    for (i, (b, e)) in raw_tokens.iter().enumerate() {
        tokens.push(convert(&format!("token#{i}"), b, e)?);
    }

    Ok((
        Document {
            doc_id,
            language,
            text,
            annotations,
            relations,
            tokens,
        },
        warnings,
    ))
}

fn escape_attr(value: &str, out: &mut String) {
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
}

fn push_attr(out: &mut String, key: &str, value: &str) {
    out.push(' ');
    out.push_str(key);
    out.push_str("=\"");
    escape_attr(value, out);
    out.push('"');
}

fn is_xml_name(key: &str) -> bool {
    let mut chars = key.chars();
    chars
        .next()
        .is_some_and(|c| c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | ':'))
}

fn check_attr_keys(owner: &str, attrs: &Attributes, reserved: &[&str]) -> Result<(), CodecError> {
    for key in attrs.keys() {
        if !is_xml_name(key) || reserved.contains(&key.as_str()) || key.starts_with("xmlns") {
            return Err(CodecError::rejected(owner, format!("attribute name `{key}` cannot be written to XMI")));
        }
    }
    Ok(())
}

/// Deterministic XMI output: sofa, metadata, tokens, annotations sorted by
/// `(begin, end, id)` with offset-less MISSING rows last, relations by id.
pub fn serialize_standoff_xmi(doc: &Document) -> Result<Vec<u8>, CodecError> {
    if let Some(v) = validate_document(doc).into_iter().next() {
        return Err(CodecError::rejected(v.entity.clone(), v.to_string()));
    }
    let units = scalar_to_utf16(&doc.text);
    let total_units = units[units.len() - 1].to_string();
    let mut out = String::with_capacity(doc.text.len() * 2 + 256 * (1 + doc.annotations.len()));
    out.push_str(XMI_HEADER);

    out.push_str("  <cas:Sofa");
    push_attr(&mut out, "xmi:id", "1");
    push_attr(&mut out, "sofaNum", "1");
    push_attr(&mut out, "sofaID", "_InitialView");
    push_attr(&mut out, "mimeType", "text");
    push_attr(&mut out, "sofaString", &doc.text);
    out.push_str("/>\n");

    out.push_str("  <type:DocumentMetaData");
    push_attr(&mut out, "xmi:id", "2");
    push_attr(&mut out, "sofa", "1");
    push_attr(&mut out, "begin", "0");
    push_attr(&mut out, "end", &total_units);
    push_attr(&mut out, "documentId", &doc.doc_id);
    push_attr(&mut out, "language", &doc.language);
    out.push_str("/>\n");

    for t in &doc.tokens {
        let _ = writeln!(
            out,
            "  <type4:Token sofa=\"1\" begin=\"{}\" end=\"{}\"/>",
            units[t.begin], units[t.end]
        );
    }

    let mut annotations: Vec<&Annotation> = doc.annotations.iter().collect();
    annotations.sort_by(|a, b| annotation_order(a).cmp(&annotation_order(b)));
    for a in annotations {
        check_attr_keys(&a.id, &a.attributes, &RESERVED_ANNOTATION_ATTRS)?;
        out.push_str("  <custom:");
        out.push_str(a.category.as_str());
        push_attr(&mut out, "xmi:id", &a.id);
        push_attr(&mut out, "sofa", "1");
        if let Some(s) = a.span {
            push_attr(&mut out, "begin", &units[s.begin].to_string());
            push_attr(&mut out, "end", &units[s.end].to_string());
        }
        if a.status != Status::Ok {
            push_attr(&mut out, STATUS_ATTR, a.status.as_str());
        }
        if let Some(src) = &a.source_id {
            push_attr(&mut out, SOURCE_ATTR, src);
        }
        for (k, v) in &a.attributes {
            push_attr(&mut out, k, v);
        }
        out.push_str("/>\n");
    }

    let mut relations: Vec<&Relation> = doc.relations.iter().collect();
    relations.sort_by(|a, b| a.id.cmp(&b.id));
    for r in relations {
        check_attr_keys(&r.id, &r.attributes, &RESERVED_RELATION_ATTRS)?;
        out.push_str("  <custom:");
        out.push_str(r.rel_type.as_str());
        push_attr(&mut out, "xmi:id", &r.id);
        push_attr(&mut out, "source", &r.source);
        push_attr(&mut out, "target", &r.target);
        for (k, v) in &r.attributes {
            push_attr(&mut out, k, v);
        }
        out.push_str("/>\n");
    }
    out.push_str("</xmi:XMI>\n");
    Ok(out.into_bytes())
}
