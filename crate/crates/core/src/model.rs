//! Shared data model for annotated clinical documents.
//!
//! Offsets are Unicode scalar values (Rust `char`s), 0-based, end-exclusive.
//! Conversions to other units (UTF-16 for XMI, bytes for slicing) happen at
//! the edges.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

/// Ordered string attributes carried opaquely through every codec.
pub type Attributes = IndexMap<String, String>;

/// Attribute key marking a discontinuous source annotation.
pub const DISCONTINUOUS_ATTR: &str = "discontinuous";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub begin: usize,
    pub end: usize,
}

impl Span {
    pub const fn new(begin: usize, end: usize) -> Self {
        Self { begin, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.begin)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.begin
    }

    /// True when the span is non-empty and fits in a text of `text_len` scalars.
    pub fn is_valid_in(&self, text_len: usize) -> bool {
        self.begin < self.end && self.end <= text_len
    }

    pub fn shifted(&self, delta: usize) -> Span {
        Span::new(self.begin + delta, self.end + delta)
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.begin <= other.begin && other.end <= self.end
    }

    /// Partial overlap where neither span contains the other.
    pub fn crosses(&self, other: &Span) -> bool {
        self.begin < other.end
            && other.begin < self.end
            && !self.contains(other)
            && !other.contains(self)
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.begin, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Category {
    ClinicalEntity,
    Bodypart,
    Rml,
    Actor,
    Event,
    Timex3,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::ClinicalEntity,
        Category::Bodypart,
        Category::Rml,
        Category::Actor,
        Category::Event,
        Category::Timex3,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::ClinicalEntity => "CLINICAL_ENTITY",
            Category::Bodypart => "BODYPART",
            Category::Rml => "RML",
            Category::Actor => "ACTOR",
            Category::Event => "EVENT",
            Category::Timex3 => "TIMEX3",
        }
    }

    /// Prefix used when deriving annotation IDs from numeric XMI identifiers.
    pub fn id_prefix(&self) -> &'static str {
        match self {
            Category::ClinicalEntity => "CL",
            Category::Bodypart => "BP",
            Category::Rml => "RML",
            Category::Actor => "AC",
            Category::Event => "EV",
            Category::Timex3 => "TX",
        }
    }

    /// Error-table grouping: BODYPART, ACTOR and TIMEX3 collapse into "Other".
    pub fn group(&self) -> CategoryGroup {
        match self {
            Category::ClinicalEntity => CategoryGroup::Cl,
            Category::Event => CategoryGroup::Ev,
            Category::Rml => CategoryGroup::Rml,
            Category::Bodypart | Category::Actor | Category::Timex3 => CategoryGroup::Other,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} `{name}`")]
pub struct UnknownName {
    pub kind: &'static str,
    pub name: String,
}

impl FromStr for Category {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| UnknownName {
                kind: "category",
                name: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CategoryGroup {
    #[serde(rename = "CL")]
    Cl,
    #[serde(rename = "EV")]
    Ev,
    #[serde(rename = "RML")]
    Rml,
    #[serde(rename = "Oth.")]
    Other,
}

impl CategoryGroup {
    pub const ALL: [CategoryGroup; 4] = [
        CategoryGroup::Cl,
        CategoryGroup::Ev,
        CategoryGroup::Rml,
        CategoryGroup::Other,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            CategoryGroup::Cl => "CL",
            CategoryGroup::Ev => "EV",
            CategoryGroup::Rml => "RML",
            CategoryGroup::Other => "Oth.",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    #[default]
    Ok,
    MismatchCandidate,
    Missing,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Ok => "OK",
            Status::MismatchCandidate => "MISMATCH_CANDIDATE",
            Status::Missing => "MISSING",
        }
    }
}

impl FromStr for Status {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "OK" => Ok(Status::Ok),
            "MISMATCH_CANDIDATE" => Ok(Status::MismatchCandidate),
            "MISSING" => Ok(Status::Missing),
            _ => Err(UnknownName {
                kind: "status",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    pub id: String,
    pub category: Category,
    /// Absent only for `Status::Missing` rows.
    pub span: Option<Span>,
    pub attributes: Attributes,
    pub status: Status,
    /// ID of the source-language annotation this one was projected from.
    pub source_id: Option<String>,
}

impl Annotation {
    pub fn new(id: impl Into<String>, category: Category, span: Span) -> Self {
        Self {
            id: id.into(),
            category,
            span: Some(span),
            attributes: Attributes::new(),
            status: Status::Ok,
            source_id: None,
        }
    }

    pub fn with_attribute(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.attributes.insert(key.into(), value.into());
        self
    }

    pub fn is_discontinuous(&self) -> bool {
        self.attributes
            .get(DISCONTINUOUS_ATTR)
            .is_some_and(|v| v.eq_ignore_ascii_case("true"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RelationType {
    PertainsTo,
    Tlink,
    Alink,
}

impl RelationType {
    pub const ALL: [RelationType; 3] = [
        RelationType::PertainsTo,
        RelationType::Tlink,
        RelationType::Alink,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RelationType::PertainsTo => "PERTAINS_TO",
            RelationType::Tlink => "TLINK",
            RelationType::Alink => "ALINK",
        }
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationType {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RelationType::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| UnknownName {
                kind: "relation type",
                name: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub id: String,
    pub rel_type: RelationType,
    pub source: String,
    pub target: String,
    pub attributes: Attributes,
}

impl Relation {
    pub fn new(
        id: impl Into<String>,
        rel_type: RelationType,
        source: impl Into<String>,
        target: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            rel_type,
            source: source.into(),
            target: target.into(),
            attributes: Attributes::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Document {
    pub doc_id: String,
    /// ISO 639-1 code.
    pub language: String,
    pub text: String,
    pub annotations: Vec<Annotation>,
    pub relations: Vec<Relation>,
    /// Token spans; empty when the document carries no tokenization.
    pub tokens: Vec<Span>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, language: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            language: language.into(),
            text: text.into(),
            ..Default::default()
        }
    }

    /// Length of the text in scalar values.
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    pub fn annotation(&self, id: &str) -> Option<&Annotation> {
        self.annotations.iter().find(|a| a.id == id)
    }

    /// Substring covered by `span`, or `None` when out of range.
    pub fn slice(&self, span: Span) -> Option<&str> {
        slice_chars(&self.text, span)
    }

    /// Annotations sorted by `(begin, end, id)` with offset-less rows last
    /// (by id), relations sorted by id. This is the order the XMI codec emits.
    pub fn canonicalized(&self) -> Document {
        let mut doc = self.clone();
        doc.annotations.sort_by(|a, b| annotation_order(a).cmp(&annotation_order(b)));
        doc.relations.sort_by(|a, b| a.id.cmp(&b.id));
        doc
    }
}

pub(crate) fn annotation_order(a: &Annotation) -> (bool, usize, usize, &str) {
    match a.span {
        Some(s) => (false, s.begin, s.end, a.id.as_str()),
        None => (true, 0, 0, a.id.as_str()),
    }
}

/// Slice `text` by scalar offsets.
pub fn slice_chars(text: &str, span: Span) -> Option<&str> {
    if span.begin > span.end {
        return None;
    }
    let mut indices = text.char_indices().map(|(i, _)| i).chain(std::iter::once(text.len()));
    let start = indices.nth(span.begin)?;
    let end = if span.end == span.begin {
        start
    } else {
        indices.nth(span.end - span.begin - 1)?
    };
    Some(&text[start..end])
}

/// Annotation IDs double as inline tag names: one or more ASCII letters
/// followed by one or more ASCII digits (e.g. `EV1782`).
pub fn is_valid_annotation_id(id: &str) -> bool {
    let letters = id.bytes().take_while(u8::is_ascii_alphabetic).count();
    let rest = &id.as_bytes()[letters..];
    letters > 0 && !rest.is_empty() && rest.iter().all(u8::is_ascii_digit)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Violation {
    /// Offending annotation, relation, or token identifier.
    pub entity: String,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} ({})", self.entity, self.rule.as_str(), self.detail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    InvalidId,
    DuplicateId,
    BeginBeforeEnd,
    SpanOutOfText,
    MissingHasSpan,
    MissingWithoutSource,
    SpanRequired,
    DanglingEndpoint,
    PertainsToEndpoints,
    TokenOrder,
}

impl Rule {
    pub fn as_str(&self) -> &'static str {
        match self {
            Rule::InvalidId => "id must be letters followed by digits",
            Rule::DuplicateId => "id must be unique",
            Rule::BeginBeforeEnd => "begin<end",
            Rule::SpanOutOfText => "span within text",
            Rule::MissingHasSpan => "MISSING annotations carry no span",
            Rule::MissingWithoutSource => "MISSING annotations need source_id",
            Rule::SpanRequired => "non-MISSING annotations need a span",
            Rule::DanglingEndpoint => "relation endpoints must exist",
            Rule::PertainsToEndpoints => "PERTAINS_TO links RML to EVENT",
            Rule::TokenOrder => "tokens sorted and non-overlapping",
        }
    }
}

/// Check every structural invariant of `doc`. Never aborts; an empty result
/// means the document is valid.
pub fn validate_document(doc: &Document) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |entity: &str, rule: Rule, detail: String| {
        out.push(Violation {
            entity: entity.to_string(),
            rule,
            detail,
        })
    };
    let len = doc.char_len();

    let mut seen: HashSet<&str> = HashSet::new();
    let mut by_id: HashMap<&str, &Annotation> = HashMap::new();
    for a in &doc.annotations {
        if !is_valid_annotation_id(&a.id) {
            push(&a.id, Rule::InvalidId, format!("`{}`", a.id));
        }
        if !seen.insert(&a.id) {
            push(&a.id, Rule::DuplicateId, "annotation".into());
        }
        by_id.entry(&a.id).or_insert(a);
        match (a.status, a.span) {
            (Status::Missing, Some(s)) => push(&a.id, Rule::MissingHasSpan, s.to_string()),
            (Status::Missing, None) => {}
            (_, None) => push(&a.id, Rule::SpanRequired, a.status.as_str().into()),
            (_, Some(s)) => {
                if s.begin >= s.end {
                    push(&a.id, Rule::BeginBeforeEnd, s.to_string());
                } else if s.end > len {
                    push(&a.id, Rule::SpanOutOfText, format!("{s} > {len}"));
                }
            }
        }
        if a.status == Status::Missing && a.source_id.is_none() {
            push(&a.id, Rule::MissingWithoutSource, String::new());
        }
    }

    for r in &doc.relations {
        if r.id.is_empty() {
            push(&r.id, Rule::InvalidId, "empty relation id".into());
        }
        if !seen.insert(&r.id) {
            push(&r.id, Rule::DuplicateId, "relation".into());
        }
        let source = by_id.get(r.source.as_str());
        let target = by_id.get(r.target.as_str());
        if source.is_none() {
            push(&r.id, Rule::DanglingEndpoint, format!("source {}", r.source));
        }
        if target.is_none() {
            push(&r.id, Rule::DanglingEndpoint, format!("target {}", r.target));
        }
        if r.rel_type == RelationType::PertainsTo {
            if let (Some(s), Some(t)) = (source, target) {
                if s.category != Category::Rml || t.category != Category::Event {
                    push(
                        &r.id,
                        Rule::PertainsToEndpoints,
                        format!("{} -> {}", s.category, t.category),
                    );
                }
            }
        }
    }

    let mut prev_end = 0;
    for (i, t) in doc.tokens.iter().enumerate() {
        let name = format!("token#{i}");
        if !t.is_valid_in(len) {
            push(&name, Rule::SpanOutOfText, t.to_string());
        }
        if t.begin < prev_end {
            push(&name, Rule::TokenOrder, t.to_string());
        }
        prev_end = prev_end.max(t.end);
    }
    out
}
