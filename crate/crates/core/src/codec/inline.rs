//! Inline tagged text: `<ID>` ... `</ID>` around each annotated span.
//!
//! Tags are matched by their unique ID, not by nesting depth, so crossing
//! spans such as `<A1>ab <B1>cd</A1> ef</B1>` are representable.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::CodecError;
use crate::model::{is_valid_annotation_id, Document, Span, Status};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InlineDoc {
    pub tagged_text: String,
}

impl fmt::Display for InlineDoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tagged_text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ParsedInline {
    pub plain_text: String,
    pub spans: BTreeMap<String, Span>,
    /// IDs with an absent, duplicated, or out-of-order tag. Sorted, unique.
    pub orphans: Vec<String>,
}

impl ParsedInline {
    pub fn span_text(&self, id: &str) -> Option<&str> {
        self.spans
            .get(id)
            .and_then(|s| crate::model::slice_chars(&self.plain_text, *s))
    }

    /// Every tag ID seen, matched or not.
    pub fn tag_ids(&self) -> impl Iterator<Item = &str> {
        self.spans
            .keys()
            .map(String::as_str)
            .chain(self.orphans.iter().map(String::as_str))
    }
}

/// A tag recognized in tagged text, with its byte range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct TagToken<'a> {
    id: &'a str,
    closing: bool,
    start: usize,
    end: usize,
}

/// Try to read a tag starting at byte `pos` (which must hold `<`).
fn read_tag(s: &str, pos: usize) -> Option<TagToken<'_>> {
    let bytes = s.as_bytes();
    let mut i = pos + 1;
    let closing = bytes.get(i) == Some(&b'/');
    if closing {
        i += 1;
    }
    let id_start = i;
    while bytes.get(i).is_some_and(u8::is_ascii_alphanumeric) {
        i += 1;
    }
    if bytes.get(i) != Some(&b'>') {
        return None;
    }
    let id = &s[id_start..i];
    is_valid_annotation_id(id).then_some(TagToken {
        id,
        closing,
        start: pos,
        end: i + 1,
    })
}

fn find_tags(s: &str) -> impl Iterator<Item = TagToken<'_>> {
    s.match_indices('<').filter_map(move |(pos, _)| read_tag(s, pos))
}

/// True when `text` contains a sequence that would be read back as a tag.
pub fn contains_tag_like(text: &str) -> bool {
    find_tags(text).next().is_some()
}

/// Render `doc` as inline tagged text.
///
/// At each offset, closing tags come before opening tags; closings run in
/// reverse opening order; openings run longest span first, then by ID.
pub fn to_inline(doc: &Document) -> Result<InlineDoc, CodecError> {
    let len = doc.char_len();
    let mut opening = Vec::with_capacity(doc.annotations.len());
    for a in &doc.annotations {
        if a.status != Status::Ok {
            return Err(CodecError::rejected(&a.id, format!("status {} cannot be inlined", a.status.as_str())));
        }
        if !is_valid_annotation_id(&a.id) {
            return Err(CodecError::rejected(&a.id, "id is not a valid tag name"));
        }
        let span = a
            .span
            .filter(|s| s.is_valid_in(len))
            .ok_or_else(|| CodecError::rejected(&a.id, "span missing or outside text"))?;
        opening.push((span, a.id.as_str()));
    }
    if contains_tag_like(&doc.text) {
        return Err(CodecError::rejected(&doc.doc_id, "text contains tag-like sequences"));
    }
    {
        let mut ids: Vec<&str> = opening.iter().map(|(_, id)| *id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(CodecError::rejected(w[0], "duplicate annotation id"));
        }
    }
    opening.sort_by(|(a, ida), (b, idb)| {
        a.begin
            .cmp(&b.begin)
            .then(b.len().cmp(&a.len()))
            .then(ida.cmp(idb))
    });

    // Per offset: which annotations close (as opening ranks) and which open.
    let mut closes: Vec<Vec<usize>> = vec![Vec::new(); len + 1];
    let mut opens: Vec<Vec<usize>> = vec![Vec::new(); len + 1];
    for (rank, (span, _)) in opening.iter().enumerate() {
        opens[span.begin].push(rank);
        closes[span.end].push(rank);
    }

    let mut out = String::with_capacity(doc.text.len() + opening.len() * 12);
    let mut chars = doc.text.chars();
    for pos in 0..=len {
        for &rank in closes[pos].iter().rev() {
            out.push_str("</");
            out.push_str(opening[rank].1);
            out.push('>');
        }
        for &rank in &opens[pos] {
            out.push('<');
            out.push_str(opening[rank].1);
            out.push('>');
        }
        if let Some(c) = chars.next() {
            out.push(c);
        }
    }
    Ok(InlineDoc { tagged_text: out })
}

/// Parse tagged text. Total: malformed tags end up in `orphans`, and `<...>`
/// sequences outside the tag grammar stay in the text as literals.
pub fn parse_inline(tagged: &str) -> ParsedInline {
    let mut plain = String::with_capacity(tagged.len());
    let mut plain_chars = 0usize;
    let mut cursor = 0usize;
    // id -> (opening offsets, closing offsets)
    let mut seen: BTreeMap<&str, (Vec<usize>, Vec<usize>)> = BTreeMap::new();

    for tag in find_tags(tagged) {
        let literal = &tagged[cursor..tag.start];
        plain.push_str(literal);
        plain_chars += literal.chars().count();
        cursor = tag.end;
        let entry = seen.entry(tag.id).or_default();
        if tag.closing {
            entry.1.push(plain_chars);
        } else {
            entry.0.push(plain_chars);
        }
    }
    plain.push_str(&tagged[cursor..]);

    let mut spans = BTreeMap::new();
    let mut orphans = Vec::new();
    for (id, (open, close)) in seen {
        match (open.as_slice(), close.as_slice()) {
            ([b], [e]) if b < e => {
                spans.insert(id.to_string(), Span::new(*b, *e));
            }
            _ => orphans.push(id.to_string()),
        }
    }
    ParsedInline {
        plain_text: plain,
        spans,
        orphans,
    }
}

/// Remove every recognized tag, keeping literal text.
pub fn strip_tags(tagged: &str) -> String {
    parse_inline(tagged).plain_text
}
