//! Text-to-text training sequences for entity detection and relation
//! extraction, their output parsers, and exact-match scoring.
//!
//! Sequence grammar `v1`:
//!
//! * entity targets copy the input and wrap each clinical entity in
//!   `[CL]`...`[/CL]`; an entity that crosses another in the same input uses
//!   `[CL#k]`...`[/CL#k]`, with `k` its 1-based rank in the input;
//! * relation targets list `[REL] <result> [TO] <test>` items joined by
//!   `" ; "`, ordered by result offset.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{slice_chars, Category, Document, RelationType, Span};
use crate::text::sentence_spans;

pub mod io;
mod score;

pub use score::{
    jaccard, matcher_registry, max_matching, multiset_matches, score_entities, score_entities_with,
    score_relation_offsets, score_relations, ExactMatcher, MatcherRegistry, OverlapMatcher, Prf, SpanMatcher,
};

pub const GRAMMAR_VERSION: &str = "v1";
pub const ITEM_SEPARATOR: &str = " ; ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Entity,
    Relation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceMode {
    #[default]
    Sentence,
    Document,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub task: Task,
    pub input: String,
    pub target: String,
    pub doc_id: String,
    /// Where `input` sits in the source document.
    pub span: Span,
}

/// Input units: sentences (merged where a binding span straddles a break)
/// or the whole text.
fn units(text: &str, mode: SequenceMode, bindings: &[Span]) -> Vec<Span> {
    let len = text.chars().count();
    if mode == SequenceMode::Document {
        return if len == 0 { Vec::new() } else { vec![Span::new(0, len)] };
    }
    let mut out: Vec<Span> = Vec::new();
    for s in sentence_spans(text) {
        match out.last_mut() {
            Some(prev) if bindings.iter().any(|b| b.begin < s.begin && b.end > prev.end) => prev.end = s.end,
            _ => out.push(s),
        }
    }
    out
}

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Training pairs for `task`. Annotations without a span (MISSING rows) and
/// relations touching them are skipped.
pub fn make_training_sequences(doc: &Document, task: Task, mode: SequenceMode) -> Vec<TrainingPair> {
    match task {
        Task::Entity => entity_sequences(doc, mode),
        Task::Relation => relation_sequences(doc, mode),
    }
}

fn entity_sequences(doc: &Document, mode: SequenceMode) -> Vec<TrainingPair> {
    let entities: Vec<Span> = doc
        .annotations
        .iter()
        .filter(|a| a.category == Category::ClinicalEntity)
        .filter_map(|a| a.span)
        .collect();
    units(&doc.text, mode, &entities)
        .into_iter()
        .map(|unit| {
            let input = slice_chars(&doc.text, unit).unwrap_or_default().to_string();
            let local: Vec<Span> = entities
                .iter()
                .filter(|e| unit.contains(e))
                .map(|e| Span::new(e.begin - unit.begin, e.end - unit.begin))
                .collect();
            TrainingPair {
                task: Task::Entity,
                target: entity_target(&input, &local),
                input,
                doc_id: doc.doc_id.clone(),
                span: unit,
            }
        })
        .collect()
}

/// Insert entity markers into `input` around `spans` (offsets into `input`).
pub fn entity_target(input: &str, spans: &[Span]) -> String {
    let mut order: Vec<Span> = spans.to_vec();
    order.sort_by(|a, b| a.begin.cmp(&b.begin).then(b.end.cmp(&a.end)));
    let markers: Vec<(String, String)> = order
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if order.iter().any(|o| o.crosses(s)) {
                (format!("[CL#{}]", i + 1), format!("[/CL#{}]", i + 1))
            } else {
                ("[CL]".to_string(), "[/CL]".to_string())
            }
        })
        .collect();
    let len = input.chars().count();
    let mut opens: Vec<Vec<usize>> = vec![Vec::new(); len + 1];
    let mut closes: Vec<Vec<usize>> = vec![Vec::new(); len + 1];
    for (rank, s) in order.iter().enumerate() {
        opens[s.begin].push(rank);
        closes[s.end].push(rank);
    }
    let mut out = String::with_capacity(input.len() + 12 * order.len());
    let mut chars = input.chars();
    for pos in 0..=len {
        for &r in closes[pos].iter().rev() {
            out.push_str(&markers[r].1);
        }
        for &r in &opens[pos] {
            out.push_str(&markers[r].0);
        }
        if let Some(c) = chars.next() {
            out.push(c);
        }
    }
    out
}

fn relation_sequences(doc: &Document, mode: SequenceMode) -> Vec<TrainingPair> {
    let mut pairs: Vec<(Span, Span)> = Vec::new();
    for r in doc.relations.iter().filter(|r| r.rel_type == RelationType::PertainsTo) {
        let (Some(res), Some(test)) = (doc.annotation(&r.source), doc.annotation(&r.target)) else {
            continue;
        };
        if res.category != Category::Rml || test.category != Category::Event {
            continue;
        }
        if let (Some(a), Some(b)) = (res.span, test.span) {
            pairs.push((a, b));
        }
    }
    pairs.sort();
    let hulls: Vec<Span> = pairs
        .iter()
        .map(|(a, b)| Span::new(a.begin.min(b.begin), a.end.max(b.end)))
        .collect();
    units(&doc.text, mode, &hulls)
        .into_iter()
        .map(|unit| {
            let items: Vec<String> = pairs
                .iter()
                .zip(&hulls)
                .filter(|(_, h)| unit.contains(h))
                .map(|((a, b), _)| {
                    format!(
                        "[REL] {} [TO] {}",
                        normalize_ws(slice_chars(&doc.text, *a).unwrap_or_default()),
                        normalize_ws(slice_chars(&doc.text, *b).unwrap_or_default())
                    )
                })
                .collect();
            TrainingPair {
                task: Task::Relation,
                input: slice_chars(&doc.text, unit).unwrap_or_default().to_string(),
                target: items.join(ITEM_SEPARATOR),
                doc_id: doc.doc_id.clone(),
                span: unit,
            }
        })
        .collect()
}

/// One marked string from generated entity output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityPrediction {
    pub text: String,
    /// Offsets into the input; `None` when the text could not be found.
    pub span: Option<Span>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MarkerKey {
    Plain,
    Ranked(u32),
}

#[derive(Debug, Clone, Copy)]
struct Marker {
    key: MarkerKey,
    closing: bool,
    byte_start: usize,
    byte_end: usize,
}

fn scan_markers(s: &str) -> Vec<Marker> {
    let mut out = Vec::new();
    for (pos, _) in s.match_indices('[') {
        let rest = &s[pos + 1..];
        let (closing, rest) = match rest.strip_prefix('/') {
            Some(r) => (true, r),
            None => (false, rest),
        };
        let Some(rest) = rest.strip_prefix("CL") else { continue };
        let head = pos + 1 + usize::from(closing) + 2;
        if rest.starts_with(']') {
            out.push(Marker {
                key: MarkerKey::Plain,
                closing,
                byte_start: pos,
                byte_end: head + 1,
            });
        } else if let Some(num) = rest.strip_prefix('#') {
            let digits = num.bytes().take_while(u8::is_ascii_digit).count();
            if digits > 0 && num[digits..].starts_with(']') {
                if let Ok(k) = num[..digits].parse() {
                    out.push(Marker {
                        key: MarkerKey::Ranked(k),
                        closing,
                        byte_start: pos,
                        byte_end: head + 1 + digits + 1,
                    });
                }
            }
        }
    }
    out
}

/// Pair markers: plain ones by nesting, ranked ones by rank. Returns
/// (open index, close index) pairs; unpaired markers are left out.
fn pair_markers(markers: &[Marker]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    let mut plain_stack: Vec<usize> = Vec::new();
    let mut ranked_open: BTreeMap<u32, usize> = BTreeMap::new();
    for (i, m) in markers.iter().enumerate() {
        match (m.key, m.closing) {
            (MarkerKey::Plain, false) => plain_stack.push(i),
            (MarkerKey::Plain, true) => {
                if let Some(o) = plain_stack.pop() {
                    pairs.push((o, i));
                }
            }
            (MarkerKey::Ranked(k), false) => {
                ranked_open.entry(k).or_insert(i);
            }
            (MarkerKey::Ranked(k), true) => {
                if let Some(o) = ranked_open.remove(&k) {
                    pairs.push((o, i));
                }
            }
        }
    }
    pairs
}

/// Strip paired markers from `generated`, returning the plain text and each
/// marked span in plain-text scalar offsets, ordered by (begin, end desc).
fn strip_entity_markers(generated: &str) -> (String, Vec<Span>) {
    let markers = scan_markers(generated);
    let pairs = pair_markers(&markers);
    let mut used = vec![false; markers.len()];
    for &(o, c) in &pairs {
        used[o] = true;
        used[c] = true;
    }
    let mut plain = String::with_capacity(generated.len());
    let mut plain_pos = vec![0usize; markers.len()];
    let mut chars = 0usize;
    let mut cursor = 0usize;
    for (i, m) in markers.iter().enumerate() {
        if !used[i] || m.byte_start < cursor {
            continue;
        }
        let chunk = &generated[cursor..m.byte_start];
        plain.push_str(chunk);
        chars += chunk.chars().count();
        plain_pos[i] = chars;
        cursor = m.byte_end;
    }
    plain.push_str(&generated[cursor..]);
    let mut spans: Vec<Span> = pairs
        .iter()
        .map(|&(o, c)| Span { begin: plain_pos[o], end: plain_pos[c] })
        .collect();
    spans.sort_by(|a, b| a.begin.cmp(&b.begin).then(b.end.cmp(&a.end)));
    (plain, spans)
}

fn char_find(haystack: &str, needle: &str, from_char: usize) -> Option<usize> {
    let from_byte = haystack.char_indices().nth(from_char).map(|(b, _)| b)?;
    let byte = haystack[from_byte..].find(needle)? + from_byte;
    Some(haystack[..byte].chars().count())
}

/// Recover entity spans from generated output for `input`.
///
/// When the stripped output equals the input, marker positions give the
/// offsets directly. Otherwise each marked string is searched for in the
/// input, leftmost first, starting after the previous match (or at its start
/// when the two marks overlap in the output). Marked strings that cannot be
/// found, or are empty, keep `span: None`.
pub fn parse_entity_output(input: &str, generated: &str) -> Vec<EntityPrediction> {
    let (plain, marks) = strip_entity_markers(generated);
    let text_of = |s: Span| slice_chars(&plain, s).unwrap_or_default().to_string();
    if plain == input {
        return marks
            .into_iter()
            .map(|s| EntityPrediction {
                text: text_of(s),
                span: (!s.is_empty()).then_some(s),
            })
            .collect();
    }
    let mut out = Vec::with_capacity(marks.len());
    let mut prev: Option<(Span, Span)> = None;
    for mark in marks {
        let text = text_of(mark);
        let cursor = match prev {
            Some((pm, found)) if mark.begin < pm.end => found.begin,
            Some((_, found)) => found.end,
            None => 0,
        };
        let span = if text.is_empty() {
            None
        } else {
            char_find(input, &text, cursor).map(|b| Span::new(b, b + text.chars().count()))
        };
        if let Some(found) = span {
            prev = Some((mark, found));
        }
        out.push(EntityPrediction { text, span });
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedRelations {
    pub pairs: Vec<(String, String)>,
    pub malformed: usize,
}

/// Parse `[REL] x [TO] y` items separated by `" ; "`.
pub fn parse_relation_output(generated: &str) -> ParsedRelations {
    let mut out = ParsedRelations::default();
    if generated.trim().is_empty() {
        return out;
    }
    for item in generated.split(ITEM_SEPARATOR) {
        let item = item.trim();
        let parsed = item.strip_prefix("[REL] ").and_then(|rest| {
            let (x, y) = rest.split_once(" [TO] ")?;
            let (x, y) = (normalize_ws(x), normalize_ws(y));
            (!x.is_empty() && !y.is_empty()).then_some((x, y))
        });
        match parsed {
            Some(p) => out.pairs.push(p),
            None => out.malformed += 1,
        }
    }
    out
}

#[cfg(test)]
mod tests;
