//! Tag-transfer quality checks for candidate translations.
//!
//! A *missing* tag is a source tag absent from the candidate. A *mismatch
//! candidate* is a tag present in both whose target span does not translate
//! back to the source span, even allowing for WordNet synonyms.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, Translator};
use crate::codec::ParsedInline;

pub mod wordnet;

pub use wordnet::{normalize_lemma, Lexicon, LexiconError};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MismatchCandidate {
    pub id: String,
    pub source_text: String,
    pub target_text: String,
}

/// Per-candidate classification of every source tag. `missing`,
/// `mismatch_candidates` and `ok` partition the source tag set.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TagDiff {
    pub missing: Vec<String>,
    pub mismatch_candidates: Vec<MismatchCandidate>,
    pub ok: Vec<String>,
    /// Tags in the candidate that the source does not have. Not counted as errors.
    pub spurious: Vec<String>,
    pub warnings: Vec<String>,
}

impl TagDiff {
    pub fn source_tag_count(&self) -> usize {
        self.missing.len() + self.mismatch_candidates.len() + self.ok.len()
    }

    pub fn error_count(&self) -> usize {
        self.missing.len() + self.mismatch_candidates.len()
    }

    pub fn mismatch_ids(&self) -> impl Iterator<Item = &str> {
        self.mismatch_candidates.iter().map(|m| m.id.as_str())
    }

    /// True when the three classes are disjoint and cover exactly `source_ids`.
    pub fn is_partition_of<'a>(&self, source_ids: impl IntoIterator<Item = &'a str>) -> bool {
        let expected: BTreeSet<&str> = source_ids.into_iter().collect();
        let mut seen = BTreeSet::new();
        let all = self
            .missing
            .iter()
            .map(String::as_str)
            .chain(self.mismatch_ids())
            .chain(self.ok.iter().map(String::as_str));
        for id in all {
            if !seen.insert(id) {
                return false;
            }
        }
        seen == expected
    }
}

/// Structural pass: tags absent from the candidate (or orphaned there) are
/// missing; tags present on both sides are provisionally ok.
pub fn diff_tags(source: &ParsedInline, candidate: &ParsedInline) -> TagDiff {
    let mut diff = TagDiff::default();
    for id in source.spans.keys() {
        if candidate.spans.contains_key(id) {
            diff.ok.push(id.clone());
        } else {
            diff.missing.push(id.clone());
        }
    }
    for id in candidate.tag_ids() {
        if !source.spans.contains_key(id) && !source.orphans.iter().any(|o| o == id) {
            diff.spurious.push(id.to_string());
        }
    }
    diff.spurious.sort();
    diff.spurious.dedup();
    if !source.orphans.is_empty() {
        diff.warnings
            .push(format!("source has unmatched tags: {}", source.orphans.join(", ")));
    }
    if !diff.spurious.is_empty() {
        diff.warnings
            .push(format!("candidate adds tags: {}", diff.spurious.join(", ")));
    }
    diff
}

/// Articles, prepositions, conjunctions, pronouns and copulas ignored by
/// token-level matching.
pub const STOPWORDS: &[&str] = &[
    "a", "an", "the", "of", "in", "on", "at", "to", "for", "with", "by", "from", "into", "onto",
    "upon", "about", "as", "per", "via", "over", "under", "and", "or", "but", "nor", "is", "are",
    "was", "were", "be", "been", "being", "am", "its", "it", "this", "that", "these", "those",
    "his", "her", "their", "has", "have", "had",
];

fn normalize_phrase(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn content_tokens(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanMatch {
    Exact,
    PhraseSynonym,
    TokenSynonym,
}

/// Compare a source span with the back-translation of its target span.
pub fn match_backtranslation(source_text: &str, backtranslated: &str, lexicon: &Lexicon) -> Option<SpanMatch> {
    let src = normalize_phrase(source_text);
    let bt = normalize_phrase(backtranslated);
    if src == bt {
        return Some(SpanMatch::Exact);
    }
    if lexicon.share_synset(&src, &bt) {
        return Some(SpanMatch::PhraseSynonym);
    }
    let src_tokens = content_tokens(&src);
    let bt_tokens = content_tokens(&bt);
    if src_tokens.is_empty() || bt_tokens.is_empty() {
        return None;
    }
    let covered = |from: &[String], into: &[String]| {
        from.iter()
            .all(|t| into.iter().any(|u| t == u || lexicon.share_synset(t, u)))
    };
    (covered(&bt_tokens, &src_tokens) && covered(&src_tokens, &bt_tokens)).then_some(SpanMatch::TokenSynonym)
}

/// Back-translate `target_text` into `source_language` and compare it with
/// `source_text`: exact match, whole-phrase synonym, then token-level
/// synonyms after stopword removal.
pub fn span_matches(
    source_text: &str,
    target_text: &str,
    source_language: &str,
    lexicon: &Lexicon,
    translator: &Translator,
) -> Result<bool, BackendError> {
    if source_text.trim().is_empty() {
        return Err(BackendError::Rejected("empty source span".into()));
    }
    let bt = translator.backtranslate(target_text, source_language)?;
    Ok(match_backtranslation(source_text, &bt, lexicon).is_some())
}

/// Semantic pass: provisionally-ok tags whose spans fail [`span_matches`]
/// become mismatch candidates. Tags for which `should_check` is false stay
/// ok. A backend failure flags the tag and records a warning.
pub fn semantic_pass(
    diff: TagDiff,
    source: &ParsedInline,
    candidate: &ParsedInline,
    source_language: &str,
    lexicon: &Lexicon,
    translator: &Translator,
    should_check: &dyn Fn(&str) -> bool,
) -> TagDiff {
    let TagDiff {
        missing,
        mut mismatch_candidates,
        ok: provisional,
        spurious,
        mut warnings,
    } = diff;
    let mut ok = Vec::with_capacity(provisional.len());
    for id in provisional {
        if !should_check(&id) {
            ok.push(id);
            continue;
        }
        let source_text = source.span_text(&id).unwrap_or_default().to_string();
        let target_text = candidate.span_text(&id).unwrap_or_default().to_string();
        let matched = if target_text.trim().is_empty() {
            Ok(false)
        } else {
            span_matches(&source_text, &target_text, source_language, lexicon, translator)
        };
        match matched {
            Ok(true) => ok.push(id),
            Ok(false) => mismatch_candidates.push(MismatchCandidate { id, source_text, target_text }),
            Err(e) => {
                log::warn!("span check for {id} failed, flagging for review: {e}");
                warnings.push(format!("{id}: span check failed ({e}); flagged for review"));
                mismatch_candidates.push(MismatchCandidate { id, source_text, target_text });
            }
        }
    }
    mismatch_candidates.sort_by(|a, b| a.id.cmp(&b.id));
    TagDiff {
        missing,
        mismatch_candidates,
        ok,
        spurious,
        warnings,
    }
}

/// Index of the candidate with the lowest `(missing + mismatched) / tags`
/// ratio; ties go to the earliest candidate. `None` for an empty list.
pub fn rerank_counts(counts: &[(usize, usize)], source_tags: usize) -> Option<usize> {
    let ratio = |(missing, mismatched): (usize, usize)| -> (u128, u128) {
        if source_tags == 0 {
            (0, 1)
        } else {
            ((missing + mismatched) as u128, source_tags as u128)
        }
    };
    let mut best: Option<(usize, (u128, u128))> = None;
    for (i, &c) in counts.iter().enumerate() {
        let (num, den) = ratio(c);
        match best {
            Some((_, (bn, bd))) if num * bd >= bn * den => {}
            _ => best = Some((i, (num, den))),
        }
    }
    best.map(|(i, _)| i)
}

/// [`rerank_counts`] over diffed candidates, each normalized by its own
/// source tag count.
pub fn rerank(diffs: &[TagDiff]) -> Option<usize> {
    let mut best: Option<(usize, u128, u128)> = None;
    for (i, d) in diffs.iter().enumerate() {
        let den = d.source_tag_count().max(1) as u128;
        let num = d.error_count() as u128;
        match best {
            Some((_, bn, bd)) if num * bd >= bn * den => {}
            _ => best = Some((i, num, den)),
        }
    }
    best.map(|(i, _, _)| i)
}
