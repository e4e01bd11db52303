use std::collections::HashMap;
use std::hash::Hash;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::model::Span;
use crate::registry::Registry;

/// Precision, recall and F1 with the counts they come from.
///
/// With no predictions, precision is 1 if nothing was missed and 0
/// otherwise; recall mirrors this with no gold items. F1 is 0 when
/// precision and recall are both 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize, other_errors: usize| {
            if den == 0 {
                if other_errors == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(tp, tp + fp, fn_);
        let recall = ratio(tp, tp + fn_, fp);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self { tp, fp, fn_, precision, recall, f1 }
    }

    /// Micro-average: add the counts and recompute.
    pub fn combine(&self, other: &Prf) -> Prf {
        Prf::from_counts(self.tp + other.tp, self.fp + other.fp, self.fn_ + other.fn_)
    }
}

impl Default for Prf {
    fn default() -> Self {
        Prf::from_counts(0, 0, 0)
    }
}

/// Size of the largest one-for-one matching between equal items.
pub fn multiset_matches<T: Eq + Hash>(gold: &[T], pred: &[T]) -> usize {
    let mut counts: HashMap<&T, usize> = HashMap::new();
    for g in gold {
        *counts.entry(g).or_default() += 1;
    }
    let mut tp = 0;
    for p in pred {
        if let Some(c) = counts.get_mut(p).filter(|c| **c > 0) {
            *c -= 1;
            tp += 1;
        }
    }
    tp
}

/// Size of a maximum bipartite matching under `compatible` (augmenting paths).
pub fn max_matching<G, P>(gold: &[G], pred: &[P], compatible: impl Fn(&G, &P) -> bool) -> usize {
    let adj: Vec<Vec<usize>> = pred
        .iter()
        .map(|p| (0..gold.len()).filter(|&g| compatible(&gold[g], p)).collect())
        .collect();
    let mut owner: Vec<Option<usize>> = vec![None; gold.len()];
    fn augment(p: usize, adj: &[Vec<usize>], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
        for &g in &adj[p] {
            if seen[g] {
                continue;
            }
            seen[g] = true;
            if owner[g].is_none_or(|q| augment(q, adj, owner, seen)) {
                owner[g] = Some(p);
                return true;
            }
        }
        false
    }
    let mut size = 0;
    for p in 0..pred.len() {
        let mut seen = vec![false; gold.len()];
        if augment(p, &adj, &mut owner, &mut seen) {
            size += 1;
        }
    }
    size
}

/// Decides which predicted spans count as hits against gold spans.
pub trait SpanMatcher: Send + Sync {
    fn name(&self) -> &str;
    /// Number of true positives under a one-for-one pairing.
    fn true_positives(&self, gold: &[Span], pred: &[Span]) -> usize;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExactMatcher;

impl SpanMatcher for ExactMatcher {
    fn name(&self) -> &str {
        "exact"
    }

    fn true_positives(&self, gold: &[Span], pred: &[Span]) -> usize {
        multiset_matches(gold, pred)
    }
}

/// Character-offset Jaccard overlap of at least `threshold`.
#[derive(Debug, Clone, Copy)]
pub struct OverlapMatcher {
    pub threshold: f64,
}

impl Default for OverlapMatcher {
    fn default() -> Self {
        Self { threshold: 0.5 }
    }
}

pub fn jaccard(a: Span, b: Span) -> f64 {
    let inter = a.end.min(b.end).saturating_sub(a.begin.max(b.begin));
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

impl SpanMatcher for OverlapMatcher {
    fn name(&self) -> &str {
        "overlap"
    }

    fn true_positives(&self, gold: &[Span], pred: &[Span]) -> usize {
        max_matching(gold, pred, |g, p| jaccard(*g, *p) >= self.threshold)
    }
}

pub type MatcherRegistry = Registry<dyn SpanMatcher>;

/// `exact` (default) and `overlap` (Jaccard ≥ 0.5).
pub fn matcher_registry() -> MatcherRegistry {
    let mut r = MatcherRegistry::new("span matcher");
    r.register("exact", Arc::new(ExactMatcher));
    r.register("overlap", Arc::new(OverlapMatcher::default()));
    r
}

/// Entity scores for one sequence. `unaligned` counts predictions that
/// could not be placed in the input; they are always false positives.
pub fn score_entities_with(matcher: &dyn SpanMatcher, gold: &[Span], pred: &[Span], unaligned: usize) -> Prf {
    let tp = matcher.true_positives(gold, pred);
    Prf::from_counts(tp, pred.len() - tp + unaligned, gold.len() - tp)
}

/// Exact-match entity scores.
pub fn score_entities(gold: &[Span], pred: &[Span]) -> Prf {
    score_entities_with(&ExactMatcher, gold, pred, 0)
}

/// Relations match when both normalized strings are identical (case-sensitive).
pub fn score_relations(gold: &[(String, String)], pred: &[(String, String)]) -> Prf {
    let tp = multiset_matches(gold, pred);
    Prf::from_counts(tp, pred.len() - tp, gold.len() - tp)
}

/// Offset-based relation scoring for predictions that carry (result, test) spans.
pub fn score_relation_offsets(gold: &[(Span, Span)], pred: &[(Span, Span)]) -> Prf {
    let tp = multiset_matches(gold, pred);
    Prf::from_counts(tp, pred.len() - tp, gold.len() - tp)
}
