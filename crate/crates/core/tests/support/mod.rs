//! Random documents for property tests.

#![allow(dead_code)]

use annoproj::text::tokenize;
use annoproj::{Annotation, Category, Document, Relation, RelationType, Span};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

const ALPHABET: &[char] = &['a', 'b', 'é', 'ž', ' ', ' ', '.', '-', '/', '\u{1D707}', '\u{1F600}', '&', '"', '\n', '9'];

fn text_strategy(max: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(ALPHABET), 1..max).prop_map(|cs| cs.into_iter().collect())
}

/// Valid documents with nested, duplicate, crossing and astral-character spans,
/// plus relations and attributes.
pub fn document_strategy() -> impl Strategy<Value = Document> {
    text_strategy(40).prop_flat_map(|text| {
        let len = text.chars().count();
        let span = (0..len, 1..=len).prop_map(move |(a, b)| {
            let (b0, e0) = if a < b { (a, b) } else { (b.saturating_sub(1), (a + 1).min(len)) };
            Span::new(b0, e0.max(b0 + 1).min(len))
        });
        let ann = (prop::sample::select(Category::ALL.to_vec()), span, prop::option::of(prop::sample::select(vec!["POS", "NEG", "ACTUAL"])));
        (
            Just(text),
            prop::collection::vec(ann, 0..8),
            prop::collection::vec((0..8usize, 0..8usize, 0..3usize), 0..4),
            any::<bool>(),
        )
    })
    .prop_map(|(text, anns, rels, tokenized)| {
        let mut doc = Document::new("DOC1", "en", text);
        if tokenized {
            doc.tokens = tokenize(&doc.text);
        }
        for (i, (category, span, attr)) in anns.into_iter().enumerate() {
            let mut a = Annotation::new(format!("{}{}", category.id_prefix(), i + 1), category, span);
            if let Some(v) = attr {
                a = a.with_attribute("polarity", v);
            }
            doc.annotations.push(a);
        }
        let n = doc.annotations.len();
        if n > 0 {
            for (k, (s, t, r)) in rels.into_iter().enumerate() {
                let (src, tgt) = (&doc.annotations[s % n], &doc.annotations[t % n]);
                let mut rel_type = RelationType::ALL[r];
                if rel_type == RelationType::PertainsTo && (src.category != Category::Rml || tgt.category != Category::Event) {
                    rel_type = RelationType::Tlink;
                }
                let rel = Relation::new(format!("R{}", k + 1), rel_type, src.id.clone(), tgt.id.clone());
                doc.relations.push(rel);
            }
        }
        doc
    })
}

/// Deterministic sampler for counted (non-shrinking) checks.
pub struct Sampler(TestRunner);

impl Sampler {
    pub fn new(seed: u8) -> Self {
        let rng = TestRng::from_seed(RngAlgorithm::ChaCha, &[seed; 32]);
        Sampler(TestRunner::new_with_rng(Config::default(), rng))
    }

    pub fn sample<S: Strategy>(&mut self, s: &S) -> S::Value {
        s.new_tree(&mut self.0).expect("strategy").current()
    }
}
