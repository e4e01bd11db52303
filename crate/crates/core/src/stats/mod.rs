//! Corpus and projection-QA statistics tables, and embedding similarity
//! reporting.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::CodecRegistry;
use crate::corpus::{list_corpus_files, read_document, CorpusError};
use crate::model::{Category, CategoryGroup, Document, RelationType};
use crate::pipeline::{GroupCounts, ProjectionReport};
use crate::text::tokenize;

pub mod embedding;
mod table;

pub use embedding::{
    cosine, embedding_registry, similarity_report, EmbeddingConfig, EmbeddingError, EmbeddingProvider,
    EmbeddingRegistry, HttpEmbedding, MockEmbedding, SimilarityReport,
};
pub use table::Table;

/// One language's row of the corpus table.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRow {
    pub language: String,
    pub documents: usize,
    pub tokens: usize,
    pub annotations: BTreeMap<Category, usize>,
    pub relations: BTreeMap<RelationType, usize>,
}

impl CorpusRow {
    fn empty(language: &str) -> Self {
        Self {
            language: language.to_string(),
            annotations: Category::ALL.into_iter().map(|c| (c, 0)).collect(),
            relations: RelationType::ALL.into_iter().map(|r| (r, 0)).collect(),
            ..Default::default()
        }
    }

    fn add_document(&mut self, doc: &Document) {
        self.documents += 1;
        self.tokens += tokenize(&doc.text).len();
        for a in &doc.annotations {
            *self.annotations.entry(a.category).or_default() += 1;
        }
        for r in &doc.relations {
            *self.relations.entry(r.rel_type).or_default() += 1;
        }
    }

    /// Add another row's counts (same language assumed).
    pub fn merge(&mut self, other: &CorpusRow) {
        self.documents += other.documents;
        self.tokens += other.tokens;
        for (k, v) in &other.annotations {
            *self.annotations.entry(*k).or_default() += v;
        }
        for (k, v) in &other.relations {
            *self.relations.entry(*k).or_default() += v;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    /// Sorted by language code.
    pub rows: Vec<CorpusRow>,
}

/// Per-language statistics over in-memory documents. Independent of
/// document order.
pub fn corpus_stats_of(docs: &[Document]) -> CorpusStats {
    let mut rows: BTreeMap<String, CorpusRow> = BTreeMap::new();
    for doc in docs {
        rows.entry(doc.language.clone())
            .or_insert_with(|| CorpusRow::empty(&doc.language))
            .add_document(doc);
    }
    CorpusStats {
        rows: rows.into_values().collect(),
    }
}

/// Statistics over every corpus file in `dir`, read in parallel.
pub fn corpus_stats(dir: &Path, codecs: &CodecRegistry) -> Result<CorpusStats, CorpusError> {
    let files = list_corpus_files(dir, codecs)?;
    let partial: Vec<BTreeMap<String, CorpusRow>> = files
        .par_iter()
        .map(|path| {
            let doc = read_document(path, codecs)?;
            let mut row = CorpusRow::empty(&doc.language);
            row.add_document(&doc);
            Ok(BTreeMap::from([(doc.language.clone(), row)]))
        })
        .collect::<Result<_, CorpusError>>()?;
    let mut rows: BTreeMap<String, CorpusRow> = BTreeMap::new();
    for part in partial {
        for (lang, row) in part {
            rows.entry(lang.clone()).or_insert_with(|| CorpusRow::empty(&lang)).merge(&row);
        }
    }
    Ok(CorpusStats {
        rows: rows.into_values().collect(),
    })
}

impl CorpusStats {
    pub fn table(&self) -> Table {
        let mut headers = vec!["Language".to_string(), "#Docs".into(), "#Tokens".into()];
        headers.extend(Category::ALL.iter().map(|c| c.as_str().to_string()));
        headers.extend(RelationType::ALL.iter().map(|r| r.as_str().to_string()));
        let mut t = Table::new(headers);
        t.groups = vec![
            (String::new(), 3),
            ("Annotations".into(), Category::ALL.len()),
            ("Relations".into(), RelationType::ALL.len()),
        ];
        for row in &self.rows {
            let mut cells = vec![row.language.clone(), row.documents.to_string(), row.tokens.to_string()];
            cells.extend(Category::ALL.iter().map(|c| row.annotations.get(c).copied().unwrap_or(0).to_string()));
            cells.extend(RelationType::ALL.iter().map(|r| row.relations.get(r).copied().unwrap_or(0).to_string()));
            t.push_row(cells);
        }
        t
    }

    pub fn row(&self, language: &str) -> Option<&CorpusRow> {
        self.rows.iter().find(|r| r.language == language)
    }
}

/// One row of the error table: candidate mismatches and missing tags per group.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaRow {
    pub language: String,
    pub mismatches: GroupCounts,
    pub missing: GroupCounts,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaTable {
    pub rows: Vec<QaRow>,
}

impl QaTable {
    /// One row per target language, summing the reports' totals. Rows keep
    /// first-seen language order.
    pub fn from_reports(reports: &[ProjectionReport]) -> Self {
        let mut rows: Vec<QaRow> = Vec::new();
        for r in reports {
            let idx = match rows.iter().position(|row| row.language == r.target_language) {
                Some(i) => i,
                None => {
                    rows.push(QaRow {
                        language: r.target_language.clone(),
                        ..Default::default()
                    });
                    rows.len() - 1
                }
            };
            rows[idx].mismatches += r.totals.mismatches;
            rows[idx].missing += r.totals.missing;
        }
        Self { rows }
    }

    pub fn table(&self) -> Table {
        let labels = CategoryGroup::ALL.iter().map(|g| g.label());
        let mut headers = vec![String::new()];
        headers.extend(labels.clone().chain(["TOT"]).map(String::from));
        headers.extend(labels.chain(["TOT"]).map(String::from));
        let mut t = Table::new(headers);
        t.groups = vec![
            (String::new(), 1),
            ("Candidate mismatches".into(), 5),
            ("Missing".into(), 5),
        ];
        for row in &self.rows {
            let mut cells = vec![row.language.clone()];
            for counts in [row.mismatches, row.missing] {
                cells.extend(CategoryGroup::ALL.iter().map(|g| counts.get(*g).to_string()));
                cells.push(counts.total().to_string());
            }
            t.push_row(cells);
        }
        t
    }

    pub fn to_text(&self) -> String {
        self.table().to_text()
    }

    pub fn to_csv(&self) -> String {
        self.table().to_csv()
    }
}
