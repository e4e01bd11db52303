//! Corpus under review: the projected documents as loaded, the effective
//! decision for each annotation, and the documents materialized from both.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use annoproj::codec::CodecRegistry;
use annoproj::corpus::{list_corpus_files, read_document, write_document, CorpusError};
use annoproj::{Annotation, Category, Document, Relation, Status};
use serde::{Deserialize, Serialize};

use crate::decision::{Action, Decision};
use crate::stats::{revision_table, LanguageRevision, RevisionCounts, RevisionStats};

pub const REPORT_DIR: &str = "_reports";

#[derive(Debug, thiserror::Error)]
pub enum ReviewError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("invalid decision: {0}")]
    Invalid(String),
    #[error("duplicate doc_id `{doc_id}` in {first} and {second}")]
    DuplicateDoc { doc_id: String, first: PathBuf, second: PathBuf },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

struct Entry {
    file_name: String,
    original: Document,
    source: Option<Document>,
    current: Document,
    dangling: Vec<String>,
}

/// Annotation as shown to reviewers, with the covered text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationView {
    pub id: String,
    pub category: Category,
    pub begin: Option<usize>,
    pub end: Option<usize>,
    pub text: Option<String>,
    pub status: Status,
    pub source_id: Option<String>,
    pub attributes: BTreeMap<String, String>,
}

impl AnnotationView {
    pub fn of(doc: &Document, a: &Annotation) -> Self {
        Self {
            id: a.id.clone(),
            category: a.category,
            begin: a.span.map(|s| s.begin),
            end: a.span.map(|s| s.end),
            text: a.span.and_then(|s| doc.slice(s)).map(str::to_string),
            status: a.status,
            source_id: a.source_id.clone(),
            attributes: a.attributes.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationView {
    pub id: String,
    #[serde(rename = "type")]
    pub rel_type: String,
    pub source: String,
    pub target: String,
}

impl From<&Relation> for RelationView {
    fn from(r: &Relation) -> Self {
        Self {
            id: r.id.clone(),
            rel_type: r.rel_type.as_str().to_string(),
            source: r.source.clone(),
            target: r.target.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceView {
    pub doc_id: String,
    pub language: String,
    pub text: String,
    pub annotations: Vec<AnnotationView>,
    pub relations: Vec<RelationView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentView {
    pub doc_id: String,
    pub language: String,
    pub file: String,
    pub text: String,
    pub annotations: Vec<AnnotationView>,
    pub relations: Vec<RelationView>,
    pub decisions: Vec<Decision>,
    pub source: Option<SourceView>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentSummary {
    pub doc_id: String,
    pub language: String,
    pub file: String,
    pub pending_mismatches: usize,
    pub pending_missing: usize,
}

/// Source-side context for a flagged item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceItem {
    pub annotation: AnnotationView,
    pub relations: Vec<RelationView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueItem {
    pub doc_id: String,
    pub language: String,
    #[serde(flatten)]
    pub annotation: AnnotationView,
    pub source: Option<SourceItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionOutcome {
    pub decision: Decision,
    /// The annotation after the decision; for REJECT, as it was before removal.
    pub annotation: AnnotationView,
    pub removed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DanglingRelations {
    pub doc_id: String,
    pub relations: Vec<String>,
}

/// Contents of `_reports/revision.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionReport {
    pub total: RevisionStats,
    pub languages: Vec<LanguageRevision>,
    pub dangling_relations: Vec<DanglingRelations>,
}

pub struct ReviewState {
    entries: Vec<Entry>,
    by_id: HashMap<String, usize>,
    effective: BTreeMap<(String, String), Decision>,
    history: usize,
}

impl ReviewState {
    /// Load every standoff file in `corpus`, and optionally the source-language
    /// files in `source` matched by file name.
    pub fn load(corpus: &Path, source: Option<&Path>, codecs: &CodecRegistry) -> Result<Self, ReviewError> {
        let mut docs = Vec::new();
        for path in list_corpus_files(corpus, codecs)? {
            let file_name = path.file_name().expect("listed files have names").to_string_lossy().into_owned();
            let src = match source {
                Some(dir) => {
                    let p = dir.join(&file_name);
                    if p.is_file() {
                        Some(read_document(&p, codecs)?)
                    } else {
                        log::warn!("no source document for {file_name} in {}", dir.display());
                        None
                    }
                }
                None => None,
            };
            docs.push((file_name, read_document(&path, codecs)?, src));
        }
        let mut seen: HashMap<String, String> = HashMap::new();
        for (file, doc, _) in &docs {
            if let Some(first) = seen.insert(doc.doc_id.clone(), file.clone()) {
                return Err(ReviewError::DuplicateDoc {
                    doc_id: doc.doc_id.clone(),
                    first: corpus.join(first),
                    second: corpus.join(file),
                });
            }
        }
        Ok(Self::from_documents(docs))
    }

    /// Build from `(file name, projected document, source document)` triples.
    pub fn from_documents(docs: Vec<(String, Document, Option<Document>)>) -> Self {
        let mut entries: Vec<Entry> = docs
            .into_iter()
            .map(|(file_name, original, source)| Entry {
                file_name,
                current: original.clone(),
                original,
                source,
                dangling: Vec::new(),
            })
            .collect();
        entries.sort_by(|a, b| a.original.doc_id.cmp(&b.original.doc_id));
        let by_id = entries.iter().enumerate().map(|(i, e)| (e.original.doc_id.clone(), i)).collect();
        Self {
            entries,
            by_id,
            effective: BTreeMap::new(),
            history: 0,
        }
    }

    /// Number of decisions applied, including superseded ones.
    pub fn history_len(&self) -> usize {
        self.history
    }

    pub fn effective_decisions(&self) -> impl Iterator<Item = &Decision> {
        self.effective.values()
    }

    fn entry(&self, doc_id: &str) -> Result<&Entry, ReviewError> {
        self.by_id
            .get(doc_id)
            .map(|&i| &self.entries[i])
            .ok_or_else(|| ReviewError::NotFound(format!("document `{doc_id}`")))
    }

    /// Check `d` against the document as loaded. Decisions never depend on
    /// earlier decisions, so any later one may supersede any earlier one.
    pub fn validate(&self, d: &Decision) -> Result<(), ReviewError> {
        let entry = self.entry(&d.doc_id)?;
        let a = entry
            .original
            .annotation(&d.id)
            .ok_or_else(|| ReviewError::NotFound(format!("annotation `{}` in `{}`", d.id, d.doc_id)))?;
        if d.reviewer.trim().is_empty() {
            return Err(ReviewError::Invalid("reviewer must not be empty".into()));
        }
        match (d.action.needs_span(), d.span) {
            (true, None) => return Err(ReviewError::Invalid(format!("{} requires a span", d.action.as_str()))),
            (false, Some(_)) => return Err(ReviewError::Invalid(format!("{} takes no span", d.action.as_str()))),
            (true, Some(s)) if !s.is_valid_in(entry.original.char_len()) || s.is_empty() => {
                return Err(ReviewError::Invalid(format!(
                    "span {s} is not a non-empty range within the text ({} chars)",
                    entry.original.char_len()
                )))
            }
            _ => {}
        }
        match (d.action, a.status) {
            (Action::Accept, Status::Missing) => Err(ReviewError::Invalid(format!("{} is MISSING; use ADD", d.id))),
            (Action::Correct, Status::Missing) => Err(ReviewError::Invalid(format!("{} is MISSING; use ADD", d.id))),
            (Action::Add, s) if s != Status::Missing => {
                Err(ReviewError::Invalid(format!("{} is {}; ADD applies to MISSING only", d.id, s.as_str())))
            }
            _ => Ok(()),
        }
    }

    /// Validate and apply one decision.
    pub fn apply(&mut self, d: Decision) -> Result<DecisionOutcome, ReviewError> {
        self.validate(&d)?;
        let i = self.by_id[&d.doc_id];
        let before = {
            let e = &self.entries[i];
            e.current
                .annotation(&d.id)
                .map(|a| AnnotationView::of(&e.current, a))
        };
        self.effective.insert(d.key(), d.clone());
        self.history += 1;
        self.rematerialize(i);
        let e = &self.entries[i];
        let outcome = match e.current.annotation(&d.id) {
            Some(a) => DecisionOutcome {
                decision: d,
                annotation: AnnotationView::of(&e.current, a),
                removed: false,
            },
            None => {
                let annotation = before.unwrap_or_else(|| {
                    let a = e.original.annotation(&d.id).expect("validated");
                    AnnotationView::of(&e.original, a)
                });
                DecisionOutcome {
                    decision: d,
                    annotation,
                    removed: true,
                }
            }
        };
        Ok(outcome)
    }

    fn rematerialize(&mut self, i: usize) {
        let entry = &self.entries[i];
        let doc_id = &entry.original.doc_id;
        let decisions: HashMap<&str, &Decision> = self
            .effective
            .range((doc_id.clone(), String::new())..)
            .take_while(|((d, _), _)| d == doc_id)
            .map(|((_, id), dec)| (id.as_str(), dec))
            .collect();
        let (current, dangling) = materialize(&entry.original, entry.source.as_ref(), &decisions);
        let entry = &mut self.entries[i];
        entry.current = current;
        entry.dangling = dangling;
    }

    pub fn documents(&self) -> Vec<DocumentSummary> {
        self.entries
            .iter()
            .map(|e| DocumentSummary {
                doc_id: e.current.doc_id.clone(),
                language: e.current.language.clone(),
                file: e.file_name.clone(),
                pending_mismatches: count_status(&e.current, Status::MismatchCandidate),
                pending_missing: count_status(&e.current, Status::Missing),
            })
            .collect()
    }

    pub fn current(&self, doc_id: &str) -> Option<&Document> {
        self.by_id.get(doc_id).map(|&i| &self.entries[i].current)
    }

    pub fn document(&self, doc_id: &str) -> Result<DocumentView, ReviewError> {
        let e = self.entry(doc_id)?;
        let doc = &e.current;
        Ok(DocumentView {
            doc_id: doc.doc_id.clone(),
            language: doc.language.clone(),
            file: e.file_name.clone(),
            text: doc.text.clone(),
            annotations: doc.annotations.iter().map(|a| AnnotationView::of(doc, a)).collect(),
            relations: doc.relations.iter().map(RelationView::from).collect(),
            decisions: self
                .effective
                .values()
                .filter(|d| d.doc_id == doc.doc_id)
                .cloned()
                .collect(),
            source: e.source.as_ref().map(|s| SourceView {
                doc_id: s.doc_id.clone(),
                language: s.language.clone(),
                text: s.text.clone(),
                annotations: s.annotations.iter().map(|a| AnnotationView::of(s, a)).collect(),
                relations: s.relations.iter().map(RelationView::from).collect(),
            }),
        })
    }

    /// Pending flagged items, optionally restricted to one status.
    pub fn queue(&self, status: Option<Status>) -> Vec<QueueItem> {
        let mut items = Vec::new();
        for e in &self.entries {
            let doc = &e.current;
            for a in &doc.annotations {
                let flagged = matches!(a.status, Status::MismatchCandidate | Status::Missing);
                if !flagged || status.is_some_and(|s| s != a.status) {
                    continue;
                }
                items.push(QueueItem {
                    doc_id: doc.doc_id.clone(),
                    language: doc.language.clone(),
                    annotation: AnnotationView::of(doc, a),
                    source: e.source.as_ref().and_then(|s| source_item(s, a)),
                });
            }
        }
        items
    }

    /// Counts per language, in language order.
    pub fn revision_counts(&self) -> BTreeMap<String, RevisionCounts> {
        let mut out: BTreeMap<String, RevisionCounts> = BTreeMap::new();
        for e in &self.entries {
            let c = out.entry(e.original.language.clone()).or_default();
            for a in &e.original.annotations {
                let d = self.effective.get(&(e.original.doc_id.clone(), a.id.clone()));
                match a.status {
                    Status::MismatchCandidate => {
                        c.total_mismatches += 1;
                        if let Some(d) = d {
                            c.checked += 1;
                            let changed = match d.action {
                                Action::Reject => true,
                                Action::Correct => d.span != a.span,
                                Action::Accept | Action::Add => false,
                            };
                            c.corrected += changed as usize;
                        }
                    }
                    Status::Missing => {
                        c.total_missing += 1;
                        c.created += d.is_some_and(|d| d.action == Action::Add) as usize;
                    }
                    Status::Ok => {}
                }
            }
        }
        out
    }

    pub fn stats(&self) -> RevisionStats {
        let mut total = RevisionCounts::default();
        for c in self.revision_counts().into_values() {
            total += c;
        }
        RevisionStats::from_counts(total)
    }

    pub fn report(&self) -> RevisionReport {
        RevisionReport {
            total: self.stats(),
            languages: self
                .revision_counts()
                .into_iter()
                .map(|(language, c)| LanguageRevision {
                    language,
                    stats: RevisionStats::from_counts(c),
                })
                .collect(),
            dangling_relations: self
                .entries
                .iter()
                .filter(|e| !e.dangling.is_empty())
                .map(|e| DanglingRelations {
                    doc_id: e.current.doc_id.clone(),
                    relations: e.dangling.clone(),
                })
                .collect(),
        }
    }

    /// Write the current documents under their original file names and the
    /// revision report under `_reports/`.
    pub fn export(&self, out_dir: &Path, codecs: &CodecRegistry) -> Result<RevisionReport, ReviewError> {
        for e in &self.entries {
            write_document(&out_dir.join(&e.file_name), &e.current, codecs)?;
        }
        let report = self.report();
        let dir = out_dir.join(REPORT_DIR);
        let io = |path: &Path, err: std::io::Error| ReviewError::Io {
            path: path.to_path_buf(),
            message: err.to_string(),
        };
        fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
        let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
        json.push('\n');
        let table = revision_table(&report.languages);
        for (name, body) in [
            ("revision.json", json),
            ("revision.txt", table.to_text()),
            ("revision.csv", table.to_csv()),
        ] {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| io(&path, e))?;
        }
        Ok(report)
    }
}

fn count_status(doc: &Document, status: Status) -> usize {
    doc.annotations.iter().filter(|a| a.status == status).count()
}

fn source_annotation<'a>(source: &'a Document, a: &Annotation) -> Option<&'a Annotation> {
    source.annotation(a.source_id.as_deref().unwrap_or(&a.id))
}

fn source_item(source: &Document, a: &Annotation) -> Option<SourceItem> {
    let sa = source_annotation(source, a)?;
    Some(SourceItem {
        annotation: AnnotationView::of(source, sa),
        relations: source
            .relations
            .iter()
            .filter(|r| r.source == sa.id || r.target == sa.id)
            .map(RelationView::from)
            .collect(),
    })
}

/// Apply effective decisions to `original`. Returns the revised document and
/// the ids of relations dropped because an endpoint was rejected.
pub fn materialize(
    original: &Document,
    source: Option<&Document>,
    decisions: &HashMap<&str, &Decision>,
) -> (Document, Vec<String>) {
    let mut doc = original.clone();
    doc.annotations.retain_mut(|a| {
        let Some(d) = decisions.get(a.id.as_str()) else {
            return true;
        };
        match d.action {
            Action::Reject => return false,
            Action::Accept => {}
            Action::Correct => a.span = d.span,
            Action::Add => {
                a.span = d.span;
                if let Some(sa) = source.and_then(|s| source_annotation(s, a)) {
                    for (k, v) in &sa.attributes {
                        if !a.attributes.contains_key(k) {
                            a.attributes.insert(k.clone(), v.clone());
                        }
                    }
                }
            }
        }
        a.status = Status::Ok;
        true
    });
    let kept: std::collections::HashSet<&str> = doc.annotations.iter().map(|a| a.id.as_str()).collect();
    let mut dangling = Vec::new();
    let mut relations = Vec::with_capacity(doc.relations.len());
    for r in std::mem::take(&mut doc.relations) {
        if kept.contains(r.source.as_str()) && kept.contains(r.target.as_str()) {
            relations.push(r);
        } else {
            dangling.push(r.id);
        }
    }
    doc.relations = relations;
    (doc, dangling)
}
