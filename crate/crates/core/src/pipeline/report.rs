use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::model::{Category, CategoryGroup, Span};
use crate::qa::TagDiff;

/// Counts per reporting group. Serialized with a `TOT` column, which is
/// checked against the group sum when read back.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "GroupCountsWire", try_from = "GroupCountsWire")]
pub struct GroupCounts {
    pub cl: usize,
    pub ev: usize,
    pub rml: usize,
    pub oth: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupCountsWire {
    #[serde(rename = "CL")]
    cl: usize,
    #[serde(rename = "EV")]
    ev: usize,
    #[serde(rename = "RML")]
    rml: usize,
    #[serde(rename = "Oth.")]
    oth: usize,
    #[serde(rename = "TOT")]
    tot: usize,
}

impl From<GroupCounts> for GroupCountsWire {
    fn from(c: GroupCounts) -> Self {
        Self {
            cl: c.cl,
            ev: c.ev,
            rml: c.rml,
            oth: c.oth,
            tot: c.total(),
        }
    }
}

impl TryFrom<GroupCountsWire> for GroupCounts {
    type Error = String;

    fn try_from(w: GroupCountsWire) -> Result<Self, String> {
        let c = GroupCounts {
            cl: w.cl,
            ev: w.ev,
            rml: w.rml,
            oth: w.oth,
        };
        if c.total() != w.tot {
            return Err(format!("TOT is {} but the groups sum to {}", w.tot, c.total()));
        }
        Ok(c)
    }
}

impl GroupCounts {
    pub fn get(&self, group: CategoryGroup) -> usize {
        match group {
            CategoryGroup::Cl => self.cl,
            CategoryGroup::Ev => self.ev,
            CategoryGroup::Rml => self.rml,
            CategoryGroup::Other => self.oth,
        }
    }

    pub fn add(&mut self, category: Category) {
        let slot = match category.group() {
            CategoryGroup::Cl => &mut self.cl,
            CategoryGroup::Ev => &mut self.ev,
            CategoryGroup::Rml => &mut self.rml,
            CategoryGroup::Other => &mut self.oth,
        };
        *slot += 1;
    }

    pub fn total(&self) -> usize {
        self.cl + self.ev + self.rml + self.oth
    }
}

impl AddAssign for GroupCounts {
    fn add_assign(&mut self, o: Self) {
        self.cl += o.cl;
        self.ev += o.ev;
        self.rml += o.rml;
        self.oth += o.oth;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub missing: usize,
    pub mismatched: usize,
}

/// One translated unit: the whole document, or one sentence group when the
/// document exceeded the prompt budget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkReport {
    pub source_span: Span,
    pub source_tags: usize,
    pub candidates: Vec<CandidateScore>,
    pub selected: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Projected,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentReport {
    pub file: String,
    pub doc_id: String,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub source_annotations: usize,
    pub ok: usize,
    pub mismatches: GroupCounts,
    pub missing: GroupCounts,
    pub chunks: Vec<ChunkReport>,
    /// Classification of the selected candidates, merged across chunks.
    pub selection: TagDiff,
}

impl DocumentReport {
    pub fn failed(file: impl Into<String>, doc_id: impl Into<String>, error: impl ToString) -> Self {
        Self {
            file: file.into(),
            doc_id: doc_id.into(),
            outcome: Outcome::Failed,
            error: Some(error.to_string()),
            source_annotations: 0,
            ok: 0,
            mismatches: GroupCounts::default(),
            missing: GroupCounts::default(),
            chunks: Vec::new(),
            selection: TagDiff::default(),
        }
    }

    pub fn selected_indices(&self) -> Vec<usize> {
        self.chunks.iter().map(|c| c.selected).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportTotals {
    pub documents: usize,
    pub failed: usize,
    pub source_annotations: usize,
    pub ok: usize,
    pub mismatches: GroupCounts,
    pub missing: GroupCounts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub source_language: String,
    pub target_language: String,
    pub totals: ReportTotals,
    pub documents: Vec<DocumentReport>,
}

impl ProjectionReport {
    /// Sorts entries by doc_id (then file) and computes the totals.
    pub fn new(source_language: &str, target_language: &str, mut documents: Vec<DocumentReport>) -> Self {
        documents.sort_by(|a, b| a.doc_id.cmp(&b.doc_id).then_with(|| a.file.cmp(&b.file)));
        let mut totals = ReportTotals {
            documents: documents.len(),
            ..Default::default()
        };
        for d in &documents {
            if d.outcome == Outcome::Failed {
                totals.failed += 1;
            }
            totals.source_annotations += d.source_annotations;
            totals.ok += d.ok;
            totals.mismatches += d.mismatches;
            totals.missing += d.missing;
        }
        Self {
            source_language: source_language.to_string(),
            target_language: target_language.to_string(),
            totals,
            documents,
        }
    }

    pub fn has_failures(&self) -> bool {
        self.totals.failed > 0
    }

    /// True when the stored totals equal the sum over documents.
    pub fn is_consistent(&self) -> bool {
        let fresh = ProjectionReport::new(&self.source_language, &self.target_language, self.documents.clone());
        fresh.totals == self.totals
    }
}
