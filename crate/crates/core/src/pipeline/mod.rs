//! Standoff → inline → n-best translation → tag QA → re-ranking → flagged
//! target standoff.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::{build_prompt, BackendError, ExemplarSet, PromptError, PromptSpec, Translator};
use crate::codec::{to_inline, CodecError, CodecRegistry, ParsedInline};
use crate::corpus::{list_corpus_files, read_document, write_document, CorpusError};
use crate::model::{validate_document, Annotation, Category, Document, Span, Status};
use crate::qa::{diff_tags, rerank, semantic_pass, Lexicon, TagDiff};
use crate::text::{sentence_spans, tokenize};

mod report;

pub use report::{
    CandidateScore, ChunkReport, DocumentReport, GroupCounts, Outcome, ProjectionReport, ReportTotals,
};

/// Directory under the output root that receives report files.
pub const REPORT_DIR: &str = "_reports";

fn default_n_best() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectionConfig {
    /// Falls back to the document's language, then the exemplar set's.
    pub source_language: Option<String>,
    pub target_language: String,
    pub n_best: usize,
    /// Exemplar set file; the bundled English→Italian set when absent.
    pub exemplars: Option<PathBuf>,
    pub exemplar_count: usize,
    /// Prompt budget in tokenizer tokens of the inline input. Larger
    /// documents are split at sentence boundaries no annotation crosses.
    pub max_prompt_tokens: Option<usize>,
    /// Documents longer than this many characters fail instead of being sent.
    pub max_document_chars: Option<usize>,
    /// Categories that get the back-translation check; all when absent.
    pub semantic_categories: Option<Vec<Category>>,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            source_language: None,
            target_language: String::new(),
            n_best: default_n_best(),
            exemplars: None,
            exemplar_count: crate::backend::prompt::DEFAULT_EXEMPLAR_COUNT,
            max_prompt_tokens: None,
            max_document_chars: None,
            semantic_categories: None,
        }
    }
}

impl ProjectionConfig {
    pub fn for_target(language: &str) -> Self {
        Self {
            target_language: language.to_string(),
            ..Default::default()
        }
    }

    pub fn check(&self) -> Result<(), ProjectionError> {
        if self.target_language.trim().is_empty() {
            return Err(ProjectionError::Config("target_language is required".into()));
        }
        if self.n_best == 0 {
            return Err(ProjectionError::Config("n_best must be at least 1".into()));
        }
        if self.exemplar_count == 0 {
            return Err(ProjectionError::Config("exemplar_count must be at least 1".into()));
        }
        if self.max_prompt_tokens == Some(0) {
            return Err(ProjectionError::Config("max_prompt_tokens must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProjectionError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("source document is invalid: {0}")]
    InvalidSource(String),
    #[error("document has {chars} characters, limit is {limit}")]
    TooLong { chars: usize, limit: usize },
    #[error(transparent)]
    Inline(#[from] CodecError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("backend returned no candidates")]
    NoCandidates,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Replace a leading source-language code in `doc_id` with the target code
/// (`EN100` → `IT100`), or append `_{target}` when there is none.
pub fn target_doc_id(doc_id: &str, source_language: &str, target_language: &str) -> String {
    for (src, tgt) in [
        (source_language.to_uppercase(), target_language.to_uppercase()),
        (source_language.to_lowercase(), target_language.to_lowercase()),
    ] {
        if let Some(rest) = doc_id.strip_prefix(src.as_str()) {
            if !src.is_empty() && !rest.starts_with(|c: char| c.is_alphabetic()) {
                return format!("{tgt}{rest}");
            }
        }
    }
    format!("{doc_id}_{target_language}")
}

/// A slice of the source handed to the backend as one prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Chunk {
    /// Whole region `[start, end)` of the source text owned by the chunk.
    region: Span,
    /// Part of the region sent for translation; the rest is whitespace
    /// copied verbatim.
    core: Span,
}

fn plan_chunks(doc: &Document, max_tokens: Option<usize>) -> Vec<Chunk> {
    let len = doc.char_len();
    let spans: Vec<Span> = doc.annotations.iter().filter_map(|a| a.span).collect();
    let mut sentences = sentence_spans(&doc.text);
    if sentences.is_empty() {
        sentences.push(Span::new(0, len));
    }

    let single = |region: Span| vec![core_of(doc, region, &spans)];
    let Some(budget) = max_tokens else {
        return single(Span::new(0, len));
    };
    if estimate_tokens(doc, Span::new(0, len), &spans) <= budget {
        return single(Span::new(0, len));
    }

    // Legal cut points: starts of sentences after the first, where no
    // annotation straddles the gap.
    let mut cuts = Vec::new();
    for w in sentences.windows(2) {
        let (cur_end, next_start) = (w[0].end, w[1].begin);
        if !spans.iter().any(|s| s.begin < next_start && s.end > cur_end) {
            cuts.push(next_start);
        }
    }
    let fits = |a: usize, b: usize| estimate_tokens(doc, Span::new(a, b), &spans) <= budget;
    let mut ends = Vec::new();
    let mut start = 0;
    let mut prev = None;
    for cut in cuts.into_iter().chain(std::iter::once(len)) {
        if fits(start, cut) {
            prev = Some(cut);
            continue;
        }
        if let Some(p) = prev.take() {
            ends.push(p);
            start = p;
        }
        if fits(start, cut) {
            prev = Some(cut);
        } else {
            ends.push(cut);
            start = cut;
        }
    }
    if start < len {
        ends.push(len);
    }
    let mut chunks = Vec::with_capacity(ends.len());
    let mut start = 0;
    for end in ends {
        chunks.push(core_of(doc, Span::new(start, end), &spans));
        start = end;
    }
    for c in &chunks {
        if estimate_tokens(doc, c.region, &spans) > budget {
            log::warn!(
                "{}: chunk {} exceeds the prompt budget of {budget} tokens and has no legal split",
                doc.doc_id,
                c.region
            );
        }
    }
    chunks
}

fn estimate_tokens(doc: &Document, region: Span, spans: &[Span]) -> usize {
    let text = crate::model::slice_chars(&doc.text, region).unwrap_or_default();
    let tags = spans.iter().filter(|s| region.contains(s)).count();
    // each tag pair tokenizes as `<`, ID, `>`, `<`, `/`, ID, `>`
    tokenize(text).len() + 7 * tags
}

fn core_of(doc: &Document, region: Span, spans: &[Span]) -> Chunk {
    let chars: Vec<char> = doc.text.chars().skip(region.begin).take(region.len()).collect();
    let lead = chars.iter().take_while(|c| c.is_whitespace()).count();
    let trail = chars[lead..].iter().rev().take_while(|c| c.is_whitespace()).count();
    let mut begin = region.begin + lead;
    let mut end = region.end - trail;
    for s in spans.iter().filter(|s| region.contains(s)) {
        begin = begin.min(s.begin);
        end = end.max(s.end);
    }
    if begin > end {
        begin = end;
    }
    Chunk {
        region,
        core: Span { begin, end },
    }
}

/// Source sub-document for one chunk, offsets relative to the chunk core.
fn chunk_document(doc: &Document, core: Span) -> Document {
    let text = crate::model::slice_chars(&doc.text, core).unwrap_or_default().to_string();
    let mut sub = Document::new(doc.doc_id.clone(), doc.language.clone(), text);
    for a in &doc.annotations {
        if let Some(s) = a.span.filter(|s| core.contains(s)) {
            let mut a = a.clone();
            a.span = Some(Span::new(s.begin - core.begin, s.end - core.begin));
            sub.annotations.push(a);
        }
    }
    sub
}

struct ChunkResult {
    text: String,
    spans: HashMap<String, Span>,
    diff: TagDiff,
    report: ChunkReport,
}

/// Projects documents with one backend, lexicon and exemplar set.
pub struct Projector<'a> {
    config: &'a ProjectionConfig,
    translator: &'a Translator,
    lexicon: &'a Lexicon,
    exemplars: ExemplarSet,
    checked: Option<BTreeSet<Category>>,
}

pub struct Projection {
    pub target: Document,
    pub report: DocumentReport,
}

impl<'a> Projector<'a> {
    pub fn new(config: &'a ProjectionConfig, translator: &'a Translator, lexicon: &'a Lexicon) -> Result<Self, ProjectionError> {
        config.check()?;
        let exemplars = match &config.exemplars {
            Some(path) => ExemplarSet::load(path)?,
            None => ExemplarSet::bundled(),
        };
        exemplars.check()?;
        Ok(Self {
            config,
            translator,
            lexicon,
            exemplars,
            checked: config.semantic_categories.as_ref().map(|c| c.iter().copied().collect()),
        })
    }

    pub fn config(&self) -> &ProjectionConfig {
        self.config
    }

    pub fn source_language_for(&self, doc: &Document) -> String {
        self.config
            .source_language
            .clone()
            .or_else(|| Some(doc.language.clone()).filter(|l| !l.is_empty()))
            .unwrap_or_else(|| self.exemplars.source_language.clone())
    }

    pub fn project_document(&self, source: &Document) -> Result<Projection, ProjectionError> {
        let violations = validate_document(source);
        if let Some(v) = violations.first() {
            return Err(ProjectionError::InvalidSource(format!(
                "{v} ({} violation{})",
                violations.len(),
                if violations.len() == 1 { "" } else { "s" }
            )));
        }
        if let Some(a) = source.annotations.iter().find(|a| a.status != Status::Ok) {
            return Err(ProjectionError::InvalidSource(format!(
                "annotation {} has status {}",
                a.id,
                a.status.as_str()
            )));
        }
        let chars = source.char_len();
        if let Some(limit) = self.config.max_document_chars.filter(|&l| chars > l) {
            return Err(ProjectionError::TooLong { chars, limit });
        }
        let source_language = self.source_language_for(source);
        let categories: HashMap<&str, Category> =
            source.annotations.iter().map(|a| (a.id.as_str(), a.category)).collect();

        let mut text = String::new();
        let mut text_len = 0usize;
        let mut target_spans: HashMap<String, Span> = HashMap::new();
        let mut merged = TagDiff::default();
        let mut chunk_reports = Vec::new();

        for chunk in plan_chunks(source, self.config.max_prompt_tokens) {
            let lead = crate::model::slice_chars(&source.text, Span::new(chunk.region.begin, chunk.core.begin))
                .unwrap_or_default();
            let trail = crate::model::slice_chars(&source.text, Span::new(chunk.core.end, chunk.region.end))
                .unwrap_or_default();
            text.push_str(lead);
            text_len += lead.chars().count();

            let result = self.translate_chunk(source, chunk.core, &source_language, &categories)?;
            for (id, s) in result.spans {
                target_spans.insert(id, s.shifted(text_len));
            }
            text.push_str(&result.text);
            text_len += result.text.chars().count();
            text.push_str(trail);
            text_len += trail.chars().count();

            merged.missing.extend(result.diff.missing);
            merged.mismatch_candidates.extend(result.diff.mismatch_candidates);
            merged.ok.extend(result.diff.ok);
            merged.spurious.extend(result.diff.spurious);
            merged.warnings.extend(result.diff.warnings);
            chunk_reports.push(result.report);
        }
        merged.missing.sort();
        merged.ok.sort();
        merged.mismatch_candidates.sort_by(|a, b| a.id.cmp(&b.id));

        let missing: BTreeSet<&str> = merged.missing.iter().map(String::as_str).collect();
        let flagged: BTreeSet<&str> = merged.mismatch_ids().collect();

        let target_language = self.config.target_language.clone();
        let mut target = Document::new(
            target_doc_id(&source.doc_id, &source_language, &target_language),
            target_language,
            text,
        );
        let mut report = DocumentReport {
            file: String::new(),
            doc_id: source.doc_id.clone(),
            outcome: Outcome::Projected,
            error: None,
            source_annotations: source.annotations.len(),
            ok: 0,
            mismatches: GroupCounts::default(),
            missing: GroupCounts::default(),
            chunks: chunk_reports,
            selection: TagDiff::default(),
        };
        for a in &source.annotations {
            let mut t = Annotation {
                id: a.id.clone(),
                category: a.category,
                span: None,
                attributes: a.attributes.clone(),
                status: Status::Ok,
                source_id: Some(a.id.clone()),
            };
            if missing.contains(a.id.as_str()) {
                t.status = Status::Missing;
                report.missing.add(a.category);
            } else {
                t.span = target_spans.get(&a.id).copied();
                if flagged.contains(a.id.as_str()) {
                    t.status = Status::MismatchCandidate;
                    report.mismatches.add(a.category);
                } else {
                    report.ok += 1;
                }
            }
            target.annotations.push(t);
        }
        target.relations = source.relations.clone();
        target.tokens = tokenize(&target.text);
        report.selection = merged;

        debug_assert!(validate_document(&target).is_empty(), "{:?}", validate_document(&target));
        Ok(Projection { target, report })
    }

    fn translate_chunk(
        &self,
        source: &Document,
        core: Span,
        source_language: &str,
        categories: &HashMap<&str, Category>,
    ) -> Result<ChunkResult, ProjectionError> {
        let sub = chunk_document(source, core);
        let source_tags = sub.annotations.len();
        if sub.text.is_empty() {
            return Ok(ChunkResult {
                text: String::new(),
                spans: HashMap::new(),
                diff: TagDiff::default(),
                report: ChunkReport {
                    source_span: core,
                    source_tags,
                    candidates: Vec::new(),
                    selected: 0,
                },
            });
        }
        let inline = to_inline(&sub)?;
        let source_parsed = crate::codec::parse_inline(&inline.tagged_text);
        let mut spec = PromptSpec::new(
            &self.exemplars,
            self.config.exemplar_count,
            inline.tagged_text,
            &self.config.target_language,
        );
        spec.source_language = source_language.to_string();
        let messages = build_prompt(&spec)?;
        let candidates = self.translator.translate_nbest(&messages, self.config.n_best)?;
        if candidates.is_empty() {
            return Err(ProjectionError::NoCandidates);
        }

        let should_check = |id: &str| match (&self.checked, categories.get(id)) {
            (Some(set), Some(cat)) => set.contains(cat),
            _ => true,
        };
        let parsed: Vec<ParsedInline> = candidates
            .iter()
            .map(|c| crate::codec::parse_inline(c.tagged_text.trim()))
            .collect();
        let diffs: Vec<TagDiff> = parsed
            .iter()
            .map(|cand| {
                semantic_pass(
                    diff_tags(&source_parsed, cand),
                    &source_parsed,
                    cand,
                    source_language,
                    self.lexicon,
                    self.translator,
                    &should_check,
                )
            })
            .collect();
        let selected = rerank(&diffs).unwrap_or(0);
        let chosen = parsed.into_iter().nth(selected).unwrap_or_default();
        let diff = diffs[selected].clone();
        let spans = diff
            .ok
            .iter()
            .map(String::as_str)
            .chain(diff.mismatch_ids())
            .filter_map(|id| chosen.spans.get(id).map(|s| (id.to_string(), *s)))
            .collect();
        Ok(ChunkResult {
            text: chosen.plain_text,
            spans,
            report: ChunkReport {
                source_span: core,
                source_tags,
                candidates: diffs
                    .iter()
                    .map(|d| CandidateScore {
                        missing: d.missing.len(),
                        mismatched: d.mismatch_candidates.len(),
                    })
                    .collect(),
                selected,
            },
            diff,
        })
    }
}

/// Single-document entry point; see [`Projector::project_document`].
pub fn project_document(
    source: &Document,
    config: &ProjectionConfig,
    translator: &Translator,
    lexicon: &Lexicon,
) -> Result<Projection, ProjectionError> {
    Projector::new(config, translator, lexicon)?.project_document(source)
}

/// Project every corpus file in `input` into `output` (same file name and
/// format), isolating per-document failures. Reports go to
/// `output/_reports/projection.{json,txt}`. `jobs` bounds parallelism; all
/// available cores when `None`.
pub fn project_corpus(
    input: &Path,
    output: &Path,
    projector: &Projector<'_>,
    codecs: &CodecRegistry,
    jobs: Option<usize>,
) -> Result<ProjectionReport, ProjectionError> {
    let files = list_corpus_files(input, codecs)?;
    std::fs::create_dir_all(output).map_err(|e| CorpusError::io(output, e))?;

    let run = |path: &PathBuf| -> (DocumentReport, Option<String>) {
        let file = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let doc = match read_document(path, codecs) {
            Ok(doc) => doc,
            Err(e) => {
                log::error!("{file}: {e}");
                return (DocumentReport::failed(file, stem, e), None);
            }
        };
        let language = projector.source_language_for(&doc);
        let outcome = projector.project_document(&doc).and_then(|p| {
            write_document(&output.join(&file), &p.target, codecs)?;
            Ok(p.report)
        });
        match outcome {
            Ok(mut report) => {
                report.file = file;
                (report, Some(language))
            }
            Err(e) => {
                log::error!("{file}: {e}");
                (DocumentReport::failed(file, doc.doc_id, e), Some(language))
            }
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| ProjectionError::Config(format!("thread pool: {e}")))?;
    let results: Vec<(DocumentReport, Option<String>)> = pool.install(|| files.par_iter().map(run).collect());

    let source_language = results
        .iter()
        .filter_map(|(_, l)| l.clone())
        .min()
        .or_else(|| projector.config.source_language.clone())
        .unwrap_or_else(|| projector.exemplars.source_language.clone());
    let report = ProjectionReport::new(
        &source_language,
        &projector.config.target_language,
        results.into_iter().map(|(r, _)| r).collect(),
    );
    write_report(output, &report)?;
    Ok(report)
}

pub fn write_report(output: &Path, report: &ProjectionReport) -> Result<(), ProjectionError> {
    let dir = output.join(REPORT_DIR);
    std::fs::create_dir_all(&dir).map_err(|e| CorpusError::io(&dir, e))?;
    let mut json = serde_json::to_string_pretty(report).expect("report serializes");
    json.push('\n');
    let path = dir.join("projection.json");
    std::fs::write(&path, json).map_err(|e| CorpusError::io(&path, e))?;
    let table = crate::stats::QaTable::from_reports(std::slice::from_ref(report));
    let path = dir.join("projection.txt");
    std::fs::write(&path, table.to_text()).map_err(|e| CorpusError::io(&path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests;
