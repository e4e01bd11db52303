use std::sync::Arc;

use super::*;
use crate::backend::mock::{FailureKind, InjectedFailure, MockBackend, MockFixture};
use crate::backend::{AuditLog, BackendConfig, RetryPolicy};
use crate::codec::codec_registry;
use crate::model::{Relation, RelationType};

const TAGGED: &str = "<EV1>Platelets</EV1> <RML1>3000-8000/μL</RML1>";

fn source() -> Document {
    let mut d = Document::new("EN100", "en", "Platelets 3000-8000/μL");
    d.annotations.push(Annotation::new("EV1", Category::Event, Span::new(0, 9)).with_attribute("polarity", "POS"));
    d.annotations.push(Annotation::new("RML1", Category::Rml, Span::new(10, 22)));
    d.relations.push(Relation::new("R1", RelationType::PertainsTo, "RML1", "EV1"));
    d
}

fn fixture(pairs: &[(&str, &[&str])]) -> MockFixture {
    let mut f = MockFixture::default();
    for (k, v) in pairs {
        f.responses.insert(k.to_string(), v.iter().map(|s| s.to_string()).collect());
    }
    f
}

fn translator(f: MockFixture) -> Translator {
    let cfg = BackendConfig {
        retry: RetryPolicy { max_retries: 1, base_delay_ms: 0, max_delay_ms: 0 },
        ..Default::default()
    };
    Translator::new(Arc::new(MockBackend::new(f)), &cfg, AuditLog::in_memory())
}

fn run(f: MockFixture, doc: &Document, cfg: &ProjectionConfig) -> Result<Projection, ProjectionError> {
    project_document(doc, cfg, &translator(f), &Lexicon::empty())
}

#[test]
fn perfect_candidate_is_all_ok() {
    let f = fixture(&[
        (TAGGED, &["<EV1>Piastrine</EV1> <RML1>3000-8000/μL</RML1>"]),
        ("Piastrine", &["Platelets"]),
        ("3000-8000/μL", &["3000-8000/μL"]),
    ]);
    let p = run(f, &source(), &ProjectionConfig::for_target("it")).unwrap();
    let t = &p.target;
    assert_eq!(t.text, "Piastrine 3000-8000/μL");
    assert_eq!(t.doc_id, "IT100");
    assert_eq!(t.language, "it");
    assert!(t.annotations.iter().all(|a| a.status == Status::Ok));
    assert_eq!(t.annotation("EV1").unwrap().span, Some(Span::new(0, 9)));
    assert_eq!(t.annotation("EV1").unwrap().attributes["polarity"], "POS");
    assert_eq!(t.annotation("RML1").unwrap().source_id.as_deref(), Some("RML1"));
    assert_eq!(t.relations, source().relations);
    assert_eq!(t.tokens, tokenize(&t.text));
    assert!(validate_document(t).is_empty());
    assert_eq!(p.report.ok, 2);
    assert_eq!(p.report.selected_indices(), [0]);
}

#[test]
fn dropped_tag_becomes_missing_row_with_relation_kept() {
    let f = fixture(&[
        (TAGGED, &["Piastrine <RML1>3000-8000/μL</RML1>"]),
        ("3000-8000/μL", &["3000-8000/μL"]),
    ]);
    let p = run(f, &source(), &ProjectionConfig::for_target("it")).unwrap();
    let ev = p.target.annotation("EV1").unwrap();
    assert_eq!(ev.status, Status::Missing);
    assert_eq!(ev.span, None);
    assert_eq!(ev.source_id.as_deref(), Some("EV1"));
    assert_eq!(p.target.relations.len(), 1);
    assert_eq!(p.target.relations[0].target, "EV1");
    assert_eq!(p.report.missing.ev, 1);
    assert!(validate_document(&p.target).is_empty());
}

#[test]
fn wrong_backtranslation_flags_the_test_event() {
    let f = fixture(&[
        (TAGGED, &["<EV1>Piastrine</EV1> <RML1>3000-8000/μL</RML1>"]),
        ("Piastrine", &["knee"]),
        ("3000-8000/μL", &["3000-8000/μL"]),
    ]);
    let p = run(f, &source(), &ProjectionConfig::for_target("it")).unwrap();
    let ev = p.target.annotation("EV1").unwrap();
    assert_eq!(ev.status, Status::MismatchCandidate);
    assert_eq!(ev.span, Some(Span::new(0, 9)));
    assert_eq!(p.report.mismatches.ev, 1);
    assert_eq!(p.report.selection.mismatch_candidates[0].source_text, "Platelets");
}

#[test]
fn category_filter_skips_backtranslation() {
    let f = fixture(&[
        (TAGGED, &["<EV1>Piastrine</EV1> <RML1>3000-8000/μL</RML1>"]),
        ("3000-8000/μL", &["3000-8000/μL"]),
    ]);
    let mut cfg = ProjectionConfig::for_target("it");
    cfg.semantic_categories = Some(vec![Category::Rml, Category::ClinicalEntity]);
    let p = run(f, &source(), &cfg).unwrap();
    assert_eq!(p.report.ok, 2);
}

#[test]
fn rerank_prefers_fewest_errors() {
    let f = fixture(&[
        (
            TAGGED,
            &[
                "Piastrine 3000-8000/μL",
                "<EV1>Piastrine</EV1> 3000-8000/μL",
                "<EV1>Le piastrine</EV1> <RML1>3000-8000/μL</RML1>",
                "<EV1>Piastrine</EV1> <RML1>3000-8000/μL</RML1>",
            ],
        ),
        ("Piastrine", &["Platelets"]),
        ("Le piastrine", &["The platelets"]),
        ("3000-8000/μL", &["3000-8000/μL"]),
    ]);
    let p = run(f, &source(), &ProjectionConfig::for_target("it")).unwrap();
    assert_eq!(p.report.chunks[0].selected, 2);
    assert_eq!(p.target.text, "Le piastrine 3000-8000/μL");
    let scores: Vec<(usize, usize)> = p.report.chunks[0].candidates.iter().map(|c| (c.missing, c.mismatched)).collect();
    assert_eq!(scores, [(2, 0), (1, 0), (0, 0), (0, 0)]);
}

#[test]
fn backend_failure_fails_document() {
    let mut f = fixture(&[]);
    f.failures.insert(TAGGED.into(), InjectedFailure { kind: FailureKind::Transient, times: None });
    assert!(matches!(
        run(f, &source(), &ProjectionConfig::for_target("it")),
        Err(ProjectionError::Backend(BackendError::Exhausted { .. }))
    ));
}

#[test]
fn invalid_source_and_config_rejected() {
    let mut bad = source();
    bad.annotations[0].span = Some(Span::new(5, 50));
    assert!(matches!(
        run(fixture(&[]), &bad, &ProjectionConfig::for_target("it")),
        Err(ProjectionError::InvalidSource(_))
    ));
    let mut cfg = ProjectionConfig::for_target("it");
    cfg.n_best = 0;
    assert!(matches!(run(fixture(&[]), &source(), &cfg), Err(ProjectionError::Config(_))));
    cfg.n_best = 4;
    cfg.max_document_chars = Some(5);
    assert!(matches!(run(fixture(&[]), &source(), &cfg), Err(ProjectionError::TooLong { .. })));
}

#[test]
fn long_documents_split_at_free_sentence_boundaries() {
    let mut d = Document::new("EN7", "en", "She had pain.  Platelets were low. Then  she  recovered.\n");
    d.annotations.push(Annotation::new("CL1", Category::ClinicalEntity, Span::new(8, 12)));
    // EV1 covers "low. Then", so no cut between the second and third sentence
    d.annotations.push(Annotation::new("EV1", Category::Event, Span::new(30, 39)));
    let chunks = plan_chunks(&d, Some(12));
    let regions: Vec<Span> = chunks.iter().map(|c| c.region).collect();
    assert_eq!(regions, [Span::new(0, 15), Span::new(15, 57)]);
    assert_eq!(chunks[1].core, Span::new(15, 56));

    let f = fixture(&[
        ("She had <CL1>pain</CL1>.", &["Aveva <CL1>dolore</CL1>."]),
        (
            "Platelets were <EV1>low. Then</EV1>  she  recovered.",
            &["Le piastrine erano <EV1>basse. Poi</EV1> è guarita."],
        ),
        ("dolore", &["pain"]),
        ("basse. Poi", &["low. Then"]),
    ]);
    let mut cfg = ProjectionConfig::for_target("it");
    cfg.max_prompt_tokens = Some(12);
    let p = run(f, &d, &cfg).unwrap();
    assert_eq!(p.target.text, "Aveva dolore.  Le piastrine erano basse. Poi è guarita.\n");
    assert_eq!(p.target.slice(p.target.annotation("CL1").unwrap().span.unwrap()), Some("dolore"));
    assert_eq!(p.target.slice(p.target.annotation("EV1").unwrap().span.unwrap()), Some("basse. Poi"));
    assert_eq!(p.report.chunks.len(), 2);
    assert_eq!(p.report.ok, 2);
    assert_eq!(p.target.doc_id, "IT7");
}

#[test]
fn unbounded_budget_is_one_chunk() {
    let d = source();
    assert_eq!(plan_chunks(&d, None).len(), 1);
    assert_eq!(plan_chunks(&d, Some(1000)).len(), 1);
    let empty = Document::new("x", "en", "");
    assert_eq!(plan_chunks(&empty, Some(1)).len(), 1);
}

#[test]
fn empty_document_needs_no_backend() {
    let d = Document::new("EN0", "en", "");
    let p = run(fixture(&[]), &d, &ProjectionConfig::for_target("it")).unwrap();
    assert_eq!(p.target.text, "");
    assert!(p.target.annotations.is_empty());
}

#[test]
fn doc_id_mapping() {
    assert_eq!(target_doc_id("EN100001", "en", "it"), "IT100001");
    assert_eq!(target_doc_id("en_case", "en", "sk"), "sk_case");
    assert_eq!(target_doc_id("ENGLISH1", "en", "it"), "ENGLISH1_it");
    assert_eq!(target_doc_id("case7", "en", "el"), "case7_el");
}

#[test]
fn corpus_isolates_failures_and_writes_reports() {
    let input = tempfile::tempdir().unwrap();
    let output = tempfile::tempdir().unwrap();
    let codecs = codec_registry();
    write_document(&input.path().join("a.xmi"), &source(), &codecs).unwrap();
    let mut other = source();
    other.doc_id = "EN200".into();
    other.text = "Platelets 3000-9000/μL".into();
    write_document(&input.path().join("b.json"), &other, &codecs).unwrap();
    std::fs::write(input.path().join("c.json"), "{").unwrap();

    let f = fixture(&[
        (TAGGED, &["<EV1>Piastrine</EV1> <RML1>3000-8000/μL</RML1>"]),
        ("Piastrine", &["Platelets"]),
        ("3000-8000/μL", &["3000-8000/μL"]),
    ]);
    let tr = translator(f);
    let lex = Lexicon::empty();
    let cfg = ProjectionConfig::for_target("it");
    let projector = Projector::new(&cfg, &tr, &lex).unwrap();
    let report = project_corpus(input.path(), output.path(), &projector, &codecs, Some(2)).unwrap();

    assert_eq!(report.totals.documents, 3);
    assert_eq!(report.totals.failed, 2);
    assert!(report.has_failures());
    assert_eq!(report.source_language, "en");
    let ids: Vec<&str> = report.documents.iter().map(|d| d.doc_id.as_str()).collect();
    assert_eq!(ids, ["EN100", "EN200", "c"]);
    assert!(output.path().join("a.xmi").exists());
    assert!(!output.path().join("b.json").exists());
    let json = std::fs::read_to_string(output.path().join(REPORT_DIR).join("projection.json")).unwrap();
    let back: ProjectionReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);
    assert!(back.is_consistent());
    let table = std::fs::read_to_string(output.path().join(REPORT_DIR).join("projection.txt")).unwrap();
    assert!(table.contains("Candidate mismatches"));
}

#[test]
fn empty_corpus_succeeds() {
    let input = tempfile::tempdir().unwrap();
    let output = tempfile::tempdir().unwrap();
    let tr = translator(fixture(&[]));
    let lex = Lexicon::empty();
    let cfg = ProjectionConfig::for_target("it");
    let projector = Projector::new(&cfg, &tr, &lex).unwrap();
    let report = project_corpus(input.path(), output.path(), &projector, &codec_registry(), None).unwrap();
    assert_eq!(report.totals, ReportTotals::default());
    assert!(!report.has_failures());
}
