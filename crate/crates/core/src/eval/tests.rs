use super::io::{read_jsonl, score_records, write_jsonl, ScoreRecord};
use super::*;
use crate::model::{Annotation, Relation};

fn spans_of(preds: &[EntityPrediction]) -> Vec<Span> {
    preds.iter().filter_map(|p| p.span).collect()
}

#[test]
fn single_entity_sentence() {
    let mut d = Document::new("d", "en", "presented nausea");
    d.annotations.push(Annotation::new("CL1", Category::ClinicalEntity, Span::new(10, 16)));
    let pairs = make_training_sequences(&d, Task::Entity, SequenceMode::Sentence);
    assert_eq!(pairs.len(), 1);
    assert_eq!(pairs[0].target, "presented [CL]nausea[/CL]");
    assert_eq!(spans_of(&parse_entity_output(&pairs[0].input, &pairs[0].target)), [Span::new(10, 16)]);
}

#[test]
fn no_entities_is_identity() {
    let d = Document::new("d", "en", "No findings. All normal.");
    let pairs = make_training_sequences(&d, Task::Entity, SequenceMode::Sentence);
    assert_eq!(pairs.iter().map(|p| p.target.as_str()).collect::<Vec<_>>(), ["No findings.", "All normal."]);
    assert!(pairs.iter().all(|p| p.input == p.target));
}

#[test]
fn relation_target_from_table_example() {
    let text = "Her platelets were 3000-8000/μL.";
    let mut d = Document::new("d", "en", text);
    d.annotations.push(Annotation::new("EV1", Category::Event, Span::new(4, 13)));
    d.annotations.push(Annotation::new("RML1", Category::Rml, Span::new(19, 31)));
    d.relations.push(Relation::new("R1", RelationType::PertainsTo, "RML1", "EV1"));
    let pairs = make_training_sequences(&d, Task::Relation, SequenceMode::Sentence);
    assert_eq!(pairs[0].target, "[REL] 3000-8000/μL [TO] platelets");
    assert_eq!(
        parse_relation_output(&pairs[0].target).pairs,
        [("3000-8000/μL".to_string(), "platelets".to_string())]
    );
}

#[test]
fn relations_ordered_by_result_offset_and_sentences_merged() {
    let text = "Hb was 12 g/dL. WBC normal. Glucose 5 mmol/L.";
    let mut d = Document::new("d", "en", text);
    d.annotations.push(Annotation::new("EV1", Category::Event, Span::new(0, 2)));
    d.annotations.push(Annotation::new("RML1", Category::Rml, Span::new(7, 14)));
    d.annotations.push(Annotation::new("EV2", Category::Event, Span::new(28, 35)));
    d.annotations.push(Annotation::new("RML2", Category::Rml, Span::new(36, 44)));
    // RML3 "normal" pertains to Hb, across a sentence break
    d.annotations.push(Annotation::new("RML3", Category::Rml, Span::new(20, 26)));
    d.relations.push(Relation::new("R2", RelationType::PertainsTo, "RML2", "EV2"));
    d.relations.push(Relation::new("R1", RelationType::PertainsTo, "RML1", "EV1"));
    d.relations.push(Relation::new("R3", RelationType::PertainsTo, "RML3", "EV1"));
    let pairs = make_training_sequences(&d, Task::Relation, SequenceMode::Sentence);
    assert_eq!(pairs.len(), 2);
    assert_eq!(pairs[0].input, "Hb was 12 g/dL. WBC normal.");
    assert_eq!(pairs[0].target, "[REL] 12 g/dL [TO] Hb ; [REL] normal [TO] Hb");
    assert_eq!(pairs[1].target, "[REL] 5 mmol/L [TO] Glucose");
    let doc_mode = make_training_sequences(&d, Task::Relation, SequenceMode::Document);
    assert_eq!(doc_mode.len(), 1);
    assert_eq!(parse_relation_output(&doc_mode[0].target).pairs.len(), 3);
}

#[test]
fn crossing_entities_get_ranked_markers() {
    let input = "left knee joint pain";
    let spans = [Span::new(0, 9), Span::new(5, 20), Span::new(16, 20)];
    let target = entity_target(input, &spans);
    assert_eq!(target, "[CL#1]left [CL#2]knee[/CL#1] joint [CL]pain[/CL][/CL#2]");
    let mut got = spans_of(&parse_entity_output(input, &target));
    got.sort();
    assert_eq!(got, spans);
}

#[test]
fn nested_and_duplicate_entities_round_trip() {
    let input = "acute renal failure";
    let spans = [Span::new(0, 19), Span::new(6, 19), Span::new(6, 19), Span::new(6, 11)];
    let target = entity_target(input, &spans);
    assert_eq!(target, "[CL]acute [CL][CL][CL]renal[/CL] failure[/CL][/CL][/CL]");
    let mut got = spans_of(&parse_entity_output(input, &target));
    got.sort();
    let mut want = spans.to_vec();
    want.sort();
    assert_eq!(got, want);
}

#[test]
fn greedy_alignment_when_output_differs() {
    let input = "The patient had nausea and later nausea again";
    let out = parse_entity_output(input, "patient had [CL]nausea[/CL] then [CL]nausea[/CL]");
    assert_eq!(spans_of(&out), [Span::new(16, 22), Span::new(33, 39)]);
    let out = parse_entity_output(input, "[CL]vomiting[/CL] and [CL]nausea[/CL]");
    assert_eq!(out[0].span, None);
    assert_eq!(out[0].text, "vomiting");
    assert_eq!(out[1].span, Some(Span::new(16, 22)));
}

#[test]
fn malformed_markers_are_literal() {
    let input = "a [CL]b";
    let out = parse_entity_output(input, "a [CL]b");
    assert!(out.is_empty());
    let out = parse_entity_output("x y", "[CL]x[/CL] y[/CL]");
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].span, Some(Span::new(0, 1)));
    assert!(parse_entity_output("x", "[CL][/CL]x")[0].span.is_none());
}

#[test]
fn relation_parser_edge_cases() {
    assert_eq!(
        parse_relation_output("[REL] 12 g/dL [TO] hemoglobin").pairs,
        [("12 g/dL".to_string(), "hemoglobin".to_string())]
    );
    assert_eq!(parse_relation_output(""), ParsedRelations::default());
    let bad = parse_relation_output("[REL] a [TO]");
    assert!(bad.pairs.is_empty());
    assert_eq!(bad.malformed, 1);
    let mixed = parse_relation_output("[REL]  a\n b [TO] c ; junk");
    assert_eq!(mixed.pairs, [("a b".to_string(), "c".to_string())]);
    assert_eq!(mixed.malformed, 1);
}

#[test]
fn score_files_identity() {
    let dir = tempfile::tempdir().unwrap();
    let mut d = Document::new("d", "en", "presented nausea. Then fever.");
    d.annotations.push(Annotation::new("CL1", Category::ClinicalEntity, Span::new(10, 16)));
    d.annotations.push(Annotation::new("CL2", Category::ClinicalEntity, Span::new(23, 28)));
    let pairs = make_training_sequences(&d, Task::Entity, SequenceMode::Sentence);
    let path = dir.path().join("g.jsonl");
    write_jsonl(&path, &pairs).unwrap();
    let back: Vec<TrainingPair> = read_jsonl(&path).unwrap();
    assert_eq!(back, pairs);
    let recs: Vec<ScoreRecord> = read_jsonl(&path).unwrap();
    let r = score_records(Task::Entity, &recs, &recs, &ExactMatcher).unwrap();
    assert_eq!(r.prf.f1, 1.0);
    assert_eq!(r.prf.tp, 2);

    let preds = vec![
        ScoreRecord { task: None, input: None, target: "presented [CL]nausea[/CL].".into(), doc_id: None },
        ScoreRecord { task: None, input: None, target: "[CL]Then[/CL] fever.".into(), doc_id: None },
    ];
    let r = score_records(Task::Entity, &recs, &preds, &ExactMatcher).unwrap();
    assert_eq!((r.prf.tp, r.prf.fp, r.prf.fn_), (1, 1, 1));
    assert!(score_records(Task::Entity, &recs, &preds[..1], &ExactMatcher).is_err());
    let text = r.table().to_text();
    assert!(text.contains("50.00"), "{text}");
}

#[test]
fn prediction_aliases_and_bad_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.jsonl");
    std::fs::write(&path, "{\"prediction\": \"x\"}\n\n{\"output\": \"y\"}\n{oops\n").unwrap();
    let err = read_jsonl::<ScoreRecord>(&path).unwrap_err();
    assert!(err.to_string().contains(":4:"), "{err}");
    std::fs::write(&path, "{\"prediction\": \"x\"}\n{\"output\": \"y\"}\n").unwrap();
    let recs: Vec<ScoreRecord> = read_jsonl(&path).unwrap();
    assert_eq!(recs[1].target, "y");
}
