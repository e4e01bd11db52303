#![allow(dead_code)]

use std::path::{Path, PathBuf};

use annoproj::codec::codec_registry;
use annoproj::corpus::write_document;
use annoproj::{Annotation, Category, Document, Relation, RelationType, Span, Status};

pub const SOURCE_TEXT: &str = "Platelets were 3000-8000/μL and she had fever.";
pub const TARGET_TEXT: &str = "Le piastrine erano 3000-8000/μL e aveva febbre.";

/// Scalar-value span of the first occurrence of `needle` in `text`.
pub fn find(text: &str, needle: &str) -> Span {
    let byte = text.find(needle).expect("needle present");
    let begin = text[..byte].chars().count();
    Span::new(begin, begin + needle.chars().count())
}

pub fn source_doc() -> Document {
    let t = SOURCE_TEXT;
    let mut d = Document::new("case1", "en", t);
    d.annotations.push(Annotation::new("EV1", Category::Event, find(t, "Platelets")).with_attribute("polarity", "POS"));
    d.annotations.push(Annotation::new("RML1", Category::Rml, find(t, "3000-8000/μL")));
    d.annotations.push(
        Annotation::new("CL1", Category::ClinicalEntity, find(t, "fever"))
            .with_attribute("polarity", "POS")
            .with_attribute("modality", "ACTUAL"),
    );
    d.relations.push(Relation::new("R1", RelationType::PertainsTo, "RML1", "EV1"));
    d
}

/// Projected document: EV1 flagged (span too wide), RML1 fine, CL1 missing.
pub fn target_doc(doc_id: &str) -> Document {
    let t = TARGET_TEXT;
    let mut d = Document::new(doc_id, "it", t);
    let mut ev = Annotation::new("EV1", Category::Event, find(t, "piastrine erano")).with_attribute("polarity", "POS");
    ev.status = Status::MismatchCandidate;
    ev.source_id = Some("EV1".into());
    let mut rml = Annotation::new("RML1", Category::Rml, find(t, "3000-8000/μL"));
    rml.source_id = Some("RML1".into());
    let mut cl = Annotation::new("CL1", Category::ClinicalEntity, Span::new(0, 0)).with_attribute("polarity", "POS");
    cl.span = None;
    cl.status = Status::Missing;
    cl.source_id = Some("CL1".into());
    d.annotations.extend([ev, rml, cl]);
    d.relations.push(Relation::new("R1", RelationType::PertainsTo, "RML1", "EV1"));
    d
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
}

impl Fixture {
    /// Two projected documents (`case1.json`, `case2.xmi`) with their sources.
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let codecs = codec_registry();
        write_document(&dir.path().join("corpus/case1.json"), &target_doc("IT1"), &codecs).unwrap();
        write_document(&dir.path().join("corpus/case2.xmi"), &target_doc("IT2"), &codecs).unwrap();
        let mut src2 = source_doc();
        src2.doc_id = "case2".into();
        write_document(&dir.path().join("source/case1.json"), &source_doc(), &codecs).unwrap();
        write_document(&dir.path().join("source/case2.xmi"), &src2, &codecs).unwrap();
        Self { dir }
    }

    pub fn corpus(&self) -> PathBuf {
        self.dir.path().join("corpus")
    }

    pub fn source(&self) -> PathBuf {
        self.dir.path().join("source")
    }

    pub fn journal(&self) -> PathBuf {
        self.dir.path().join("journal/decisions.jsonl")
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    pub fn config(&self) -> annoproj_review::ServiceConfig {
        annoproj_review::ServiceConfig {
            corpus: self.corpus(),
            source: Some(self.source()),
            journal: self.journal(),
            static_dir: None,
            token: None,
        }
    }
}

pub fn read_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
