use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{parse_entity_output, parse_relation_output, score_relations, Prf, SpanMatcher, Task};
use crate::stats::Table;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}:{line}: {message}")]
    Record { path: PathBuf, line: usize, message: String },
    #[error("gold has {gold} records but predictions have {pred}")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("record {index}: {message}")]
    Pairing { index: usize, message: String },
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), EvalError> {
    let io = |e: std::io::Error| EvalError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io)?;
    }
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("records serialize");
        out.push(b'\n');
    }
    fs::File::create(path).and_then(|mut f| f.write_all(&out)).map_err(io)
}

/// Read one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, EvalError> {
    let text = fs::read_to_string(path).map_err(|e| EvalError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EvalError::Record {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// A gold or predicted sequence. Prediction files may name the generated
/// text `prediction` or `output` instead of `target`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRecord {
    #[serde(default)]
    pub task: Option<Task>,
    #[serde(default)]
    pub input: Option<String>,
    #[serde(alias = "prediction", alias = "output")]
    pub target: String,
    #[serde(default)]
    pub doc_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub task: Task,
    pub matcher: String,
    pub sequences: usize,
    /// Relation items that did not parse (gold and predicted).
    pub malformed: usize,
    /// Entity predictions whose text was not found in the input.
    pub unaligned: usize,
    #[serde(flatten)]
    pub prf: Prf,
}

impl ScoreReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(["Task", "Matcher", "P", "R", "F1", "TP", "FP", "FN"]);
        let pct = |x: f64| format!("{:.2}", 100.0 * x);
        t.push_row([
            match self.task {
                Task::Entity => "entity".to_string(),
                Task::Relation => "relation".to_string(),
            },
            self.matcher.clone(),
            pct(self.prf.precision),
            pct(self.prf.recall),
            pct(self.prf.f1),
            self.prf.tp.to_string(),
            self.prf.fp.to_string(),
            self.prf.fn_.to_string(),
        ]);
        t
    }
}

/// Micro-averaged scores over paired records (by position).
pub fn score_records(
    task: Task,
    gold: &[ScoreRecord],
    pred: &[ScoreRecord],
    matcher: &dyn SpanMatcher,
) -> Result<ScoreReport, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let mut total = Prf::default();
    let mut malformed = 0;
    let mut unaligned = 0;
    for (index, (g, p)) in gold.iter().zip(pred).enumerate() {
        if let (Some(a), Some(b)) = (&g.input, &p.input) {
            if a != b {
                return Err(EvalError::Pairing {
                    index,
                    message: "gold and prediction inputs differ".into(),
                });
            }
        }
        let prf = match task {
            Task::Entity => {
                let input = g.input.as_ref().or(p.input.as_ref()).ok_or_else(|| EvalError::Pairing {
                    index,
                    message: "entity scoring needs the input text".into(),
                })?;
                let gold_spans: Vec<_> = parse_entity_output(input, &g.target).into_iter().filter_map(|e| e.span).collect();
                let predicted = parse_entity_output(input, &p.target);
                let lost = predicted.iter().filter(|e| e.span.is_none()).count();
                unaligned += lost;
                let spans: Vec<_> = predicted.into_iter().filter_map(|e| e.span).collect();
                super::score_entities_with(matcher, &gold_spans, &spans, lost)
            }
            Task::Relation => {
                let gr = parse_relation_output(&g.target);
                let pr = parse_relation_output(&p.target);
                malformed += gr.malformed + pr.malformed;
                score_relations(&gr.pairs, &pr.pairs)
            }
        };
        total = total.combine(&prf);
    }
    Ok(ScoreReport {
        task,
        matcher: match task {
            Task::Entity => matcher.name().to_string(),
            Task::Relation => "exact-string".to_string(),
        },
        sequences: gold.len(),
        malformed,
        unaligned,
        prf: total,
    })
}
