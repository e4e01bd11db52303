use annoproj::Span;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Action {
    /// Keep the projected span as is.
    Accept,
    /// Replace the projected span.
    Correct,
    /// Materialize a MISSING annotation at the given span.
    Add,
    /// Delete the annotation and the relations that use it.
    Reject,
}

impl Action {
    pub fn as_str(&self) -> &'static str {
        match self {
            Action::Accept => "ACCEPT",
            Action::Correct => "CORRECT",
            Action::Add => "ADD",
            Action::Reject => "REJECT",
        }
    }

    pub fn needs_span(&self) -> bool {
        matches!(self, Action::Correct | Action::Add)
    }
}

/// A reviewer's verdict on one projected annotation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Decision {
    pub doc_id: String,
    pub id: String,
    pub action: Action,
    /// Scalar-value offsets into the target text; required for CORRECT and ADD.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub reviewer: String,
    /// Filled in by the service when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<DateTime<Utc>>,
}

impl Decision {
    pub fn new(doc_id: impl Into<String>, id: impl Into<String>, action: Action, reviewer: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            id: id.into(),
            action,
            span: None,
            note: None,
            reviewer: reviewer.into(),
            timestamp: None,
        }
    }

    pub fn with_span(mut self, span: Span) -> Self {
        self.span = Some(span);
        self
    }

    pub fn key(&self) -> (String, String) {
        (self.doc_id.clone(), self.id.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_shape() {
        let d = Decision::new("IT100", "EV1", Action::Correct, "ann").with_span(Span::new(3, 9));
        let v = serde_json::to_value(&d).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"doc_id": "IT100", "id": "EV1", "action": "CORRECT",
                "span": {"begin": 3, "end": 9}, "reviewer": "ann"})
        );
        let back: Decision = serde_json::from_value(v).unwrap();
        assert_eq!(back, d);
        assert!(serde_json::from_str::<Decision>(r#"{"doc_id":"a","id":"b","action":"MAYBE","reviewer":"r"}"#).is_err());
    }
}
