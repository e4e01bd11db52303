//! Few-shot projection prompt.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ChatMessage;
use crate::codec::parse_inline;

/// Shipped instruction wording, versioned alongside the exemplar set.
pub const DEFAULT_INSTRUCTION: &str = include_str!("../../prompts/projection-v1.txt");
const DEFAULT_EXEMPLARS: &str = include_str!("../../prompts/exemplars-en-it.json");
pub const DEFAULT_EXEMPLAR_COUNT: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("prompt needs at least one exemplar")]
    NoExemplars,
    #[error("input has unmatched tags: {}", .0.join(", "))]
    OrphanedInput(Vec<String>),
    #[error("exemplar {index} tag sets differ between source and target")]
    ExemplarTags { index: usize },
    #[error("cannot read exemplar set {path}: {message}")]
    Load { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExemplarSet {
    pub version: String,
    pub source_language: String,
    pub target_language: String,
    pub exemplars: Vec<Exemplar>,
}

impl ExemplarSet {
    /// Bundled English to Italian set with nested and crossing tag examples.
    pub fn bundled() -> Self {
        serde_json::from_str(DEFAULT_EXEMPLARS).expect("bundled exemplar set parses")
    }

    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let load_err = |message: String| PromptError::Load {
            path: path.display().to_string(),
            message,
        };
        let bytes = std::fs::read(path).map_err(|e| load_err(e.to_string()))?;
        let set: ExemplarSet = serde_json::from_slice(&bytes).map_err(|e| load_err(e.to_string()))?;
        set.check()?;
        Ok(set)
    }

    pub fn check(&self) -> Result<(), PromptError> {
        for (index, ex) in self.exemplars.iter().enumerate() {
            check_exemplar(index, ex)?;
        }
        Ok(())
    }
}

fn tag_set(tagged: &str) -> (BTreeSet<String>, usize) {
    let p = parse_inline(tagged);
    (p.spans.into_keys().collect(), p.orphans.len())
}

fn check_exemplar(index: usize, ex: &Exemplar) -> Result<(), PromptError> {
    let (src, src_orphans) = tag_set(&ex.source);
    let (tgt, tgt_orphans) = tag_set(&ex.target);
    if src != tgt || src_orphans + tgt_orphans > 0 {
        return Err(PromptError::ExemplarTags { index });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    /// Instruction template; `{source_language}` and `{target_language}` are
    /// replaced by language names.
    pub instruction: String,
    pub exemplars: Vec<Exemplar>,
    /// Inline tagged source text.
    pub input: String,
    pub source_language: String,
    pub target_language: String,
}

impl PromptSpec {
    /// Spec using the shipped instruction and the first `count` exemplars.
    pub fn new(set: &ExemplarSet, count: usize, input: impl Into<String>, target_language: &str) -> Self {
        Self {
            instruction: DEFAULT_INSTRUCTION.to_string(),
            exemplars: set.exemplars.iter().take(count).cloned().collect(),
            input: input.into(),
            source_language: set.source_language.clone(),
            target_language: target_language.to_string(),
        }
    }
}

pub fn language_name(code: &str) -> &str {
    match code {
        "en" => "English",
        "it" => "Italian",
        "sk" => "Slovak",
        "sl" => "Slovenian",
        "pl" => "Polish",
        "el" => "Greek",
        "es" => "Spanish",
        "fr" => "French",
        "eu" => "Basque",
        "de" => "German",
        other => other,
    }
}

/// System instruction, then one user/assistant pair per exemplar, then the
/// input as the final user message.
pub fn build_prompt(spec: &PromptSpec) -> Result<Vec<ChatMessage>, PromptError> {
    if spec.exemplars.is_empty() {
        return Err(PromptError::NoExemplars);
    }
    let parsed = parse_inline(&spec.input);
    if !parsed.orphans.is_empty() {
        return Err(PromptError::OrphanedInput(parsed.orphans));
    }
    for (index, ex) in spec.exemplars.iter().enumerate() {
        check_exemplar(index, ex)?;
    }
    let instruction = spec
        .instruction
        .replace("{source_language}", language_name(&spec.source_language))
        .replace("{target_language}", language_name(&spec.target_language));

    let mut messages = Vec::with_capacity(2 + 2 * spec.exemplars.len());
    messages.push(ChatMessage::system(instruction.trim_end()));
    for ex in &spec.exemplars {
        messages.push(ChatMessage::user(ex.source.clone()));
        messages.push(ChatMessage::assistant(ex.target.clone()));
    }
    messages.push(ChatMessage::user(spec.input.clone()));
    Ok(messages)
}
