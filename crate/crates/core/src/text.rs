//! Rule-based tokenization and sentence splitting over scalar offsets.

use crate::model::Span;

/// Maximal runs of letters/digits are tokens; every other non-whitespace
/// character is a token of its own.
pub fn tokenize(text: &str) -> Vec<Span> {
    let mut tokens = Vec::new();
    let mut run_start: Option<usize> = None;
    let mut pos = 0;
    for c in text.chars() {
        if c.is_alphanumeric() {
            run_start.get_or_insert(pos);
        } else {
            if let Some(start) = run_start.take() {
                tokens.push(Span::new(start, pos));
            }
            if !c.is_whitespace() {
                tokens.push(Span::new(pos, pos + 1));
            }
        }
        pos += 1;
    }
    if let Some(start) = run_start {
        tokens.push(Span::new(start, pos));
    }
    tokens
}

fn is_sentence_final(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Sentence spans, trimmed of surrounding whitespace. A sentence ends at
/// `.`, `!` or `?` followed by whitespace and then an uppercase letter or a
/// digit. Whitespace-only text yields no sentences.
pub fn sentence_spans(text: &str) -> Vec<Span> {
    let chars: Vec<char> = text.chars().collect();
    let mut breaks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if is_sentence_final(chars[i]) {
            let mut j = i + 1;
            while j < chars.len() && chars[j].is_whitespace() {
                j += 1;
            }
            if j > i + 1 && j < chars.len() && (chars[j].is_uppercase() || chars[j].is_ascii_digit()) {
                breaks.push((i + 1, j));
                i = j;
                continue;
            }
        }
        i += 1;
    }
    let mut out = Vec::with_capacity(breaks.len() + 1);
    let mut start = 0;
    for (end, next) in breaks.into_iter().chain(std::iter::once((chars.len(), chars.len()))) {
        let mut b = start;
        let mut e = end;
        while b < e && chars[b].is_whitespace() {
            b += 1;
        }
        while e > b && chars[e - 1].is_whitespace() {
            e -= 1;
        }
        if b < e {
            out.push(Span::new(b, e));
        }
        start = next;
    }
    out
}
