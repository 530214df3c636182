//! Extraction of an option letter from free-form model output.

use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::qa::QaOption;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseFailure {
    #[error("empty response")]
    Empty,
    #[error("`{0}` is not one of the offered letters")]
    IllegalLetter(char),
    #[error("no option keyword or parenthesized letter found")]
    NoMatch,
}

fn paren_letter() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\(([A-Za-z])\)").expect("valid regex"))
}

fn is_word(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_'
}

/// End offset of the last whole-word, case-insensitive occurrence of
/// `needle` in `hay` (both already lowercased).
fn last_occurrence(hay: &str, needle: &str) -> Option<usize> {
    if needle.is_empty() {
        return None;
    }
    let bytes = hay.as_bytes();
    let n = needle.as_bytes();
    let mut last = None;
    for (start, _) in hay.match_indices(needle) {
        let end = start + n.len();
        let left_ok = start == 0 || !is_word(bytes[start - 1]) || !is_word(n[0]);
        let right_ok = end == bytes.len() || !is_word(bytes[end]) || !is_word(n[n.len() - 1]);
        if left_ok && right_ok {
            last = Some(end);
        }
    }
    last
}

fn legal(c: char, options: &[QaOption]) -> Result<char, ParseFailure> {
    let c = c.to_ascii_uppercase();
    if options.iter().any(|o| o.letter == c) {
        Ok(c)
    } else {
        Err(ParseFailure::IllegalLetter(c))
    }
}

/// Three-rule cascade: a lone character is the answer; otherwise the
/// option text matched last in the response wins; otherwise the last
/// single character in parentheses; otherwise failure.
pub fn parse_response(text: &str, options: &[QaOption]) -> Result<char, ParseFailure> {
    let trimmed = text.trim();
    let mut chars = trimmed.chars();
    match (chars.next(), chars.next()) {
        (None, _) => return Err(ParseFailure::Empty),
        (Some(c), None) => return legal(c, options),
        _ => {}
    }

    let hay = trimmed.to_ascii_lowercase();
    // latest end wins; at equal ends the longer keyword wins
    let mut best: Option<(usize, usize, char)> = None;
    for o in options {
        let needle = o.text.trim().to_ascii_lowercase();
        if let Some(end) = last_occurrence(&hay, &needle) {
            let key = (end, needle.len());
            if best.is_none_or(|(e, l, _)| key > (e, l)) {
                best = Some((end, needle.len(), o.letter));
            }
        }
    }
    if let Some((_, _, letter)) = best {
        return Ok(letter);
    }

    match paren_letter().captures_iter(trimmed).last() {
        Some(cap) => legal(cap[1].chars().next().expect("one char captured"), options),
        None => Err(ParseFailure::NoMatch),
    }
}
