use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Abbreviations whose trailing period never ends a sentence. Matched
/// case-insensitively against the word that precedes the period.
pub const ABBREVIATIONS: &[&str] = &["e.g", "i.e", "et al", "fig", "eq", "vs"];

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '?' | '!')
}

fn is_closing(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '}' | '\u{201d}' | '\u{2019}')
}

/// True when the period at `dot` closes one of the known abbreviations.
fn ends_abbreviation(chars: &[char], dot: usize) -> bool {
    let before: String = chars[..dot].iter().collect::<String>().to_lowercase();
    ABBREVIATIONS.iter().any(|abbr| {
        if !before.ends_with(abbr) {
            return false;
        }
        // The abbreviation must start at a word boundary.
        let prefix = &before[..before.len() - abbr.len()];
        prefix
            .chars()
            .next_back()
            .is_none_or(|c| !c.is_alphanumeric())
    })
}

/// Splits plain text into sentences on `.`, `?` and `!` followed by
/// whitespace or end of input. Periods inside decimal numbers and after
/// [`ABBREVIATIONS`] are not boundaries. Returned sentences are trimmed.
pub fn segment_sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if !is_terminal(c) {
            i += 1;
            continue;
        }
        if c == '.' {
            let digit_before = i > 0 && chars[i - 1].is_ascii_digit();
            let digit_after = chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
            if (digit_before && digit_after) || ends_abbreviation(&chars, i) {
                i += 1;
                continue;
            }
        }
        let mut end = i + 1;
        while end < chars.len() && (is_terminal(chars[end]) || is_closing(chars[end])) {
            end += 1;
        }
        if end == chars.len() || chars[end].is_whitespace() {
            push_trimmed(&mut out, &chars[start..end]);
            start = end;
        }
        i = end;
    }
    push_trimmed(&mut out, &chars[start..]);
    out
}

fn push_trimmed(out: &mut Vec<String>, chars: &[char]) {
    let s: String = chars.iter().collect();
    let s = s.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}

/// Reads a plain-text file of paragraphs separated by blank lines. Lines
/// within a paragraph are joined with single spaces.
pub fn read_paragraphs(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(split_paragraphs(&text))
}

pub(crate) fn split_paragraphs(text: &str) -> Vec<String> {
    let mut paragraphs = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            if !current.is_empty() {
                paragraphs.push(current.join(" "));
                current.clear();
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        paragraphs.push(current.join(" "));
    }
    paragraphs
}
