//! Lowercasing whitespace/punctuation tokenizer with character offsets.
//!
//! Offsets are counted in Unicode scalar values, which is how SemEval
//! `from`/`to` attributes count.

use alloc::string::String;
use alloc::vec::Vec;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    /// First character of the token in the original text.
    pub start: usize,
    /// One past the last character.
    pub end: usize,
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// Splits on whitespace, then peels leading and trailing punctuation off
/// every chunk as one-character tokens. Inner punctuation (`don't`,
/// `wi-fi`, `7.5`) stays inside the word. Tokens are lowercased.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        split_chunk(&chars, start, i, &mut out);
    }
    out
}

fn split_chunk(chars: &[char], start: usize, end: usize, out: &mut Vec<Token>) {
    let mut lo = start;
    let mut hi = end;
    while lo < hi && is_punct(chars[lo]) {
        out.push(token(chars, lo, lo + 1));
        lo += 1;
    }
    let mut trailing = Vec::new();
    while hi > lo && is_punct(chars[hi - 1]) {
        trailing.push(token(chars, hi - 1, hi));
        hi -= 1;
    }
    if lo < hi {
        out.push(token(chars, lo, hi));
    }
    out.extend(trailing.into_iter().rev());
}

fn token(chars: &[char], start: usize, end: usize) -> Token {
    let text: String = chars[start..end].iter().collect();
    Token {
        text: text.to_lowercase(),
        start,
        end,
    }
}

/// Token range covering the character span `from..to`.
///
/// Returns `(start, end, exact)`; `exact` is false when the span had to be
/// widened to token boundaries. `None` if no token overlaps the span.
pub fn char_span_to_tokens(tokens: &[Token], from: usize, to: usize) -> Option<(usize, usize, bool)> {
    let first = tokens.iter().position(|t| t.end > from && t.start < to)?;
    let last = tokens.iter().rposition(|t| t.start < to && t.end > from)?;
    let exact = tokens[first].start == from && tokens[last].end == to;
    Some((first, last + 1, exact))
}
