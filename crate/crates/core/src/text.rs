//! Small lexical helpers shared by the parsers and type validators.
//!
//! The bracket scanner understands Python-style string literals (single,
//! double and triple quoted, with backslash escapes) and `#` comments, which
//! is enough to decide whether an assertion statement is complete.

/// Result of scanning a fragment for bracket and quote balance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Balance {
    /// Every bracket closed and no string literal left open.
    Balanced,
    /// More openers than closers, or an unterminated triple-quoted string.
    Open,
    /// A closer without its opener, or a mismatched pair.
    Broken,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Quote {
    Single(char),
    Triple(char),
}

/// Scans `text` and reports whether brackets and quotes balance.
pub fn balance(text: &str) -> Balance {
    let chars: Vec<char> = text.chars().collect();
    let mut stack: Vec<char> = Vec::new();
    let mut quote: Option<Quote> = None;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match quote {
            Some(Quote::Single(q)) => {
                if c == '\\' {
                    i += 2;
                    continue;
                }
                if c == q {
                    quote = None;
                } else if c == '\n' {
                    // single-quoted literal cannot span lines
                    return Balance::Broken;
                }
            }
            Some(Quote::Triple(q)) => {
                if c == '\\' {
                    i += 2;
                    continue;
                }
                if c == q && chars.get(i + 1) == Some(&q) && chars.get(i + 2) == Some(&q) {
                    quote = None;
                    i += 3;
                    continue;
                }
            }
            None => match c {
                '#' => {
                    while i < chars.len() && chars[i] != '\n' {
                        i += 1;
                    }
                    continue;
                }
                '\'' | '"' => {
                    if chars.get(i + 1) == Some(&c) && chars.get(i + 2) == Some(&c) {
                        quote = Some(Quote::Triple(c));
                        i += 3;
                        continue;
                    }
                    quote = Some(Quote::Single(c));
                }
                '(' | '[' | '{' => stack.push(c),
                ')' | ']' | '}' => {
                    let want = match c {
                        ')' => '(',
                        ']' => '[',
                        _ => '{',
                    };
                    if stack.pop() != Some(want) {
                        return Balance::Broken;
                    }
                }
                _ => {}
            },
        }
        i += 1;
    }
    match quote {
        Some(Quote::Single(_)) => Balance::Broken,
        Some(Quote::Triple(_)) => Balance::Open,
        None if stack.is_empty() => Balance::Balanced,
        None => Balance::Open,
    }
}

pub fn is_balanced(text: &str) -> bool {
    balance(text) == Balance::Balanced
}

/// Collapses every whitespace run to a single space and trims the ends.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c == '_' || c.is_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c == '_' || c.is_alphanumeric())
}

/// True when `ident` occurs in `text` as a whole word.
pub fn mentions_identifier(text: &str, ident: &str) -> bool {
    if ident.is_empty() {
        return false;
    }
    let is_word = |c: char| c == '_' || c.is_alphanumeric();
    text.match_indices(ident).any(|(at, _)| {
        let before = text[..at].chars().next_back();
        let after = text[at + ident.len()..].chars().next();
        !before.is_some_and(is_word) && !after.is_some_and(is_word)
    })
}

/// Truncates to at most `max_bytes`, keeping the tail, on a char boundary.
pub fn tail_truncate(text: &str, max_bytes: usize) -> String {
    if text.len() <= max_bytes {
        return text.to_string();
    }
    let mut start = text.len() - max_bytes;
    while !text.is_char_boundary(start) {
        start += 1;
    }
    text[start..].to_string()
}
