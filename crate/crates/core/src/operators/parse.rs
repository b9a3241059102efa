//! Extraction of code and assertions from free-form provider responses.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::text::{balance, normalize_whitespace, Balance};

pub const ASSERT_KEYWORD: &str = "assert";

fn longest_backtick_run(s: &str) -> usize {
    let mut best = 0;
    let mut cur = 0;
    for c in s.chars() {
        if c == '`' {
            cur += 1;
            best = best.max(cur);
        } else {
            cur = 0;
        }
    }
    best
}

/// Wraps `source` in a backtick fence longer than any backtick run inside it.
pub fn wrap_in_fence(source: &str, lang: &str) -> String {
    let fence = "`".repeat(longest_backtick_run(source).max(2) + 1);
    format!("{fence}{lang}\n{source}\n{fence}")
}

/// Finds the next run of at least `min` backticks at or after byte `from`.
/// Returns (start, length).
fn next_fence(text: &str, from: usize, min: usize) -> Option<(usize, usize)> {
    let bytes = text.as_bytes();
    let mut i = from;
    while i < bytes.len() {
        if bytes[i] == b'`' {
            let start = i;
            while i < bytes.len() && bytes[i] == b'`' {
                i += 1;
            }
            if i - start >= min {
                return Some((start, i - start));
            }
        } else {
            i += 1;
        }
    }
    None
}

fn is_lang_tag(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '#' | '.' | '_'))
}

/// A fenced block: its body and the byte offset just past its closing fence.
fn fenced_block(text: &str, from: usize) -> Option<(&str, usize)> {
    let (start, len) = next_fence(text, from, 3)?;
    let after_open = start + len;
    let line_end = text[after_open..]
        .find('\n')
        .map_or(text.len(), |k| after_open + k);
    let remainder = text[after_open..line_end].trim();
    let body_start = if remainder.is_empty() || is_lang_tag(remainder) {
        (line_end + 1).min(text.len())
    } else {
        after_open
    };
    let (body_end, next) = match next_fence(text, body_start, len) {
        Some((close, close_len)) => (close, close + close_len),
        None => (text.len(), text.len()),
    };
    let mut body = &text[body_start..body_end];
    if let Some(stripped) = body.strip_suffix('\n') {
        body = stripped.strip_suffix('\r').unwrap_or(stripped);
    }
    Some((body, next))
}

fn fenced_blocks(text: &str) -> Vec<&str> {
    let mut blocks = Vec::new();
    let mut at = 0;
    while let Some((body, next)) = fenced_block(text, at) {
        blocks.push(body);
        if next <= at {
            break;
        }
        at = next;
    }
    blocks
}

/// Source of the first fenced code block, or the whole trimmed response when
/// there is no fence.
pub fn parse_program(response: &str) -> Result<String> {
    let code = match fenced_block(response, 0) {
        Some((body, _)) => body.to_string(),
        None => response.trim().to_string(),
    };
    if code.trim().is_empty() {
        return Err(Error::NoCode);
    }
    Ok(code)
}

fn starts_with_assert(line: &str) -> bool {
    line.strip_prefix(ASSERT_KEYWORD)
        .and_then(|rest| rest.chars().next())
        .is_some_and(|c| c.is_whitespace() || c == '(')
}

fn scan_assertions(text: &str, out: &mut Vec<String>) {
    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0;
    while i < lines.len() {
        let head = lines[i].trim_start();
        if !starts_with_assert(head) {
            i += 1;
            continue;
        }
        let mut stmt = head.trim_end().to_string();
        let mut j = i + 1;
        while balance(&stmt) == Balance::Open && j < lines.len() {
            stmt.push('\n');
            stmt.push_str(lines[j].trim_end());
            j += 1;
        }
        if balance(&stmt) == Balance::Balanced {
            out.push(stmt);
            i = j;
        } else {
            i += 1;
        }
    }
}

/// Assertion statements found in the response, deduplicated by
/// whitespace-normalized text and truncated to `limit` in order of first
/// appearance. Fenced blocks are searched first; the raw text only when the
/// fences hold no assertion.
pub fn parse_tests(response: &str, limit: usize) -> Result<Vec<String>> {
    if limit == 0 {
        return Err(Error::InvalidArgument("test limit must be at least 1".into()));
    }
    let mut found = Vec::new();
    for block in fenced_blocks(response) {
        scan_assertions(block, &mut found);
    }
    if found.is_empty() {
        scan_assertions(response, &mut found);
    }
    let mut seen = HashSet::new();
    let tests: Vec<String> = found
        .into_iter()
        .filter(|t| seen.insert(normalize_whitespace(t)))
        .take(limit)
        .collect();
    if tests.is_empty() {
        return Err(Error::NoTests);
    }
    Ok(tests)
}
