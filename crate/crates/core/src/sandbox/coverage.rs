use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::text::{balance, Balance};

/// Lines of a candidate executed by the current tests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub program_id: String,
    pub executed_lines: BTreeSet<usize>,
    /// First and last line (1-based, inclusive) of the entry-point
    /// definition; `None` when the definition could not be located.
    pub function_span: Option<(usize, usize)>,
    /// No tracer was available, so the whole span is reported covered.
    pub degraded: bool,
}

impl CoverageReport {
    pub(crate) fn degraded(program_id: &str, span: Option<(usize, usize)>) -> Self {
        Self {
            program_id: program_id.to_string(),
            executed_lines: span.map(|(a, b)| (a..=b).collect()).unwrap_or_default(),
            function_span: span,
            degraded: true,
        }
    }
}

fn indent_of(line: &str) -> usize {
    line.len() - line.trim_start().len()
}

fn is_def_of(line: &str, entry_point: &str) -> bool {
    let t = line.trim_start();
    let t = t.strip_prefix("async ").map(str::trim_start).unwrap_or(t);
    t.strip_prefix("def ")
        .map(str::trim_start)
        .and_then(|rest| rest.strip_prefix(entry_point))
        .is_some_and(|rest| rest.trim_start().starts_with('('))
}

/// Locates `def <entry_point>(` by a textual scan and returns the span from
/// the `def` line to the last non-blank line indented deeper than it.
pub fn function_span(source: &str, entry_point: &str) -> Option<(usize, usize)> {
    let lines: Vec<&str> = source.lines().collect();
    let start = lines.iter().position(|l| is_def_of(l, entry_point))?;
    let def_indent = indent_of(lines[start]);

    // A signature may run over several lines until its brackets close.
    let mut header = lines[start].to_string();
    let mut k = start + 1;
    while balance(&header) == Balance::Open && k < lines.len() {
        header.push('\n');
        header.push_str(lines[k]);
        k += 1;
    }
    let mut last = k - 1;
    for (offset, line) in lines[k..].iter().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if indent_of(line) <= def_indent {
            break;
        }
        last = k + offset;
    }
    Some((start + 1, last + 1))
}
