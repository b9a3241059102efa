use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Problem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSet {
    pub name: String,
    pub source_path: PathBuf,
    pub problems: Vec<Problem>,
}

impl ProblemSet {
    pub fn get(&self, id: &str) -> Option<&Problem> {
        self.problems.iter().find(|p| p.id == id)
    }

    pub fn len(&self) -> usize {
        self.problems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Parses one problem per line. Blank lines are skipped.
pub fn parse_problems(text: &str) -> Result<Vec<Problem>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let problem: Problem = serde_json::from_str(line).map_err(|e| {
            // Name the record if at least its id is readable.
            let id = serde_json::from_str::<serde_json::Value>(line)
                .ok()
                .and_then(|v| v.get("id").and_then(|i| i.as_str()).map(str::to_string))
                .unwrap_or_else(|| format!("<line {}>", k + 1));
            Error::ProblemLoad {
                problem_id: id,
                message: e.to_string(),
            }
        })?;
        problem.validate()?;
        if !seen.insert(problem.id.clone()) {
            return Err(Error::ProblemLoad {
                problem_id: problem.id,
                message: "duplicate id".into(),
            });
        }
        out.push(problem);
    }
    Ok(out)
}

pub fn load_problems(path: &Path) -> Result<ProblemSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let problems = parse_problems(&text)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(ProblemSet {
        name,
        source_path: path.to_path_buf(),
        problems,
    })
}
