use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::parse::wrap_in_fence;
use super::templates::Templates;
use crate::error::{Error, Result};
use crate::sandbox::CoverageReport;
use crate::types::{CandidateProgram, Problem, PromptKind, TestCase};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub kind: PromptKind,
    pub system_text: String,
    pub user_text: String,
    pub problem_id: String,
    pub temperature_hint: f64,
}

/// Sampling temperatures per operator family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Temperatures {
    pub program_init: f64,
    pub program_evolve: f64,
    pub tests: f64,
}

impl Default for Temperatures {
    fn default() -> Self {
        Self {
            program_init: 0.8,
            program_evolve: 0.7,
            tests: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LineMarker {
    #[serde(rename = "[+]")]
    Covered,
    #[serde(rename = "[-]")]
    Uncovered,
}

impl LineMarker {
    pub fn as_str(self) -> &'static str {
        match self {
            LineMarker::Covered => "[+]",
            LineMarker::Uncovered => "[-]",
        }
    }
}

/// Program source with a coverage marker on each executable line of the
/// entry-point body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageAnnotatedSource {
    pub lines: Vec<(Option<LineMarker>, String)>,
}

/// Lines that never produce a line event of their own: blanks, comments,
/// docstring bodies and bare block keywords.
fn non_executable_lines(source: &str) -> BTreeSet<usize> {
    let mut skip = BTreeSet::new();
    let mut in_doc: Option<&str> = None;
    for (k, line) in source.lines().enumerate() {
        let n = k + 1;
        let t = line.trim();
        if let Some(q) = in_doc {
            skip.insert(n);
            if t.contains(q) {
                in_doc = None;
            }
            continue;
        }
        if t.is_empty() || t.starts_with('#') {
            skip.insert(n);
            continue;
        }
        if matches!(t, "else:" | "try:" | "finally:") || t.starts_with('@') {
            skip.insert(n);
            continue;
        }
        for q in ["\"\"\"", "'''"] {
            let body = t
                .strip_prefix('r')
                .or_else(|| t.strip_prefix('u'))
                .unwrap_or(t);
            if let Some(after) = body.strip_prefix(q) {
                skip.insert(n);
                if !after.contains(q) {
                    in_doc = Some(q);
                }
                break;
            }
        }
    }
    skip
}

impl CoverageAnnotatedSource {
    pub fn new(source: &str, report: &CoverageReport) -> Self {
        let skip = non_executable_lines(source);
        let body = report.function_span.map(|(first, last)| (first + 1, last));
        let lines = source
            .lines()
            .enumerate()
            .map(|(k, text)| {
                let n = k + 1;
                let marker = match body {
                    Some((lo, hi)) if (lo..=hi).contains(&n) && !skip.contains(&n) => {
                        Some(if report.executed_lines.contains(&n) {
                            LineMarker::Covered
                        } else {
                            LineMarker::Uncovered
                        })
                    }
                    _ => None,
                };
                (marker, text.to_string())
            })
            .collect();
        Self { lines }
    }

    pub fn has_uncovered(&self) -> bool {
        self.lines
            .iter()
            .any(|(m, _)| *m == Some(LineMarker::Uncovered))
    }

    pub fn render(&self) -> String {
        self.lines
            .iter()
            .map(|(m, text)| match m {
                Some(m) => format!("{} {text}", m.as_str()),
                None => format!("    {text}"),
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Builds the provider requests for the five generative operators.
#[derive(Debug, Clone, Default)]
pub struct PromptBuilder {
    pub templates: Templates,
    pub temperatures: Temperatures,
    pub tests_per_call: usize,
}

impl PromptBuilder {
    pub fn new(templates: Templates, temperatures: Temperatures, tests_per_call: usize) -> Self {
        Self {
            templates,
            temperatures,
            tests_per_call,
        }
    }

    fn request(&self, kind: PromptKind, problem: &Problem, user_text: String, temp: f64) -> PromptRequest {
        PromptRequest {
            kind,
            system_text: self.templates.get("system").trim_end().to_string(),
            user_text,
            problem_id: problem.id.clone(),
            temperature_hint: temp,
        }
    }

    fn limit(&self) -> String {
        self.tests_per_call.max(1).to_string()
    }

    pub fn program_init(&self, problem: &Problem) -> PromptRequest {
        let prompt = wrap_in_fence(&problem.prompt, "python");
        let text = self.templates.render(
            "program_init",
            &[("prompt", &prompt), ("entry_point", &problem.entry_point)],
        );
        self.request(PromptKind::ProgramInit, problem, text, self.temperatures.program_init)
    }

    pub fn crossover(
        &self,
        problem: &Problem,
        a: &CandidateProgram,
        b: &CandidateProgram,
    ) -> Result<PromptRequest> {
        if a.id == b.id {
            return Err(Error::InvalidArgument(format!(
                "crossover parents must differ, both are {}",
                a.id
            )));
        }
        let prompt = wrap_in_fence(&problem.prompt, "python");
        let pa = wrap_in_fence(&a.source, "python");
        let pb = wrap_in_fence(&b.source, "python");
        let text = self.templates.render(
            "program_crossover",
            &[
                ("prompt", &prompt),
                ("program_a", &pa),
                ("program_b", &pb),
                ("entry_point", &problem.entry_point),
            ],
        );
        Ok(self.request(
            PromptKind::ProgramCrossover,
            problem,
            text,
            self.temperatures.program_evolve,
        ))
    }

    pub fn mutation(&self, problem: &Problem, p: &CandidateProgram) -> PromptRequest {
        let prompt = wrap_in_fence(&problem.prompt, "python");
        let program = wrap_in_fence(&p.source, "python");
        let text = self.templates.render(
            "program_mutation",
            &[
                ("prompt", &prompt),
                ("program", &program),
                ("entry_point", &problem.entry_point),
            ],
        );
        self.request(
            PromptKind::ProgramMutation,
            problem,
            text,
            self.temperatures.program_evolve,
        )
    }

    pub fn test_init(&self, problem: &Problem) -> PromptRequest {
        let prompt = wrap_in_fence(&problem.prompt, "python");
        let limit = self.limit();
        let text = self.templates.render(
            "test_init",
            &[
                ("prompt", &prompt),
                ("entry_point", &problem.entry_point),
                ("limit", &limit),
            ],
        );
        self.request(PromptKind::TestInit, problem, text, self.temperatures.tests)
    }

    pub fn test_augment(
        &self,
        problem: &Problem,
        tests: &[TestCase],
        best: &CandidateProgram,
        coverage: &CoverageAnnotatedSource,
    ) -> PromptRequest {
        debug_assert!(coverage.lines.len() == best.source.lines().count());
        let prompt = wrap_in_fence(&problem.prompt, "python");
        let listing = tests
            .iter()
            .map(|t| t.assertion.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        let tests_block = wrap_in_fence(&listing, "python");
        let coverage_block = wrap_in_fence(&coverage.render(), "");
        let instruction = if coverage.has_uncovered() {
            self.templates.get("augment_uncovered")
        } else {
            self.templates.get("augment_boundary")
        };
        let limit = self.limit();
        let text = self.templates.render(
            "test_augment",
            &[
                ("prompt", &prompt),
                ("tests", &tests_block),
                ("coverage", &coverage_block),
                ("instruction", instruction.trim_end()),
                ("entry_point", &problem.entry_point),
                ("limit", &limit),
            ],
        );
        self.request(PromptKind::TestAugment, problem, text, self.temperatures.tests)
    }
}
