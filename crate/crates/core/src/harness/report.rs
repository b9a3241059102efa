use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::bench::{Method, MethodResult};
use super::eval::{evaluate_final, pass_at_1, solved_per_repeat, test_accuracy};
use crate::engine::RunArtifacts;
use crate::error::{Error, Result};
use crate::sandbox::Sandbox;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub pass_at_1: f64,
    pub solved_per_repeat: Vec<usize>,
    pub problems: usize,
    /// Problems whose run aborted; they count as unsolved.
    pub aborted: usize,
    pub total_prompt_tokens: u64,
    pub total_completion_tokens: u64,
    pub avg_prompt_tokens: f64,
    pub avg_completion_tokens: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub problem_set: String,
    pub repeats: usize,
    pub seed: u64,
    pub methods: Vec<MethodSummary>,
    pub results: Vec<MethodResult>,
}

impl BenchReport {
    pub fn new(problem_set: &str, repeats: usize, seed: u64, methods: &[Method], results: Vec<MethodResult>) -> Result<Self> {
        let mut summaries = Vec::new();
        for &m in methods {
            let rows: Vec<&MethodResult> = results.iter().filter(|r| r.method == m).collect();
            let outcomes: Vec<Vec<bool>> = rows.iter().map(|r| r.correct.clone()).collect();
            let prompt: u64 = rows.iter().map(|r| r.tokens.prompt_tokens).sum();
            let completion: u64 = rows.iter().map(|r| r.tokens.completion_tokens).sum();
            let n = rows.len();
            let avg = |t: u64| if n == 0 { 0.0 } else { t as f64 / n as f64 };
            summaries.push(MethodSummary {
                method: m,
                pass_at_1: pass_at_1(&outcomes, repeats)?,
                solved_per_repeat: solved_per_repeat(&outcomes, repeats),
                problems: n,
                aborted: rows.iter().filter(|r| r.aborted).count(),
                total_prompt_tokens: prompt,
                total_completion_tokens: completion,
                avg_prompt_tokens: avg(prompt),
                avg_completion_tokens: avg(completion),
            });
        }
        Ok(Self {
            problem_set: problem_set.to_string(),
            repeats,
            seed,
            methods: summaries,
            results,
        })
    }

    /// Plain-text pass@1 table.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<20} {:>8} {:>9} {:>8} {:>14} {:>14}",
            "method", "pass@1", "problems", "aborted", "avg_prompt", "avg_completion"
        );
        for m in &self.methods {
            let _ = writeln!(
                s,
                "{:<20} {:>8.2} {:>9} {:>8} {:>14.1} {:>14.1}",
                m.method.as_str(),
                m.pass_at_1,
                m.problems,
                m.aborted,
                m.avg_prompt_tokens,
                m.avg_completion_tokens
            );
        }
        s
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `summary.json` and `summary.txt`.
pub fn emit_report(report: &BenchReport, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    write(&out_dir.join("summary.json"), &json)?;
    write(&out_dir.join("summary.txt"), &report.table())
}

/// One row per iteration snapshot of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: u32,
    pub best_id: String,
    pub best_fitness: f64,
    pub best_correct: Option<bool>,
    pub test_accuracy: Option<f64>,
}

pub fn curve(run_dir: &Path, sandbox: &Sandbox) -> Result<Vec<CurvePoint>> {
    let art = RunArtifacts::open(run_dir)?;
    let problem = art.problem()?;
    let mut out = Vec::new();
    for r in art.iterations()? {
        let snap = art.iteration(r)?;
        let best = snap
            .programs
            .iter()
            .find(|p| p.id == snap.summary.best_id)
            .ok_or_else(|| Error::Config(format!("iteration {r}: best program {} missing", snap.summary.best_id)))?;
        let best_correct = if problem.ground_truth_tests.is_empty() {
            None
        } else {
            Some(evaluate_final(best, &problem, sandbox)?)
        };
        let accuracy = if problem.reference_solution.is_some() && !snap.tests.is_empty() {
            Some(test_accuracy(&snap.tests, &problem, sandbox)?)
        } else {
            None
        };
        out.push(CurvePoint {
            iteration: r,
            best_id: best.id.clone(),
            best_fitness: snap.summary.best_fitness,
            best_correct,
            test_accuracy: accuracy,
        });
    }
    Ok(out)
}

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut s = String::from("iteration,best_id,best_fitness,best_correct,test_accuracy\n");
    for p in points {
        let correct = p.best_correct.map(|c| u8::from(c).to_string()).unwrap_or_default();
        let acc = p.test_accuracy.map(|a| format!("{a:.4}")).unwrap_or_default();
        let _ = writeln!(s, "{},{},{:.6},{},{}", p.iteration, p.best_id, p.best_fitness, correct, acc);
    }
    s
}

/// Writes `curves/<problem>.csv` for every run directory given.
pub fn emit_curves(run_dirs: &[PathBuf], sandbox: &Sandbox, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let dir = out_dir.join("curves");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut written = Vec::new();
    for run in run_dirs {
        let problem = RunArtifacts::open(run)?.problem()?;
        let path = dir.join(format!("{}.csv", problem.id));
        write(&path, &curve_csv(&curve(run, sandbox)?))?;
        written.push(path);
    }
    Ok(written)
}
