//! Run directory layout:
//!
//! ```text
//! <run_dir>/config.snapshot
//! <run_dir>/problem.json
//! <run_dir>/iter_<r>/{programs.json, tests.json, matrix.bits, metrics.json}
//! <run_dir>/best.src
//! <run_dir>/result.json
//! <run_dir>/ledger.json
//! <run_dir>/fault.json        (only when the run aborted)
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::OperationPlan;
use crate::matrix::EvalMatrix;
use crate::provider::LedgerSummary;
use crate::types::{CandidateProgram, Problem, TestCase};

pub const CONFIG_SNAPSHOT: &str = "config.snapshot";
pub const PROBLEM_FILE: &str = "problem.json";
pub const RESULT_FILE: &str = "result.json";
pub const LEDGER_FILE: &str = "ledger.json";
pub const BEST_FILE: &str = "best.src";
pub const FAULT_FILE: &str = "fault.json";

/// Per-iteration record kept in memory and written as `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iteration: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crossover_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<OperationPlan>,
    pub best_id: String,
    pub best_fitness: f64,
    pub program_count: usize,
    pub test_count: usize,
    /// Offspring slots whose response could not be used.
    pub malformed_offspring: usize,
    pub tests_added: usize,
    pub augmentation_skipped: bool,
    pub selection_fallback: bool,
    pub coverage_degraded: bool,
    pub uncovered_lines: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub problem_id: String,
    pub final_program: CandidateProgram,
    pub iterations_executed: u32,
    pub stopped_early: bool,
    pub history: Vec<IterationSummary>,
    /// Surviving programs at the end, best first.
    pub final_population: Vec<CandidateProgram>,
    pub token_summary: LedgerSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultRecord {
    pub problem_id: String,
    pub iteration: u32,
    pub error: String,
}

/// Writes the artifacts of one run.
#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

impl RunDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(Self { root })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write_config_snapshot(&self, text: &str) -> Result<()> {
        write(&self.root.join(CONFIG_SNAPSHOT), text)
    }

    pub fn write_problem(&self, problem: &Problem) -> Result<()> {
        write(&self.root.join(PROBLEM_FILE), &to_json(problem)?)
    }

    pub fn write_iteration(
        &self,
        summary: &IterationSummary,
        programs: &[CandidateProgram],
        tests: &[TestCase],
        matrix: &EvalMatrix,
    ) -> Result<()> {
        let dir = self.root.join(format!("iter_{}", summary.iteration));
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write(&dir.join("programs.json"), &to_json(&programs)?)?;
        write(&dir.join("tests.json"), &to_json(&tests)?)?;
        write(&dir.join("matrix.bits"), &matrix.to_text())?;
        write(&dir.join("metrics.json"), &to_json(summary)?)
    }

    pub fn write_result(&self, result: &RunResult) -> Result<()> {
        write(&self.root.join(BEST_FILE), &result.final_program.source)?;
        write(&self.root.join(LEDGER_FILE), &to_json(&result.token_summary)?)?;
        write(&self.root.join(RESULT_FILE), &to_json(result)?)
    }

    pub fn write_fault(&self, fault: &FaultRecord, ledger: &LedgerSummary) -> Result<()> {
        write(&self.root.join(LEDGER_FILE), &to_json(ledger)?)?;
        write(&self.root.join(FAULT_FILE), &to_json(fault)?)
    }
}

/// One iteration read back from disk.
#[derive(Debug, Clone)]
pub struct IterationSnapshot {
    pub summary: IterationSummary,
    pub programs: Vec<CandidateProgram>,
    pub tests: Vec<TestCase>,
    pub matrix: EvalMatrix,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Read-only view of a finished (or aborted) run directory.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub root: PathBuf,
}

impl RunArtifacts {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        if !root.is_dir() {
            return Err(Error::Config(format!("{} is not a run directory", root.display())));
        }
        Ok(Self { root })
    }

    pub fn result(&self) -> Result<RunResult> {
        read_json(&self.root.join(RESULT_FILE))
    }

    pub fn ledger(&self) -> Result<LedgerSummary> {
        read_json(&self.root.join(LEDGER_FILE))
    }

    pub fn problem(&self) -> Result<Problem> {
        read_json(&self.root.join(PROBLEM_FILE))
    }

    pub fn fault(&self) -> Option<FaultRecord> {
        read_json(&self.root.join(FAULT_FILE)).ok()
    }

    pub fn config_snapshot(&self) -> Result<String> {
        read(&self.root.join(CONFIG_SNAPSHOT))
    }

    /// Iteration numbers present on disk, ascending.
    pub fn iterations(&self) -> Result<Vec<u32>> {
        let mut out = Vec::new();
        let entries = std::fs::read_dir(&self.root).map_err(|e| Error::io(&self.root, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&self.root, e))?;
            if let Some(r) = entry
                .file_name()
                .to_str()
                .and_then(|n| n.strip_prefix("iter_"))
                .and_then(|n| n.parse::<u32>().ok())
            {
                out.push(r);
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    pub fn iteration(&self, r: u32) -> Result<IterationSnapshot> {
        let dir = self.root.join(format!("iter_{r}"));
        let programs: Vec<CandidateProgram> = read_json(&dir.join("programs.json"))?;
        let tests: Vec<TestCase> = read_json(&dir.join("tests.json"))?;
        let mut matrix = EvalMatrix::from_text(&read(&dir.join("matrix.bits"))?)
            .map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
        if matrix.rows() != programs.len() || matrix.cols() != tests.len() {
            return Err(Error::Config(format!(
                "{}: matrix is {}×{} but snapshot has {} programs and {} tests",
                dir.display(),
                matrix.rows(),
                matrix.cols(),
                programs.len(),
                tests.len()
            )));
        }
        let mut relabeled = EvalMatrix::new(
            programs.iter().map(|p| p.id.clone()).collect(),
            tests.iter().map(|t| t.id.clone()).collect(),
        );
        for i in 0..matrix.rows() {
            for j in 0..matrix.cols() {
                relabeled.set(i, j, matrix.get(i, j));
            }
        }
        matrix = relabeled;
        Ok(IterationSnapshot {
            summary: read_json(&dir.join("metrics.json"))?,
            programs,
            tests,
            matrix,
        })
    }
}
