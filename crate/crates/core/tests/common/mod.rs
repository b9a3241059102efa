//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use coevo::engine::{Engine, EngineConfig, RunDir, RunResult};
use coevo::operators::{wrap_in_fence, PromptBuilder, Templates, Temperatures};
use coevo::provider::{Gateway, Matcher, Script, ScriptRecord, ScriptedProvider};
use coevo::sandbox::{Sandbox, SandboxConfig};
use coevo::{Problem, PromptKind};

pub const CORRECT: &str = "def solve(n):\n    return n * n";

/// Wrong program `k` is off by one only at `n == k`.
pub fn wrong(k: u32) -> String {
    format!("def solve(n):\n    if n == {k}:\n        return n * n + 1\n    return n * n")
}

pub fn square_problem() -> Problem {
    Problem {
        id: "square".into(),
        prompt: "def solve(n):\n    \"\"\"Return n squared.\"\"\"\n".into(),
        entry_point: "solve".into(),
        ground_truth_tests: (0..=12).map(|n| format!("assert solve({n}) == {}", n * n)).collect(),
        reference_solution: Some(CORRECT.into()),
        interpreter_profile: "python".into(),
    }
}

pub fn code(src: &str) -> String {
    format!("Here you go:\n{}\n", wrap_in_fence(src, "python"))
}

pub fn asserts(ns: impl IntoIterator<Item = u32>) -> String {
    let body: Vec<String> = ns
        .into_iter()
        .map(|n| format!("assert solve({n}) == {}", n * n))
        .collect();
    wrap_in_fence(&body.join("\n"), "python")
}

fn kind(kind: PromptKind, text: String) -> ScriptRecord {
    ScriptRecord::new(Matcher::Kind { kind }, text)
}

fn seq(kind: PromptKind, seq: u64, text: String) -> ScriptRecord {
    ScriptRecord::new(Matcher::Sequence { kind, seq }, text)
}

/// Every operator answers with the correct program; tests never change
/// after initialization.
pub fn budget_script() -> Script {
    Script::new(vec![
        kind(PromptKind::ProgramInit, code(CORRECT)),
        kind(PromptKind::ProgramCrossover, code(CORRECT)),
        kind(PromptKind::ProgramMutation, code(CORRECT)),
        kind(PromptKind::TestInit, asserts(1..=5)),
        kind(PromptKind::TestAugment, asserts(1..=5)).with_tokens(100, 20),
    ])
}

/// Like the budget script, but the first two augmentation calls contribute
/// new tests, so the population fingerprint freezes from iteration 3.
pub fn stagnation_script() -> Script {
    Script::new(vec![
        kind(PromptKind::ProgramInit, code(CORRECT)),
        kind(PromptKind::ProgramCrossover, code(CORRECT)),
        kind(PromptKind::ProgramMutation, code(CORRECT)),
        kind(PromptKind::TestInit, asserts(1..=3)),
        seq(PromptKind::TestAugment, 1, asserts(4..=5)),
        seq(PromptKind::TestAugment, 2, asserts(6..=7)),
        kind(PromptKind::TestAugment, asserts(1..=7)),
    ])
}

/// Initial order of the planted pool; the correct program is fourth.
pub const PLANTED_ORDER: [Option<u32>; 10] = [
    Some(6),
    Some(1),
    Some(7),
    None,
    Some(2),
    Some(8),
    Some(3),
    Some(9),
    Some(4),
    Some(5),
];

pub const JUNK: &str = "def solve(n):\n    return -1";

/// One correct and nine distinct wrong programs. Initial tests cover
/// n = 1..5, so the correct program ties with wrong programs 6..9; the
/// augmentation tests n = 6..9 are passed in full only by the correct one.
/// Offspring fail everything.
pub fn planted_script() -> Script {
    let mut records: Vec<ScriptRecord> = PLANTED_ORDER
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let src = w.map(wrong).unwrap_or_else(|| CORRECT.to_string());
            seq(PromptKind::ProgramInit, i as u64 + 1, code(&src))
        })
        .collect();
    records.extend([
        kind(PromptKind::ProgramCrossover, code(JUNK)),
        kind(PromptKind::ProgramMutation, code(JUNK)),
        kind(PromptKind::TestInit, asserts(1..=5)),
        kind(PromptKind::TestAugment, asserts(6..=9)),
    ]);
    Script::new(records)
}

pub struct Harness {
    pub sandbox: Sandbox,
    pub prompts: PromptBuilder,
    pub gateway: Gateway,
    pub provider: Arc<ScriptedProvider>,
    pub scratch: tempfile::TempDir,
}

impl Harness {
    pub fn new(script: Script) -> Self {
        let scratch = tempfile::tempdir().unwrap();
        let sandbox = Sandbox::new(SandboxConfig {
            scratch_dir: Some(scratch.path().to_path_buf()),
            workers: 8,
            ..SandboxConfig::default()
        })
        .unwrap();
        let provider = Arc::new(ScriptedProvider::new(script));
        let gateway = Gateway::new(provider.clone(), 1);
        Self {
            sandbox,
            prompts: PromptBuilder::new(Templates::builtin(), Temperatures::default(), 10),
            gateway,
            provider,
            scratch,
        }
    }

    pub fn run(&self, config: EngineConfig, dir: Option<&Path>) -> coevo::Result<RunResult> {
        let engine = Engine::new(config, &self.gateway, &self.sandbox, &self.prompts)?;
        let dir = dir.map(|d| RunDir::create(d).unwrap());
        engine.run(&square_problem(), dir.as_ref())
    }
}

pub fn run_script(script: Script, config: EngineConfig, dir: Option<&Path>) -> coevo::Result<RunResult> {
    Harness::new(script).run(config, dir)
}
