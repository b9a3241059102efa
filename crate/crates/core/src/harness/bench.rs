//! Runs the baselines and the evolutionary method over a problem set.

use std::collections::{HashMap, HashSet};
use std::path::PathBuf;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dataset::ProblemSet;
use super::eval::evaluate_final;
use super::select::{pass_counts, select_codet, select_max, select_sampling, select_sampling_filtering, Selection};
use crate::engine::{Engine, EngineConfig, RunDir};
use crate::error::{Error, Result};
use crate::matrix::EvalMatrix;
use crate::metrics::program_confidence;
use crate::operators::{parse_program, parse_tests, PromptBuilder};
use crate::provider::{Counters, Gateway, LedgerSummary};
use crate::sandbox::Sandbox;
use crate::text::normalize_whitespace;
use crate::types::{CandidateProgram, Problem, ProgramOrigin, PromptKind, TestCase, TestOrigin};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sampling,
    SamplingFiltering,
    Codet,
    Cocoevo,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Sampling,
        Method::SamplingFiltering,
        Method::Codet,
        Method::Cocoevo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Sampling => "sampling",
            Method::SamplingFiltering => "sampling_filtering",
            Method::Codet => "codet",
            Method::Cocoevo => "cocoevo",
        }
    }

    pub fn is_baseline(self) -> bool {
        self != Method::Cocoevo
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sampling" => Ok(Method::Sampling),
            "sampling_filtering" => Ok(Method::SamplingFiltering),
            "codet" => Ok(Method::Codet),
            "cocoevo" | "coevo" => Ok(Method::Cocoevo),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

/// Parses a comma-separated method list, keeping the given order and
/// dropping repeats.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for part in list.split(',').filter(|p| !p.trim().is_empty()) {
        let m: Method = part.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument("no methods given".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub repeats: usize,
    /// Programs sampled for the baseline pool.
    pub pool_size: usize,
    /// Test-generation calls for the baseline suite.
    pub test_calls: usize,
    pub seed: u64,
    /// Where evolutionary runs keep their run directories.
    pub run_root: Option<PathBuf>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            repeats: 5,
            pool_size: 100,
            test_calls: 10,
            seed: 0,
            run_root: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub problem_id: String,
    pub method: Method,
    #[serde(skip)]
    pub candidate_pool: Vec<CandidateProgram>,
    pub candidate_count: usize,
    pub scores: Vec<f64>,
    /// Selected program id per repeat.
    pub selected: Vec<String>,
    pub correct: Vec<bool>,
    pub repeats: usize,
    pub aborted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub tokens: Counters,
}

impl MethodResult {
    fn aborted(problem: &Problem, method: Method, repeats: usize, error: String, tokens: Counters) -> Self {
        Self {
            problem_id: problem.id.clone(),
            method,
            candidate_pool: Vec::new(),
            candidate_count: 0,
            scores: Vec::new(),
            selected: Vec::new(),
            correct: vec![false; repeats],
            repeats,
            aborted: true,
            error: Some(error),
            tokens,
        }
    }
}

/// Mixes a seed with string labels.
pub fn derive_seed(seed: u64, labels: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for l in labels {
        h.update(l.as_bytes());
        h.update([0]);
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

fn repeat_rng(cfg: &BenchConfig, k: usize, problem: &Problem, method: Method) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(
        cfg.seed.wrapping_add(k as u64),
        &[&problem.id, method.as_str()],
    ))
}

struct Pool {
    programs: Vec<CandidateProgram>,
    tests: Vec<TestCase>,
    matrix: Option<EvalMatrix>,
    ledger: LedgerSummary,
}

fn build_pool(
    problem: &Problem,
    cfg: &BenchConfig,
    gateway: &Gateway,
    sandbox: &Sandbox,
    prompts: &PromptBuilder,
) -> Result<Pool> {
    let request = prompts.program_init(problem);
    let responses = gateway.complete_all(&vec![request; cfg.pool_size]);
    let programs = responses
        .into_iter()
        .enumerate()
        .map(|(k, r)| {
            let id = format!("S{k:03}");
            match r.ok().and_then(|r| parse_program(&r.text).ok()) {
                Some(src) => CandidateProgram::new(id, src, ProgramOrigin::Init, vec![], 1),
                None => CandidateProgram::placeholder(id, ProgramOrigin::Init, vec![], 1),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let request = prompts.test_init(problem);
    let responses = gateway.complete_all(&vec![request; cfg.test_calls]);
    let mut seen = HashSet::new();
    let mut tests = Vec::new();
    for r in responses.into_iter().flatten() {
        for a in parse_tests(&r.text, prompts.tests_per_call.max(1)).unwrap_or_default() {
            if seen.insert(normalize_whitespace(&a)) {
                tests.push(TestCase::new(format!("B{:03}", tests.len()), a, TestOrigin::Init, 1)?);
            }
        }
    }
    let matrix = if tests.is_empty() {
        None
    } else {
        Some(sandbox.cross_evaluate(&programs, &tests, &problem.interpreter_profile)?)
    };
    Ok(Pool {
        programs,
        tests,
        matrix,
        ledger: gateway.ledger().report(),
    })
}

/// Evaluates the selected programs, memoizing by index.
fn judge(
    problem: &Problem,
    pool: &[CandidateProgram],
    picks: &[Selection],
    sandbox: &Sandbox,
) -> Result<Vec<bool>> {
    let mut memo: HashMap<usize, bool> = HashMap::new();
    picks
        .iter()
        .map(|s| match memo.get(&s.index) {
            Some(&c) => Ok(c),
            None => {
                let c = evaluate_final(&pool[s.index], problem, sandbox)?;
                memo.insert(s.index, c);
                Ok(c)
            }
        })
        .collect()
}

fn finish(
    problem: &Problem,
    method: Method,
    pool: Vec<CandidateProgram>,
    scores: Vec<f64>,
    picks: Vec<Selection>,
    tokens: Counters,
    sandbox: &Sandbox,
) -> Result<MethodResult> {
    let correct = judge(problem, &pool, &picks, sandbox)?;
    Ok(MethodResult {
        problem_id: problem.id.clone(),
        method,
        candidate_count: pool.len(),
        scores,
        selected: picks.iter().map(|s| pool[s.index].id.clone()).collect(),
        repeats: picks.len(),
        correct,
        candidate_pool: pool,
        aborted: false,
        error: None,
        tokens,
    })
}

fn run_baseline(
    problem: &Problem,
    method: Method,
    pool: &Pool,
    cfg: &BenchConfig,
    sandbox: &Sandbox,
) -> Result<MethodResult> {
    let n = cfg.repeats;
    if method == Method::Sampling {
        let tokens = pool
            .ledger
            .per_kind
            .get(PromptKind::ProgramInit.as_str())
            .copied()
            .unwrap_or_default();
        let picks = (0..n)
            .map(|k| select_sampling(pool.programs.len(), &mut repeat_rng(cfg, k, problem, method)))
            .collect::<Result<Vec<_>>>()?;
        let scores = vec![0.0; pool.programs.len()];
        return finish(problem, method, pool.programs.clone(), scores, picks, tokens, sandbox);
    }
    let tokens = pool.ledger.total;
    let Some(matrix) = &pool.matrix else {
        return Ok(MethodResult::aborted(problem, method, n, "no generated tests".into(), tokens));
    };
    debug_assert_eq!(matrix.cols(), pool.tests.len());
    let (scores, picks) = match method {
        Method::SamplingFiltering => (
            pass_counts(matrix),
            (0..n)
                .map(|k| select_sampling_filtering(matrix, &mut repeat_rng(cfg, k, problem, method)))
                .collect::<Result<Vec<_>>>()?,
        ),
        _ => (
            program_confidence(matrix),
            (0..n)
                .map(|k| select_codet(matrix, &mut repeat_rng(cfg, k, problem, method)))
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    finish(problem, method, pool.programs.clone(), scores, picks, tokens, sandbox)
}

fn run_evolution(
    problem: &Problem,
    engine_cfg: &EngineConfig,
    cfg: &BenchConfig,
    gateway: &Gateway,
    sandbox: &Sandbox,
    prompts: &PromptBuilder,
) -> Result<MethodResult> {
    let method = Method::Cocoevo;
    let engine = Engine::new(engine_cfg.clone(), gateway, sandbox, prompts)?;
    let dir = match &cfg.run_root {
        Some(root) => Some(RunDir::create(root.join(&problem.id))?),
        None => None,
    };
    let result = match engine.run(problem, dir.as_ref()) {
        Ok(r) => r,
        Err(e) => {
            let tokens = engine.ledger().report().total;
            log::warn!("{}: run aborted: {e}", problem.id);
            return Ok(MethodResult::aborted(problem, method, cfg.repeats, e.to_string(), tokens));
        }
    };
    let pool = result.final_population;
    let scores: Vec<f64> = pool.iter().map(|p| p.fitness_or_zero()).collect();
    let picks = (0..cfg.repeats)
        .map(|k| select_max(&scores, &mut repeat_rng(cfg, k, problem, method)))
        .collect::<Result<Vec<_>>>()?;
    finish(problem, method, pool, scores, picks, result.token_summary.total, sandbox)
}

fn run_problem(
    problem: &Problem,
    methods: &[Method],
    engine_cfg: &EngineConfig,
    cfg: &BenchConfig,
    gateway: &Gateway,
    sandbox: &Sandbox,
    prompts: &PromptBuilder,
) -> Result<Vec<MethodResult>> {
    let mut out = Vec::new();
    let baselines: Vec<Method> = methods.iter().copied().filter(|m| m.is_baseline()).collect();
    if !baselines.is_empty() {
        let pool_gateway = gateway.fork();
        match build_pool(problem, cfg, &pool_gateway, sandbox, prompts) {
            Ok(pool) => {
                for &m in &baselines {
                    out.push(run_baseline(problem, m, &pool, cfg, sandbox)?);
                }
            }
            Err(e @ Error::Setup(_)) => return Err(e),
            Err(e) => {
                let tokens = pool_gateway.ledger().report().total;
                for &m in &baselines {
                    out.push(MethodResult::aborted(problem, m, cfg.repeats, e.to_string(), tokens));
                }
            }
        }
    }
    if methods.contains(&Method::Cocoevo) {
        out.push(run_evolution(problem, engine_cfg, cfg, gateway, sandbox, prompts)?);
    }
    out.sort_by_key(|r| methods.iter().position(|&m| m == r.method));
    Ok(out)
}

/// Runs every method on every problem. Results are grouped by problem in
/// set order and by method in the order given. Problems run in parallel
/// only when the provider allows concurrent calls.
pub fn run_bench(
    set: &ProblemSet,
    methods: &[Method],
    engine_cfg: &EngineConfig,
    cfg: &BenchConfig,
    gateway: &Gateway,
    sandbox: &Sandbox,
    prompts: &PromptBuilder,
) -> Result<Vec<MethodResult>> {
    if cfg.repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    let one = |p: &Problem| run_problem(p, methods, engine_cfg, cfg, gateway, sandbox, prompts);
    let per_problem: Vec<Result<Vec<MethodResult>>> = if gateway.supports_parallel() {
        set.problems.par_iter().map(one).collect()
    } else {
        set.problems.iter().map(one).collect()
    };
    let mut out = Vec::new();
    for r in per_problem {
        out.extend(r?);
    }
    Ok(out)
}
