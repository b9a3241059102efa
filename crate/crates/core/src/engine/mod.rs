//! The co-evolution loop.
//!
//! ```text
//! initialize            N program_init calls, 1 test_init call, evaluate
//! for r in 2..=max_iter
//!     evolve_programs   N offspring (crossover/mutation split by the
//!                       cosine schedule), parents + offspring -> best N
//!     evolve_tests      coverage of p_best -> 1 augment call -> Pareto
//!                       selection with below-mean confidence filter
//!     fingerprint       optional early stop after n frozen generations
//! ```

mod snapshot;

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use snapshot::{
    FaultRecord, IterationSnapshot, IterationSummary, RunArtifacts, RunDir, RunResult,
    BEST_FILE, CONFIG_SNAPSHOT, FAULT_FILE, LEDGER_FILE, PROBLEM_FILE, RESULT_FILE,
};

use crate::error::{Error, Result};
use crate::evolution::{
    best_index, binary_tournament, crossover_rate, select_survivors, select_test_population,
    stagnation_check, uniform_index, OperationPlan, SchedulerConfig, StagnationFingerprint,
};
use crate::matrix::EvalMatrix;
use crate::metrics::{test_confidence, test_discrimination, test_pass_rate, FitnessFunction};
use crate::operators::{parse_program, parse_tests, CoverageAnnotatedSource, PromptBuilder, PromptRequest};
use crate::provider::{Gateway, ProviderResponse, TokenLedger};
use crate::sandbox::Sandbox;
use crate::text::normalize_whitespace;
use crate::types::{CandidateProgram, Problem, ProgramOrigin, TestCase, TestOrigin};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub population_size: usize,
    pub max_iter: u32,
    pub x_init: f64,
    pub x_final: f64,
    /// Stop after this many consecutive unchanged generations.
    pub stop_n: Option<usize>,
    pub tests_per_call: usize,
    pub seed: u64,
    pub fitness: FitnessFunction,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            population_size: 10,
            max_iter: 10,
            x_init: 0.0,
            x_final: 1.0,
            stop_n: None,
            tests_per_call: 10,
            seed: 0,
            fitness: FitnessFunction::Confidence,
        }
    }
}

impl EngineConfig {
    pub fn scheduler(&self) -> SchedulerConfig {
        SchedulerConfig {
            x_init: self.x_init,
            x_final: self.x_final,
            max_iter: self.max_iter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::Config("population_size must be at least 2".into()));
        }
        if self.tests_per_call < 1 {
            return Err(Error::Config("tests_per_call must be at least 1".into()));
        }
        if self.stop_n == Some(0) {
            return Err(Error::Config("stop_n must be at least 1".into()));
        }
        self.scheduler()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }
}

/// Mutable state of one run.
#[derive(Debug, Clone)]
pub struct RunState {
    pub iteration: u32,
    pub programs: Vec<CandidateProgram>,
    pub tests: Vec<TestCase>,
    pub matrix: EvalMatrix,
    pub best: CandidateProgram,
    pub fingerprints: Vec<StagnationFingerprint>,
    pub history: Vec<IterationSummary>,
    rng: ChaCha8Rng,
}

fn program_id(born: u32, k: usize) -> String {
    format!("P{born:03}-{k:03}")
}

fn test_id(born: u32, k: usize) -> String {
    format!("T{born:03}-{k:03}")
}

/// Seed for one problem: the configured seed mixed with a hash of the id.
fn problem_seed(seed: u64, problem_id: &str) -> u64 {
    let digest = Sha256::digest(problem_id.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    seed ^ u64::from_le_bytes(bytes)
}

/// Writes fitness and pass vectors from `matrix` into `programs`.
fn apply_fitness(programs: &mut [CandidateProgram], matrix: &EvalMatrix, fitness: &[f64]) {
    for (i, p) in programs.iter_mut().enumerate() {
        p.fitness = Some(fitness[i]);
        p.pass_vector = Some(matrix.row_bits(i));
    }
}

/// Computes pass rate, confidence and discrimination for every column.
fn apply_test_metrics(tests: &mut [TestCase], matrix: &EvalMatrix, fitness: &[f64]) -> Result<()> {
    let rates = test_pass_rate(matrix)?;
    let conf = test_confidence(matrix, fitness)?;
    for (j, t) in tests.iter_mut().enumerate() {
        t.pass_rate = Some(rates[j]);
        t.confidence = Some(conf[j]);
        t.discrimination = Some(test_discrimination(rates[j])?);
    }
    Ok(())
}

pub struct Engine<'a> {
    config: EngineConfig,
    gateway: Gateway,
    sandbox: &'a Sandbox,
    prompts: &'a PromptBuilder,
}

impl<'a> Engine<'a> {
    /// The engine keeps its own ledger; the gateway's provider is shared.
    pub fn new(
        config: EngineConfig,
        gateway: &Gateway,
        sandbox: &'a Sandbox,
        prompts: &'a PromptBuilder,
    ) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            gateway: gateway.fork(),
            sandbox,
            prompts,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn ledger(&self) -> TokenLedger {
        self.gateway.ledger()
    }

    fn evaluate(
        &self,
        problem: &Problem,
        programs: &[CandidateProgram],
        tests: &[TestCase],
    ) -> Result<(EvalMatrix, Vec<f64>)> {
        let matrix = self
            .sandbox
            .cross_evaluate(programs, tests, &problem.interpreter_profile)
            .map_err(|e| Error::RunFault(e.to_string()))?;
        let fitness = self.config.fitness.evaluate(&matrix);
        Ok((matrix, fitness))
    }

    fn offspring(
        responses: Vec<Result<ProviderResponse>>,
        meta: Vec<(ProgramOrigin, Vec<String>)>,
        born: u32,
    ) -> Result<(Vec<CandidateProgram>, usize)> {
        let mut out = Vec::with_capacity(responses.len());
        let mut malformed = 0;
        for (k, (response, (origin, parents))) in responses.into_iter().zip(meta).enumerate() {
            let id = program_id(born, k);
            let source = response.ok().and_then(|r| parse_program(&r.text).ok());
            out.push(match source {
                Some(src) => CandidateProgram::new(id, src, origin, parents, born)?,
                None => {
                    malformed += 1;
                    CandidateProgram::placeholder(id, origin, parents, born)?
                }
            });
        }
        Ok((out, malformed))
    }

    fn request_tests(&self, request: &PromptRequest) -> Option<Vec<String>> {
        let response = self.gateway.complete(request).ok()?;
        parse_tests(&response.text, self.config.tests_per_call).ok()
    }

    /// Initial populations, evaluation and p_best; iteration 1.
    pub fn initialize(&self, problem: &Problem) -> Result<RunState> {
        let n = self.config.population_size;
        let request = self.prompts.program_init(problem);
        let requests = vec![request; n];
        let responses = self.gateway.complete_all(&requests);
        let meta = vec![(ProgramOrigin::Init, Vec::new()); n];
        let (mut programs, malformed) = Self::offspring(responses, meta, 1)?;
        if malformed == n {
            return Err(Error::RunFault("no viable initial population".into()));
        }

        let test_request = self.prompts.test_init(problem);
        let assertions = self
            .request_tests(&test_request)
            .or_else(|| self.request_tests(&test_request))
            .ok_or_else(|| Error::RunFault("no initial tests after retry".into()))?;
        let mut tests = assertions
            .into_iter()
            .enumerate()
            .map(|(k, a)| TestCase::new(test_id(1, k), a, TestOrigin::Init, 1))
            .collect::<Result<Vec<_>>>()?;

        let (matrix, fitness) = self.evaluate(problem, &programs, &tests)?;
        apply_fitness(&mut programs, &matrix, &fitness);
        apply_test_metrics(&mut tests, &matrix, &fitness)?;
        let best = programs[best_index(&programs, &fitness).expect("non-empty")].clone();
        let summary = IterationSummary {
            iteration: 1,
            crossover_rate: None,
            plan: None,
            best_id: best.id.clone(),
            best_fitness: best.fitness_or_zero(),
            program_count: programs.len(),
            test_count: tests.len(),
            malformed_offspring: malformed,
            tests_added: tests.len(),
            augmentation_skipped: false,
            selection_fallback: false,
            coverage_degraded: false,
            uncovered_lines: 0,
        };
        Ok(RunState {
            iteration: 1,
            programs,
            tests,
            matrix,
            best,
            fingerprints: Vec::new(),
            history: vec![summary],
            rng: ChaCha8Rng::seed_from_u64(problem_seed(self.config.seed, &problem.id)),
        })
    }

    /// Program half of iteration `r`: offspring, μ+λ survivor selection,
    /// p_best update. Pushes a partial summary that `evolve_tests` completes.
    pub fn evolve_programs(&self, problem: &Problem, state: &mut RunState, r: u32) -> Result<()> {
        let n = self.config.population_size;
        let sched = self.config.scheduler();
        let rate = crossover_rate(r, &sched)?;
        let plan = OperationPlan::for_iteration(r, &sched, n)?;

        let fitness: Vec<f64> = state.programs.iter().map(|p| p.fitness_or_zero()).collect();
        let mut requests = Vec::with_capacity(n);
        let mut meta = Vec::with_capacity(n);
        for _ in 0..plan.crossover_count {
            let (a, b) = binary_tournament(&fitness, &mut state.rng)?;
            let (pa, pb) = (&state.programs[a], &state.programs[b]);
            requests.push(self.prompts.crossover(problem, pa, pb)?);
            meta.push((ProgramOrigin::Crossover, vec![pa.id.clone(), pb.id.clone()]));
        }
        for _ in 0..plan.mutation_count {
            let i = uniform_index(state.programs.len(), &mut state.rng)?;
            let p = &state.programs[i];
            requests.push(self.prompts.mutation(problem, p));
            meta.push((ProgramOrigin::Mutation, vec![p.id.clone()]));
        }
        let responses = self.gateway.complete_all(&requests);
        let (offspring, malformed) = Self::offspring(responses, meta, r)?;
        if malformed == offspring.len() {
            return Err(Error::RunFault(format!(
                "every offspring of iteration {r} failed"
            )));
        }

        let mut merged = std::mem::take(&mut state.programs);
        merged.extend(offspring);
        let (matrix, merged_fitness) = self.evaluate(problem, &merged, &state.tests)?;
        let keep = select_survivors(&merged, &merged_fitness, n)?;
        let kept_min = keep
            .iter()
            .map(|&i| merged_fitness[i])
            .fold(f64::INFINITY, f64::min);
        debug_assert!(
            (0..merged.len())
                .filter(|i| !keep.contains(i))
                .all(|i| merged_fitness[i] <= kept_min),
            "survivor selection dropped a fitter program"
        );

        let mut programs: Vec<CandidateProgram> = keep.iter().map(|&i| merged[i].clone()).collect();
        let matrix = matrix.select_rows(&keep);
        let fitness = self.config.fitness.evaluate(&matrix);
        apply_fitness(&mut programs, &matrix, &fitness);
        state.best = programs[best_index(&programs, &fitness).expect("non-empty")].clone();
        state.programs = programs;
        state.matrix = matrix;
        state.iteration = r;
        state.history.push(IterationSummary {
            iteration: r,
            crossover_rate: Some(rate),
            plan: Some(plan),
            best_id: state.best.id.clone(),
            best_fitness: state.best.fitness_or_zero(),
            program_count: state.programs.len(),
            test_count: state.tests.len(),
            malformed_offspring: malformed,
            tests_added: 0,
            augmentation_skipped: false,
            selection_fallback: false,
            coverage_degraded: false,
            uncovered_lines: 0,
        });
        Ok(())
    }

    /// Test half of iteration `r`: coverage-guided augmentation, then
    /// Pareto selection on (confidence, discrimination).
    pub fn evolve_tests(&self, problem: &Problem, state: &mut RunState, r: u32) -> Result<()> {
        let coverage = self.sandbox.line_coverage(
            &state.best,
            &state.tests,
            &problem.entry_point,
            &problem.interpreter_profile,
        );
        let annotated = CoverageAnnotatedSource::new(&state.best.source, &coverage);
        let uncovered = annotated
            .lines
            .iter()
            .filter(|(m, _)| *m == Some(crate::operators::LineMarker::Uncovered))
            .count();
        let request = self
            .prompts
            .test_augment(problem, &state.tests, &state.best, &annotated);
        let fresh = self.request_tests(&request);
        let skipped = fresh.is_none();

        let mut seen: HashSet<String> = state
            .tests
            .iter()
            .map(|t| normalize_whitespace(&t.assertion))
            .collect();
        let mut candidates = std::mem::take(&mut state.tests);
        let mut added = 0;
        for a in fresh.unwrap_or_default() {
            if seen.insert(normalize_whitespace(&a)) {
                candidates.push(TestCase::new(test_id(r, added), a, TestOrigin::Augment, r)?);
                added += 1;
            }
        }
        for t in &mut candidates {
            t.clear_metrics();
        }

        let (matrix, fitness) = self.evaluate(problem, &state.programs, &candidates)?;
        apply_test_metrics(&mut candidates, &matrix, &fitness)?;
        let selection = select_test_population(&candidates)?;
        let tests: Vec<TestCase> = selection
            .selected
            .iter()
            .map(|&j| candidates[j].clone())
            .collect();
        let matrix = matrix.select_cols(&selection.selected);
        let fitness = self.config.fitness.evaluate(&matrix);
        apply_fitness(&mut state.programs, &matrix, &fitness);
        state.best = state.programs[best_index(&state.programs, &fitness).expect("non-empty")].clone();
        state.tests = tests;
        state.matrix = matrix;
        state
            .fingerprints
            .push(StagnationFingerprint::of(&state.programs));

        if let Some(summary) = state.history.last_mut().filter(|s| s.iteration == r) {
            summary.best_id = state.best.id.clone();
            summary.best_fitness = state.best.fitness_or_zero();
            summary.test_count = state.tests.len();
            summary.tests_added = added;
            summary.augmentation_skipped = skipped;
            summary.selection_fallback = selection.fallback;
            summary.coverage_degraded = coverage.degraded;
            summary.uncovered_lines = uncovered;
        }
        Ok(())
    }

    fn snapshot(&self, dir: Option<&RunDir>, state: &RunState) -> Result<()> {
        if let Some(dir) = dir {
            let summary = state.history.last().expect("history is never empty");
            dir.write_iteration(summary, &state.programs, &state.tests, &state.matrix)?;
        }
        Ok(())
    }

    fn run_inner(&self, problem: &Problem, dir: Option<&RunDir>, reached: &mut u32) -> Result<RunResult> {
        let mut state = self.initialize(problem)?;
        self.snapshot(dir, &state)?;
        let mut stopped_early = false;
        for r in 2..=self.config.max_iter {
            *reached = r;
            self.evolve_programs(problem, &mut state, r)?;
            self.evolve_tests(problem, &mut state, r)?;
            self.snapshot(dir, &state)?;
            if let Some(n) = self.config.stop_n {
                if stagnation_check(&state.fingerprints, n) {
                    stopped_early = r < self.config.max_iter;
                    break;
                }
            }
        }
        let mut order: Vec<usize> = (0..state.programs.len()).collect();
        order.sort_by(|&a, &b| {
            crate::evolution::survivor_order(
                (&state.programs[a], state.programs[a].fitness_or_zero()),
                (&state.programs[b], state.programs[b].fitness_or_zero()),
            )
        });
        Ok(RunResult {
            problem_id: problem.id.clone(),
            final_program: state.best.clone(),
            iterations_executed: state.iteration,
            stopped_early,
            history: state.history,
            final_population: order.into_iter().map(|i| state.programs[i].clone()).collect(),
            token_summary: self.gateway.ledger().report(),
        })
    }

    /// Runs the whole loop. With a run directory, snapshots every iteration
    /// and writes the result files, or `fault.json` if the run aborts.
    pub fn run(&self, problem: &Problem, dir: Option<&RunDir>) -> Result<RunResult> {
        problem.validate()?;
        if let Some(d) = dir {
            d.write_problem(problem)?;
        }
        let mut reached = 1;
        match self.run_inner(problem, dir, &mut reached) {
            Ok(result) => {
                if let Some(d) = dir {
                    d.write_result(&result)?;
                }
                Ok(result)
            }
            Err(e) => {
                if let Some(d) = dir {
                    let fault = FaultRecord {
                        problem_id: problem.id.clone(),
                        iteration: reached,
                        error: e.to_string(),
                    };
                    d.write_fault(&fault, &self.gateway.ledger().report())?;
                }
                Err(e)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(EngineConfig::default().validate().is_ok());
        let bad = EngineConfig {
            population_size: 1,
            ..EngineConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = EngineConfig {
            max_iter: 1,
            ..EngineConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = EngineConfig {
            stop_n: Some(0),
            ..EngineConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn ids_sort_by_birth() {
        assert!(program_id(2, 0) > program_id(1, 9));
        assert!(test_id(1, 10) > test_id(1, 9));
        assert_ne!(problem_seed(1, "a"), problem_seed(1, "b"));
        assert_eq!(problem_seed(1, "a"), problem_seed(1, "a"));
    }
}
