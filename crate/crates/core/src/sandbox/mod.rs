//! Isolated execution of candidate programs against assertions.
//!
//! Every (program, assertion) pair runs as its own child process in its own
//! process group, inside a throwaway scratch directory, with an address-space
//! cap and a wall-clock limit. Outcomes are cached per pair so unchanged
//! pairs are not re-executed across iterations.

mod coverage;
mod exec;

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use coverage::{function_span, CoverageReport};
pub use exec::{ExecLimits, ExecOutcome, ExecStatus, DETAIL_LIMIT};

use crate::error::{Error, Result};
use crate::matrix::EvalMatrix;
use crate::types::{CandidateProgram, TestCase, DEFAULT_PROFILE};
use exec::{run_script, Launch};

const TRACER_SOURCE: &str = include_str!("tracer.py");

/// Interpreter settings for one candidate language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterpreterProfile {
    /// argv template with a `{script}` placeholder.
    pub interpreter_cmd: Vec<String>,
    /// Optional argv template that prints executed line numbers of
    /// `{script}`, one per line. `{tracer}` expands to the bundled Python
    /// line tracer.
    #[serde(default)]
    pub trace_cmd: Option<Vec<String>>,
    #[serde(default = "default_script_name")]
    pub script_name: String,
    /// Line prefix in stderr that marks a failed assertion.
    #[serde(default = "default_marker")]
    pub assertion_marker: String,
}

fn default_script_name() -> String {
    "candidate.py".into()
}

fn default_marker() -> String {
    "AssertionError".into()
}

impl InterpreterProfile {
    pub fn python() -> Self {
        Self {
            interpreter_cmd: vec!["python3".into(), "-I".into(), "-S".into(), "{script}".into()],
            trace_cmd: Some(vec![
                "python3".into(),
                "-I".into(),
                "-S".into(),
                "{tracer}".into(),
                "{script}".into(),
            ]),
            script_name: default_script_name(),
            assertion_marker: default_marker(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SandboxConfig {
    pub timeout_ms: u64,
    pub memory_mb: u64,
    pub workers: usize,
    /// Parent of the per-pair scratch directories; the system temp dir when
    /// unset.
    pub scratch_dir: Option<PathBuf>,
    pub retain_failures: bool,
    /// Where non-passing pair directories go when `retain_failures` is set.
    pub failures_dir: Option<PathBuf>,
    /// Best effort: put each child in a fresh network namespace.
    pub isolate_network: bool,
    pub profiles: BTreeMap<String, InterpreterProfile>,
}

impl Default for SandboxConfig {
    fn default() -> Self {
        let workers = std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(4)
            .min(16);
        Self {
            timeout_ms: 5_000,
            memory_mb: 512,
            workers,
            scratch_dir: None,
            retain_failures: false,
            failures_dir: None,
            isolate_network: true,
            profiles: BTreeMap::from([(DEFAULT_PROFILE.to_string(), InterpreterProfile::python())]),
        }
    }
}

impl SandboxConfig {
    pub fn limits(&self) -> ExecLimits {
        ExecLimits {
            timeout_ms: self.timeout_ms,
            memory_mb: self.memory_mb,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct PairKey {
    program_id: String,
    test_id: String,
    content: u64,
}

impl PairKey {
    fn new(program: &CandidateProgram, test: &TestCase) -> Self {
        let mut h = DefaultHasher::new();
        program.source.hash(&mut h);
        test.assertion.hash(&mut h);
        Self {
            program_id: program.id.clone(),
            test_id: test.id.clone(),
            content: h.finish(),
        }
    }
}

pub fn combined_script(program_source: &str, assertion: &str) -> String {
    format!("{program_source}\n\n{assertion}\n")
}

pub struct Sandbox {
    config: SandboxConfig,
    pool: rayon::ThreadPool,
    cache: RwLock<HashMap<PairKey, ExecOutcome>>,
    launches: AtomicU64,
    tracer_dir: tempfile::TempDir,
}

impl std::fmt::Debug for Sandbox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Sandbox").field("config", &self.config).finish()
    }
}

impl Sandbox {
    pub fn new(config: SandboxConfig) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers.max(1))
            .build()
            .map_err(|e| Error::Setup(format!("worker pool: {e}")))?;
        let root = config.scratch_dir.clone().unwrap_or_else(std::env::temp_dir);
        std::fs::create_dir_all(&root).map_err(|e| Error::Setup(format!("{}: {e}", root.display())))?;
        let tracer_dir = tempfile::Builder::new()
            .prefix("coevo-tracer-")
            .tempdir_in(&root)
            .map_err(|e| Error::Setup(format!("scratch {}: {e}", root.display())))?;
        std::fs::write(tracer_dir.path().join("tracer.py"), TRACER_SOURCE)
            .map_err(|e| Error::Setup(format!("writing tracer: {e}")))?;
        Ok(Self {
            config,
            pool,
            cache: RwLock::new(HashMap::new()),
            launches: AtomicU64::new(0),
            tracer_dir,
        })
    }

    pub fn config(&self) -> &SandboxConfig {
        &self.config
    }

    /// Number of child processes started so far.
    pub fn launches(&self) -> u64 {
        self.launches.load(Ordering::SeqCst)
    }

    pub fn clear_cache(&self) {
        self.cache.write().expect("cache lock").clear();
    }

    /// Redirects retained failure directories, e.g. into a run directory.
    pub fn set_failures_dir(&mut self, dir: Option<PathBuf>) {
        self.config.failures_dir = dir;
    }

    pub fn profile(&self, name: &str) -> Result<&InterpreterProfile> {
        self.config
            .profiles
            .get(name)
            .ok_or_else(|| Error::Setup(format!("no interpreter profile named {name:?}")))
    }

    fn scratch_root(&self) -> PathBuf {
        self.config.scratch_dir.clone().unwrap_or_else(std::env::temp_dir)
    }

    fn tracer_path(&self) -> PathBuf {
        self.tracer_dir.path().join("tracer.py")
    }

    fn retain_target(&self, label: &str) -> Option<PathBuf> {
        if !self.config.retain_failures {
            return None;
        }
        let base = self
            .config
            .failures_dir
            .clone()
            .unwrap_or_else(|| self.scratch_root().join("failures"));
        let safe: String = label
            .chars()
            .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        Some(base.join(safe))
    }

    fn launch_with(
        &self,
        argv: &[String],
        profile: &InterpreterProfile,
        script: &str,
        label: &str,
    ) -> exec::Finished {
        self.launches.fetch_add(1, Ordering::SeqCst);
        let tracer = self.tracer_path();
        let launch = Launch {
            argv,
            script_name: &profile.script_name,
            tracer: Some(&tracer),
            assertion_marker: &profile.assertion_marker,
            isolate_network: self.config.isolate_network,
        };
        run_script(
            script,
            &launch,
            self.config.limits(),
            &self.scratch_root(),
            self.retain_target(label),
        )
    }

    /// Runs the program followed by the single assertion in a fresh child.
    pub fn run_pair(&self, program_source: &str, assertion: &str, profile: &str) -> ExecOutcome {
        match self.profile(profile) {
            Ok(p) => self.run_pair_labeled(program_source, assertion, p, "pair"),
            Err(e) => ExecOutcome {
                status: ExecStatus::SetupError,
                wall_ms: 0,
                detail: e.to_string(),
            },
        }
    }

    fn run_pair_labeled(
        &self,
        program_source: &str,
        assertion: &str,
        profile: &InterpreterProfile,
        label: &str,
    ) -> ExecOutcome {
        let script = combined_script(program_source, assertion);
        self.launch_with(&profile.interpreter_cmd, profile, &script, label)
            .outcome
    }

    /// Outcome matrix for every (program, test) pair. Malformed programs are
    /// never executed and fail everything. Any setup error aborts with a run
    /// fault instead of being recorded as a failed pair.
    pub fn cross_evaluate(
        &self,
        programs: &[CandidateProgram],
        tests: &[TestCase],
        profile: &str,
    ) -> Result<EvalMatrix> {
        if programs.is_empty() || tests.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "cross evaluation needs programs and tests, got {}×{}",
                programs.len(),
                tests.len()
            )));
        }
        let profile = self.profile(profile)?;
        let mut matrix = EvalMatrix::new(
            programs.iter().map(|p| p.id.clone()).collect(),
            tests.iter().map(|t| t.id.clone()).collect(),
        );

        let mut pending = Vec::new();
        {
            let cache = self.cache.read().expect("cache lock");
            for (i, p) in programs.iter().enumerate() {
                if p.malformed {
                    continue;
                }
                for (j, t) in tests.iter().enumerate() {
                    let key = PairKey::new(p, t);
                    match cache.get(&key) {
                        Some(o) => matrix.set(i, j, o.passed()),
                        None => pending.push((i, j, key)),
                    }
                }
            }
        }

        let fresh: Vec<(usize, usize, PairKey, ExecOutcome)> = self.pool.install(|| {
            pending
                .into_par_iter()
                .map(|(i, j, key)| {
                    let label = format!("{}__{}", programs[i].id, tests[j].id);
                    let o = self.run_pair_labeled(
                        &programs[i].source,
                        &tests[j].assertion,
                        profile,
                        &label,
                    );
                    (i, j, key, o)
                })
                .collect()
        });

        if let Some((_, _, key, o)) = fresh.iter().find(|f| f.3.status == ExecStatus::SetupError) {
            return Err(Error::Setup(format!(
                "{} × {}: {}",
                key.program_id, key.test_id, o.detail
            )));
        }
        let mut cache = self.cache.write().expect("cache lock");
        for (i, j, key, o) in fresh {
            matrix.set(i, j, o.passed());
            cache.insert(key, o);
        }
        Ok(matrix)
    }

    /// Union of lines executed by each test under the profile's tracer. When
    /// no tracer is configured, or it misbehaves, the report is degraded and
    /// marks the whole entry-point span as covered.
    pub fn line_coverage(
        &self,
        program: &CandidateProgram,
        tests: &[TestCase],
        entry_point: &str,
        profile: &str,
    ) -> CoverageReport {
        let span = function_span(&program.source, entry_point);
        if tests.is_empty() {
            return CoverageReport {
                program_id: program.id.clone(),
                executed_lines: BTreeSet::new(),
                function_span: span,
                degraded: false,
            };
        }
        let Ok(profile) = self.profile(profile) else {
            return CoverageReport::degraded(&program.id, span);
        };
        let Some(trace_cmd) = profile.trace_cmd.as_ref().filter(|c| !c.is_empty()) else {
            return CoverageReport::degraded(&program.id, span);
        };
        let line_count = program.source.lines().count();
        let runs: Vec<Option<BTreeSet<usize>>> = self.pool.install(|| {
            tests
                .par_iter()
                .map(|t| {
                    let script = combined_script(&program.source, &t.assertion);
                    let done = self.launch_with(trace_cmd, profile, &script, "trace");
                    match done.outcome.status {
                        ExecStatus::SetupError => None,
                        ExecStatus::Timeout => Some(BTreeSet::new()),
                        _ => done
                            .stdout
                            .lines()
                            .filter(|l| !l.trim().is_empty())
                            .map(|l| l.trim().parse::<usize>().ok())
                            .collect::<Option<BTreeSet<usize>>>(),
                    }
                })
                .collect()
        });
        let mut executed = BTreeSet::new();
        for run in runs {
            match run {
                Some(lines) => executed.extend(lines.into_iter().filter(|&n| n >= 1 && n <= line_count)),
                None => return CoverageReport::degraded(&program.id, span),
            }
        }
        CoverageReport {
            program_id: program.id.clone(),
            executed_lines: executed,
            function_span: span,
            degraded: false,
        }
    }
}

/// Scratch directory used for retained failures inside a run directory.
pub fn failures_dir_for(run_dir: &Path) -> PathBuf {
    run_dir.join("failures")
}
