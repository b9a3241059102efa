//! The `coevo` command line: `run`, `bench` and `inspect`.
//!
//! Exit codes: 0 success, 1 run fault, 2 usage or configuration error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{Config, Override};
use crate::engine::{Engine, RunArtifacts, RunDir};
use crate::error::Error;
use crate::harness::{emit_curves, emit_report, load_problems, parse_methods, run_bench, test_accuracy, BenchReport};
use crate::operators::PromptBuilder;
use crate::provider::Gateway;
use crate::sandbox::{failures_dir_for, Sandbox};
use crate::types::Problem;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAULT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "coevo", version, about = "Co-evolve programs and tests with a completion provider", args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve a solution for one problem (or every problem in the file).
    Run(CommonArgs),
    /// Compare selection methods under shared budgets.
    Bench(BenchArgs),
    /// Summarize a run directory.
    Inspect {
        run_dir: PathBuf,
    },
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Problem file, one JSON record per line.
    #[arg(long)]
    pub problems: Option<PathBuf>,
    #[arg(long)]
    pub problem_id: Option<String>,
    /// `scripted` or `live`.
    #[arg(long)]
    pub provider: Option<String>,
    /// Replay script for the scripted provider.
    #[arg(long)]
    pub script: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stop after this many unchanged generations.
    #[arg(long)]
    pub stop_n: Option<usize>,
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<u32>,
    #[arg(long)]
    pub tests_per_call: Option<usize>,
    /// Output root.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub run_id: Option<String>,
    #[arg(long)]
    pub timeout_ms: Option<u64>,
    /// Sandbox worker threads.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub template_dir: Option<PathBuf>,
    /// Keep scratch directories of non-passing pairs.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub retain_failures: Option<bool>,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated: sampling, sampling_filtering, codet, cocoevo.
    #[arg(long)]
    pub methods: Option<String>,
    #[arg(long)]
    pub repeats: Option<usize>,
}

/// Failure of a command with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_USAGE,
            message: e.to_string(),
        }
    }

    fn fault(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_FAULT,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn path_value(p: &Path) -> toml::Value {
    toml::Value::String(p.to_string_lossy().into_owned())
}

fn int(v: u64) -> CliResult<toml::Value> {
    i64::try_from(v)
        .map(toml::Value::Integer)
        .map_err(|_| CliError::usage(format!("{v} is out of range")))
}

impl CommonArgs {
    pub fn overrides(&self) -> CliResult<Vec<Override>> {
        let mut o: Vec<Override> = Vec::new();
        let mut put = |k: &str, v: toml::Value| o.push((k.to_string(), v));
        if let Some(p) = &self.problems {
            put("run.problems", path_value(p));
        }
        if let Some(id) = &self.problem_id {
            put("run.problem_id", id.clone().into());
        }
        if let Some(p) = &self.out {
            put("run.out", path_value(p));
        }
        if let Some(id) = &self.run_id {
            put("run.run_id", id.clone().into());
        }
        if let Some(k) = &self.provider {
            put("provider.kind", k.clone().into());
        }
        if let Some(p) = &self.script {
            put("provider.script", path_value(p));
        }
        if let Some(p) = &self.template_dir {
            put("provider.template_dir", path_value(p));
        }
        if let Some(e) = &self.endpoint {
            put("provider.live.endpoint", e.clone().into());
        }
        if let Some(m) = &self.model {
            put("provider.live.model", m.clone().into());
        }
        if let Some(s) = self.seed {
            put("engine.seed", int(s)?);
        }
        if let Some(n) = self.stop_n {
            put("engine.stop_n", int(n as u64)?);
        }
        if let Some(n) = self.population {
            put("engine.population_size", int(n as u64)?);
        }
        if let Some(n) = self.max_iter {
            put("engine.max_iter", int(n.into())?);
        }
        if let Some(n) = self.tests_per_call {
            put("engine.tests_per_call", int(n as u64)?);
        }
        if let Some(n) = self.timeout_ms {
            put("sandbox.timeout_ms", int(n)?);
        }
        if let Some(n) = self.workers {
            put("sandbox.workers", int(n as u64)?);
        }
        if let Some(b) = self.retain_failures {
            put("sandbox.retain_failures", b.into());
        }
        Ok(o)
    }

    pub fn resolve(&self, extra: Vec<Override>) -> CliResult<Config> {
        let mut o = self.overrides()?;
        o.extend(extra);
        Config::resolve(self.config.as_deref(), &o).map_err(CliError::usage)
    }
}

/// Everything a command needs after configuration is resolved.
struct Setup {
    config: Config,
    problems: Vec<Problem>,
    set_name: String,
    gateway: Gateway,
    sandbox: Sandbox,
    prompts: PromptBuilder,
}

fn setup(config: Config) -> CliResult<Setup> {
    let path = config
        .run
        .problems
        .clone()
        .ok_or_else(|| CliError::usage("no problem file given (--problems or run.problems)"))?;
    let set = load_problems(&path).map_err(CliError::usage)?;
    let problems = match &config.run.problem_id {
        Some(id) => vec![set
            .get(id)
            .cloned()
            .ok_or_else(|| CliError::usage(format!("problem {id} not found in {}", path.display())))?],
        None => set.problems.clone(),
    };
    if problems.is_empty() {
        return Err(CliError::usage(format!("{} holds no problems", path.display())));
    }
    let gateway = config.build_gateway().map_err(CliError::usage)?;
    let prompts = config.build_prompts().map_err(CliError::usage)?;
    let sandbox = config.build_sandbox().map_err(CliError::usage)?;
    Ok(Setup {
        config,
        problems,
        set_name: set.name,
        gateway,
        sandbox,
        prompts,
    })
}

fn run_dir_for(config: &Config, problem: &Problem, single: bool) -> PathBuf {
    let default_id = format!("{}-seed{}", problem.id, config.engine.seed);
    match (&config.run.run_id, single) {
        (Some(id), true) => config.run.out.join(id),
        (Some(id), false) => config.run.out.join(id).join(&problem.id),
        (None, _) => config.run.out.join(default_id),
    }
}

fn cmd_run(args: &CommonArgs, out: &mut dyn Write) -> CliResult<()> {
    let config = args.resolve(Vec::new())?;
    let mut s = setup(config)?;
    let single = s.problems.len() == 1;
    let mut faults = 0;
    for problem in &s.problems {
        let path = run_dir_for(&s.config, problem, single);
        let dir = RunDir::create(&path).map_err(CliError::usage)?;
        dir.write_config_snapshot(&s.config.to_toml()).map_err(CliError::usage)?;
        if s.config.sandbox.retain_failures {
            s.sandbox.set_failures_dir(Some(failures_dir_for(&path)));
        }
        let engine = Engine::new(s.config.engine.clone(), &s.gateway, &s.sandbox, &s.prompts).map_err(CliError::usage)?;
        match engine.run(problem, Some(&dir)) {
            Ok(r) => {
                let _ = writeln!(
                    out,
                    "{}\t{}\tfitness={:.4}\titerations={}{}",
                    problem.id,
                    path.join(crate::engine::BEST_FILE).display(),
                    r.final_program.fitness_or_zero(),
                    r.iterations_executed,
                    if r.stopped_early { "\tstopped_early" } else { "" }
                );
            }
            Err(e) => {
                faults += 1;
                let _ = writeln!(out, "{}\tFAULT\t{e}", problem.id);
            }
        }
    }
    if faults > 0 {
        return Err(CliError::fault(format!("{faults} run(s) faulted")));
    }
    Ok(())
}

fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut extra: Vec<Override> = Vec::new();
    if let Some(m) = &args.methods {
        let methods = parse_methods(m).map_err(CliError::usage)?;
        let list = methods.iter().map(|m| toml::Value::from(m.as_str())).collect();
        extra.push(("harness.methods".into(), toml::Value::Array(list)));
    }
    if let Some(r) = args.repeats {
        extra.push(("harness.repeats".into(), int(r as u64)?));
    }
    let config = args.common.resolve(extra)?;
    let s = setup(config)?;
    let id = s
        .config
        .run
        .run_id
        .clone()
        .unwrap_or_else(|| format!("bench-seed{}", s.config.engine.seed));
    let root = s.config.run.out.join(id);
    std::fs::create_dir_all(&root).map_err(|e| CliError::usage(Error::io(&root, e)))?;
    std::fs::write(root.join(crate::engine::CONFIG_SNAPSHOT), s.config.to_toml())
        .map_err(|e| CliError::usage(Error::io(&root, e)))?;
    let runs = root.join("runs");
    let set = crate::harness::ProblemSet {
        name: s.set_name.clone(),
        source_path: s.config.run.problems.clone().unwrap_or_default(),
        problems: s.problems.clone(),
    };
    let methods = s.config.harness.methods.clone();
    let results = run_bench(
        &set,
        &methods,
        &s.config.engine,
        &s.config.bench(Some(runs.clone())),
        &s.gateway,
        &s.sandbox,
        &s.prompts,
    )
    .map_err(CliError::fault)?;
    let report = BenchReport::new(&set.name, s.config.harness.repeats, s.config.engine.seed, &methods, results)
        .map_err(CliError::fault)?;
    emit_report(&report, &root).map_err(CliError::fault)?;
    let run_dirs: Vec<PathBuf> = set
        .problems
        .iter()
        .map(|p| runs.join(&p.id))
        .filter(|d| d.join(crate::engine::PROBLEM_FILE).exists() && d.join("iter_1").exists())
        .collect();
    emit_curves(&run_dirs, &s.sandbox, &root).map_err(CliError::fault)?;
    let _ = write!(out, "{}", report.table());
    let _ = writeln!(out, "report: {}", root.display());
    Ok(())
}

fn inspect_sandbox(art: &RunArtifacts) -> Sandbox {
    let from_snapshot = art
        .config_snapshot()
        .ok()
        .and_then(|t| t.parse::<toml::Table>().ok())
        .and_then(|t| Config::resolve_table(Some(t), &[]).ok())
        .map(|c| c.sandbox);
    Sandbox::new(from_snapshot.unwrap_or_default())
        .or_else(|_| Sandbox::new(Default::default()))
        .expect("default sandbox")
}

fn cmd_inspect(run_dir: &Path, out: &mut dyn Write) -> CliResult<()> {
    if !run_dir.is_dir() {
        return Err(CliError::usage(format!("{} is not a directory", run_dir.display())));
    }
    let art = RunArtifacts::open(run_dir).map_err(CliError::usage)?;
    let problem = art.problem().map_err(CliError::fault)?;
    let iterations = art.iterations().map_err(CliError::fault)?;
    let sandbox = problem.reference_solution.as_ref().map(|_| inspect_sandbox(&art));
    let _ = writeln!(out, "run {}  problem {}", run_dir.display(), problem.id);
    let _ = writeln!(
        out,
        "{:>4}  {:<10} {:>10} {:>8} {:>6} {:>4} {:>4} {:>8}",
        "iter", "best", "fitness", "programs", "tests", "Nc", "Nm", "test_acc"
    );
    for r in iterations {
        let snap = art.iteration(r).map_err(CliError::fault)?;
        let s = &snap.summary;
        let (nc, nm) = s
            .plan
            .map(|p| (p.crossover_count.to_string(), p.mutation_count.to_string()))
            .unwrap_or(("-".into(), "-".into()));
        let acc = match &sandbox {
            Some(sb) if !snap.tests.is_empty() => test_accuracy(&snap.tests, &problem, sb)
                .map(|a| format!("{a:.3}"))
                .map_err(CliError::fault)?,
            _ => "-".into(),
        };
        let _ = writeln!(
            out,
            "{:>4}  {:<10} {:>10.4} {:>8} {:>6} {:>4} {:>4} {:>8}",
            s.iteration, s.best_id, s.best_fitness, s.program_count, s.test_count, nc, nm, acc
        );
    }
    let ledger = art.ledger().map_err(CliError::fault)?;
    let _ = writeln!(
        out,
        "tokens  calls={} failed={} prompt={} completion={} (program calls {}, test calls {})",
        ledger.total.calls,
        ledger.total.failed_calls,
        ledger.total.prompt_tokens,
        ledger.total.completion_tokens,
        ledger.program_generation_calls,
        ledger.test_generation_calls
    );
    if let Some(fault) = art.fault() {
        let _ = writeln!(out, "fault at iteration {}: {}", fault.iteration, fault.error);
    } else {
        let result = art.result().map_err(CliError::fault)?;
        let _ = writeln!(
            out,
            "final {}  iterations={}  stopped_early={}",
            result.final_program.id, result.iterations_executed, result.stopped_early
        );
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, out),
        Command::Bench(a) => cmd_bench(a, out),
        Command::Inspect { run_dir } => cmd_inspect(run_dir, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}
