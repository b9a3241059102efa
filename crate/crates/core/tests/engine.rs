mod common;

use coevo::engine::{EngineConfig, RunArtifacts};
use coevo::provider::{Matcher, Script, ScriptRecord};
use coevo::PromptKind;
use common::*;

fn config(seed: u64) -> EngineConfig {
    EngineConfig {
        seed,
        ..EngineConfig::default()
    }
}

#[test]
fn budget_counts_every_call() {
    let h = Harness::new(budget_script());
    let r = h.run(config(7), None).unwrap();
    assert_eq!(r.iterations_executed, 10);
    assert!(!r.stopped_early);
    assert_eq!(r.token_summary.program_generation_calls, 100);
    assert_eq!(r.token_summary.test_generation_calls, 10);
    assert_eq!(h.provider.calls_of(PromptKind::ProgramInit), 10);
    let cross = h.provider.calls_of(PromptKind::ProgramCrossover);
    let mutate = h.provider.calls_of(PromptKind::ProgramMutation);
    assert_eq!(cross + mutate, 90);
    // Schedule from 0 to 1 over ten iterations.
    let expected: u64 = (2..=10)
        .map(|r: u32| {
            let x = 0.5 * (1.0 + (std::f64::consts::PI * (r - 1) as f64 / 9.0).cos());
            ((1.0 - x) * 10.0).floor() as u64
        })
        .sum();
    assert_eq!(cross, expected);
    let augment = r.token_summary.per_kind["test_augment"];
    assert_eq!(augment.calls, 9);
    assert_eq!(augment.prompt_tokens, 900);
    assert_eq!(augment.estimated_calls, 0);
    assert_eq!(r.token_summary.per_kind["program_init"].estimated_calls, 10);
}

#[test]
fn replay_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_script(planted_script(), config(3), Some(a.path())).unwrap();
    run_script(planted_script(), config(3), Some(b.path())).unwrap();
    for f in ["result.json", "ledger.json", "best.src", "iter_4/matrix.bits"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn planted_solution_wins() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_script(planted_script(), config(11), Some(dir.path())).unwrap();
    assert_eq!(r.final_program.source, CORRECT);
    assert_eq!(r.final_program.born_iteration, 1);
    // The correct program is not the initial favourite.
    assert_eq!(r.history[0].best_id, "P001-000");
    assert_ne!(r.final_program.id, "P001-000");

    let art = RunArtifacts::open(dir.path()).unwrap();
    assert_eq!(art.iterations().unwrap(), (1..=10).collect::<Vec<_>>());
    let last = art.iteration(10).unwrap();
    assert_eq!(last.tests.len(), 9);
    assert_eq!(last.programs.len(), 10);
    assert!(last.programs.iter().all(|p| p.born_iteration == 1));
    assert!(!last.summary.selection_fallback);
    assert_eq!(std::fs::read_to_string(dir.path().join("best.src")).unwrap(), CORRECT);
}

#[test]
fn early_stop_after_frozen_fingerprints() {
    let h = Harness::new(stagnation_script());
    let r = h
        .run(
            EngineConfig {
                stop_n: Some(4),
                ..config(1)
            },
            None,
        )
        .unwrap();
    assert!(r.stopped_early);
    assert_eq!(r.iterations_executed, 7);
    assert_eq!(r.token_summary.program_generation_calls, 70);
    assert_eq!(r.token_summary.test_generation_calls, 7);
    assert_eq!(r.history[1].tests_added, 2);
    assert_eq!(r.history[2].tests_added, 2);
    assert_eq!(r.history[3].tests_added, 0);

    let full = run_script(stagnation_script(), config(1), None).unwrap();
    assert!(!full.stopped_early);
    assert_eq!(full.iterations_executed, 10);
    assert_eq!(full.token_summary.program_generation_calls, 100);
}

#[test]
fn unusable_initial_population_is_a_fault() {
    let dir = tempfile::tempdir().unwrap();
    let script = Script::new(vec![
        ScriptRecord::new(Matcher::Kind { kind: PromptKind::ProgramInit }, ""),
        ScriptRecord::new(Matcher::Kind { kind: PromptKind::TestInit }, asserts(1..=2)),
    ]);
    let err = run_script(script, config(0), Some(dir.path())).unwrap_err();
    assert!(err.to_string().contains("no viable initial population"), "{err}");
    let fault = RunArtifacts::open(dir.path()).unwrap().fault().unwrap();
    assert_eq!(fault.problem_id, "square");
    assert!(dir.path().join("ledger.json").exists());
}

#[test]
fn test_init_is_retried_once() {
    let script = Script::new(vec![
        ScriptRecord::new(Matcher::Kind { kind: PromptKind::ProgramInit }, code(CORRECT)),
        ScriptRecord::new(Matcher::Sequence { kind: PromptKind::TestInit, seq: 1 }, "nothing useful"),
        ScriptRecord::new(Matcher::Sequence { kind: PromptKind::TestInit, seq: 2 }, asserts(1..=2)),
        ScriptRecord::new(Matcher::Kind { kind: PromptKind::ProgramMutation }, code(CORRECT)),
        ScriptRecord::new(Matcher::Kind { kind: PromptKind::ProgramCrossover }, code(CORRECT)),
        ScriptRecord::new(Matcher::Kind { kind: PromptKind::TestAugment }, "no asserts"),
    ]);
    let r = run_script(
        script,
        EngineConfig {
            max_iter: 3,
            ..config(0)
        },
        None,
    )
    .unwrap();
    assert_eq!(r.token_summary.per_kind["test_init"].calls, 2);
    assert!(r.history[1..].iter().all(|s| s.augmentation_skipped));
}

#[test]
fn unscripted_offspring_fault_the_run() {
    let script = Script::new(vec![
        ScriptRecord::new(Matcher::Kind { kind: PromptKind::ProgramInit }, code(CORRECT)),
        ScriptRecord::new(Matcher::Kind { kind: PromptKind::TestInit }, asserts(1..=2)),
    ]);
    let err = run_script(script, config(0), None).unwrap_err();
    assert!(err.to_string().contains("every offspring"), "{err}");
}

#[test]
fn generation_invariants_hold_step_by_step() {
    use coevo::engine::Engine;
    let seq = |kind, n: u64, text: String| ScriptRecord::new(Matcher::Sequence { kind, seq: n }, text);
    let kind = |kind, text: String| ScriptRecord::new(Matcher::Kind { kind }, text);
    let mut records: Vec<ScriptRecord> = PLANTED_ORDER
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let src = w.map(wrong).unwrap_or_else(|| CORRECT.to_string());
            seq(PromptKind::ProgramInit, i as u64 + 1, code(&src))
        })
        .collect();
    records.extend([
        kind(PromptKind::ProgramCrossover, code(&wrong(2))),
        kind(PromptKind::ProgramMutation, "no code here ```\n\n```".into()),
        kind(PromptKind::TestInit, asserts(1..=3)),
        kind(PromptKind::TestAugment, asserts(1..=9)),
    ]);
    let h = Harness::new(Script::new(records));
    let cfg = EngineConfig {
        max_iter: 5,
        ..config(5)
    };
    let engine = Engine::new(cfg, &h.gateway, &h.sandbox, &h.prompts).unwrap();
    let problem = square_problem();
    let mut state = engine.initialize(&problem).unwrap();
    let check = |state: &coevo::engine::RunState| {
        assert_eq!(state.programs.len(), 10);
        assert!(!state.tests.is_empty());
        assert_eq!(state.matrix.rows(), state.programs.len());
        assert_eq!(state.matrix.cols(), state.tests.len());
        let best = state.best.fitness_or_zero();
        for p in &state.programs {
            assert!(p.fitness_or_zero() <= best, "{} beats best {}", p.id, state.best.id);
        }
    };
    check(&state);
    for r in 2..=5 {
        engine.evolve_programs(&problem, &mut state, r).unwrap();
        check(&state);
        engine.evolve_tests(&problem, &mut state, r).unwrap();
        check(&state);
    }
    assert_eq!(state.best.source, CORRECT);
}
