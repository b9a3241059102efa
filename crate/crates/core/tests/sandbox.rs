use std::time::Instant;

use coevo::sandbox::{ExecStatus, Sandbox, SandboxConfig};
use coevo::{CandidateProgram, ProgramOrigin, TestCase, TestOrigin};

fn sandbox_with(timeout_ms: u64) -> (Sandbox, tempfile::TempDir) {
    let scratch = tempfile::tempdir().unwrap();
    let cfg = SandboxConfig {
        timeout_ms,
        scratch_dir: Some(scratch.path().to_path_buf()),
        workers: 4,
        ..SandboxConfig::default()
    };
    (Sandbox::new(cfg).unwrap(), scratch)
}

fn prog(id: &str, src: &str) -> CandidateProgram {
    CandidateProgram::new(id, src, ProgramOrigin::Init, vec![], 1).unwrap()
}

fn test(id: &str, a: &str) -> TestCase {
    TestCase::new(id, a, TestOrigin::Init, 1).unwrap()
}

#[test]
fn pass_and_assertion_fail() {
    let (sb, _d) = sandbox_with(5_000);
    let p = "def f(x): return x";
    assert_eq!(sb.run_pair(p, "assert f(1) == 1", "python").status, ExecStatus::Pass);
    let fail = sb.run_pair(p, "assert f(1) == 2", "python");
    assert_eq!(fail.status, ExecStatus::AssertionFail);
    assert!(fail.detail.contains("AssertionError"));
    assert!(fail.detail.len() <= coevo::sandbox::DETAIL_LIMIT);
}

#[test]
fn runtime_error_is_not_assertion_fail() {
    let (sb, _d) = sandbox_with(5_000);
    let o = sb.run_pair("def f(x): return 1 // 0", "assert f(1) == 1", "python");
    assert_eq!(o.status, ExecStatus::RuntimeError);
    let o = sb.run_pair("def f(x) return", "assert f(1) == 1", "python");
    assert_eq!(o.status, ExecStatus::RuntimeError);
}

#[test]
fn infinite_loop_times_out_within_slack() {
    let (sb, _d) = sandbox_with(1_000);
    let started = Instant::now();
    let o = sb.run_pair("def f(x):\n    while True:\n        pass", "assert f(1) == 1", "python");
    assert_eq!(o.status, ExecStatus::Timeout);
    assert!(o.wall_ms >= 1_000, "{}", o.wall_ms);
    assert!(o.wall_ms <= 1_500, "{}", o.wall_ms);
    assert!(started.elapsed().as_millis() <= 1_600);
}

#[test]
fn missing_interpreter_is_setup_error() {
    let scratch = tempfile::tempdir().unwrap();
    let mut cfg = SandboxConfig {
        scratch_dir: Some(scratch.path().to_path_buf()),
        ..SandboxConfig::default()
    };
    cfg.profiles.get_mut("python").unwrap().interpreter_cmd =
        vec!["/nonexistent/python-xyz".into(), "{script}".into()];
    let sb = Sandbox::new(cfg).unwrap();
    assert_eq!(sb.run_pair("x = 1", "assert True", "python").status, ExecStatus::SetupError);
    let err = sb
        .cross_evaluate(&[prog("p", "x = 1")], &[test("t", "assert x == 1")], "python")
        .unwrap_err();
    assert!(err.to_string().contains("setup"), "{err}");
    assert_eq!(sb.run_pair("x = 1", "assert True", "cobol").status, ExecStatus::SetupError);
}

#[test]
fn cross_evaluate_matrix_and_cache() {
    let (sb, _d) = sandbox_with(5_000);
    let programs = vec![
        prog("good", "def sq(n):\n    return n * n"),
        prog("off", "def sq(n):\n    return n * n if n != 3 else 0"),
        prog("crash", "def sq(n):\n    raise ValueError('no')"),
    ];
    let tests = vec![
        test("t0", "assert sq(2) == 4"),
        test("t1", "assert sq(3) == 9"),
        test("t2", "assert sq(0) == 0"),
    ];
    let m = sb.cross_evaluate(&programs, &tests, "python").unwrap();
    assert_eq!(m.to_text(), "3 3\n111\n101\n000\n");
    let launches = sb.launches();
    assert_eq!(launches, 9);
    let again = sb.cross_evaluate(&programs, &tests, "python").unwrap();
    assert_eq!(again, m);
    assert_eq!(sb.launches(), launches, "cached pairs must not relaunch");

    // A changed source under the same id is re-executed.
    let mut changed = programs.clone();
    changed[2].source = "def sq(n):\n    return n ** 2".into();
    let m2 = sb.cross_evaluate(&changed, &tests, "python").unwrap();
    assert_eq!(m2.row_bits(2), vec![true, true, true]);
    assert_eq!(sb.launches(), launches + 3);
}

#[test]
fn malformed_programs_are_not_executed() {
    let (sb, _d) = sandbox_with(5_000);
    let ph = CandidateProgram::placeholder("ph", ProgramOrigin::Init, vec![], 1).unwrap();
    let m = sb
        .cross_evaluate(&[ph, prog("ok", "x = 1")], &[test("t", "assert x == 1")], "python")
        .unwrap();
    assert_eq!(m.to_text(), "2 1\n0\n1\n");
    assert_eq!(sb.launches(), 1);
}

#[test]
fn coverage_reports_unreached_branch() {
    let (sb, _d) = sandbox_with(5_000);
    let p = prog("p", "def f(x):\n    if x > 0:\n        return 1\n    return -1\n");
    let r = sb.line_coverage(&p, &[test("t", "assert f(5) == 1")], "f", "python");
    assert!(!r.degraded);
    assert_eq!(r.function_span, Some((1, 4)));
    assert!(r.executed_lines.contains(&2) && r.executed_lines.contains(&3));
    assert!(!r.executed_lines.contains(&4));
    assert!(r.executed_lines.iter().all(|&n| (1..=4).contains(&n)));

    let both = sb.line_coverage(
        &p,
        &[test("t", "assert f(5) == 1"), test("u", "assert f(-5) == -1")],
        "f",
        "python",
    );
    assert!(both.executed_lines.contains(&4));

    let empty = sb.line_coverage(&p, &[], "f", "python");
    assert!(empty.executed_lines.is_empty() && !empty.degraded);
}

#[test]
fn coverage_without_tracer_is_degraded() {
    let scratch = tempfile::tempdir().unwrap();
    let mut cfg = SandboxConfig {
        scratch_dir: Some(scratch.path().to_path_buf()),
        ..SandboxConfig::default()
    };
    cfg.profiles.get_mut("python").unwrap().trace_cmd = None;
    let sb = Sandbox::new(cfg).unwrap();
    let p = prog("p", "def f(x):\n    if x > 0:\n        return 1\n    return -1\n");
    let r = sb.line_coverage(&p, &[test("t", "assert f(5) == 1")], "f", "python");
    assert!(r.degraded);
    assert_eq!(r.executed_lines, [1, 2, 3, 4].into_iter().collect());
}

#[test]
fn retained_failures_land_in_failures_dir() {
    let scratch = tempfile::tempdir().unwrap();
    let failures = scratch.path().join("kept");
    let cfg = SandboxConfig {
        scratch_dir: Some(scratch.path().to_path_buf()),
        retain_failures: true,
        failures_dir: Some(failures.clone()),
        ..SandboxConfig::default()
    };
    let sb = Sandbox::new(cfg).unwrap();
    sb.cross_evaluate(
        &[prog("p1", "def f(): return 1")],
        &[test("t1", "assert f() == 1"), test("t2", "assert f() == 2")],
        "python",
    )
    .unwrap();
    let kept: Vec<_> = std::fs::read_dir(&failures)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(kept, vec!["p1__t2".to_string()]);
    assert!(failures.join("p1__t2/candidate.py").exists());
}

#[test]
fn cache_agrees_with_oracle_on_random_pairs() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let offsets: Vec<i64> = (0..10).map(|_| rng.gen_range(0..3)).collect();
    let cases: Vec<(i64, i64)> = (0..10).map(|_| (rng.gen_range(0..5), rng.gen_range(0..8))).collect();
    let programs: Vec<CandidateProgram> = offsets
        .iter()
        .enumerate()
        .map(|(i, k)| prog(&format!("p{i}"), &format!("def f(x):\n    return x + {k}")))
        .collect();
    let tests: Vec<TestCase> = cases
        .iter()
        .enumerate()
        .map(|(j, (a, b))| test(&format!("t{j}"), &format!("assert f({a}) == {b}")))
        .collect();

    let (sb, _d) = sandbox_with(5_000);
    let m = sb.cross_evaluate(&programs, &tests, "python").unwrap();
    assert_eq!(sb.launches(), 100);
    for (i, k) in offsets.iter().enumerate() {
        for (j, (a, b)) in cases.iter().enumerate() {
            assert_eq!(m.get(i, j), a + k == *b, "p{i} t{j}");
        }
    }

    // Random sub-populations come from the cache and keep their bits.
    for _ in 0..20 {
        let rows: Vec<usize> = (0..10).filter(|_| rng.gen_bool(0.5)).collect();
        let cols: Vec<usize> = (0..10).filter(|_| rng.gen_bool(0.5)).collect();
        let ps: Vec<_> = rows.iter().map(|&i| programs[i].clone()).collect();
        let ts: Vec<_> = cols.iter().map(|&j| tests[j].clone()).collect();
        let sub = sb.cross_evaluate(&ps, &ts, "python").unwrap();
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                assert_eq!(sub.get(a, b), m.get(i, j));
            }
        }
    }
    assert_eq!(sb.launches(), 100);

    // A fresh sandbox with no cache produces the same matrix.
    let (fresh, _d2) = sandbox_with(5_000);
    assert_eq!(fresh.cross_evaluate(&programs, &tests, "python").unwrap(), m);
}

#[test]
fn crash_and_allocation_are_runtime_errors() {
    let (sb, _d) = sandbox_with(5_000);
    let crash = sb.run_pair("import os\ndef f():\n    os.abort()", "assert f() is None", "python");
    assert_eq!(crash.status, ExecStatus::RuntimeError);
    assert!(crash.detail.contains("signal"), "{}", crash.detail);

    let big = sb.run_pair(
        "def f():\n    return bytearray(8 * 1024 ** 3)",
        "assert len(f()) > 0",
        "python",
    );
    assert_eq!(big.status, ExecStatus::RuntimeError);
    assert!(big.detail.contains("MemoryError"), "{}", big.detail);

    let deep = sb.run_pair("def f(n):\n    return f(n + 1)", "assert f(0) == 0", "python");
    assert_eq!(deep.status, ExecStatus::RuntimeError);
    assert!(deep.detail.contains("RecursionError"), "{}", deep.detail);

    // The sandbox still works afterwards.
    assert_eq!(sb.run_pair("x = 1", "assert x == 1", "python").status, ExecStatus::Pass);
}

fn process_alive(pid: &str) -> bool {
    match std::fs::read_to_string(format!("/proc/{pid}/stat")) {
        // Zombies are dead; they only wait for a reaper.
        Ok(stat) => !stat
            .rsplit_once(')')
            .is_some_and(|(_, rest)| rest.trim_start().starts_with('Z')),
        Err(_) => false,
    }
}

#[test]
fn forking_loop_is_killed_with_its_children() {
    let (sb, d) = sandbox_with(1_000);
    let pid_file = d.path().join("children.txt");
    let program = format!(
        "import os, time\ndef f():\n    pids = []\n    for _ in range(16):\n        pid = os.fork()\n        if pid == 0:\n            while True:\n                pass\n        pids.append(str(pid))\n    open({:?}, 'w').write(' '.join(pids))\n    while True:\n        time.sleep(0.05)",
        pid_file.display().to_string()
    );
    let o = sb.run_pair(&program, "assert f()", "python");
    assert_eq!(o.status, ExecStatus::Timeout);
    assert!(o.wall_ms <= 1_500, "{}", o.wall_ms);
    let pids = std::fs::read_to_string(&pid_file).unwrap();
    assert_eq!(pids.split_whitespace().count(), 16);
    std::thread::sleep(std::time::Duration::from_millis(200));
    let alive: Vec<&str> = pids.split_whitespace().filter(|p| process_alive(p)).collect();
    assert!(alive.is_empty(), "survivors: {alive:?}");
}
