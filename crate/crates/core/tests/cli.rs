use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn coevo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coevo"))
        .args(args)
        .env_remove("COEVO_API_KEY")
        .output()
        .unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn run_square(out: &Path, extra: &[&str]) -> Output {
    let problems = fixture("synthetic.jsonl");
    let script = fixture("synthetic_script.json");
    let mut args = vec![
        "run",
        "--problems",
        problems.to_str().unwrap(),
        "--problem-id",
        "square",
        "--provider",
        "scripted",
        "--script",
        script.to_str().unwrap(),
        "--population",
        "4",
        "--max-iter",
        "3",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    coevo(&args)
}

#[test]
fn run_twice_gives_identical_results() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let oa = run_square(a.path(), &[]);
    assert!(oa.status.success(), "{}", text(&oa.stderr));
    assert!(run_square(b.path(), &[]).status.success());
    let stdout = text(&oa.stdout);
    assert!(stdout.contains("square-seed7/best.src"), "{stdout}");
    assert!(stdout.contains("fitness="), "{stdout}");
    for f in ["result.json", "ledger.json", "config.snapshot"] {
        let x = std::fs::read_to_string(a.path().join("square-seed7").join(f)).unwrap();
        let y = std::fs::read_to_string(b.path().join("square-seed7").join(f)).unwrap();
        if f == "config.snapshot" {
            // Only the output root differs.
            assert_eq!(x.replace(a.path().to_str().unwrap(), "OUT"), y.replace(b.path().to_str().unwrap(), "OUT"));
        } else {
            assert_eq!(x, y, "{f}");
        }
    }
}

#[test]
fn snapshot_replays_the_run() {
    let a = tempfile::tempdir().unwrap();
    assert!(run_square(a.path(), &["--run-id", "first"]).status.success());
    let snapshot = a.path().join("first/config.snapshot");
    let snap = std::fs::read_to_string(&snapshot).unwrap();
    assert!(snap.contains("max_iter = 3"), "{snap}");
    let o = coevo(&["run", "--config", snapshot.to_str().unwrap(), "--run-id", "second"]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let x = std::fs::read_to_string(a.path().join("first/result.json")).unwrap();
    let y = std::fs::read_to_string(a.path().join("second/result.json")).unwrap();
    assert_eq!(x, y);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[engine]\nmax_iter = 2\npopulation_size = 3\n").unwrap();
    let o = run_square(dir.path(), &["--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let snap = std::fs::read_to_string(dir.path().join("square-seed7/config.snapshot")).unwrap();
    // --max-iter 3 and --population 4 beat the file.
    assert!(snap.contains("max_iter = 3") && snap.contains("population_size = 4"), "{snap}");
}

#[test]
fn missing_script_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = coevo(&[
        "run",
        "--problems",
        fixture("synthetic.jsonl").to_str().unwrap(),
        "--script",
        "/no/such/script.json",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("/no/such/script.json"), "{}", text(&o.stderr));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(coevo(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(coevo(&["run", "--seed", "x"]).status.code(), Some(2));
    assert_eq!(coevo(&["run"]).status.code(), Some(2));
    let o = coevo(&["bench", "--methods", "sampling,mbr"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("mbr"));
    let o = coevo(&["run", "--problems", fixture("synthetic.jsonl").to_str().unwrap(), "--provider", "live"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("COEVO_API_KEY"), "{}", text(&o.stderr));
    assert_eq!(coevo(&["--help"]).status.code(), Some(0));
}

#[test]
fn stop_n_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_square(dir.path(), &["--max-iter", "10", "--stop-n", "2"]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    assert!(text(&o.stdout).contains("stopped_early"));
    let result: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("square-seed7/result.json")).unwrap()).unwrap();
    assert_eq!(result["stopped_early"], true);
    assert!(result["iterations_executed"].as_u64().unwrap() < 10);
}

#[test]
fn unscripted_run_faults_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("s.json");
    std::fs::write(&script, "[]").unwrap();
    let o = coevo(&[
        "run",
        "--problems",
        fixture("synthetic.jsonl").to_str().unwrap(),
        "--problem-id",
        "square",
        "--script",
        script.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", text(&o.stderr));
    assert!(dir.path().join("square-seed0/fault.json").exists());
}

#[test]
fn inspect_renders_a_run() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_square(dir.path(), &[]).status.success());
    let run = dir.path().join("square-seed7");
    let o = coevo(&["inspect", run.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let s = text(&o.stdout);
    let lines: Vec<&str> = s.lines().collect();
    assert!(lines[1].contains("fitness") && lines[1].contains("test_acc"), "{s}");
    // Three iterations, the first without a plan.
    assert!(lines[2].trim_start().starts_with("1 ") && lines[2].contains(" - "), "{s}");
    assert!(lines[4].trim_start().starts_with("3 ") && lines[4].contains("1.000"), "{s}");
    assert!(s.contains("program calls 12, test calls 3"), "{s}");
    assert!(s.contains("iterations=3"), "{s}");
}

#[test]
fn inspect_diagnoses_bad_directories() {
    assert_eq!(coevo(&["inspect", "/no/such/run"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    assert!(run_square(dir.path(), &[]).status.success());
    let run = dir.path().join("square-seed7");
    std::fs::write(run.join("iter_2/programs.json"), "[{").unwrap();
    let o = coevo(&["inspect", run.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("iter_2"), "{}", text(&o.stderr));
}

#[test]
fn bench_emits_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[harness]\npool_size = 4\ntest_calls = 2\n[engine]\npopulation_size = 3\nmax_iter = 2\n").unwrap();
    let o = coevo(&[
        "bench",
        "--config",
        cfg.to_str().unwrap(),
        "--problems",
        fixture("synthetic.jsonl").to_str().unwrap(),
        "--script",
        fixture("synthetic_script.json").to_str().unwrap(),
        "--methods",
        "sampling,codet,coevo",
        "--repeats",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
        "--run-id",
        "b",
    ]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let stdout = text(&o.stdout);
    assert!(stdout.contains("cocoevo") && stdout.contains("100.00"), "{stdout}");
    let root = dir.path().join("b");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(root.join("summary.json")).unwrap()).unwrap();
    let methods = summary["methods"].as_array().unwrap();
    assert_eq!(methods.len(), 3);
    for m in methods {
        for key in ["method", "pass_at_1", "solved_per_repeat", "problems", "aborted", "avg_prompt_tokens", "avg_completion_tokens"] {
            assert!(m.get(key).is_some(), "missing {key}");
        }
        assert_eq!(m["problems"], 5);
    }
    assert_eq!(summary["results"].as_array().unwrap().len(), 15);
    assert_eq!(summary["repeats"], 2);
    assert!(std::fs::read_to_string(root.join("summary.txt")).unwrap().starts_with("method"));
    let csv = std::fs::read_to_string(root.join("curves/square.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "iteration,best_id,best_fitness,best_correct,test_accuracy");
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().nth(2).unwrap().ends_with(",1,1.0000"), "{csv}");
}
