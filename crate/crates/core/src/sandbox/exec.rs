//! One child process per (program, assertion) pair.

use std::fs::File;
use std::io::{Read, Seek, SeekFrom};
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::text::tail_truncate;

pub const DETAIL_LIMIT: usize = 2048;
const STDOUT_LIMIT: u64 = 1 << 20;
const FILE_SIZE_LIMIT: u64 = 64 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    Pass,
    AssertionFail,
    RuntimeError,
    Timeout,
    SetupError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecOutcome {
    pub status: ExecStatus,
    pub wall_ms: u64,
    /// Tail of the child's stderr (or the setup failure), at most 2 KiB.
    pub detail: String,
}

impl ExecOutcome {
    pub fn passed(&self) -> bool {
        self.status == ExecStatus::Pass
    }

    fn setup(detail: impl Into<String>) -> Self {
        Self {
            status: ExecStatus::SetupError,
            wall_ms: 0,
            detail: tail_truncate(&detail.into(), DETAIL_LIMIT),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecLimits {
    pub timeout_ms: u64,
    pub memory_mb: u64,
}

impl Default for ExecLimits {
    fn default() -> Self {
        Self {
            timeout_ms: 5_000,
            memory_mb: 512,
        }
    }
}

/// How to launch one script.
#[derive(Debug, Clone)]
pub(crate) struct Launch<'a> {
    /// argv template; `{script}` and `{tracer}` are substituted.
    pub argv: &'a [String],
    pub script_name: &'a str,
    pub tracer: Option<&'a Path>,
    pub assertion_marker: &'a str,
    pub isolate_network: bool,
}

/// Result of a launch, including the captured stdout for tracing runs.
pub(crate) struct Finished {
    pub outcome: ExecOutcome,
    pub stdout: String,
}

fn read_tail(path: &Path, max: u64) -> String {
    let Ok(mut f) = File::open(path) else {
        return String::new();
    };
    let len = f.metadata().map(|m| m.len()).unwrap_or(0);
    if len > max {
        let _ = f.seek(SeekFrom::Start(len - max));
    }
    let mut buf = Vec::new();
    let _ = f.take(max).read_to_end(&mut buf);
    String::from_utf8_lossy(&buf).into_owned()
}

fn set_limit(resource: libc::__rlimit_resource_t, value: u64) {
    let lim = libc::rlimit {
        rlim_cur: value as libc::rlim_t,
        rlim_max: value as libc::rlim_t,
    };
    // SAFETY: setrlimit only reads the struct we pass.
    unsafe {
        libc::setrlimit(resource, &lim);
    }
}

fn kill_group(pid: u32) {
    // SAFETY: signalling a process group we created; failures are ignored.
    unsafe {
        libc::killpg(pid as libc::pid_t, libc::SIGKILL);
    }
}

/// Writes `script` into a fresh directory under `scratch_root` and runs it.
/// The directory is removed afterwards unless `retain_to` is given and the
/// pair did not pass.
pub(crate) fn run_script(
    script: &str,
    launch: &Launch<'_>,
    limits: ExecLimits,
    scratch_root: &Path,
    retain_to: Option<PathBuf>,
) -> Finished {
    let setup = |d: String| Finished {
        outcome: ExecOutcome::setup(d),
        stdout: String::new(),
    };
    if launch.argv.is_empty() {
        return setup("empty interpreter command".into());
    }
    let dir = match tempfile::Builder::new().prefix("pair-").tempdir_in(scratch_root) {
        Ok(d) => d,
        Err(e) => return setup(format!("scratch {}: {e}", scratch_root.display())),
    };
    let script_path = dir.path().join(launch.script_name);
    if let Err(e) = std::fs::write(&script_path, script) {
        return setup(format!("writing {}: {e}", script_path.display()));
    }
    let out_path = dir.path().join(".stdout");
    let err_path = dir.path().join(".stderr");
    let (stdout, stderr) = match (File::create(&out_path), File::create(&err_path)) {
        (Ok(o), Ok(e)) => (o, e),
        (Err(e), _) | (_, Err(e)) => return setup(format!("creating output files: {e}")),
    };

    let script_arg = script_path.to_string_lossy().into_owned();
    let tracer_arg = launch
        .tracer
        .map(|p| p.to_string_lossy().into_owned())
        .unwrap_or_default();
    let argv: Vec<String> = launch
        .argv
        .iter()
        .map(|a| a.replace("{script}", &script_arg).replace("{tracer}", &tracer_arg))
        .collect();

    let mut cmd = Command::new(&argv[0]);
    cmd.args(&argv[1..])
        .current_dir(dir.path())
        .env_clear()
        .env("PATH", std::env::var_os("PATH").unwrap_or_else(|| "/usr/bin:/bin".into()))
        .env("HOME", dir.path())
        .env("PYTHONDONTWRITEBYTECODE", "1")
        .env("PYTHONHASHSEED", "0")
        .stdin(Stdio::null())
        .stdout(stdout)
        .stderr(stderr);
    let memory_bytes = limits.memory_mb.saturating_mul(1 << 20);
    let isolate = launch.isolate_network;
    // SAFETY: only async-signal-safe libc calls run between fork and exec.
    unsafe {
        cmd.pre_exec(move || {
            libc::setpgid(0, 0);
            if memory_bytes > 0 {
                set_limit(libc::RLIMIT_AS, memory_bytes);
            }
            set_limit(libc::RLIMIT_CORE, 0);
            set_limit(libc::RLIMIT_FSIZE, FILE_SIZE_LIMIT);
            if isolate {
                // Needs CAP_SYS_ADMIN; without it the child keeps the host network.
                libc::unshare(libc::CLONE_NEWNET);
            }
            Ok(())
        });
    }

    let started = Instant::now();
    let mut child = match cmd.spawn() {
        Ok(c) => c,
        Err(e) => return setup(format!("launching {:?}: {e}", argv[0])),
    };
    let pid = child.id();
    let timeout = Duration::from_millis(limits.timeout_ms);
    let mut timed_out = false;
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break Some(status),
            Ok(None) => {}
            Err(_) => break None,
        }
        if started.elapsed() >= timeout {
            kill_group(pid);
            timed_out = true;
            let _ = child.wait();
            break None;
        }
        std::thread::sleep(Duration::from_millis(2));
    };
    let wall_ms = started.elapsed().as_millis() as u64;
    // Reap anything the script left behind in its group.
    kill_group(pid);

    let stderr_text = read_tail(&err_path, DETAIL_LIMIT as u64 * 4);
    let stdout_text = read_tail(&out_path, STDOUT_LIMIT);
    let status_kind = match (timed_out, status) {
        (true, _) => ExecStatus::Timeout,
        (false, Some(s)) if s.success() => ExecStatus::Pass,
        (false, Some(s)) if s.signal().is_none() && has_marker(&stderr_text, launch.assertion_marker) => {
            ExecStatus::AssertionFail
        }
        _ => ExecStatus::RuntimeError,
    };
    let detail = if timed_out {
        format!("timed out after {} ms", limits.timeout_ms)
    } else {
        match status.and_then(|s| s.signal()) {
            Some(sig) => format!("killed by signal {sig}\n{stderr_text}"),
            None => stderr_text,
        }
    };
    let outcome = ExecOutcome {
        status: status_kind,
        wall_ms,
        detail: tail_truncate(&detail, DETAIL_LIMIT),
    };

    if let Some(target) = retain_to.filter(|_| outcome.status != ExecStatus::Pass) {
        if let Some(parent) = target.parent() {
            let _ = std::fs::create_dir_all(parent);
        }
        let kept = dir.keep();
        if std::fs::rename(&kept, &target).is_err() {
            let _ = std::fs::remove_dir_all(&kept);
        }
    }
    Finished {
        outcome,
        stdout: stdout_text,
    }
}

fn has_marker(stderr: &str, marker: &str) -> bool {
    !marker.is_empty() && stderr.lines().any(|l| l.trim_start().starts_with(marker))
}
