//! C ABI over `coevo`.
//!
//! Every fallible function returns a [`CoevoStatus`]; on failure the message
//! is available from [`coevo_last_error_message`] on the same thread until
//! the next failing call. Strings returned through out-pointers are owned by
//! the caller and released with [`coevo_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use coevo::config::{Config, ProviderKind};
use coevo::engine::{Engine, RunDir};
use coevo::evolution::{crossover_rate, SchedulerConfig};
use coevo::metrics::{program_confidence, test_discrimination};
use coevo::{EvalMatrix, Error, Problem};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoevoStatus {
    Ok = 0,
    InvalidArgument = 1,
    Io = 2,
    RunFault = 3,
    Provider = 4,
    Sandbox = 5,
    Panic = 6,
}

/// Opaque engine handle.
pub struct CoevoEngine {
    config: Config,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CoevoStatus {
    match e {
        Error::Io { .. } | Error::ScriptLoad { .. } => CoevoStatus::Io,
        Error::Provider { .. } | Error::Protocol(_) | Error::Unscripted { .. } | Error::ScriptExhausted { .. } => {
            CoevoStatus::Provider
        }
        Error::Setup(_) => CoevoStatus::Sandbox,
        Error::RunFault(_) => CoevoStatus::RunFault,
        _ => CoevoStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (CoevoStatus, String)>) -> CoevoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CoevoStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("panic inside coevo".into());
            CoevoStatus::Panic
        }
    }
}

fn fail(e: Error) -> (CoevoStatus, String) {
    (status_of(&e), e.to_string())
}

fn invalid(message: &str) -> (CoevoStatus, String) {
    (CoevoStatus::InvalidArgument, message.to_string())
}

unsafe fn read_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, (CoevoStatus, String)> {
    if p.is_null() {
        return Err(invalid(&format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(&format!("{name} is not UTF-8")))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn coevo_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn coevo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Crossover rate of iteration `r`.
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn coevo_crossover_rate(
    r: u32,
    x_init: f64,
    x_final: f64,
    max_iter: u32,
    out: *mut f64,
) -> CoevoStatus {
    guard(|| {
        if out.is_null() {
            return Err(invalid("out is null"));
        }
        let cfg = SchedulerConfig {
            x_init,
            x_final,
            max_iter,
        };
        *out = crossover_rate(r, &cfg).map_err(fail)?;
        Ok(())
    })
}

/// Binary entropy of a pass rate.
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn coevo_test_discrimination(pass_rate: f64, out: *mut f64) -> CoevoStatus {
    guard(|| {
        if out.is_null() {
            return Err(invalid("out is null"));
        }
        *out = test_discrimination(pass_rate).map_err(fail)?;
        Ok(())
    })
}

/// Consensus confidence of each row of a row-major 0/1 matrix.
///
/// # Safety
/// `bits` must point to `rows * cols` bytes and `out` to `rows` doubles.
#[no_mangle]
pub unsafe extern "C" fn coevo_program_confidence(
    bits: *const u8,
    rows: usize,
    cols: usize,
    out: *mut f64,
) -> CoevoStatus {
    guard(|| {
        if rows == 0 {
            return Ok(());
        }
        if bits.is_null() || out.is_null() {
            return Err(invalid("bits or out is null"));
        }
        let len = rows.checked_mul(cols).ok_or_else(|| invalid("matrix too large"))?;
        let data = std::slice::from_raw_parts(bits, len);
        let table: Vec<Vec<bool>> = (0..rows)
            .map(|i| data[i * cols..(i + 1) * cols].iter().map(|&b| b != 0).collect())
            .collect();
        let m = EvalMatrix::from_rows(&table).map_err(fail)?;
        let conf = program_confidence(&m);
        std::slice::from_raw_parts_mut(out, rows).copy_from_slice(&conf);
        Ok(())
    })
}

/// Creates an engine from a TOML configuration (null for defaults).
///
/// # Safety
/// `config_toml` must be null or a nul-terminated string; `out` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn coevo_engine_new(config_toml: *const c_char, out: *mut *mut CoevoEngine) -> CoevoStatus {
    guard(|| {
        if out.is_null() {
            return Err(invalid("out is null"));
        }
        let table = if config_toml.is_null() {
            None
        } else {
            let text = read_str(config_toml, "config_toml")?;
            Some(
                text.parse::<toml::Table>()
                    .map_err(|e| invalid(&format!("config: {e}")))?,
            )
        };
        let config = Config::resolve_table(table, &[]).map_err(fail)?;
        *out = Box::into_raw(Box::new(CoevoEngine { config }));
        Ok(())
    })
}

/// Runs the engine on one problem (a JSON object). With a non-null
/// `script_path` the scripted provider replays that file; otherwise the
/// configured provider is used. With a non-null `out_dir` the run directory
/// is written there. On success `*result_json` receives the run result.
///
/// # Safety
/// `engine` must come from [`coevo_engine_new`]; string arguments must be
/// null or nul-terminated; `result_json` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn coevo_engine_run(
    engine: *const CoevoEngine,
    problem_json: *const c_char,
    script_path: *const c_char,
    out_dir: *const c_char,
    result_json: *mut *mut c_char,
) -> CoevoStatus {
    guard(|| {
        if engine.is_null() || result_json.is_null() {
            return Err(invalid("engine or result_json is null"));
        }
        let mut config = (*engine).config.clone();
        let problem: Problem = serde_json::from_str(read_str(problem_json, "problem_json")?)
            .map_err(|e| invalid(&format!("problem: {e}")))?;
        if !script_path.is_null() {
            config.provider.kind = ProviderKind::Scripted;
            config.provider.script = Some(PathBuf::from(read_str(script_path, "script_path")?));
        }
        let gateway = config.build_gateway().map_err(fail)?;
        let prompts = config.build_prompts().map_err(fail)?;
        let sandbox = config.build_sandbox().map_err(fail)?;
        let dir = if out_dir.is_null() {
            None
        } else {
            let d = RunDir::create(read_str(out_dir, "out_dir")?).map_err(fail)?;
            d.write_config_snapshot(&config.to_toml()).map_err(fail)?;
            Some(d)
        };
        let engine = Engine::new(config.engine.clone(), &gateway, &sandbox, &prompts).map_err(fail)?;
        let result = engine.run(&problem, dir.as_ref()).map_err(fail)?;
        let json = serde_json::to_string(&result).map_err(|e| fail(e.into()))?;
        *result_json = CString::new(json).map_err(|_| invalid("result contains nul"))?.into_raw();
        Ok(())
    })
}

/// Releases an engine. Null is ignored.
///
/// # Safety
/// `engine` must be null or come from [`coevo_engine_new`], and not be
/// used afterwards.
#[no_mangle]
pub unsafe extern "C" fn coevo_engine_free(engine: *mut CoevoEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string returned through an out-pointer of this
/// library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn coevo_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
