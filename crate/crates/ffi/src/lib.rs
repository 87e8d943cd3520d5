//! C ABI for the relay incentive simulator.
//!
//! The surface follows the opaque-handle pattern: configs and results are
//! heap objects owned by Rust, reachable from C only through pointers, and
//! every fallible call returns a [`FasterStatus`] code. The most recent
//! error's message is kept per thread and can be copied out with
//! [`faster_last_error`]. The matching header (`include/faster.h`) is
//! generated by cbindgen at build time.
//!
//! Every pointer-taking function checks for null and returns
//! `FASTER_STATUS_NULL_ARGUMENT` (or null) instead of crashing, but passing
//! a pointer that was freed or that came from a different allocator is
//! still undefined behavior, as usual for C APIs.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use faster_core::config::{apply, parse_config};
use faster_core::metrics::{run_experiment, RunSummary};
use faster_core::sim::{DropCounts, SimConfig, SimResult, Simulation};

/// Result code of a C-ABI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FasterStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ConfigError = 3,
    RunError = 4,
    IoError = 5,
    OutOfRange = 6,
}

/// Drop reasons, mirroring the simulator's counters.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FasterDropReason {
    NoRoute = 0,
    CannotAfford = 1,
    RelayRefused = 2,
    NegativePayoff = 3,
    NodeDied = 4,
}

/// One time-series record: a node's state at the end of a tick.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FasterTimeSeriesRow {
    pub tick: u64,
    pub node_id: u32,
    pub battery_j: f64,
    pub richness: u64,
    /// 1 while the node is alive, 0 once its battery is exhausted.
    pub alive: u8,
}

/// Opaque simulation configuration handle.
pub struct FasterConfig {
    inner: SimConfig,
}

/// Opaque finished-run handle.
pub struct FasterResult {
    result: SimResult,
    summary: RunSummary,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<Vec<u8>>) {
    let stored = CString::new(message).unwrap_or_else(|_| CString::new("invalid error").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(stored));
}

fn fail(status: FasterStatus, message: impl std::fmt::Display) -> FasterStatus {
    set_error(message.to_string());
    status
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len` bytes) and returns the full message
/// length in bytes excluding the terminator. Returns 0 when no error has
/// been recorded. `buf` may be null to query the length.
///
/// # Safety
/// `buf` must point to at least `len` writable bytes, or be null.
#[no_mangle]
pub unsafe extern "C" fn faster_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let slot = slot.borrow();
        let Some(message) = slot.as_ref() else {
            return 0;
        };
        let bytes = message.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// A fresh configuration with the reference defaults. Free with
/// [`faster_config_free`].
#[no_mangle]
pub extern "C" fn faster_config_new() -> *mut FasterConfig {
    Box::into_raw(Box::new(FasterConfig {
        inner: SimConfig::default(),
    }))
}

unsafe fn utf8_arg<'a>(ptr: *const c_char) -> Result<&'a str, FasterStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(FasterStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        FasterStatus::InvalidUtf8
    })
}

/// Loads a `key = value` config file. Returns null and records the error
/// when the file is missing or malformed.
///
/// # Safety
/// `path` must be a valid NUL-terminated string or null.
#[no_mangle]
pub unsafe extern "C" fn faster_config_load(path: *const c_char) -> *mut FasterConfig {
    let Ok(path) = utf8_arg(path) else {
        return std::ptr::null_mut();
    };
    match parse_config(Path::new(path)) {
        Ok(inner) => Box::into_raw(Box::new(FasterConfig { inner })),
        Err(e) => {
            set_error(e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Sets one configuration key, using the same grammar as the config file
/// (e.g. `faster_config_set(cfg, "mode", "baseline")`).
///
/// # Safety
/// `config` must be a live handle; `key`/`value` must be valid C strings.
#[no_mangle]
pub unsafe extern "C" fn faster_config_set(
    config: *mut FasterConfig,
    key: *const c_char,
    value: *const c_char,
) -> FasterStatus {
    let Some(config) = config.as_mut() else {
        return fail(FasterStatus::NullArgument, "null config handle");
    };
    let (key, value) = match (utf8_arg(key), utf8_arg(value)) {
        (Ok(k), Ok(v)) => (k, v),
        (Err(s), _) | (_, Err(s)) => return s,
    };
    match apply(&mut config.inner, key, value, 0) {
        Ok(()) => FasterStatus::Ok,
        Err(e) => fail(FasterStatus::ConfigError, e),
    }
}

/// # Safety
/// `config` must be a handle from this library, not yet freed; null is a
/// no-op.
#[no_mangle]
pub unsafe extern "C" fn faster_config_free(config: *mut FasterConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs the configured simulation to completion. Returns null and records
/// the error if the configuration is invalid. Free the result with
/// [`faster_result_free`].
///
/// # Safety
/// `config` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn faster_simulate(config: *const FasterConfig) -> *mut FasterResult {
    let Some(config) = config.as_ref() else {
        set_error("null config handle");
        return std::ptr::null_mut();
    };
    match Simulation::run(config.inner.clone()) {
        Ok(result) => {
            let summary = RunSummary::from_result(&result);
            Box::into_raw(Box::new(FasterResult { result, summary }))
        }
        Err(e) => {
            set_error(e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Runs the simulation and writes the CSV outputs (timeseries, summary,
/// plot matrices, optionally the packet log) into `out_dir`.
///
/// # Safety
/// `config` must be a live handle; `out_dir` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn faster_run_experiment(
    config: *const FasterConfig,
    out_dir: *const c_char,
    packet_log: bool,
) -> FasterStatus {
    let Some(config) = config.as_ref() else {
        return fail(FasterStatus::NullArgument, "null config handle");
    };
    let out_dir = match utf8_arg(out_dir) {
        Ok(d) => d,
        Err(s) => return s,
    };
    match run_experiment(config.inner.clone(), Path::new(out_dir), packet_log) {
        Ok(_) => FasterStatus::Ok,
        Err(faster_core::metrics::RunError::Config(e)) => fail(FasterStatus::ConfigError, e),
        Err(faster_core::metrics::RunError::Io(e)) => fail(FasterStatus::IoError, e),
    }
}

/// # Safety
/// `result` must be a handle from this library, not yet freed; null is a
/// no-op.
#[no_mangle]
pub unsafe extern "C" fn faster_result_free(result: *mut FasterResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Number of time-series rows in the result.
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn faster_result_rows(result: *const FasterResult) -> u64 {
    result
        .as_ref()
        .map_or(0, |r| r.result.time_series.len() as u64)
}

/// Copies time-series row `index` into `out`.
///
/// # Safety
/// `result` must be a live handle; `out` must point to a writable row.
#[no_mangle]
pub unsafe extern "C" fn faster_result_row(
    result: *const FasterResult,
    index: u64,
    out: *mut FasterTimeSeriesRow,
) -> FasterStatus {
    let Some(handle) = result.as_ref() else {
        return fail(FasterStatus::NullArgument, "null result handle");
    };
    if out.is_null() {
        return fail(FasterStatus::NullArgument, "null output row");
    }
    let Some(row) = handle.result.time_series.get(index as usize) else {
        return fail(
            FasterStatus::OutOfRange,
            format!("row {index} out of range"),
        );
    };
    *out = FasterTimeSeriesRow {
        tick: row.tick,
        node_id: row.node_id.0,
        battery_j: row.battery,
        richness: row.richness,
        alive: row.alive as u8,
    };
    FasterStatus::Ok
}

/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn faster_result_sent(result: *const FasterResult) -> u64 {
    result.as_ref().map_or(0, |r| r.result.sent)
}

/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn faster_result_delivered(result: *const FasterResult) -> u64 {
    result.as_ref().map_or(0, |r| r.result.delivered)
}

/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn faster_result_dropped(result: *const FasterResult) -> u64 {
    result.as_ref().map_or(0, |r| r.result.dropped())
}

/// Count of drops with the given reason.
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn faster_result_drop_count(
    result: *const FasterResult,
    reason: FasterDropReason,
) -> u64 {
    let Some(handle) = result.as_ref() else {
        return 0;
    };
    let DropCounts {
        no_route,
        cannot_afford,
        relay_refused,
        negative_payoff,
        node_died,
    } = handle.result.drops;
    match reason {
        FasterDropReason::NoRoute => no_route,
        FasterDropReason::CannotAfford => cannot_afford,
        FasterDropReason::RelayRefused => relay_refused,
        FasterDropReason::NegativePayoff => negative_payoff,
        FasterDropReason::NodeDied => node_died,
    }
}

/// Delivered fraction of send attempts (0 when nothing was sent).
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn faster_result_delivery_rate(result: *const FasterResult) -> f64 {
    result.as_ref().map_or(0.0, |r| r.summary.delivery_rate)
}

/// Population standard deviation of final node richness.
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn faster_result_richness_stddev(result: *const FasterResult) -> f64 {
    result
        .as_ref()
        .map_or(0.0, |r| r.summary.richness_stddev_final)
}

/// Mean node lifetime in ticks (survivors count as ticks + 1).
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn faster_result_mean_lifetime(result: *const FasterResult) -> f64 {
    result.as_ref().map_or(0.0, |r| r.summary.mean_lifetime)
}
