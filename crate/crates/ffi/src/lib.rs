//! C ABI over the `mrsched` library.
//!
//! Every fallible call returns an [`MrsStatus`]; on failure the message is
//! available from [`mrs_last_error`] on the same thread. Handles are opaque
//! and must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use mrsched::metrics::{compute_metrics, MetricsReport, Trim, DEFAULT_ABNORMAL_THRESHOLD};
use mrsched::model::SystemConfig;
use mrsched::moo::{ga_solve_problem, GaParams, ParetoSet, WindowProblem};
use mrsched::policies::PolicySpec;
use mrsched::simulator::{run_simulation, write_event_log, SimulationOutput};
use mrsched::trace::{parse_trace, read_trace_file, TraceFormat, Workload};
use mrsched::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MrsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    OutOfRange = 5,
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn status_of(e: &Error) -> MrsStatus {
    match e {
        Error::Parse { .. } | Error::Json(_) | Error::Csv(_) => MrsStatus::Parse,
        Error::Io(_) => MrsStatus::Io,
        _ => MrsStatus::InvalidArgument,
    }
}

fn fail(status: MrsStatus, msg: impl Into<String>) -> MrsStatus {
    set_error(msg);
    status
}

/// Runs `f`, converting panics and errors into a status code.
fn guard<F: FnOnce() -> Result<(), MrsStatus>>(f: F) -> MrsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MrsStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(MrsStatus::Panic, "panic inside mrsched"),
    }
}

fn lib_err(e: Error) -> MrsStatus {
    fail(status_of(&e), e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, MrsStatus> {
    if p.is_null() {
        return Err(fail(MrsStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(MrsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), MrsStatus> {
    if p.is_null() {
        Err(fail(MrsStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library from this thread.
#[no_mangle]
pub extern "C" fn mrs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Opaque job trace.
pub struct MrsWorkload(Workload);

/// Opaque single-window selection problem.
pub struct MrsWindow {
    nodes: Vec<u32>,
    bb: Vec<u64>,
    free_nodes: u32,
    free_bb: u64,
}

/// Opaque set of non-dominated selections.
pub struct MrsFront(ParetoSet);

/// Opaque finished simulation.
pub struct MrsResult {
    out: SimulationOutput,
    metrics: MetricsReport,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MrsMetrics {
    pub node_usage: f64,
    pub bb_usage: f64,
    pub avg_wait: f64,
    pub avg_slowdown: f64,
    pub rejected: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrsSimConfig {
    pub total_nodes: u32,
    pub total_bb_gb: u64,
    pub persistent_bb_gb: u64,
    pub window_size: u32,
    pub starvation_bound: u32,
    /// Nonzero enables EASY backfilling.
    pub backfill: u8,
    pub generations: u32,
    pub population: u32,
    pub seed: u64,
}

/// Fills `cfg` with the library defaults for a machine of the given size.
///
/// # Safety
/// `cfg` must point to writable memory for one `MrsSimConfig`.
#[no_mangle]
pub unsafe extern "C" fn mrs_sim_config_default(
    total_nodes: u32,
    total_bb_gb: u64,
    cfg: *mut MrsSimConfig,
) -> MrsStatus {
    guard(|| {
        non_null(cfg, "cfg")?;
        let d = SystemConfig::new(total_nodes, total_bb_gb);
        let s = &d.scheduler;
        *cfg = MrsSimConfig {
            total_nodes,
            total_bb_gb,
            persistent_bb_gb: 0,
            window_size: s.window_size as u32,
            starvation_bound: s.starvation_bound,
            backfill: s.backfill as u8,
            generations: s.ga.generations as u32,
            population: s.ga.population as u32,
            seed: 0,
        };
        Ok(())
    })
}

/// Loads a trace; `.csv` files are read as CSV, anything else as JSONL.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mrs_workload_load(
    path: *const c_char,
    out: *mut *mut MrsWorkload,
) -> MrsStatus {
    guard(|| {
        non_null(out, "out")?;
        let p = str_arg(path, "path")?;
        let wl = read_trace_file(Path::new(p)).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(MrsWorkload(wl)));
        Ok(())
    })
}

/// Parses a trace held in memory. `format` is `"csv"` or `"jsonl"`.
///
/// # Safety
/// `text` and `format` must be NUL-terminated strings and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn mrs_workload_parse(
    text: *const c_char,
    format: *const c_char,
    out: *mut *mut MrsWorkload,
) -> MrsStatus {
    guard(|| {
        non_null(out, "out")?;
        let t = str_arg(text, "text")?;
        let f: TraceFormat = str_arg(format, "format")?.parse().map_err(lib_err)?;
        let wl = parse_trace(t.as_bytes(), f).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(MrsWorkload(wl)));
        Ok(())
    })
}

/// Number of jobs, or 0 for a null handle.
///
/// # Safety
/// `wl` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mrs_workload_len(wl: *const MrsWorkload) -> usize {
    wl.as_ref().map_or(0, |w| w.0.len())
}

/// # Safety
/// `wl` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mrs_workload_free(wl: *mut MrsWorkload) {
    if !wl.is_null() {
        drop(Box::from_raw(wl));
    }
}

/// Creates an empty window against the given free capacity.
#[no_mangle]
pub extern "C" fn mrs_window_new(free_nodes: u32, free_bb_gb: u64) -> *mut MrsWindow {
    Box::into_raw(Box::new(MrsWindow {
        nodes: Vec::new(),
        bb: Vec::new(),
        free_nodes,
        free_bb: free_bb_gb,
    }))
}

/// Appends a job demand to the window.
///
/// # Safety
/// `w` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mrs_window_push(w: *mut MrsWindow, nodes: u32, bb_gb: u64) -> MrsStatus {
    guard(|| {
        non_null(w, "window")?;
        let w = &mut *w;
        w.nodes.push(nodes);
        w.bb.push(bb_gb);
        Ok(())
    })
}

/// Approximates the window's Pareto set with the genetic solver.
///
/// # Safety
/// `w` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mrs_window_solve(
    w: *const MrsWindow,
    generations: u32,
    population: u32,
    seed: u64,
    out: *mut *mut MrsFront,
) -> MrsStatus {
    guard(|| {
        non_null(w, "window")?;
        non_null(out, "out")?;
        let w = &*w;
        let params = GaParams::new(generations as usize, population as usize, seed);
        params.validate().map_err(lib_err)?;
        let p = WindowProblem::from_demands(w.nodes.clone(), w.bb.clone(), w.free_nodes, w.free_bb);
        *out = Box::into_raw(Box::new(MrsFront(ga_solve_problem(&p, &params))));
        Ok(())
    })
}

/// # Safety
/// `w` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mrs_window_free(w: *mut MrsWindow) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// # Safety
/// `f` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mrs_front_len(f: *const MrsFront) -> usize {
    f.as_ref().map_or(0, |f| f.0.len())
}

/// Reads member `idx`: its objective values and, if `bits` is non-null,
/// its selection as `bits_len` bytes of 0/1.
///
/// # Safety
/// `f` must be a live handle; `nodes`, `bb_gb` valid pointers; `bits` null
/// or writable for `bits_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn mrs_front_get(
    f: *const MrsFront,
    idx: usize,
    nodes: *mut i64,
    bb_gb: *mut i64,
    bits: *mut u8,
    bits_len: usize,
) -> MrsStatus {
    guard(|| {
        non_null(f, "front")?;
        non_null(nodes, "nodes")?;
        non_null(bb_gb, "bb_gb")?;
        let members = &(*f).0.members;
        let Some((sel, obj)) = members.get(idx) else {
            return Err(fail(
                MrsStatus::OutOfRange,
                format!("index {idx} outside front of {}", members.len()),
            ));
        };
        let v = obj.as_slice();
        *nodes = v[0];
        *bb_gb = v[1];
        if !bits.is_null() {
            if bits_len < sel.len() {
                return Err(fail(
                    MrsStatus::InvalidArgument,
                    format!("bits buffer holds {bits_len}, selection has {}", sel.len()),
                ));
            }
            let out = std::slice::from_raw_parts_mut(bits, sel.len());
            for (o, &b) in out.iter_mut().zip(&sel.bits) {
                *o = b as u8;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `f` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mrs_front_free(f: *mut MrsFront) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Simulates `wl` under the named policy (`baseline`, `weighted`,
/// `weighted_cpu`, `weighted_bb`, `constrained_cpu`, `constrained_bb`,
/// `bin_packing` or `bbsched`). Metrics are taken over the whole run.
///
/// # Safety
/// `wl` and `cfg` must be valid, `policy` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mrs_simulate(
    wl: *const MrsWorkload,
    cfg: *const MrsSimConfig,
    policy: *const c_char,
    out: *mut *mut MrsResult,
) -> MrsStatus {
    guard(|| {
        non_null(wl, "workload")?;
        non_null(cfg, "cfg")?;
        non_null(out, "out")?;
        let name = str_arg(policy, "policy")?;
        let spec = PolicySpec::standard_suite(false)
            .into_iter()
            .find(|p| p.name == name)
            .ok_or_else(|| fail(MrsStatus::InvalidArgument, format!("unknown policy `{name}`")))?;
        let c = &*cfg;
        let mut sys = SystemConfig::new(c.total_nodes, c.total_bb_gb);
        sys.persistent_bb_gb = c.persistent_bb_gb;
        let s = &mut sys.scheduler;
        s.window_size = c.window_size as usize;
        s.starvation_bound = c.starvation_bound;
        s.backfill = c.backfill != 0;
        s.ga = GaParams::new(c.generations as usize, c.population as usize, c.seed);
        sys.validate().map_err(lib_err)?;
        check_scheduler(&sys)?;
        let sim = run_simulation(&(*wl).0, &sys, &spec).map_err(lib_err)?;
        let metrics = compute_metrics(&sim.events, &sys, Trim::NONE, DEFAULT_ABNORMAL_THRESHOLD)
            .map_err(lib_err)?;
        *out = Box::into_raw(Box::new(MrsResult { out: sim, metrics }));
        Ok(())
    })
}

fn check_scheduler(sys: &SystemConfig) -> Result<(), MrsStatus> {
    if sys.scheduler.window_size == 0 {
        return Err(fail(MrsStatus::InvalidArgument, "window_size must be at least 1"));
    }
    sys.scheduler.ga.validate().map_err(lib_err)
}

/// # Safety
/// `r` must be a live handle and `m` writable.
#[no_mangle]
pub unsafe extern "C" fn mrs_result_metrics(r: *const MrsResult, m: *mut MrsMetrics) -> MrsStatus {
    guard(|| {
        non_null(r, "result")?;
        non_null(m, "metrics")?;
        let r = &*r;
        *m = MrsMetrics {
            node_usage: r.metrics.node_usage,
            bb_usage: r.metrics.bb_usage,
            avg_wait: r.metrics.avg_wait,
            avg_slowdown: r.metrics.avg_slowdown,
            rejected: r.out.rejected.len() as u64,
        };
        Ok(())
    })
}

/// Number of events in the log, or 0 for a null handle.
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mrs_result_event_count(r: *const MrsResult) -> usize {
    r.as_ref().map_or(0, |r| r.out.events.len())
}

/// Writes the event log as JSON lines.
///
/// # Safety
/// `r` must be a live handle and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mrs_result_write_log(r: *const MrsResult, path: *const c_char) -> MrsStatus {
    guard(|| {
        non_null(r, "result")?;
        let p = str_arg(path, "path")?;
        let f = std::fs::File::create(p).map_err(|e| fail(MrsStatus::Io, format!("{p}: {e}")))?;
        write_event_log(&(*r).out.events, std::io::BufWriter::new(f)).map_err(lib_err)
    })
}

/// # Safety
/// `r` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mrs_result_free(r: *mut MrsResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}
