//! C ABI over the `reshare` simulator.
//!
//! Handles are opaque pointers created by `*_new`/`*_load` functions and
//! released with the matching `*_free`. Every fallible call returns a
//! [`ReshareStatus`]; on failure `reshare_last_error` describes the problem
//! for the calling thread. Strings returned through out-parameters are owned
//! by the caller and must be released with `reshare_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use reshare::allocation::solo_latency;
use reshare::model::{NodeId, Request, RequestId, ServiceId, SystemParams, VnfSpec};
use reshare::ranges::RangeScheme;
use reshare::scenario::VerifyMode;
use reshare::sim::Simulation;
use reshare::{Error, RunOptions, Scenario, StrategyKind};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReshareStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Scenario = 3,
    Infeasible = 4,
    OutOfRange = 5,
    Invariant = 6,
    Io = 7,
    Internal = 8,
}

/// A parsed, validated scenario.
pub struct ReshareScenario {
    inner: Scenario,
}

/// One strategy's live simulation state.
pub struct ReshareSimulation {
    inner: Simulation,
}

/// Snapshot of a simulation's cost figures.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ReshareCost {
    /// Instantaneous cost rate.
    pub phi: f64,
    /// Cost integrated up to `clock`.
    pub cumulative: f64,
    pub clock: f64,
    pub epsilon: f64,
    pub pod_fraction: f64,
    pub vm_count: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> ReshareStatus {
    match e {
        Error::Scenario(_) | Error::Json(_) => ReshareStatus::Scenario,
        Error::InfeasibleJob { .. } | Error::InfeasibleRequest(_) | Error::Infeasible | Error::NoValidRange { .. } => {
            ReshareStatus::Infeasible
        }
        Error::BudgetBelowMinimum { .. } | Error::BudgetAboveScheme { .. } | Error::IndexOutOfScheme { .. } => {
            ReshareStatus::OutOfRange
        }
        Error::Invariant(_) => ReshareStatus::Invariant,
        Error::Io(_) => ReshareStatus::Io,
        Error::Csv(c) if c.is_io_error() => ReshareStatus::Io,
        _ => ReshareStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (ReshareStatus, String)>) -> ReshareStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ReshareStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ReshareStatus::Internal
        }
    }
}

fn lib(e: Error) -> (ReshareStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (ReshareStatus, String) {
    (ReshareStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (ReshareStatus, String) {
    (ReshareStatus::InvalidArgument, msg.into())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (ReshareStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call from the same thread.
#[no_mangle]
pub extern "C" fn reshare_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn reshare_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn reshare_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reshare_scenario_load(path: *const c_char, out: *mut *mut ReshareScenario) -> ReshareStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let inner = Scenario::load(Path::new(path)).map_err(lib)?;
        *out = Box::into_raw(Box::new(ReshareScenario { inner }));
        Ok(())
    })
}

/// Parses a scenario from JSON text. Relative trace paths resolve against
/// the current directory.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reshare_scenario_parse(json: *const c_char, out: *mut *mut ReshareScenario) -> ReshareStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(json, "json")?;
        let inner = Scenario::parse(text, ".").map_err(lib)?;
        *out = Box::into_raw(Box::new(ReshareScenario { inner }));
        Ok(())
    })
}

/// # Safety
/// `scenario` must come from `reshare_scenario_load`/`_parse` or be NULL.
#[no_mangle]
pub unsafe extern "C" fn reshare_scenario_free(scenario: *mut ReshareScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Number of services in the scenario's catalog; service indices passed to
/// `reshare_simulation_arrive` range over `0..count`.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reshare_scenario_service_count(
    scenario: *const ReshareScenario,
    out: *mut u32,
) -> ReshareStatus {
    guard(|| {
        let sc = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = sc.inner.model.catalog.services.len() as u32;
        Ok(())
    })
}

fn parse_strategy(s: &str) -> Result<StrategyKind, (ReshareStatus, String)> {
    s.parse().map_err(lib)
}

/// Generates the scenario's workload for `seed`, runs `strategy` over it and
/// returns the summary as JSON in `out_json`.
///
/// # Safety
/// Pointers must be valid; `strategy` NUL-terminated; `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn reshare_run_summary(
    scenario: *const ReshareScenario,
    strategy: *const c_char,
    seed: u64,
    out_json: *mut *mut c_char,
) -> ReshareStatus {
    guard(|| {
        let sc = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let kind = parse_strategy(str_arg(strategy, "strategy")?)?;
        let opts = RunOptions { strategy: Some(kind), seed: Some(seed), no_metrics: true, ..Default::default() };
        let out = reshare::run(&sc.inner, &opts).map_err(lib)?;
        *out_json = into_c_string(out.summary_json().map_err(lib)?);
        Ok(())
    })
}

/// Starts an empty simulation of `strategy` on the scenario's system. Cost is
/// integrated up to the scenario horizon. Per-event invariant checks run when
/// `verify` is non-zero.
///
/// # Safety
/// Pointers must be valid; `strategy` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn reshare_simulation_new(
    scenario: *const ReshareScenario,
    strategy: *const c_char,
    verify: bool,
    out: *mut *mut ReshareSimulation,
) -> ReshareStatus {
    guard(|| {
        let sc = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let kind = parse_strategy(str_arg(strategy, "strategy")?)?;
        let verify = if verify { VerifyMode::Full } else { VerifyMode::Off };
        let inner = Simulation::new(Arc::clone(&sc.inner.model), kind, sc.inner.epsilon_star(), verify, sc.inner.horizon())
            .map_err(lib)?;
        *out = Box::into_raw(Box::new(ReshareSimulation { inner }));
        Ok(())
    })
}

/// # Safety
/// `sim` must come from `reshare_simulation_new` or be NULL.
#[no_mangle]
pub unsafe extern "C" fn reshare_simulation_free(sim: *mut ReshareSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Admits a request. `duration` < 0 means it never leaves on its own;
/// departures are always explicit through `reshare_simulation_depart`.
/// Times must not go backwards.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn reshare_simulation_arrive(
    sim: *mut ReshareSimulation,
    request_id: u64,
    service_index: u32,
    leaf: u32,
    time: f64,
    duration: f64,
    load: f64,
) -> ReshareStatus {
    guard(|| {
        let sim = sim.as_mut().ok_or_else(|| null("sim"))?;
        if !(time.is_finite() && time >= sim.inner.clock()) {
            return Err(invalid(format!("arrival time {time} precedes the clock {}", sim.inner.clock())));
        }
        if !(load.is_finite() && load > 0.0) {
            return Err(invalid(format!("load must be positive, got {load}")));
        }
        let request = Request {
            id: RequestId(request_id),
            service: ServiceId(service_index),
            arrival: time,
            duration: (duration >= 0.0).then_some(duration),
            load,
            leaf: NodeId(leaf),
        };
        sim.inner.arrive(&request).map_err(lib)
    })
}

/// Removes an active request.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn reshare_simulation_depart(sim: *mut ReshareSimulation, request_id: u64, time: f64) -> ReshareStatus {
    guard(|| {
        let sim = sim.as_mut().ok_or_else(|| null("sim"))?;
        if !(time.is_finite() && time >= sim.inner.clock()) {
            return Err(invalid(format!("departure time {time} precedes the clock {}", sim.inner.clock())));
        }
        sim.inner.depart(RequestId(request_id), time).map_err(lib)
    })
}

/// Integrates cost up to `time` without an event.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn reshare_simulation_advance(sim: *mut ReshareSimulation, time: f64) -> ReshareStatus {
    guard(|| {
        let sim = sim.as_mut().ok_or_else(|| null("sim"))?;
        if time.is_nan() {
            return Err(invalid("time is NaN"));
        }
        sim.inner.advance_to(time);
        Ok(())
    })
}

/// # Safety
/// `sim` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn reshare_simulation_cost(sim: *const ReshareSimulation, out: *mut ReshareCost) -> ReshareStatus {
    guard(|| {
        let sim = sim.as_ref().ok_or_else(|| null("sim"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let s = &sim.inner;
        *out = ReshareCost {
            phi: s.phi(),
            cumulative: s.cumulative_cost(),
            clock: s.clock(),
            epsilon: s.epsilon(),
            pod_fraction: s.pod_fraction(),
            vm_count: s.vm_count() as u64,
        };
        Ok(())
    })
}

/// Index of the latency range containing `delay`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reshare_range_index(
    mu_bar: f64,
    lambda_min: f64,
    epsilon: f64,
    delay: f64,
    out: *mut u32,
) -> ReshareStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let scheme = RangeScheme::new(epsilon, mu_bar, lambda_min).map_err(lib)?;
        *out = scheme.range_index(delay).map_err(lib)?;
        Ok(())
    })
}

/// Latency of a job served alone at full speed: `1/(mu_bar - theta*load)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reshare_solo_latency(theta: f64, load: f64, mu_bar: f64, out: *mut f64) -> ReshareStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if !(theta > 0.0 && load > 0.0) {
            return Err(invalid("theta and load must be positive"));
        }
        let vnf = VnfSpec { vnf_id: String::new(), theta };
        let params = SystemParams { mu_bar, lambda_min: load };
        *out = solo_latency(&vnf, load, &params).map_err(lib)?;
        Ok(())
    })
}
