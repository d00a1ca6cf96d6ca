//! C ABI for sicflow.
//!
//! Scenarios are opaque heap handles created by `sicflow_scenario_*` and
//! released with `sicflow_scenario_free`. Every fallible function returns a
//! [`SicflowStatus`]; on failure a description is available from
//! `sicflow_last_error` on the same thread until the next failing call.
//! Results are written through caller-provided pointers only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sicflow::allocation::{AnnealingConfig, OptimizationProblem, Scheme};
use sicflow::channel::{self, ChannelParams, Point, TransmitterState};
use sicflow::config::load_scenario;
use sicflow::experiments::allocate;
use sicflow::network::{Link, NodeId, Scenario};
use sicflow::sim::{run_sim, SimConfig};
use sicflow::throughput::{FlowAllocation, ThroughputModel};
use sicflow::topologies::{builtin_scenario, PolicyVariant};
use sicflow::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SicflowStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Validation = 4,
    Numeric = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SicflowPolicy {
    Ian = 0,
    SicR = 1,
    SicRd = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SicflowScheme {
    Tofra = 0,
    Fmp = 1,
    BpE2e = 2,
    BpWb = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SicflowChannel {
    pub path_loss_exponent: f64,
    pub noise_power: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SicflowTransmitter {
    pub power: f64,
    pub sinr_threshold: f64,
    pub x: f64,
    pub y: f64,
}

/// Aggregate results of one simulation run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SicflowSimSummary {
    pub aat: f64,
    pub injected: u64,
    pub delivered: u64,
    pub dropped: u64,
}

/// Opaque scenario handle.
pub struct SicflowScenario {
    inner: Scenario,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn status_of(e: &Error) -> SicflowStatus {
    match e {
        Error::Parse { .. } => SicflowStatus::Parse,
        Error::Validation { .. } | Error::UnknownLink { .. } | Error::AllocationShape { .. } => {
            SicflowStatus::Validation
        }
        Error::UnknownTopology(_) | Error::Dimension { .. } => SicflowStatus::InvalidArgument,
        Error::Io { .. } | Error::Csv(_) | Error::Json(_) => SicflowStatus::Io,
        e if e.is_numeric() => SicflowStatus::Numeric,
        _ => SicflowStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (SicflowStatus, String)>) -> SicflowStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SicflowStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SicflowStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (SicflowStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (SicflowStatus, String) {
    (SicflowStatus::NullPointer, format!("`{name}` is null"))
}

/// # Safety
/// `p` must be null or point to a live value of `T`.
unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, (SicflowStatus, String)> {
    p.as_ref().ok_or_else(|| null(name))
}

/// # Safety
/// `p` must be null or point to `n` readable `f64`s.
unsafe fn slice<'a>(
    p: *const f64,
    n: usize,
    name: &str,
) -> Result<&'a [f64], (SicflowStatus, String)> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

fn out<T>(p: *mut T, name: &str) -> Result<*mut T, (SicflowStatus, String)> {
    if p.is_null() {
        Err(null(name))
    } else {
        Ok(p)
    }
}

/// Message of the last failure on this thread; empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sicflow_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sicflow_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates builtin topology `index` (1 to 3) with every node at threshold
/// `gamma`. `policy` is a `SicflowPolicy` value.
///
/// # Safety
/// `out` must be null or valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn sicflow_scenario_builtin(
    index: u8,
    gamma: f64,
    policy: u32,
    out_scenario: *mut *mut SicflowScenario,
) -> SicflowStatus {
    guard(|| {
        let dst = out(out_scenario, "out_scenario")?;
        let variant = match policy {
            p if p == SicflowPolicy::Ian as u32 => PolicyVariant::Ian,
            p if p == SicflowPolicy::SicR as u32 => PolicyVariant::SicR,
            p if p == SicflowPolicy::SicRd as u32 => PolicyVariant::SicRd,
            p => {
                return Err((
                    SicflowStatus::InvalidArgument,
                    format!("unknown policy {p}"),
                ))
            }
        };
        let inner = builtin_scenario(index, gamma, variant).map_err(lib_err)?;
        *dst = Box::into_raw(Box::new(SicflowScenario { inner }));
        Ok(())
    })
}

/// Parses a scenario from NUL-terminated TOML text.
///
/// # Safety
/// `toml` must be null or a valid C string; `out_scenario` must be null or
/// valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn sicflow_scenario_from_toml(
    toml: *const c_char,
    out_scenario: *mut *mut SicflowScenario,
) -> SicflowStatus {
    guard(|| {
        let dst = out(out_scenario, "out_scenario")?;
        if toml.is_null() {
            return Err(null("toml"));
        }
        let text = CStr::from_ptr(toml).to_str().map_err(|e| {
            (
                SicflowStatus::InvalidArgument,
                format!("toml is not UTF-8: {e}"),
            )
        })?;
        let inner = load_scenario(text).map_err(lib_err)?;
        *dst = Box::into_raw(Box::new(SicflowScenario { inner }));
        Ok(())
    })
}

/// Releases a scenario. Null is ignored.
///
/// # Safety
/// `scenario` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sicflow_scenario_free(scenario: *mut SicflowScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Number of flows (paths) in the scenario.
///
/// # Safety
/// Pointers must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn sicflow_scenario_flow_count(
    scenario: *const SicflowScenario,
    out_count: *mut usize,
) -> SicflowStatus {
    guard(|| {
        let s = deref(scenario, "scenario")?;
        *out(out_count, "out_count")? = s.inner.flow_count();
        Ok(())
    })
}

fn transmitter(t: &SicflowTransmitter) -> Result<TransmitterState, (SicflowStatus, String)> {
    TransmitterState::new(t.power, t.sinr_threshold, Point::new(t.x, t.y)).map_err(lib_err)
}

fn channel_params(c: &SicflowChannel) -> Result<ChannelParams, (SicflowStatus, String)> {
    ChannelParams::new(c.path_loss_exponent, c.noise_power).map_err(lib_err)
}

/// Interference-free success probability of `tx` at receiver `(rx_x, rx_y)`.
///
/// # Safety
/// Pointers must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn sicflow_success_prob_solo(
    tx: *const SicflowTransmitter,
    rx_x: f64,
    rx_y: f64,
    ch: *const SicflowChannel,
    out_prob: *mut f64,
) -> SicflowStatus {
    guard(|| {
        let t = transmitter(deref(tx, "tx")?)?;
        let c = channel_params(deref(ch, "ch")?)?;
        let p = channel::success_prob_solo(&t, &Point::new(rx_x, rx_y), &c).map_err(lib_err)?;
        *out(out_prob, "out_prob")? = p;
        Ok(())
    })
}

/// Success probability with one interferer treated as noise.
///
/// # Safety
/// Pointers must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn sicflow_success_prob_ian(
    tx: *const SicflowTransmitter,
    interferer: *const SicflowTransmitter,
    rx_x: f64,
    rx_y: f64,
    ch: *const SicflowChannel,
    out_prob: *mut f64,
) -> SicflowStatus {
    guard(|| {
        let t = transmitter(deref(tx, "tx")?)?;
        let k = transmitter(deref(interferer, "interferer")?)?;
        let c = channel_params(deref(ch, "ch")?)?;
        let p = channel::success_prob_ian(&t, &k, &Point::new(rx_x, rx_y), &c).map_err(lib_err)?;
        *out(out_prob, "out_prob")? = p;
        Ok(())
    })
}

/// Success probability when the receiver first cancels `interferer`.
///
/// # Safety
/// Pointers must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn sicflow_success_prob_sic(
    tx: *const SicflowTransmitter,
    interferer: *const SicflowTransmitter,
    rx_x: f64,
    rx_y: f64,
    ch: *const SicflowChannel,
    out_prob: *mut f64,
) -> SicflowStatus {
    guard(|| {
        let t = transmitter(deref(tx, "tx")?)?;
        let k = transmitter(deref(interferer, "interferer")?)?;
        let c = channel_params(deref(ch, "ch")?)?;
        let p = channel::success_prob_sic(&t, &k, &Point::new(rx_x, rx_y), &c).map_err(lib_err)?;
        *out(out_prob, "out_prob")? = p;
        Ok(())
    })
}

/// Predicted throughput of link `from -> to` (node indices).
///
/// # Safety
/// `rates` must point to `n_rates` values; other pointers null or valid.
#[no_mangle]
pub unsafe extern "C" fn sicflow_link_throughput(
    scenario: *const SicflowScenario,
    rates: *const f64,
    n_rates: usize,
    from: usize,
    to: usize,
    out_throughput: *mut f64,
) -> SicflowStatus {
    guard(|| {
        let s = &deref(scenario, "scenario")?.inner;
        let alloc = FlowAllocation::new(slice(rates, n_rates, "rates")?.to_vec());
        let n = s.nodes().len();
        if from >= n || to >= n {
            return Err((
                SicflowStatus::InvalidArgument,
                format!("node index out of range (0..{n})"),
            ));
        }
        let t =
            sicflow::throughput::link_throughput(s, &alloc, Link::new(NodeId(from), NodeId(to)))
                .map_err(lib_err)?;
        *out(out_throughput, "out_throughput")? = t;
        Ok(())
    })
}

/// Predicted aggregate throughput of the given source rates.
///
/// # Safety
/// `rates` must point to `n_rates` values; other pointers null or valid.
#[no_mangle]
pub unsafe extern "C" fn sicflow_aggregate_throughput(
    scenario: *const SicflowScenario,
    rates: *const f64,
    n_rates: usize,
    out_aat: *mut f64,
) -> SicflowStatus {
    guard(|| {
        let s = &deref(scenario, "scenario")?.inner;
        let alloc = FlowAllocation::new(slice(rates, n_rates, "rates")?.to_vec());
        alloc.validate(s).map_err(lib_err)?;
        let model = ThroughputModel::new(s).map_err(lib_err)?;
        *out(out_aat, "out_aat")? = model.aggregate_throughput(&alloc);
        Ok(())
    })
}

/// Runs an allocation scheme (a `SicflowScheme` value). `out_rates` receives one rate per flow and
/// must hold `n_rates` = flow count entries.
///
/// # Safety
/// `out_rates` must be valid for `n_rates` writes; other pointers null or
/// valid.
#[no_mangle]
pub unsafe extern "C" fn sicflow_optimize(
    scenario: *const SicflowScenario,
    scheme: u32,
    seed: u64,
    out_rates: *mut f64,
    n_rates: usize,
    out_aat: *mut f64,
) -> SicflowStatus {
    guard(|| {
        let s = &deref(scenario, "scenario")?.inner;
        if n_rates != s.flow_count() {
            return Err(lib_err(Error::AllocationShape {
                expected: s.flow_count(),
                got: n_rates,
            }));
        }
        let rates_dst = out(out_rates, "out_rates")?;
        let aat_dst = out(out_aat, "out_aat")?;
        let scheme = match scheme {
            k if k == SicflowScheme::Tofra as u32 => Scheme::Tofra,
            k if k == SicflowScheme::Fmp as u32 => Scheme::Fmp,
            k if k == SicflowScheme::BpE2e as u32 => Scheme::BpE2e,
            k if k == SicflowScheme::BpWb as u32 => Scheme::BpWb,
            k => {
                return Err((
                    SicflowStatus::InvalidArgument,
                    format!("unknown scheme {k}"),
                ))
            }
        };
        let problem = OptimizationProblem::new(s).map_err(lib_err)?;
        let r = allocate(
            &problem,
            scheme,
            &AnnealingConfig::default().with_seed(seed),
        )
        .map_err(lib_err)?;
        ptr::copy_nonoverlapping(r.allocation.rates.as_ptr(), rates_dst, n_rates);
        *aat_dst = r.aat;
        Ok(())
    })
}

/// Simulates `n_slots` slots. A negative `max_retransmits` retries forever.
///
/// # Safety
/// `rates` must point to `n_rates` values; other pointers null or valid.
#[no_mangle]
pub unsafe extern "C" fn sicflow_simulate(
    scenario: *const SicflowScenario,
    rates: *const f64,
    n_rates: usize,
    n_slots: u64,
    max_retransmits: i32,
    seed: u64,
    out_summary: *mut SicflowSimSummary,
) -> SicflowStatus {
    guard(|| {
        let s = &deref(scenario, "scenario")?.inner;
        let alloc = FlowAllocation::new(slice(rates, n_rates, "rates")?.to_vec());
        let dst = out(out_summary, "out_summary")?;
        let config = SimConfig {
            n_slots,
            max_retransmits: u32::try_from(max_retransmits).ok(),
            seed,
            ..SimConfig::new(s.clone(), alloc)
        };
        let m = run_sim(&config).map_err(lib_err)?;
        *dst = SicflowSimSummary {
            aat: m.aat,
            injected: m.flows.iter().map(|f| f.injected).sum(),
            delivered: m.flows.iter().map(|f| f.delivered).sum(),
            dropped: m.flows.iter().map(|f| f.dropped).sum(),
        };
        Ok(())
    })
}
