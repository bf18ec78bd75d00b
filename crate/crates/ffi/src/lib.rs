//! C ABI over the `stalesgd` simulator.
//!
//! Every function returns a [`StalesgdStatus`]; results go through out
//! pointers. Objects are opaque handles released with their `_free`
//! function. After a non-OK status, [`stalesgd_last_error_message`] describes
//! the failure on the calling thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use stalesgd::optimization::LrSchedule;
use stalesgd::runtime::OrderStatMethod;
use stalesgd::theory::{self, TheoryParams};
use stalesgd::{
    Error, LogisticObjective, Objective, Protocol, QuadraticObjective, RuntimeDistribution, SimTrace, Simulation,
    VariantConfig,
};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StalesgdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Unsupported = 3,
    Precondition = 4,
    InsufficientData = 5,
    Io = 6,
    OutOfRange = 7,
    Panic = 8,
}

/// Aggregation protocol.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StalesgdProtocol {
    KSync = 0,
    KBatchSync = 1,
    KAsync = 2,
    KBatchAsync = 3,
}

/// Symbols of the error bounds.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct StalesgdBoundParams {
    pub eta: f64,
    pub smoothness: f64,
    pub strong_convexity: f64,
    pub noise_variance: f64,
    pub multiplicative_variance: f64,
    pub batch_size: usize,
    pub wait_for: usize,
    pub gamma: f64,
    pub p0: f64,
    pub schedule_c: f64,
    pub eta_max: f64,
    pub horizon: usize,
}

/// Runtime distribution handle.
pub struct StalesgdDistribution {
    inner: RuntimeDistribution,
}

/// Objective handle.
pub struct StalesgdObjective {
    inner: Arc<dyn Objective>,
}

/// Simulation trace handle.
pub struct StalesgdTrace {
    inner: SimTrace,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("no interior nul"));
}

struct Failure(StalesgdStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::UnsupportedMethod(_) => StalesgdStatus::Unsupported,
            Error::Precondition { .. } => StalesgdStatus::Precondition,
            Error::InsufficientData { .. } | Error::MissingSnapshots => StalesgdStatus::InsufficientData,
            Error::Io { .. } | Error::Csv(_) | Error::Parse { .. } => StalesgdStatus::Io,
            _ => StalesgdStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

type FfiResult<T> = Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> StalesgdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            StalesgdStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            StalesgdStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(StalesgdStatus::NullPointer, format!("{name} is null"))
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn write<T>(p: *mut T, name: &str, v: T) -> FfiResult<()> {
    if p.is_null() {
        return Err(null(name));
    }
    p.write(v);
    Ok(())
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> FfiResult<&'a [f64]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn method(samples: usize, seed: u64) -> OrderStatMethod {
    if samples == 0 {
        OrderStatMethod::Analytic
    } else {
        OrderStatMethod::MonteCarlo { samples, seed }
    }
}

impl From<StalesgdBoundParams> for TheoryParams {
    fn from(p: StalesgdBoundParams) -> Self {
        TheoryParams {
            eta: p.eta,
            smoothness: p.smoothness,
            strong_convexity: p.strong_convexity,
            noise_variance: p.noise_variance,
            multiplicative_variance: p.multiplicative_variance,
            batch_size: p.batch_size,
            wait_for: p.wait_for,
            gamma: p.gamma,
            p0: p.p0,
            schedule_c: p.schedule_c,
            eta_max: p.eta_max,
            horizon: p.horizon,
        }
    }
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn stalesgd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

unsafe fn new_distribution(
    out: *mut *mut StalesgdDistribution,
    make: impl FnOnce() -> stalesgd::Result<RuntimeDistribution>,
) -> StalesgdStatus {
    guard(|| {
        let d = make()?;
        write(out, "out", Box::into_raw(Box::new(StalesgdDistribution { inner: d })))
    })
}

#[no_mangle]
pub unsafe extern "C" fn stalesgd_distribution_exponential(rate: f64, out: *mut *mut StalesgdDistribution) -> StalesgdStatus {
    new_distribution(out, || RuntimeDistribution::exponential(rate))
}

#[no_mangle]
pub unsafe extern "C" fn stalesgd_distribution_shifted_exponential(
    shift: f64,
    rate: f64,
    out: *mut *mut StalesgdDistribution,
) -> StalesgdStatus {
    new_distribution(out, || RuntimeDistribution::shifted_exponential(shift, rate))
}

#[no_mangle]
pub unsafe extern "C" fn stalesgd_distribution_pareto(shape: f64, scale: f64, out: *mut *mut StalesgdDistribution) -> StalesgdStatus {
    new_distribution(out, || RuntimeDistribution::pareto(shape, scale))
}

#[no_mangle]
pub unsafe extern "C" fn stalesgd_distribution_deterministic(value: f64, out: *mut *mut StalesgdDistribution) -> StalesgdStatus {
    new_distribution(out, || RuntimeDistribution::deterministic(value))
}

/// Mixture of `n` exponentials with the given weights and rates.
#[no_mangle]
pub unsafe extern "C" fn stalesgd_distribution_hyper_exponential(
    weights: *const f64,
    rates: *const f64,
    n: usize,
    out: *mut *mut StalesgdDistribution,
) -> StalesgdStatus {
    guard(|| {
        let w = slice(weights, n, "weights")?.to_vec();
        let r = slice(rates, n, "rates")?.to_vec();
        let d = RuntimeDistribution::hyper_exponential(w, r)?;
        write(out, "out", Box::into_raw(Box::new(StalesgdDistribution { inner: d })))
    })
}

#[no_mangle]
pub unsafe extern "C" fn stalesgd_distribution_free(d: *mut StalesgdDistribution) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

#[no_mangle]
pub unsafe extern "C" fn stalesgd_distribution_mean(d: *const StalesgdDistribution, out: *mut f64) -> StalesgdStatus {
    guard(|| write(out, "out", deref(d, "distribution")?.inner.mean()))
}

/// `E[X_{k:p}]`. `samples = 0` asks for the closed form; otherwise a
/// Monte-Carlo estimate with that many draws and its standard error.
#[no_mangle]
pub unsafe extern "C" fn stalesgd_expected_order_statistic(
    d: *const StalesgdDistribution,
    k: usize,
    p: usize,
    samples: usize,
    seed: u64,
    out_value: *mut f64,
    out_stderr: *mut f64,
) -> StalesgdStatus {
    guard(|| {
        let e = deref(d, "distribution")?.inner.expected_order_statistic(k, p, method(samples, seed))?;
        write(out_value, "out_value", e.value)?;
        if !out_stderr.is_null() {
            out_stderr.write(e.stderr);
        }
        Ok(())
    })
}

/// `P · E[X_{P:P}] / E[X]`; `samples` as for the order statistic.
#[no_mangle]
pub unsafe extern "C" fn stalesgd_speedup_sync_over_async(
    d: *const StalesgdDistribution,
    p: usize,
    samples: usize,
    seed: u64,
    out_value: *mut f64,
    out_stderr: *mut f64,
) -> StalesgdStatus {
    guard(|| {
        let e = theory::speedup_sync_over_async(&deref(d, "distribution")?.inner, p, method(samples, seed))?;
        write(out_value, "out_value", e.value)?;
        if !out_stderr.is_null() {
            out_stderr.write(e.stderr);
        }
        Ok(())
    })
}

/// `½ Σ λ_i w_i²` with additive gradient noise of total variance `sigma²/m`.
#[no_mangle]
pub unsafe extern "C" fn stalesgd_objective_quadratic(
    eigenvalues: *const f64,
    dim: usize,
    sigma: f64,
    out: *mut *mut StalesgdObjective,
) -> StalesgdStatus {
    guard(|| {
        let eig = slice(eigenvalues, dim, "eigenvalues")?.to_vec();
        let obj: Arc<dyn Objective> = Arc::new(QuadraticObjective::new(dim, eig, sigma)?);
        write(out, "out", Box::into_raw(Box::new(StalesgdObjective { inner: obj })))
    })
}

/// L2-regularized logistic regression on two synthetic Gaussian clusters.
#[no_mangle]
pub unsafe extern "C" fn stalesgd_objective_logistic_synthetic(
    n_samples: usize,
    dim: usize,
    lambda: f64,
    data_seed: u64,
    out: *mut *mut StalesgdObjective,
) -> StalesgdStatus {
    guard(|| {
        let mut rng = stalesgd::rng::from_seed(data_seed);
        let obj: Arc<dyn Objective> = Arc::new(LogisticObjective::synthetic(n_samples, dim, lambda, &mut rng)?);
        write(out, "out", Box::into_raw(Box::new(StalesgdObjective { inner: obj })))
    })
}

#[no_mangle]
pub unsafe extern "C" fn stalesgd_objective_free(o: *mut StalesgdObjective) {
    if !o.is_null() {
        drop(Box::from_raw(o));
    }
}

#[no_mangle]
pub unsafe extern "C" fn stalesgd_objective_dim(o: *const StalesgdObjective, out: *mut usize) -> StalesgdStatus {
    guard(|| write(out, "out", deref(o, "objective")?.inner.dim()))
}

#[no_mangle]
pub unsafe extern "C" fn stalesgd_objective_loss(
    o: *const StalesgdObjective,
    w: *const f64,
    len: usize,
    out: *mut f64,
) -> StalesgdStatus {
    guard(|| {
        let obj = &deref(o, "objective")?.inner;
        if len != obj.dim() {
            return Err(Failure(StalesgdStatus::InvalidArgument, format!("w has length {len}, expected {}", obj.dim())));
        }
        write(out, "out", obj.loss(slice(w, len, "w")?))
    })
}

/// Smoothness, strong convexity, noise variance, multiplicative noise and
/// optimal value, in that order, into `out[0..5]`.
#[no_mangle]
pub unsafe extern "C" fn stalesgd_objective_constants(o: *const StalesgdObjective, out: *mut f64) -> StalesgdStatus {
    guard(|| {
        let c = deref(o, "objective")?.inner.constants();
        if out.is_null() {
            return Err(null("out"));
        }
        let v = [c.smoothness, c.strong_convexity, c.noise_variance, c.multiplicative_variance, c.optimal_value];
        std::ptr::copy_nonoverlapping(v.as_ptr(), out, v.len());
        Ok(())
    })
}

/// Runs one replication. `schedule_c > 0` selects the staleness-compensated
/// schedule with ceiling `eta`; otherwise the rate is fixed at `eta`.
#[no_mangle]
pub unsafe extern "C" fn stalesgd_simulate(
    objective: *const StalesgdObjective,
    distribution: *const StalesgdDistribution,
    protocol: StalesgdProtocol,
    learners: usize,
    wait_for: usize,
    batch_size: usize,
    eta: f64,
    schedule_c: f64,
    iterations: usize,
    master_seed: u64,
    replication: u64,
    out: *mut *mut StalesgdTrace,
) -> StalesgdStatus {
    guard(|| {
        let obj = &deref(objective, "objective")?.inner;
        let dist = &deref(distribution, "distribution")?.inner;
        let protocol = match protocol {
            StalesgdProtocol::KSync => Protocol::KSync,
            StalesgdProtocol::KBatchSync => Protocol::KBatchSync,
            StalesgdProtocol::KAsync => Protocol::KAsync,
            StalesgdProtocol::KBatchAsync => Protocol::KBatchAsync,
        };
        let schedule =
            if schedule_c > 0.0 { LrSchedule::staleness_compensated(schedule_c, eta)? } else { LrSchedule::fixed(eta)? };
        let config = VariantConfig::new(protocol, learners, wait_for, schedule, iterations).with_batch_size(batch_size);
        let trace = Simulation::new(&config, obj.as_ref(), dist).seed(master_seed).replication(replication).run()?;
        write(out, "out", Box::into_raw(Box::new(StalesgdTrace { inner: trace })))
    })
}

#[no_mangle]
pub unsafe extern "C" fn stalesgd_trace_free(t: *mut StalesgdTrace) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

#[no_mangle]
pub unsafe extern "C" fn stalesgd_trace_len(t: *const StalesgdTrace, out: *mut usize) -> StalesgdStatus {
    guard(|| write(out, "out", deref(t, "trace")?.inner.len()))
}

/// `out_diverged` is 1 when the run diverged, with the iteration in
/// `out_iteration`; 0 otherwise.
#[no_mangle]
pub unsafe extern "C" fn stalesgd_trace_diverged(
    t: *const StalesgdTrace,
    out_diverged: *mut i32,
    out_iteration: *mut usize,
) -> StalesgdStatus {
    guard(|| {
        let d = deref(t, "trace")?.inner.diverged_at;
        write(out_diverged, "out_diverged", i32::from(d.is_some()))?;
        if !out_iteration.is_null() {
            out_iteration.write(d.unwrap_or(0));
        }
        Ok(())
    })
}

/// Fields of record `index` (0-based). Any out pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn stalesgd_trace_record(
    t: *const StalesgdTrace,
    index: usize,
    out_wallclock: *mut f64,
    out_loss: *mut f64,
    out_eta: *mut f64,
    out_max_staleness: *mut usize,
) -> StalesgdStatus {
    guard(|| {
        let trace = &deref(t, "trace")?.inner;
        let r = trace.records.get(index).ok_or_else(|| {
            Failure(StalesgdStatus::OutOfRange, format!("record {index} of {}", trace.len()))
        })?;
        if !out_wallclock.is_null() {
            out_wallclock.write(r.wallclock);
        }
        if !out_loss.is_null() {
            out_loss.write(r.loss);
        }
        if !out_eta.is_null() {
            out_eta.write(r.eta);
        }
        if !out_max_staleness.is_null() {
            out_max_staleness.write(r.max_staleness());
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn stalesgd_trace_measure_runtime(
    t: *const StalesgdTrace,
    burn_in: usize,
    out_mean: *mut f64,
    out_stderr: *mut f64,
) -> StalesgdStatus {
    guard(|| {
        let m = deref(t, "trace")?.inner.measure_runtime_per_iteration(burn_in)?;
        write(out_mean, "out_mean", m.mean)?;
        if !out_stderr.is_null() {
            out_stderr.write(m.stderr);
        }
        Ok(())
    })
}

/// Fraction of applied gradients with zero staleness.
#[no_mangle]
pub unsafe extern "C" fn stalesgd_trace_estimate_p0(t: *const StalesgdTrace, out: *mut f64) -> StalesgdStatus {
    guard(|| write(out, "out", theory::estimate_p0(&deref(t, "trace")?.inner)?.value))
}

#[no_mangle]
pub unsafe extern "C" fn stalesgd_trace_write_csv(t: *const StalesgdTrace, path: *const c_char) -> StalesgdStatus {
    guard(|| {
        let trace = &deref(t, "trace")?.inner;
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|e| Failure(StalesgdStatus::InvalidArgument, format!("path: {e}")))?;
        let file = std::fs::File::create(path).map_err(|e| Failure(StalesgdStatus::Io, format!("{path}: {e}")))?;
        trace.write_csv(std::io::BufWriter::new(file))?;
        Ok(())
    })
}

unsafe fn write_series(values: &[f64], out: *mut f64, capacity: usize) -> FfiResult<()> {
    if out.is_null() {
        return Err(null("out"));
    }
    if capacity < values.len() {
        return Err(Failure(
            StalesgdStatus::OutOfRange,
            format!("buffer holds {capacity} values, series has {}", values.len()),
        ));
    }
    std::ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

/// K-sync bound `b_0..b_horizon` into `out` (capacity at least `horizon + 1`).
#[no_mangle]
pub unsafe extern "C" fn stalesgd_bound_ksync(
    params: *const StalesgdBoundParams,
    f0_gap: f64,
    out: *mut f64,
    capacity: usize,
) -> StalesgdStatus {
    guard(|| {
        let s = theory::bound_ksync(&(*deref(params, "params")?).into(), f0_gap)?;
        write_series(&s.values, out, capacity)
    })
}

/// K-async bound `b_0..b_horizon` into `out` (capacity at least `horizon + 1`).
#[no_mangle]
pub unsafe extern "C" fn stalesgd_bound_kasync(
    params: *const StalesgdBoundParams,
    f0_gap: f64,
    out: *mut f64,
    capacity: usize,
) -> StalesgdStatus {
    guard(|| {
        let s = theory::bound_kasync(&(*deref(params, "params")?).into(), f0_gap)?;
        write_series(&s.values, out, capacity)
    })
}

/// Variable-rate bound for the rates `etas[0..n]` into `out` (capacity at least `n + 1`).
#[no_mangle]
pub unsafe extern "C" fn stalesgd_bound_variable_lr(
    etas: *const f64,
    n: usize,
    params: *const StalesgdBoundParams,
    f0_gap: f64,
    out: *mut f64,
    capacity: usize,
) -> StalesgdStatus {
    guard(|| {
        let etas = slice(etas, n, "etas")?;
        let s = theory::bound_variable_lr(etas, &(*deref(params, "params")?).into(), f0_gap)?;
        write_series(&s.values, out, capacity)
    })
}

/// Non-convex ergodic bound on the mean squared gradient norm.
#[no_mangle]
pub unsafe extern "C" fn stalesgd_bound_nonconvex(
    params: *const StalesgdBoundParams,
    f0_gap: f64,
    horizon: usize,
    out: *mut f64,
) -> StalesgdStatus {
    guard(|| {
        let v = theory::bound_nonconvex(&(*deref(params, "params")?).into(), f0_gap, horizon)?;
        write(out, "out", v)
    })
}
