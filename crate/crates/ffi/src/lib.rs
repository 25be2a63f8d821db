//! C interface to `speclb`.
//!
//! Models are opaque handles built from JSON5 text. Every fallible call
//! returns a [`SpeclbStatus`]; on failure the message is available from
//! [`speclb_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use speclb::analytic::{self, Method, NetworkConfig};
use speclb::dists::SxModel;
use speclb::harness::parse_model;
use speclb::sim::{self, Discipline, Scheme};
use speclb::Error;

/// Opaque job model (size and slowdown laws plus restart mode).
pub struct SpeclbModel {
    inner: SxModel,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpeclbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    Unstable = 4,
    Numerical = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpeclbMethod {
    HazardRule = 0,
    DirectMinimization = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpeclbTimeout {
    pub tau_star: f64,
    /// Load per unit arrival rate at `tau_star`.
    pub rho_per_lambda: f64,
    /// Load relative to the no-timeout load.
    pub load_ratio: f64,
    pub method: i32,
    /// Nonzero when the hazard-rule monotonicity assumptions held on the grid.
    pub assumption_held: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpeclbResponse {
    pub waiting: f64,
    pub second_moment: f64,
    pub response: f64,
    pub rho: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpeclbSimSummary {
    pub mean_response: f64,
    pub ci95_halfwidth: f64,
    pub mean_service: f64,
    pub timeout_fraction: f64,
    pub messages_per_job: f64,
    pub jobs_completed: u64,
    pub diverged: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> SpeclbStatus {
    match e {
        Error::Unstable { .. } => SpeclbStatus::Unstable,
        e if e.exit_code() == 1 => SpeclbStatus::InvalidInput,
        _ => SpeclbStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), SpeclbStatus>) -> SpeclbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SpeclbStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            SpeclbStatus::Panic
        }
    }
}

fn check<T>(r: speclb::Result<T>) -> Result<T, SpeclbStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

unsafe fn model_ref<'a>(p: *const SpeclbModel) -> Result<&'a SxModel, SpeclbStatus> {
    if p.is_null() {
        set_error("null model handle".into());
        return Err(SpeclbStatus::NullPointer);
    }
    Ok(&(*p).inner)
}

unsafe fn out_ref<'a, T>(p: *mut T) -> Result<&'a mut T, SpeclbStatus> {
    if p.is_null() {
        set_error("null output pointer".into());
        return Err(SpeclbStatus::NullPointer);
    }
    Ok(&mut *p)
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, SpeclbStatus> {
    if p.is_null() {
        set_error("null string".into());
        return Err(SpeclbStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|e| {
        set_error(e.to_string());
        SpeclbStatus::InvalidUtf8
    })
}

/// Message for the last failed call on this thread, or NULL.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn speclb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn speclb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse a model from JSON5. Accepts a full `{S, X, mode}` object or a bare
/// slowdown law (unit sizes, restart mode). Free with [`speclb_model_free`].
///
/// # Safety
/// `json5` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn speclb_model_from_json5(
    json5: *const c_char,
    out: *mut *mut SpeclbModel,
) -> SpeclbStatus {
    guard(|| {
        let out = out_ref(out)?;
        *out = std::ptr::null_mut();
        let model = check(parse_model(text(json5)?))?;
        *out = Box::into_raw(Box::new(SpeclbModel { inner: model }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`speclb_model_from_json5`] and not be freed twice. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn speclb_model_free(model: *mut SpeclbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Mean first-visit work `E[eta1]`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn speclb_eta1_mean(
    model: *const SpeclbModel,
    out: *mut f64,
) -> SpeclbStatus {
    guard(|| {
        *out_ref(out)? = model_ref(model)?.eta1_mean();
        Ok(())
    })
}

/// Load per unit arrival rate with timeout `tau` (pass `INFINITY` for none).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn speclb_load_per_rate(
    model: *const SpeclbModel,
    tau: f64,
    out: *mut f64,
) -> SpeclbStatus {
    guard(|| {
        *out_ref(out)? = check(analytic::load_per_rate(model_ref(model)?, tau))?;
        Ok(())
    })
}

/// Load with timeout `tau` divided by the load without timeouts.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn speclb_load_reduction(
    model: *const SpeclbModel,
    tau: f64,
    out: *mut f64,
) -> SpeclbStatus {
    guard(|| {
        *out_ref(out)? = check(analytic::load_reduction(model_ref(model)?, tau))?;
        Ok(())
    })
}

/// Writes 1 to `out` when speculating with timeout `tau` lowers the load, else 0.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn speclb_speculation_helps(
    model: *const SpeclbModel,
    tau: f64,
    out: *mut i32,
) -> SpeclbStatus {
    guard(|| {
        *out_ref(out)? = check(analytic::speculation_condition_holds(
            model_ref(model)?,
            tau,
        ))? as i32;
        Ok(())
    })
}

/// Load-minimising timeout. Pass `lo = hi = 0` for the default search interval.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn speclb_optimal_timeout(
    model: *const SpeclbModel,
    lo: f64,
    hi: f64,
    out: *mut SpeclbTimeout,
) -> SpeclbStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = out_ref(out)?;
        let interval = (lo != 0.0 || hi != 0.0).then_some((lo, hi));
        let sol = check(analytic::optimal_timeout(m, interval))?;
        *out = SpeclbTimeout {
            tau_star: sol.tau_star,
            rho_per_lambda: sol.rho_at_star,
            load_ratio: sol.l_at_star,
            method: match sol.method {
                Method::HazardRule => SpeclbMethod::HazardRule as i32,
                Method::DirectMinimization => SpeclbMethod::DirectMinimization as i32,
            },
            assumption_held: sol.diagnostics.assumption_held() as i32,
        };
        Ok(())
    })
}

/// Large-system mean response time at arrival rate `lambda` per queue.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn speclb_mean_field_response(
    model: *const SpeclbModel,
    lambda: f64,
    tau: f64,
    out: *mut SpeclbResponse,
) -> SpeclbStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = out_ref(out)?;
        let r = check(analytic::mean_field_response(lambda, m, tau))?;
        *out = SpeclbResponse {
            waiting: r.w,
            second_moment: r.m,
            response: r.r_infinity,
            rho: r.rho,
        };
        Ok(())
    })
}

/// Simulate `n_queues` symmetric FCFS queues under `scheme` ("slb", "rnd",
/// "coc-2", "cos-2", "riq-2", ...). `tau` applies to SLB only. The first
/// 10% of jobs are discarded as warmup.
///
/// # Safety
/// Pointers must be valid; `scheme` is NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn speclb_simulate(
    model: *const SpeclbModel,
    n_queues: u32,
    lambda: f64,
    tau: f64,
    scheme: *const c_char,
    n_jobs: u64,
    seed: u64,
    out: *mut SpeclbSimSummary,
) -> SpeclbStatus {
    guard(|| {
        let m = model_ref(model)?.clone();
        let out = out_ref(out)?;
        let scheme: Scheme = check(text(scheme)?.parse())?;
        let cfg = NetworkConfig::symmetric(n_queues as usize, lambda, tau, m);
        let n_jobs = n_jobs as usize;
        let s = check(sim::run(
            &cfg,
            scheme,
            Discipline::Fcfs,
            n_jobs,
            sim::default_warmup(n_jobs),
            seed,
        ))?;
        *out = SpeclbSimSummary {
            mean_response: s.mean_response,
            ci95_halfwidth: s.ci95_halfwidth,
            mean_service: s.mean_service,
            timeout_fraction: s.timeout_fraction,
            messages_per_job: s.messages_per_job,
            jobs_completed: s.jobs_completed as u64,
            diverged: s.diverged as i32,
        };
        Ok(())
    })
}
