//! C ABI over the `repchain` engines.
//!
//! Every fallible call returns a [`RepchainStatus`]; on failure a message is
//! available from [`repchain_last_error_message`] on the same thread. Objects
//! are opaque handles released with their matching `_free` function. Array
//! accessors copy into caller-owned buffers of at least the reported length.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use repchain::deterministic::{self, LevelDistributions, WernerProfile};
use repchain::montecarlo::{self, CampaignResult};
use repchain::{Error, ProtocolParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepchainStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    Unsupported = 3,
    BufferTooSmall = 4,
    OutOfRange = 5,
    Panic = 6,
}

/// Protocol parameters.
pub struct RepchainParams(ProtocolParams);

/// Per-level waiting-time distributions.
pub struct RepchainDistributions(LevelDistributions);

/// Per-level time-conditioned Werner parameters.
pub struct RepchainWernerProfile(WernerProfile);

/// Monte Carlo campaign result.
pub struct RepchainCampaign(CampaignResult);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("no interior nul"));
}

fn fail(status: RepchainStatus, msg: impl Into<String>) -> RepchainStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> RepchainStatus {
    let status = match e {
        Error::DistillationUnsupported(_) => RepchainStatus::Unsupported,
        _ => RepchainStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

/// Runs `f`, turning panics into [`RepchainStatus::Panic`].
fn guard(f: impl FnOnce() -> RepchainStatus) -> RepchainStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(RepchainStatus::Panic, format!("internal error: {msg}"))
        }
    }
}

macro_rules! deref {
    ($p:expr, $name:literal) => {
        match unsafe { $p.as_ref() } {
            Some(v) => v,
            None => return fail(RepchainStatus::NullPointer, concat!($name, " is null")),
        }
    };
}

macro_rules! deref_mut {
    ($p:expr, $name:literal) => {
        match unsafe { $p.as_mut() } {
            Some(v) => v,
            None => return fail(RepchainStatus::NullPointer, concat!($name, " is null")),
        }
    };
}

fn box_out<T>(out: *mut *mut T, value: T) -> RepchainStatus {
    unsafe { *out = Box::into_raw(Box::new(value)) };
    RepchainStatus::Ok
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> RepchainStatus {
    if buf.is_null() {
        return fail(RepchainStatus::NullPointer, "buffer is null");
    }
    if len < src.len() {
        return fail(
            RepchainStatus::BufferTooSmall,
            format!("buffer holds {len} values, need {}", src.len()),
        );
    }
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len()) };
    RepchainStatus::Ok
}

/// Message of the last failure on this thread; empty if none. The pointer
/// stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn repchain_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// New SWAP-ONLY parameters with perfect links and memories and `t_trunc = 1`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn repchain_params_new(
    p_gen: f64,
    p_swap: f64,
    n: u32,
    out: *mut *mut RepchainParams,
) -> RepchainStatus {
    guard(|| {
        if out.is_null() {
            return fail(RepchainStatus::NullPointer, "out is null");
        }
        let params = ProtocolParams::new(p_gen, p_swap, n);
        if let Err(e) = params.validate_physics() {
            return from_error(e);
        }
        box_out(out, RepchainParams(params))
    })
}

/// # Safety
/// `params` must come from [`repchain_params_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn repchain_params_free(params: *mut RepchainParams) {
    free(params)
}

fn update(params: *mut RepchainParams, f: impl FnOnce(&mut ProtocolParams)) -> RepchainStatus {
    guard(|| {
        let p = deref_mut!(params, "params");
        let mut next = p.0.clone();
        f(&mut next);
        match next.validate_physics() {
            Ok(()) => {
                p.0 = next;
                RepchainStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `params` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn repchain_params_set_w0(params: *mut RepchainParams, w0: f64) -> RepchainStatus {
    update(params, |p| p.w0 = w0)
}

/// Coherence time; pass `INFINITY` for perfect memories.
///
/// # Safety
/// `params` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn repchain_params_set_t_coh(params: *mut RepchainParams, t_coh: f64) -> RepchainStatus {
    update(params, |p| p.t_coh = t_coh)
}

/// # Safety
/// `params` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn repchain_params_set_distillation(params: *mut RepchainParams, d: u32) -> RepchainStatus {
    update(params, |p| p.d = d)
}

/// # Safety
/// `params` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn repchain_params_set_comm_time(params: *mut RepchainParams, include: bool) -> RepchainStatus {
    update(params, |p| p.include_comm_time = include)
}

/// # Safety
/// `params` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn repchain_params_set_t_trunc(params: *mut RepchainParams, t_trunc: usize) -> RepchainStatus {
    update(params, |p| p.t_trunc = t_trunc)
}

/// Truncation time guaranteeing captured mass `coverage`.
///
/// # Safety
/// `params` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn repchain_choose_truncation(
    params: *const RepchainParams,
    coverage: f64,
    out: *mut usize,
) -> RepchainStatus {
    guard(|| {
        let p = deref!(params, "params");
        let out = deref_mut!(out, "out");
        match deterministic::choose_truncation(&p.0, coverage) {
            Ok(t) => {
                *out = t;
                RepchainStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `params` must be a valid handle; `lower` and `upper` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn repchain_mean_bounds(
    params: *const RepchainParams,
    lower: *mut f64,
    upper: *mut f64,
) -> RepchainStatus {
    guard(|| {
        let p = deref!(params, "params");
        let lower = deref_mut!(lower, "lower");
        let upper = deref_mut!(upper, "upper");
        match deterministic::mean_bounds(&p.0) {
            Ok(b) => {
                *lower = b.lower;
                *upper = b.upper;
                RepchainStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `params` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn repchain_waiting_time(
    params: *const RepchainParams,
    out: *mut *mut RepchainDistributions,
) -> RepchainStatus {
    guard(|| {
        let p = deref!(params, "params");
        if out.is_null() {
            return fail(RepchainStatus::NullPointer, "out is null");
        }
        match deterministic::compute_waiting_time(&p.0) {
            Ok(d) => box_out(out, RepchainDistributions(d)),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `dists` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn repchain_distributions_free(dists: *mut RepchainDistributions) {
    free(dists)
}

/// Number of levels, `n + 1`; zero for a null handle.
///
/// # Safety
/// `dists` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn repchain_distributions_levels(dists: *const RepchainDistributions) -> usize {
    dists.as_ref().map_or(0, |d| d.0.levels())
}

/// Length of every per-level array, `t_trunc + 1`; zero for a null handle.
///
/// # Safety
/// `dists` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn repchain_distributions_len(dists: *const RepchainDistributions) -> usize {
    dists.as_ref().map_or(0, |d| d.0.t_trunc() + 1)
}

fn level_check(level: usize, levels: usize) -> Result<(), RepchainStatus> {
    if level >= levels {
        return Err(fail(
            RepchainStatus::OutOfRange,
            format!("level {level} out of range 0..{levels}"),
        ));
    }
    Ok(())
}

/// # Safety
/// `dists` must be a valid handle and `buf` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn repchain_distributions_pmf(
    dists: *const RepchainDistributions,
    level: usize,
    buf: *mut f64,
    len: usize,
) -> RepchainStatus {
    guard(|| {
        let d = deref!(dists, "dists");
        if let Err(s) = level_check(level, d.0.levels()) {
            return s;
        }
        copy_out(d.0.pmf(level).probs(), buf, len)
    })
}

/// # Safety
/// `dists` must be a valid handle and `buf` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn repchain_distributions_cdf(
    dists: *const RepchainDistributions,
    level: usize,
    buf: *mut f64,
    len: usize,
) -> RepchainStatus {
    guard(|| {
        let d = deref!(dists, "dists");
        if let Err(s) = level_check(level, d.0.levels()) {
            return s;
        }
        copy_out(d.0.cdf(level).cum(), buf, len)
    })
}

/// # Safety
/// `params` and `dists` must be valid handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn repchain_werner_profile(
    params: *const RepchainParams,
    dists: *const RepchainDistributions,
    out: *mut *mut RepchainWernerProfile,
) -> RepchainStatus {
    guard(|| {
        let p = deref!(params, "params");
        let d = deref!(dists, "dists");
        if out.is_null() {
            return fail(RepchainStatus::NullPointer, "out is null");
        }
        match deterministic::compute_werner_profile(&p.0, &d.0) {
            Ok(w) => box_out(out, RepchainWernerProfile(w)),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `profile` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn repchain_werner_profile_free(profile: *mut RepchainWernerProfile) {
    free(profile)
}

/// Werner parameters of one level; NaN where no link is delivered.
///
/// # Safety
/// `profile` must be a valid handle and `buf` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn repchain_werner_profile_level(
    profile: *const RepchainWernerProfile,
    level: usize,
    buf: *mut f64,
    len: usize,
) -> RepchainStatus {
    guard(|| {
        let w = deref!(profile, "profile");
        if let Err(s) = level_check(level, w.0.levels()) {
            return s;
        }
        let values: Vec<f64> = w.0.level(level).iter().map(|x| x.unwrap_or(f64::NAN)).collect();
        copy_out(&values, buf, len)
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn repchain_required_samples(eps: f64, z: f64, out: *mut u64) -> RepchainStatus {
    guard(|| {
        let out = deref_mut!(out, "out");
        match montecarlo::required_samples(eps, z) {
            Ok(m) => {
                *out = m;
                RepchainStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// `m` samples with DKW bands at the default confidence parameter.
///
/// # Safety
/// `params` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn repchain_run_campaign(
    params: *const RepchainParams,
    m: u64,
    seed: u64,
    out: *mut *mut RepchainCampaign,
) -> RepchainStatus {
    guard(|| {
        let p = deref!(params, "params");
        if out.is_null() {
            return fail(RepchainStatus::NullPointer, "out is null");
        }
        match montecarlo::run_campaign(&p.0, m, seed) {
            Ok(c) => box_out(out, RepchainCampaign(c)),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `campaign` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn repchain_campaign_free(campaign: *mut RepchainCampaign) {
    free(campaign)
}

/// Number of samples; zero for a null handle.
///
/// # Safety
/// `campaign` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn repchain_campaign_len(campaign: *const RepchainCampaign) -> usize {
    campaign.as_ref().map_or(0, |c| c.0.len())
}

/// Copies the delivery times and Werner parameters of every sample.
///
/// # Safety
/// `campaign` must be a valid handle; `times` and `werner` must each point to
/// `len` writable elements.
#[no_mangle]
pub unsafe extern "C" fn repchain_campaign_samples(
    campaign: *const RepchainCampaign,
    times: *mut u64,
    werner: *mut f64,
    len: usize,
) -> RepchainStatus {
    guard(|| {
        let c = deref!(campaign, "campaign");
        if times.is_null() || werner.is_null() {
            return fail(RepchainStatus::NullPointer, "buffer is null");
        }
        let samples = &c.0.samples;
        if len < samples.len() {
            return fail(
                RepchainStatus::BufferTooSmall,
                format!("buffers hold {len} samples, need {}", samples.len()),
            );
        }
        for (i, s) in samples.iter().enumerate() {
            *times.add(i) = s.t;
            *werner.add(i) = s.w.value();
        }
        RepchainStatus::Ok
    })
}

/// Sample mean and standard error of the delivery time, and the DKW band half-width.
///
/// # Safety
/// `campaign` must be a valid handle; the outputs valid pointers.
#[no_mangle]
pub unsafe extern "C" fn repchain_campaign_summary(
    campaign: *const RepchainCampaign,
    mean_time: *mut f64,
    standard_error: *mut f64,
    dkw_eps: *mut f64,
) -> RepchainStatus {
    guard(|| {
        let c = deref!(campaign, "campaign");
        let mean_time = deref_mut!(mean_time, "mean_time");
        let standard_error = deref_mut!(standard_error, "standard_error");
        let dkw_eps = deref_mut!(dkw_eps, "dkw_eps");
        *mean_time = c.0.sample_mean_time;
        *standard_error = c.0.standard_error;
        *dkw_eps = c.0.dkw_eps;
        RepchainStatus::Ok
    })
}
