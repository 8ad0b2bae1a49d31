//! C ABI over `pcs-core`.
//!
//! Every function returns a [`PcsStatus`]; results are written through out
//! pointers. On failure the message of the last error is available from
//! [`pcs_last_error`] on the same thread. Distributions and window
//! evaluators are opaque handles that must be released with their `free`
//! function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pcs_core::correlations::{conditional_rate, difference_rate, unconditional_rate, w_multi};
use pcs_core::ensemble::{build_distribution_with, resonance_lines, CouplingDistribution, MaskGeometry};
use pcs_core::pvr::{PvrEvaluator, WindowKind, PEAK_DELTA_TILDE};
use pcs_core::{PcsError, SystemParams};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidTruncation = 3,
    NumericalFailure = 4,
    NoConvergence = 5,
    EmptySupport = 6,
    IllConditionedRatio = 7,
    InsufficientData = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Window convention of a two-photon rate.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcsWindow {
    Conditional = 0,
    Unconditional = 1,
}

impl From<PcsWindow> for WindowKind {
    fn from(w: PcsWindow) -> Self {
        match w {
            PcsWindow::Conditional => WindowKind::Conditional,
            PcsWindow::Unconditional => WindowKind::Unconditional,
        }
    }
}

/// Physical parameters in units of κ plus truncation orders.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcsParams {
    pub g_f: f64,
    pub g: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub drive1: f64,
    pub drive2: f64,
    pub delta_tilde: f64,
    pub n_max: u32,
    pub m_max: u32,
}

impl From<&PcsParams> for SystemParams {
    fn from(p: &PcsParams) -> Self {
        let mut s = SystemParams::new(p.g_f, p.gamma, p.drive1, p.drive2, p.delta_tilde)
            .with_coupling(p.g)
            .with_truncation(p.n_max as usize, p.m_max as usize);
        s.kappa = p.kappa;
        s
    }
}

/// A predicted three-photon resonance.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcsResonance {
    pub pump_photons: u8,
    pub scan_photons: u8,
    pub branch: i8,
    pub delta_tilde: f64,
}

/// Opaque coupling distribution.
pub struct PcsDistribution(CouplingDistribution);

/// Opaque peak-to-valley evaluator at the best two-photon peak.
pub struct PcsPvr(PvrEvaluator);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &PcsError) -> PcsStatus {
    match e {
        PcsError::InvalidParameter { .. } | PcsError::OutOfRange(_) => PcsStatus::InvalidArgument,
        PcsError::InvalidTruncation(_) => PcsStatus::InvalidTruncation,
        PcsError::NoConvergence(_) | PcsError::QuadratureNonConvergence { .. } => PcsStatus::NoConvergence,
        PcsError::EmptySupport(_) => PcsStatus::EmptySupport,
        PcsError::IllConditionedRatio { .. } => PcsStatus::IllConditionedRatio,
        PcsError::InsufficientData(_) => PcsStatus::InsufficientData,
        PcsError::NumericalSingularity(_)
        | PcsError::Degenerate(_)
        | PcsError::IntegrationFailure(_)
        | PcsError::EigenFailure(_) => PcsStatus::NumericalFailure,
    }
}

struct Failure(PcsStatus, String);

impl From<PcsError> for Failure {
    fn from(e: PcsError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(PcsStatus::NullPointer, format!("`{name}` is null"))
}

/// Runs `f`, records any error and converts panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PcsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PcsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            PcsStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn in_ref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

/// Message of the last failed call on this thread, or null if none. The
/// string stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pcs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn pcs_status_name(status: PcsStatus) -> *const c_char {
    let s: &'static CStr = match status {
        PcsStatus::Ok => c"ok",
        PcsStatus::NullPointer => c"null pointer",
        PcsStatus::InvalidArgument => c"invalid argument",
        PcsStatus::InvalidTruncation => c"invalid truncation",
        PcsStatus::NumericalFailure => c"numerical failure",
        PcsStatus::NoConvergence => c"no convergence",
        PcsStatus::EmptySupport => c"empty support",
        PcsStatus::IllConditionedRatio => c"ill-conditioned ratio",
        PcsStatus::InsufficientData => c"insufficient data",
        PcsStatus::BufferTooSmall => c"buffer too small",
        PcsStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// Writes the default parameters: g = g_f = 9, κ = 1, γ = 2,
/// E1 = E2 = 0.5, δ̃ = 0 and the default truncations.
///
/// # Safety
/// `out` must be null or point to writable memory for one `PcsParams`.
#[no_mangle]
pub unsafe extern "C" fn pcs_params_default(out: *mut PcsParams) -> PcsStatus {
    guard(|| {
        let p = SystemParams::new(9.0, 2.0, 0.5, 0.5, 0.0);
        *out_ref(out, "out")? = PcsParams {
            g_f: p.g_f,
            g: p.g,
            kappa: p.kappa,
            gamma: p.gamma,
            drive1: p.drive1,
            drive2: p.drive2,
            delta_tilde: p.delta_tilde,
            n_max: p.n_max as u32,
            m_max: p.m_max as u32,
        };
        Ok(())
    })
}

/// Cycle-averaged multi-photon rate of order `ell` at one coupling.
///
/// # Safety
/// `params` must point to a valid `PcsParams` and `out` to a writable double.
#[no_mangle]
pub unsafe extern "C" fn pcs_w_multi(params: *const PcsParams, ell: u32, out: *mut f64) -> PcsStatus {
    guard(|| {
        let p = SystemParams::from(in_ref(params, "params")?);
        let out = out_ref(out, "out")?;
        *out = w_multi(ell as usize, &p)?.value;
        Ok(())
    })
}

/// Background-subtracted multi-photon rate of order `ell`.
///
/// # Safety
/// `params` must point to a valid `PcsParams` and `out` to a writable double.
#[no_mangle]
pub unsafe extern "C" fn pcs_difference_rate(params: *const PcsParams, ell: u32, out: *mut f64) -> PcsStatus {
    guard(|| {
        let p = SystemParams::from(in_ref(params, "params")?);
        let out = out_ref(out, "out")?;
        *out = difference_rate(ell as usize, &p)?.value;
        Ok(())
    })
}

/// Windowed two-photon rate for a window of length `tau_w`.
///
/// # Safety
/// `params` must point to a valid `PcsParams` and `out` to a writable double.
#[no_mangle]
pub unsafe extern "C" fn pcs_windowed_rate(
    params: *const PcsParams,
    tau_w: f64,
    window: PcsWindow,
    out: *mut f64,
) -> PcsStatus {
    guard(|| {
        let p = SystemParams::from(in_ref(params, "params")?);
        let out = out_ref(out, "out")?;
        *out = match window {
            PcsWindow::Conditional => conditional_rate(&p, tau_w)?,
            PcsWindow::Unconditional => unconditional_rate(&p, tau_w)?,
        };
        Ok(())
    })
}

/// Three-photon resonance detunings for couplings `g` and `g_f`.
///
/// Writes the number of lines to `len` and, if `capacity` suffices, the
/// lines to `lines`. Pass `lines = NULL` to query the length only.
/// `pump_only` may be null.
///
/// # Safety
/// `lines` must be null or point to `capacity` writable elements; `len`
/// must point to a writable size; `pump_only` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn pcs_resonance_lines(
    g: f64,
    g_f: f64,
    lines: *mut PcsResonance,
    capacity: usize,
    len: *mut usize,
    pump_only: *mut bool,
) -> PcsStatus {
    guard(|| {
        let len = out_ref(len, "len")?;
        let r = resonance_lines(g, g_f)?;
        *len = r.lines.len();
        if let Some(flag) = pump_only.as_mut() {
            *flag = r.pump_only_resonant;
        }
        if lines.is_null() {
            return Ok(());
        }
        if capacity < r.lines.len() {
            return Err(Failure(
                PcsStatus::BufferTooSmall,
                format!("need room for {} lines, got {capacity}", r.lines.len()),
            ));
        }
        for (i, l) in r.lines.iter().enumerate() {
            *lines.add(i) = PcsResonance {
                pump_photons: l.pump_photons,
                scan_photons: l.scan_photons,
                branch: l.branch,
                delta_tilde: l.delta_tilde,
            };
        }
        Ok(())
    })
}

fn boxed<T>(value: T, out: *mut *mut T) -> Result<(), Failure> {
    // SAFETY: checked non-null; the caller guarantees it is writable.
    let slot = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
    *slot = Box::into_raw(Box::new(value));
    Ok(())
}

/// Coupling distribution of the default mask geometry with `g_max`, built
/// from `samples` positions drawn with `seed` and binned into `nodes`.
///
/// # Safety
/// `out` must point to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn pcs_distribution_mask(
    g_max: f64,
    nodes: u32,
    samples: u64,
    seed: u64,
    out: *mut *mut PcsDistribution,
) -> PcsStatus {
    guard(|| {
        let mut geom = MaskGeometry {
            g_max,
            ..MaskGeometry::default()
        };
        geom.cutoff = geom.corner_fraction();
        let d = build_distribution_with(&geom, nodes as usize, samples as usize, seed)?;
        boxed(PcsDistribution(d), out)
    })
}

/// Distribution from `len` nodes and weights; weights must sum to one.
///
/// # Safety
/// `nodes` and `weights` must point to `len` readable doubles and `out` to
/// a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn pcs_distribution_from_nodes(
    nodes: *const f64,
    weights: *const f64,
    len: usize,
    out: *mut *mut PcsDistribution,
) -> PcsStatus {
    guard(|| {
        if nodes.is_null() {
            return Err(null("nodes"));
        }
        if weights.is_null() {
            return Err(null("weights"));
        }
        let n = std::slice::from_raw_parts(nodes, len).to_vec();
        let w = std::slice::from_raw_parts(weights, len).to_vec();
        boxed(PcsDistribution(CouplingDistribution::new(n, w)?), out)
    })
}

/// Number of nodes of a distribution.
///
/// # Safety
/// `dist` must be a live handle and `len` writable.
#[no_mangle]
pub unsafe extern "C" fn pcs_distribution_len(dist: *const PcsDistribution, len: *mut usize) -> PcsStatus {
    guard(|| {
        *out_ref(len, "len")? = in_ref(dist, "dist")?.0.len();
        Ok(())
    })
}

/// Copies nodes and weights into caller buffers of `capacity` elements.
///
/// # Safety
/// `dist` must be a live handle; `nodes` and `weights` must point to
/// `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pcs_distribution_get(
    dist: *const PcsDistribution,
    nodes: *mut f64,
    weights: *mut f64,
    capacity: usize,
) -> PcsStatus {
    guard(|| {
        let d = &in_ref(dist, "dist")?.0;
        if nodes.is_null() {
            return Err(null("nodes"));
        }
        if weights.is_null() {
            return Err(null("weights"));
        }
        if capacity < d.len() {
            return Err(Failure(
                PcsStatus::BufferTooSmall,
                format!("need room for {} nodes, got {capacity}", d.len()),
            ));
        }
        for (i, (g, p)) in d.iter().enumerate() {
            *nodes.add(i) = g;
            *weights.add(i) = p;
        }
        Ok(())
    })
}

/// Releases a distribution; null is ignored.
///
/// # Safety
/// `dist` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pcs_distribution_free(dist: *mut PcsDistribution) {
    if !dist.is_null() {
        drop(Box::from_raw(dist));
    }
}

/// Precomputes the peak-to-valley ratio at δ̃ = 1 + √2 for `params`
/// averaged over `dist`; `params.delta_tilde` and `params.g` are ignored.
///
/// # Safety
/// `params` and `dist` must be valid and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn pcs_pvr_new(
    params: *const PcsParams,
    dist: *const PcsDistribution,
    out: *mut *mut PcsPvr,
) -> PcsStatus {
    guard(|| {
        let p = SystemParams::from(in_ref(params, "params")?).with_delta_tilde(PEAK_DELTA_TILDE);
        let d = &in_ref(dist, "dist")?.0;
        boxed(PcsPvr(PvrEvaluator::new(&p, d)?), out)
    })
}

/// Peak-to-valley ratio for window length `tau_w`.
///
/// # Safety
/// `pvr` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pcs_pvr_ratio(pvr: *const PcsPvr, tau_w: f64, window: PcsWindow, out: *mut f64) -> PcsStatus {
    guard(|| {
        let ev = &in_ref(pvr, "pvr")?.0;
        let out = out_ref(out, "out")?;
        *out = ev.pvr(tau_w, window.into())?;
        Ok(())
    })
}

/// Window length maximizing the ratio over κτ_w ∈ [1e−3, 10].
/// `at_boundary` may be null.
///
/// # Safety
/// `pvr` must be a live handle; `tau_opt` and `pvr_max` writable.
#[no_mangle]
pub unsafe extern "C" fn pcs_pvr_optimize(
    pvr: *const PcsPvr,
    window: PcsWindow,
    tau_opt: *mut f64,
    pvr_max: *mut f64,
    at_boundary: *mut bool,
) -> PcsStatus {
    guard(|| {
        let ev = &in_ref(pvr, "pvr")?.0;
        let tau_opt = out_ref(tau_opt, "tau_opt")?;
        let pvr_max = out_ref(pvr_max, "pvr_max")?;
        let o = ev.optimize(window.into())?;
        *tau_opt = o.tau_opt;
        *pvr_max = o.pvr_max;
        if let Some(b) = at_boundary.as_mut() {
            *b = o.at_boundary;
        }
        Ok(())
    })
}

/// Releases an evaluator; null is ignored.
///
/// # Safety
/// `pvr` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pcs_pvr_free(pvr: *mut PcsPvr) {
    if !pvr.is_null() {
        drop(Box::from_raw(pvr));
    }
}
