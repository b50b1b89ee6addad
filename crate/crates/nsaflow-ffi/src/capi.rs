//! The exported C surface: opaque matrix/result handles, plain-old-data
//! option structs, and integer status codes. Pointers returned by
//! constructors are owned by the caller and released with the matching
//! `_free` function. Error details for the most recent failing call on
//! the current thread are available via `nsa_last_error_message`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::ptr;

use nsaflow::constraints::NonnegMode;
use nsaflow::geometry::{RetractionKind, RetractionMode};
use nsaflow::objective::PenaltyMode;
use nsaflow::optimize::{
    run_nsa_flow, FlowConfig, FlowResult, LrStrategy, OptimizerKind, StopReason,
};
use nsaflow::spca::{run_spca, ProximalType, SpcaConfig, SpcaResult};
use nsaflow::{DenseMatrix, Error};

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionError = 3,
    DegenerateInput = 4,
    NonFinite = 5,
    IoError = 6,
}

fn status_of(err: &Error) -> NsaStatus {
    match err {
        Error::ShapeMismatch { .. } | Error::Dimension(_) => NsaStatus::DimensionError,
        Error::Degenerate(_) => NsaStatus::DegenerateInput,
        Error::NonFinite(_) => NsaStatus::NonFinite,
        Error::Config(_) => NsaStatus::InvalidArgument,
        Error::Io { .. } | Error::Parse { .. } => NsaStatus::IoError,
    }
}

fn fail(err: Error) -> NsaStatus {
    let code = status_of(&err);
    set_last_error(err.to_string());
    code
}

/// Opaque dense matrix handle.
pub struct NsaMatrix(DenseMatrix);

/// Opaque flow-result handle.
pub struct NsaFlowResult(FlowResult);

/// Opaque sparse-PCA result handle.
pub struct NsaSpcaResult(SpcaResult);

/// Message for the most recent error on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nsa_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(ptr::null(), |c| c.as_ptr())
    })
}

/// Builds a rows×cols matrix from row-major data. Returns NULL on error
/// (see `nsa_last_error_message`).
///
/// # Safety
/// `data` must point to at least rows·cols readable doubles.
#[no_mangle]
pub unsafe extern "C" fn nsa_matrix_new(
    rows: usize,
    cols: usize,
    data: *const f64,
) -> *mut NsaMatrix {
    if data.is_null() {
        set_last_error("data pointer is null".into());
        return ptr::null_mut();
    }
    let slice = std::slice::from_raw_parts(data, rows.saturating_mul(cols));
    match DenseMatrix::new(rows, cols, slice.to_vec()) {
        Ok(m) => Box::into_raw(Box::new(NsaMatrix(m))),
        Err(e) => {
            set_last_error(e.to_string());
            ptr::null_mut()
        }
    }
}

#[no_mangle]
pub extern "C" fn nsa_matrix_rows(m: *const NsaMatrix) -> usize {
    unsafe { m.as_ref() }.map_or(0, |m| m.0.rows())
}

#[no_mangle]
pub extern "C" fn nsa_matrix_cols(m: *const NsaMatrix) -> usize {
    unsafe { m.as_ref() }.map_or(0, |m| m.0.cols())
}

/// Copies the matrix out in row-major order.
///
/// # Safety
/// `out` must point to at least rows·cols writable doubles.
#[no_mangle]
pub unsafe extern "C" fn nsa_matrix_copy_data(m: *const NsaMatrix, out: *mut f64) -> NsaStatus {
    let Some(m) = m.as_ref() else {
        return NsaStatus::NullPointer;
    };
    if out.is_null() {
        return NsaStatus::NullPointer;
    }
    let data = m.0.data();
    std::ptr::copy_nonoverlapping(data.as_ptr(), out, data.len());
    NsaStatus::Ok
}

/// # Safety
/// `m` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn nsa_matrix_free(m: *mut NsaMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Retraction selector for `NsaFlowOptions`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsaRetraction {
    NoRetraction = 0,
    SoftPolar = 1,
    Polar = 2,
}

/// Non-negativity selector for `NsaFlowOptions`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsaNonneg {
    NonnegOff = 0,
    NonnegClamp = 1,
    NonnegSoftplus = 2,
}

/// Optimizer selector for `NsaFlowOptions`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsaOptimizer {
    OptGd = 0,
    OptMomentum = 1,
    OptAdam = 2,
    OptAdagrad = 3,
    OptAsgd = 4,
    OptLars = 5,
}

/// Penalty selector for `NsaFlowOptions`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsaPenalty {
    PenaltyRaw = 0,
    PenaltyScaleInvariant = 1,
}

/// Flow options; initialize with `nsa_flow_options_default` and override
/// fields as needed. `lr <= 0` selects the data-driven probe.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct NsaFlowOptions {
    pub w: f64,
    pub penalty: NsaPenalty,
    pub retraction: NsaRetraction,
    pub preserve_norm: bool,
    pub nonneg: NsaNonneg,
    pub softplus_beta: f64,
    pub optimizer: NsaOptimizer,
    pub max_iter: usize,
    pub tol_slope: f64,
    pub tol_grad: f64,
    pub record_every: usize,
    pub warmup_iters: usize,
    pub lr: f64,
    pub tangent_projection: bool,
    pub seed: u64,
}

/// # Safety
/// `opts` must point to writable memory for one `NsaFlowOptions`.
#[no_mangle]
pub unsafe extern "C" fn nsa_flow_options_default(opts: *mut NsaFlowOptions) -> NsaStatus {
    if opts.is_null() {
        return NsaStatus::NullPointer;
    }
    *opts = NsaFlowOptions {
        w: 0.5,
        penalty: NsaPenalty::PenaltyScaleInvariant,
        retraction: NsaRetraction::SoftPolar,
        preserve_norm: true,
        nonneg: NsaNonneg::NonnegClamp,
        softplus_beta: 20.0,
        optimizer: NsaOptimizer::OptAsgd,
        max_iter: 1000,
        tol_slope: 1e-6,
        tol_grad: 1e-8,
        record_every: 1,
        warmup_iters: 10,
        lr: -1.0,
        tangent_projection: true,
        seed: 0,
    };
    NsaStatus::Ok
}

fn flow_config_from(opts: &NsaFlowOptions) -> FlowConfig {
    FlowConfig {
        w: opts.w,
        penalty_mode: match opts.penalty {
            NsaPenalty::PenaltyRaw => PenaltyMode::Raw,
            NsaPenalty::PenaltyScaleInvariant => PenaltyMode::ScaleInvariant,
        },
        retraction: RetractionMode {
            kind: match opts.retraction {
                NsaRetraction::NoRetraction => RetractionKind::None,
                NsaRetraction::SoftPolar => RetractionKind::SoftPolar,
                NsaRetraction::Polar => RetractionKind::Polar,
            },
            preserve_norm: opts.preserve_norm,
        },
        nonneg: match opts.nonneg {
            NsaNonneg::NonnegOff => NonnegMode::Off,
            NsaNonneg::NonnegClamp => NonnegMode::Clamp,
            NsaNonneg::NonnegSoftplus => NonnegMode::Softplus {
                beta: opts.softplus_beta,
            },
        },
        optimizer: match opts.optimizer {
            NsaOptimizer::OptGd => OptimizerKind::Gd,
            NsaOptimizer::OptMomentum => OptimizerKind::momentum_default(),
            NsaOptimizer::OptAdam => OptimizerKind::adam_default(),
            NsaOptimizer::OptAdagrad => OptimizerKind::Adagrad,
            NsaOptimizer::OptAsgd => OptimizerKind::asgd_default(),
            NsaOptimizer::OptLars => OptimizerKind::lars_default(),
        },
        max_iter: opts.max_iter,
        tol_slope: opts.tol_slope,
        tol_grad: opts.tol_grad,
        record_every: opts.record_every,
        warmup_iters: opts.warmup_iters,
        lr: (opts.lr > 0.0).then_some(opts.lr),
        lr_strategy: if opts.lr > 0.0 {
            LrStrategy::Fixed
        } else {
            LrStrategy::Probe
        },
        tangent_projection: opts.tangent_projection,
        seed: opts.seed,
    }
}

/// Runs the flow from `y0` toward optional target `x0` (NULL means Y0 is
/// its own target). On success stores a new result handle in `out`.
///
/// # Safety
/// `y0` and (when non-NULL) `x0` must be live handles from this library;
/// `opts` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn nsa_flow_run(
    y0: *const NsaMatrix,
    x0: *const NsaMatrix,
    opts: *const NsaFlowOptions,
    out: *mut *mut NsaFlowResult,
) -> NsaStatus {
    let (Some(y0), Some(opts)) = (y0.as_ref(), opts.as_ref()) else {
        return NsaStatus::NullPointer;
    };
    if out.is_null() {
        return NsaStatus::NullPointer;
    }
    let cfg = flow_config_from(opts);
    let x0 = x0.as_ref().map(|m| &m.0);
    match run_nsa_flow(&y0.0, x0, &cfg) {
        Ok(res) => {
            *out = Box::into_raw(Box::new(NsaFlowResult(res)));
            NsaStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Copy of the best iterate; caller frees it with `nsa_matrix_free`.
///
/// # Safety
/// `r` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn nsa_result_best(r: *const NsaFlowResult) -> *mut NsaMatrix {
    r.as_ref().map_or(ptr::null_mut(), |r| {
        Box::into_raw(Box::new(NsaMatrix(r.0.y_best.clone())))
    })
}

#[no_mangle]
pub extern "C" fn nsa_result_converged(r: *const NsaFlowResult) -> bool {
    unsafe { r.as_ref() }.is_some_and(|r| r.0.converged)
}

/// 0 = slope, 1 = grad_norm, 2 = max_iter, 3 = nan_guard, -1 = null.
#[no_mangle]
pub extern "C" fn nsa_result_stop_reason(r: *const NsaFlowResult) -> i32 {
    unsafe { r.as_ref() }.map_or(-1, |r| match r.0.stop_reason {
        StopReason::Slope => 0,
        StopReason::GradNorm => 1,
        StopReason::MaxIter => 2,
        StopReason::NanGuard => 3,
    })
}

#[no_mangle]
pub extern "C" fn nsa_result_energy(r: *const NsaFlowResult) -> f64 {
    unsafe { r.as_ref() }.map_or(f64::NAN, |r| r.0.energy)
}

#[no_mangle]
pub extern "C" fn nsa_result_fidelity(r: *const NsaFlowResult) -> f64 {
    unsafe { r.as_ref() }.map_or(f64::NAN, |r| r.0.fidelity)
}

#[no_mangle]
pub extern "C" fn nsa_result_orth_defect(r: *const NsaFlowResult) -> f64 {
    unsafe { r.as_ref() }.map_or(f64::NAN, |r| r.0.orth_defect)
}

#[no_mangle]
pub extern "C" fn nsa_result_trace_len(r: *const NsaFlowResult) -> usize {
    unsafe { r.as_ref() }.map_or(0, |r| r.0.traces.len())
}

/// Copies trace record `idx` as 8 doubles: iter, wall_time, fidelity,
/// orth_defect, energy, grad_norm, lr, best_energy_so_far.
///
/// # Safety
/// `out` must point to at least 8 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn nsa_result_trace_row(
    r: *const NsaFlowResult,
    idx: usize,
    out: *mut f64,
) -> NsaStatus {
    let Some(r) = r.as_ref() else {
        return NsaStatus::NullPointer;
    };
    if out.is_null() {
        return NsaStatus::NullPointer;
    }
    let Some(t) = r.0.traces.get(idx) else {
        set_last_error(format!("trace index {idx} out of range"));
        return NsaStatus::InvalidArgument;
    };
    let row = [
        t.iter as f64,
        t.wall_time,
        t.fidelity,
        t.orth_defect,
        t.energy,
        t.grad_norm,
        t.lr,
        t.best_energy_so_far,
    ];
    std::ptr::copy_nonoverlapping(row.as_ptr(), out, row.len());
    NsaStatus::Ok
}

/// # Safety
/// `r` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn nsa_result_free(r: *mut NsaFlowResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Sparse-PCA options; initialize with `nsa_spca_options_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct NsaSpcaOptions {
    pub k: usize,
    pub lambda: f64,
    /// 0 = basic soft-threshold prox, 1 = inner-flow prox.
    pub proximal_flow: bool,
    pub w: f64,
    pub nonneg: bool,
    pub max_iter: usize,
    pub tol: f64,
    pub patience: usize,
    pub lr_shrink: f64,
    pub inner_budget: usize,
    pub alpha0: f64,
}

/// # Safety
/// `opts` must point to writable memory for one `NsaSpcaOptions`.
#[no_mangle]
pub unsafe extern "C" fn nsa_spca_options_default(opts: *mut NsaSpcaOptions) -> NsaStatus {
    if opts.is_null() {
        return NsaStatus::NullPointer;
    }
    let d = SpcaConfig::default();
    *opts = NsaSpcaOptions {
        k: d.k,
        lambda: d.lambda,
        proximal_flow: false,
        w: d.w,
        nonneg: d.nonneg,
        max_iter: d.max_iter,
        tol: d.tol,
        patience: d.patience,
        lr_shrink: d.lr_shrink,
        inner_budget: d.inner_budget,
        alpha0: d.alpha0,
    };
    NsaStatus::Ok
}

/// Runs sparse PCA on an n×p data matrix.
///
/// # Safety
/// `data` must be a live matrix handle; `opts` and `out` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn nsa_spca_run(
    data: *const NsaMatrix,
    opts: *const NsaSpcaOptions,
    out: *mut *mut NsaSpcaResult,
) -> NsaStatus {
    let (Some(data), Some(opts)) = (data.as_ref(), opts.as_ref()) else {
        return NsaStatus::NullPointer;
    };
    if out.is_null() {
        return NsaStatus::NullPointer;
    }
    let cfg = SpcaConfig {
        k: opts.k,
        lambda: opts.lambda,
        proximal_type: if opts.proximal_flow {
            ProximalType::NsaFlow
        } else {
            ProximalType::Basic
        },
        w: opts.w,
        nonneg: opts.nonneg,
        max_iter: opts.max_iter,
        tol: opts.tol,
        patience: opts.patience,
        lr_shrink: opts.lr_shrink,
        inner_budget: opts.inner_budget,
        alpha0: opts.alpha0,
    };
    match run_spca(&data.0, &cfg) {
        Ok(res) => {
            *out = Box::into_raw(Box::new(NsaSpcaResult(res)));
            NsaStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Copy of the loadings; caller frees with `nsa_matrix_free`.
///
/// # Safety
/// `r` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn nsa_spca_loadings(r: *const NsaSpcaResult) -> *mut NsaMatrix {
    r.as_ref().map_or(ptr::null_mut(), |r| {
        Box::into_raw(Box::new(NsaMatrix(r.0.loadings.clone())))
    })
}

#[no_mangle]
pub extern "C" fn nsa_spca_explained_variance(r: *const NsaSpcaResult) -> f64 {
    unsafe { r.as_ref() }.map_or(f64::NAN, |r| r.0.explained_variance_ratio)
}

#[no_mangle]
pub extern "C" fn nsa_spca_sparsity(r: *const NsaSpcaResult) -> f64 {
    unsafe { r.as_ref() }.map_or(f64::NAN, |r| r.0.sparsity)
}

#[no_mangle]
pub extern "C" fn nsa_spca_orth_residual(r: *const NsaSpcaResult) -> f64 {
    unsafe { r.as_ref() }.map_or(f64::NAN, |r| r.0.orth_residual)
}

#[no_mangle]
pub extern "C" fn nsa_spca_energy(r: *const NsaSpcaResult) -> f64 {
    unsafe { r.as_ref() }.map_or(f64::NAN, |r| r.0.energy)
}

/// # Safety
/// `r` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn nsa_spca_free(r: *mut NsaSpcaResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}
