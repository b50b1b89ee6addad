//! The composite flow energy
//!
//!   E(Y) = (1−w)·c_fid·L_fid(Y, X0) + w·c_orth·L_orth(Y)
//!
//! with the Frobenius fidelity loss, two orthogonality penalties (raw and
//! scale-invariant), their analytic gradients, and the one-time warmup
//! re-weighting that puts both loss terms on a common scale regardless of
//! matrix size and data magnitude.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{frobenius_norm, DenseMatrix};

/// Which orthogonality penalty the energy uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    /// ½‖YᵀY − I‖²_F — also constrains column scale.
    Raw,
    /// Σ_{i≠j}(YᵀY)²_ij / (tr YᵀY)² — measures only the angles between
    /// columns, invariant under Y → cY.
    #[default]
    ScaleInvariant,
}

/// One-time re-weighting factors applied to the two loss terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleFactors {
    pub c_fid: f64,
    pub c_orth: f64,
}

impl Default for ScaleFactors {
    fn default() -> Self {
        Self {
            c_fid: 1.0,
            c_orth: 1.0,
        }
    }
}

/// ½‖Y − X0‖²_F.
pub fn fidelity_loss(y: &DenseMatrix, x0: &DenseMatrix) -> Result<f64> {
    check_same_shape(y, x0)?;
    Ok(0.5 * frobenius_norm(&y.sub(x0)).powi(2))
}

/// ½‖YᵀY − I_k‖²_F. Zero iff the columns are orthonormal.
pub fn orth_penalty_raw(y: &DenseMatrix) -> f64 {
    let mut g = y.gram();
    for i in 0..g.rows() {
        let v = g.get(i, i);
        g.set(i, i, v - 1.0);
    }
    0.5 * frobenius_norm(&g).powi(2)
}

/// Scale-invariant orthogonality defect δ(Y) = Σ_{i≠j} G²_ij / (tr G)²
/// with G = YᵀY. Zero iff the columns are mutually orthogonal.
pub fn orth_defect_invariant(y: &DenseMatrix) -> Result<f64> {
    if y.is_zero() {
        return Err(Error::Degenerate("orthogonality defect of the zero matrix"));
    }
    let g = y.gram();
    let k = g.rows();
    let mut off = 0.0;
    let mut trace = 0.0;
    for i in 0..k {
        trace += g.get(i, i);
        for j in 0..k {
            if i != j {
                off += g.get(i, j) * g.get(i, j);
            }
        }
    }
    Ok(off / (trace * trace))
}

/// ∇ of `fidelity_loss` in Y: simply Y − X0.
pub fn grad_fidelity(y: &DenseMatrix, x0: &DenseMatrix) -> Result<DenseMatrix> {
    check_same_shape(y, x0)?;
    Ok(y.sub(x0))
}

/// ∇ of `orth_penalty_raw`: 2·Y·(YᵀY − I_k).
pub fn grad_orth_raw(y: &DenseMatrix) -> DenseMatrix {
    let mut g = y.gram();
    for i in 0..g.rows() {
        let v = g.get(i, i);
        g.set(i, i, v - 1.0);
    }
    y.matmul(&g).scaled(2.0)
}

/// ∇ of `orth_defect_invariant`. With G = YᵀY, M = G − diag(diag G),
/// N = ‖M‖²_F and s = (tr G)²:
///
///   ∇δ = 4·Y·M/s − 4·N·‖Y‖²_F·Y/s².
///
/// δ is 0-homogeneous, so ⟨∇δ, Y⟩ = 0 identically.
pub fn grad_orth_invariant(y: &DenseMatrix) -> Result<DenseMatrix> {
    if y.is_zero() {
        return Err(Error::Degenerate("orthogonality defect of the zero matrix"));
    }
    let g = y.gram();
    let k = g.rows();
    let mut m = g.clone();
    let mut trace = 0.0;
    for i in 0..k {
        trace += g.get(i, i);
        m.set(i, i, 0.0);
    }
    let n = frobenius_norm(&m).powi(2);
    let s = trace * trace;
    let ym = y.matmul(&m);
    let mut out = ym.scaled(4.0 / s);
    out.axpy(-4.0 * n * trace / (s * s), y);
    Ok(out)
}

/// Composite energy at the given weight, penalty mode, and scale factors.
pub fn energy(
    y: &DenseMatrix,
    x0: &DenseMatrix,
    w: f64,
    mode: PenaltyMode,
    scales: &ScaleFactors,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::Config(format!("w must lie in [0,1], got {w}")));
    }
    let fid = fidelity_loss(y, x0)?;
    let orth = orth_term(y, mode)?;
    Ok((1.0 - w) * scales.c_fid * fid + w * scales.c_orth * orth)
}

pub(crate) fn orth_term(y: &DenseMatrix, mode: PenaltyMode) -> Result<f64> {
    match mode {
        PenaltyMode::Raw => Ok(orth_penalty_raw(y)),
        PenaltyMode::ScaleInvariant => orth_defect_invariant(y),
    }
}

/// Like `orth_term` but maps the degenerate all-zero case to the given
/// value instead of erroring; the flow driver uses this so a fully
/// clamped-out iterate reads as "no column correlations" rather than
/// aborting the run.
pub(crate) fn orth_term_or(y: &DenseMatrix, mode: PenaltyMode, fallback: f64) -> f64 {
    orth_term(y, mode).unwrap_or(fallback)
}

pub(crate) fn grad_orth(y: &DenseMatrix, mode: PenaltyMode) -> DenseMatrix {
    match mode {
        PenaltyMode::Raw => grad_orth_raw(y),
        // flat at the (degenerate) origin
        PenaltyMode::ScaleInvariant => grad_orth_invariant(y)
            .unwrap_or_else(|_| DenseMatrix::zeros(y.rows(), y.cols())),
    }
}

/// Reciprocal-mean factors from observed warmup loss levels. A loss that
/// is identically ~0 keeps factor 1 so the other term is not blown up.
pub(crate) fn scales_from_means(mean_fid: f64, mean_orth: f64) -> ScaleFactors {
    let factor = |mean: f64| {
        if !mean.is_finite() || mean <= 1e-12 {
            1.0
        } else {
            1.0 / mean
        }
    };
    ScaleFactors {
        c_fid: factor(mean_fid),
        c_orth: factor(mean_orth),
    }
}

/// Runs a short plain gradient-descent probe from Y0 at a small fixed
/// rate, records both raw losses along the way, and returns
/// reciprocal-mean scale factors. A loss that starts at ~0 (relative to
/// the data scale) keeps factor 1: the probe's own drift must not turn
/// into a huge weight. With the defaults this balances the two applied
/// loss terms at Y0 to within a small factor of each other.
pub fn init_scale_factors(
    y0: &DenseMatrix,
    x0: &DenseMatrix,
    mode: PenaltyMode,
    warmup_iters: usize,
) -> Result<ScaleFactors> {
    check_same_shape(y0, x0)?;
    if warmup_iters == 0 {
        return Err(Error::Config("warmup_iters must be >= 1".into()));
    }

    let g0 = grad_fidelity(y0, x0)?.add(&grad_orth(y0, mode));
    let rate = 1e-3 * frobenius_norm(y0) / frobenius_norm(&g0).max(1e-12);

    let zero_scale = 1e-12 * frobenius_norm(y0).powi(2).max(1.0);
    let fid0 = fidelity_loss(y0, x0)?;
    let orth0 = orth_term_or(y0, mode, 0.0);

    let mut y = y0.clone();
    let mut sum_fid = 0.0;
    let mut sum_orth = 0.0;
    for _ in 0..warmup_iters {
        sum_fid += fidelity_loss(&y, x0)?;
        sum_orth += orth_term_or(&y, mode, 0.0);
        let g = grad_fidelity(&y, x0)?.add(&grad_orth(&y, mode));
        y.axpy(-rate, &g);
        if !y.is_finite() {
            break;
        }
    }
    let n = warmup_iters as f64;
    let mean_fid = if fid0 <= zero_scale { 0.0 } else { sum_fid / n };
    let mean_orth = if orth0 <= zero_scale { 0.0 } else { sum_orth / n };
    Ok(scales_from_means(mean_fid, mean_orth))
}

fn check_same_shape(a: &DenseMatrix, b: &DenseMatrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(a.shape(), b.shape()));
    }
    Ok(())
}
