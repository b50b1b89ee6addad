//! Tangent-space projection and the soft-polar retraction family.
//!
//! The retraction interpolates between the raw iterate and its polar
//! factor. On the wide branch the interpolation happens in the ambient
//! space, so the distance to the orthonormal set contracts by exactly
//! (1−ω) per application; on the tall branch the interpolation happens in
//! the (YᵀY)^{-1/2} factor instead, which is cheaper for p ≫ k and is
//! monotone in ω for the scale-invariant defect.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{frobenius_norm, inv_sqrt_psd, polar_orthonormal, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetractionKind {
    /// No geometric correction; the update stays purely Euclidean.
    None,
    /// Convex interpolation toward the polar factor, strength ω.
    #[default]
    SoftPolar,
    /// Full polar retraction; equivalent to soft-polar with ω = 1 and no
    /// norm preservation.
    Polar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetractionMode {
    pub kind: RetractionKind,
    /// Rescale the retracted iterate back to the pre-retraction Frobenius
    /// norm, so the retraction only steers directions.
    pub preserve_norm: bool,
}

impl Default for RetractionMode {
    fn default() -> Self {
        Self {
            kind: RetractionKind::SoftPolar,
            preserve_norm: true,
        }
    }
}

impl RetractionMode {
    pub fn none() -> Self {
        Self {
            kind: RetractionKind::None,
            preserve_norm: false,
        }
    }

    pub fn polar() -> Self {
        Self {
            kind: RetractionKind::Polar,
            preserve_norm: false,
        }
    }
}

/// Projects an ambient gradient toward the Stiefel tangent space at Y:
/// G − Y·sym(YᵀG). Exact (idempotent, radial-free) when YᵀY = I.
pub fn tangent_project(y: &DenseMatrix, g: &DenseMatrix) -> DenseMatrix {
    assert_eq!(y.shape(), g.shape(), "tangent projection shapes");
    let ytg = y.transpose().matmul(g);
    let sym = ytg.add(&ytg.transpose()).scaled(0.5);
    g.sub(&y.matmul(&sym))
}

/// Soft retraction with strength ω ∈ [0,1].
///
/// Tall Y: forms T_ω = (1−ω)I + ω(YᵀY)^{-1/2} and returns Y·T_ω.
/// Wide Y: returns (1−ω)Y + ω·Q with Q the polar factor.
/// ω = 0 is the identity map, bit-exact.
pub fn retract(y: &DenseMatrix, omega: f64, mode: &RetractionMode) -> Result<DenseMatrix> {
    assert!((0.0..=1.0).contains(&omega), "omega must lie in [0,1]");
    match mode.kind {
        RetractionKind::None => Ok(y.clone()),
        RetractionKind::Polar => soft_polar(y, 1.0, false),
        RetractionKind::SoftPolar => soft_polar(y, omega, mode.preserve_norm),
    }
}

fn soft_polar(y: &DenseMatrix, omega: f64, preserve_norm: bool) -> Result<DenseMatrix> {
    if omega == 0.0 {
        return Ok(y.clone());
    }
    if y.is_zero() {
        return Err(Error::Degenerate("retraction of the zero matrix"));
    }
    let candidate = if y.rows() >= y.cols() {
        let t = inv_sqrt_psd(&y.gram(), None)?;
        let mut t_omega = t.scaled(omega);
        for i in 0..t_omega.rows() {
            let v = t_omega.get(i, i);
            t_omega.set(i, i, v + (1.0 - omega));
        }
        y.matmul(&t_omega)
    } else {
        let q = polar_orthonormal(y)?;
        let mut c = y.scaled(1.0 - omega);
        c.axpy(omega, &q);
        c
    };
    if preserve_norm {
        let cn = frobenius_norm(&candidate);
        if cn > 0.0 {
            return Ok(candidate.scaled(frobenius_norm(y) / cn));
        }
    }
    Ok(candidate)
}

/// Distance ratio ‖Y_new − Q‖_F / ‖Ỹ − Q‖_F with Q the polar factor of
/// Ỹ. For the wide-branch convex update this equals (1−ω) exactly.
pub fn contraction_ratio(y_tilde: &DenseMatrix, y_new: &DenseMatrix) -> Result<f64> {
    if y_tilde.shape() != y_new.shape() {
        return Err(Error::shape(y_tilde.shape(), y_new.shape()));
    }
    let q = polar_orthonormal(y_tilde)?;
    let before = frobenius_norm(&y_tilde.sub(&q));
    let after = frobenius_norm(&y_new.sub(&q));
    Ok(after / before.max(1e-300))
}
