//! Non-negativity proximal maps, the ℓ1 soft-threshold operator, and
//! violation diagnostics.

use serde::{Deserialize, Serialize};

use crate::matrix::DenseMatrix;

pub const DEFAULT_SOFTPLUS_BETA: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonnegMode {
    Off,
    /// Entrywise max(y, 0). "relu" is accepted as an alias at the
    /// interfaces, since it is the same map.
    Clamp,
    /// Smooth surrogate log(1+exp(βy))/β, strictly positive everywhere and
    /// converging to the clamp as β → ∞.
    Softplus { beta: f64 },
}

impl Default for NonnegMode {
    fn default() -> Self {
        NonnegMode::Clamp
    }
}

impl NonnegMode {
    pub fn softplus_default() -> Self {
        NonnegMode::Softplus {
            beta: DEFAULT_SOFTPLUS_BETA,
        }
    }
}

impl std::str::FromStr for NonnegMode {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "off" | "none" => Ok(NonnegMode::Off),
            "clamp" | "relu" => Ok(NonnegMode::Clamp),
            "softplus" => Ok(NonnegMode::softplus_default()),
            other => Err(crate::error::Error::Config(format!(
                "unknown non-negativity mode '{other}'"
            ))),
        }
    }
}

/// Overflow-safe softplus: for βy > 30 the result is y to double
/// precision; for βy < −30 it is 0.
fn softplus(y: f64, beta: f64) -> f64 {
    let z = beta * y;
    if z > 30.0 {
        y
    } else if z < -30.0 {
        0.0
    } else {
        z.exp().ln_1p() / beta
    }
}

pub fn project_nonneg(y: &DenseMatrix, mode: &NonnegMode) -> DenseMatrix {
    match mode {
        NonnegMode::Off => y.clone(),
        NonnegMode::Clamp => y.map(|v| v.max(0.0)),
        NonnegMode::Softplus { beta } => y.map(|v| softplus(v, *beta)),
    }
}

/// Entrywise sign(z)·max(|z|−τ, 0): the proximal operator of τ‖·‖₁.
pub fn soft_threshold(z: &DenseMatrix, tau: f64) -> DenseMatrix {
    assert!(tau >= 0.0, "threshold must be non-negative");
    if tau == 0.0 {
        return z.clone();
    }
    z.map(|v| v.signum() * (v.abs() - tau).max(0.0))
}

/// (Σ min(y,0)², magnitude of the most negative entry); both zero iff
/// Y ≥ 0.
pub fn nonneg_violation(y: &DenseMatrix) -> (f64, f64) {
    let mut sum_sq = 0.0;
    let mut worst = 0.0f64;
    for &v in y.data() {
        if v < 0.0 {
            sum_sq += v * v;
            worst = worst.max(-v);
        }
    }
    (sum_sq, worst)
}
