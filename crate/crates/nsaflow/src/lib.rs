//! Non-negative Stiefel approximating flow.
//!
//! Approximates a target matrix by a non-negative matrix with tunably
//! near-orthogonal columns. A single weight w ∈ [0,1] balances
//! reconstruction fidelity against column decorrelation and doubles as
//! the strength of a soft polar retraction, so the iterates are drawn
//! smoothly toward the Stiefel manifold instead of being projected onto
//! it. On top of the flow sits a sparse PCA solver that can use the flow
//! as its proximal operator.
//!
//! Entry points: [`optimize::run_nsa_flow`] for the flow,
//! [`spca::run_spca`] for sparse PCA, [`sweep::run_sweep`] for weight
//! sweeps. The `nsaflow` binary wraps all three.

pub mod constraints;
pub mod error;
pub mod geometry;
pub mod io;
pub mod matrix;
pub mod objective;
pub mod optimize;
pub mod spca;
pub mod sweep;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::DenseMatrix;
pub use optimize::{run_nsa_flow, FlowConfig, FlowResult, StopReason, TraceRecord};
pub use spca::{run_spca, SpcaConfig, SpcaResult};
