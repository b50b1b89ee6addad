//! C ABI for the flow and the sparse PCA solver. See `include/nsaflow.h`
//! (regenerated by the build script) for the bound surface.

mod capi;

pub use capi::*;
