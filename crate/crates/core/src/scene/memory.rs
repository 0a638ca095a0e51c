use serde::{Deserialize, Serialize};

use super::{AttributeLayout, PARAMS_PER_GAUSSIAN};
use crate::{Error, Result};

/// Full training state of `n` Gaussians held in one memory: parameters,
/// gradients and two Adam moments, each one 4-byte float per parameter.
pub fn model_state_bytes(n: u64) -> u64 {
    n * PARAMS_PER_GAUSSIAN as u64 * 4 * 4
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryBreakdown {
    /// Selection-critical attributes of every Gaussian, always on device.
    pub resident_bytes: u64,
    /// Parameter and gradient staging buffers for in-flight microbatches.
    pub staged_bytes: u64,
    pub total_bytes: u64,
}

/// Device footprint of the offloaded layout for `n` Gaussians when the
/// largest working set is `max_set` and `buffers` microbatches are staged.
pub fn estimate_gpu_memory(
    n: u64,
    layout: &AttributeLayout,
    max_set: u64,
    buffers: u64,
) -> Result<MemoryBreakdown> {
    if max_set > n {
        return Err(Error::config(format!("max_set {max_set} exceeds Gaussian count {n}")));
    }
    if !(1..=2).contains(&buffers) {
        return Err(Error::config(format!("buffers must be 1 or 2, got {buffers}")));
    }
    let resident_bytes = n * layout.selection_critical_bytes();
    let staged_bytes = buffers * max_set * (layout.offload_record_bytes + layout.grad_record_bytes);
    Ok(MemoryBreakdown { resident_bytes, staged_bytes, total_bytes: resident_bytes + staged_bytes })
}
