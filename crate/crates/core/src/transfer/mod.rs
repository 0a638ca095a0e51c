//! Per-microbatch load, cache, store and carry sets with byte accounting.

mod io;
mod plan;
mod volume;

pub use io::{PLAN_BLOB, PLAN_DESCRIPTOR};
pub use plan::{plan_batch, plan_scene_batch, BatchPlan, PlanMeta, TransferPlan};
pub use volume::{naive_offload_volume, no_cache_volume, volume, StepVolume, VolumeReport};
