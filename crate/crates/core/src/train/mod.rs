//! Miniature differentiable renderer and offloaded training loop.

mod adam;
mod arena;
mod checkpoint;
mod image;
mod render;
mod trainer;

pub use adam::{AdamConfig, AdamState};
pub use arena::{Arena, ArenaCounters, TransferCounters};
pub use checkpoint::Checkpoint;
pub use image::Image;
pub use render::{
    backward, backward_params, render, render_all, render_params, Gradients, Params, RenderConfig, Rendered,
    COV_REGULARIZER,
};
pub use trainer::{
    device_peak_bytes, train_batch, train_reference, AdamTiming, BatchReport, TrainConfig, UntouchedPolicy,
};
