//! Event-driven model of the compute stream, the transfer stream and the
//! host optimizer thread.

mod cost;
mod engine;
mod metrics;

pub use cost::{fit_render_cost, fit_transfer, AdamCost, CostModel, RenderCost, RenderSample};
pub use engine::{simulate, EventKind, Mode, Resource, SimEvent, SimTrace};
pub use metrics::{adam_trailing_time, metrics, IdlePoint, PairOverlap, SimMetrics};
