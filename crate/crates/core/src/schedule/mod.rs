//! Microbatch ordering and the per-Gaussian finalization schedule.

mod distance;
mod finalize;
mod order;
mod tsp;

pub use distance::{distance_matrix, DistanceMatrix};
pub use finalize::{finalization_schedule, FinalizationSchedule};
pub use order::{consecutive_overlap, order_views, OrderStrategy};
pub use tsp::{
    held_karp_exact, local_search, nearest_neighbor_init, path_length, SearchBudget, Tour,
    MAX_EXACT_VIEWS,
};
