//! Sparsity-guided offloading for Gaussian-splatting training, at desk scale.
//!
//! The crate covers the whole planning path of an offloaded training step:
//!
//! - [`scene`]: the 59-parameter Gaussian model, camera views, synthetic scene
//!   generation, the scene file format and memory-footprint arithmetic.
//! - [`culling`]: view frusta, the k-sigma ellipsoid/frustum test and the
//!   per-view sparsity sets it produces.
//! - [`schedule`]: symmetric-difference distances, microbatch ordering
//!   (random, camera, Gaussian count, TSP) and Adam finalization schedules.
//! - [`transfer`]: per-microbatch load/copy/store sets and byte accounting.
//! - [`sim`]: a two-stream plus host-optimizer pipeline simulator.
//! - [`train`]: a small differentiable splat renderer and a trainer that runs
//!   the offloading pipeline functionally against emulated memory arenas.
//! - [`cli`]: the `splatoff` command line front end.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod cli;
pub mod culling;
mod error;
pub mod schedule;
pub mod scene;
pub mod sim;
pub mod train;
pub mod transfer;

pub use error::{Error, Result};
