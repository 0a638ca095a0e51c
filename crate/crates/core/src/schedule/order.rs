use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{distance_matrix, local_search, nearest_neighbor_init, SearchBudget};
use crate::culling::SparsitySet;
use crate::scene::{Aabb, CameraView};
use crate::{Error, Result};

/// How the views of a batch are sequenced into microbatches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderStrategy {
    Random,
    /// Sorted by camera center along the scene's longest axis.
    Camera,
    /// Largest working set first.
    GsCount,
    /// Short open path under the symmetric-difference metric.
    Tsp,
}

impl OrderStrategy {
    pub const ALL: [OrderStrategy; 4] =
        [OrderStrategy::Random, OrderStrategy::Camera, OrderStrategy::GsCount, OrderStrategy::Tsp];

    pub fn name(self) -> &'static str {
        match self {
            OrderStrategy::Random => "random",
            OrderStrategy::Camera => "camera",
            OrderStrategy::GsCount => "gscount",
            OrderStrategy::Tsp => "tsp",
        }
    }
}

impl fmt::Display for OrderStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OrderStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OrderStrategy::ALL
            .into_iter()
            .find(|st| st.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::config(format!("unknown strategy {s:?}; expected random, camera, gscount or tsp")))
    }
}

/// Returns a permutation of positions into `sets`; `views[i]` must be the
/// camera that produced `sets[i]`.
pub fn order_views(
    sets: &[SparsitySet],
    strategy: OrderStrategy,
    views: &[CameraView],
    aabb: &Aabb,
    rng_seed: u64,
    budget: SearchBudget,
) -> Result<Vec<usize>> {
    if sets.len() != views.len() {
        return Err(Error::config(format!("{} sets but {} views", sets.len(), views.len())));
    }
    if let Some((s, v)) = sets.iter().zip(views).find(|(s, v)| s.view_id != v.id) {
        return Err(Error::inconsistent(format!("set for view {} paired with camera {}", s.view_id, v.id)));
    }
    let n = sets.len();
    let mut order: Vec<usize> = (0..n).collect();
    match strategy {
        OrderStrategy::Random => order.shuffle(&mut ChaCha8Rng::seed_from_u64(rng_seed)),
        OrderStrategy::Camera => {
            let axis = aabb.principal_axis();
            order.sort_by(|&a, &b| {
                let (ca, cb) = (views[a].center()[axis], views[b].center()[axis]);
                ca.total_cmp(&cb).then(views[a].id.cmp(&views[b].id))
            });
        }
        OrderStrategy::GsCount => {
            order.sort_by_key(|&i| (std::cmp::Reverse(sets[i].len()), sets[i].view_id));
        }
        OrderStrategy::Tsp => {
            if n > 0 {
                let m = distance_matrix(sets)?;
                let start = ChaCha8Rng::seed_from_u64(rng_seed).random_range(0..n);
                let init = nearest_neighbor_init(&m, start)?;
                order = local_search(&init, &m, budget, rng_seed).order;
            }
        }
    }
    Ok(order)
}

/// `sum |S_{o_i} & S_{o_{i+1}}|` along an ordering.
pub fn consecutive_overlap(sets: &[SparsitySet], order: &[usize]) -> u64 {
    order.windows(2).map(|w| sets[w[0]].intersection_len(&sets[w[1]]) as u64).sum()
}
