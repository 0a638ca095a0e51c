use serde::{Deserialize, Serialize};

use crate::culling::SparsitySet;
use crate::{Error, Result};

/// When each Gaussian's gradient for the batch becomes final.
///
/// Microbatches are numbered `1..=B`; `last_touch[g] = 0` marks a Gaussian
/// no view of the batch touches.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalizationSchedule {
    pub last_touch: Vec<u32>,
    /// `f_sets[i]` holds the Gaussians with `last_touch == i`, ascending.
    pub f_sets: Vec<Vec<u32>>,
}

impl FinalizationSchedule {
    pub fn batch_size(&self) -> usize {
        self.f_sets.len().saturating_sub(1)
    }

    pub fn n_total(&self) -> usize {
        self.last_touch.len()
    }

    pub fn finalized_after(&self, microbatch: usize) -> &[u32] {
        &self.f_sets[microbatch]
    }

    pub fn untouched(&self) -> &[u32] {
        &self.f_sets[0]
    }

    /// Checks the schedule against the ordered sets it should derive from.
    pub fn check_consistent(&self, ordered_sets: &[SparsitySet]) -> Result<()> {
        let expected = finalization_schedule(ordered_sets, self.n_total() as u64)?;
        if &expected == self {
            Ok(())
        } else {
            Err(Error::inconsistent("finalization schedule does not match the ordered sets"))
        }
    }
}

/// `L_g = max { i | g in S_i }` with `F_i` its preimages.
pub fn finalization_schedule(ordered_sets: &[SparsitySet], n: u64) -> Result<FinalizationSchedule> {
    if let Some(s) = ordered_sets.iter().find(|s| s.n_total != n) {
        return Err(Error::inconsistent(format!(
            "view {} was culled against {} Gaussians, expected {n}",
            s.view_id, s.n_total
        )));
    }
    let mut last_touch = vec![0u32; n as usize];
    for (i, s) in ordered_sets.iter().enumerate() {
        for &g in s.indices() {
            last_touch[g as usize] = i as u32 + 1;
        }
    }
    let mut f_sets = vec![Vec::new(); ordered_sets.len() + 1];
    for (g, &l) in last_touch.iter().enumerate() {
        f_sets[l as usize].push(g as u32);
    }
    Ok(FinalizationSchedule { last_touch, f_sets })
}
