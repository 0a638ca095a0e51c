use serde::{Deserialize, Serialize};

use crate::culling::{cull_geometries, SparsitySet};
use crate::schedule::{finalization_schedule, order_views, FinalizationSchedule, OrderStrategy, SearchBudget};
use crate::scene::{CameraView, Scene};
use crate::{Error, Result};

/// Data movement around microbatch `i` (1-based) of a batch.
///
/// Parameters for `S_i` arrive either from the host (`load_set`) or from the
/// previous microbatch's buffer (`cache_copy_set`). After the backward pass
/// gradients of `S_i` either go to the host (`grad_store_set`, not needed by
/// microbatch `i + 1`) or stay on device to keep accumulating
/// (`grad_carry_set`). `adam_set` is finalized once the store completes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferPlan {
    pub microbatch: usize,
    pub view_id: u64,
    pub load_set: Vec<u32>,
    pub cache_copy_set: Vec<u32>,
    pub grad_store_set: Vec<u32>,
    pub grad_carry_set: Vec<u32>,
    pub adam_set: Vec<u32>,
    /// Members of `S_i & S_{i-1}` reloaded because the host optimizer
    /// changed them between their two uses; also present in `load_set`.
    pub invalidated: Vec<u32>,
}

impl TransferPlan {
    pub fn working_set_len(&self) -> usize {
        self.load_set.len() + self.cache_copy_set.len()
    }

    /// `load_set | cache_copy_set`, ascending.
    pub fn working_set(&self) -> Vec<u32> {
        merge_union(&self.load_set, &self.cache_copy_set)
    }
}

pub(crate) fn merge_union(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Builds per-microbatch transfer sets for sets in execution order.
pub fn plan_batch(ordered_sets: &[SparsitySet], schedule: &FinalizationSchedule) -> Result<Vec<TransferPlan>> {
    schedule.check_consistent(ordered_sets)?;
    let b = ordered_sets.len();
    let empty = SparsitySet::from_sorted(u64::MAX, Vec::new(), schedule.n_total() as u64);
    let mut plans = Vec::with_capacity(b);
    for i in 0..b {
        let cur = &ordered_sets[i];
        let prev = if i > 0 { &ordered_sets[i - 1] } else { &empty };
        let next = ordered_sets.get(i + 1).unwrap_or(&empty);
        let step = i + 1;
        let shared = cur.intersection(prev);
        // parameters finalized at or before the previous step were updated
        // by the host optimizer after the cached copy was made
        let (invalidated, cache_copy_set): (Vec<u32>, Vec<u32>) = shared.into_iter().partition(|&g| {
            let l = schedule.last_touch[g as usize] as usize;
            l >= 1 && l < step
        });
        let load_set = merge_union(&cur.difference(prev), &invalidated);
        plans.push(TransferPlan {
            microbatch: step,
            view_id: cur.view_id,
            load_set,
            cache_copy_set,
            grad_store_set: cur.difference(next),
            grad_carry_set: cur.intersection(next),
            adam_set: schedule.finalized_after(step).to_vec(),
            invalidated,
        });
    }
    Ok(plans)
}

/// Provenance recorded alongside a plan.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanMeta {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scene_digest: Option<String>,
}

/// One batch ready for simulation or training: transfer plans plus the
/// per-microbatch image sizes and the Gaussians no view touches.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchPlan {
    pub n_total: u64,
    pub pixels: Vec<u64>,
    pub steps: Vec<TransferPlan>,
    pub untouched: Vec<u32>,
    pub meta: PlanMeta,
}

impl BatchPlan {
    /// `ordered_views[i]` must be the camera of `ordered_sets[i]`.
    pub fn new(ordered_sets: &[SparsitySet], ordered_views: &[CameraView], n_total: u64) -> Result<Self> {
        if ordered_sets.len() != ordered_views.len() {
            return Err(Error::config("one camera per set required"));
        }
        if let Some((s, v)) = ordered_sets.iter().zip(ordered_views).find(|(s, v)| s.view_id != v.id) {
            return Err(Error::inconsistent(format!("set for view {} paired with camera {}", s.view_id, v.id)));
        }
        let schedule = finalization_schedule(ordered_sets, n_total)?;
        let steps = plan_batch(ordered_sets, &schedule)?;
        Ok(Self {
            n_total,
            pixels: ordered_views.iter().map(CameraView::pixel_count).collect(),
            steps,
            untouched: schedule.untouched().to_vec(),
            meta: PlanMeta::default(),
        })
    }

    pub fn batch_size(&self) -> usize {
        self.steps.len()
    }

    pub fn view_ids(&self) -> Vec<u64> {
        self.steps.iter().map(|s| s.view_id).collect()
    }

    pub fn working_sets(&self) -> Vec<SparsitySet> {
        self.steps.iter().map(|s| SparsitySet::from_sorted(s.view_id, s.working_set(), self.n_total)).collect()
    }

    pub fn max_working_set(&self) -> usize {
        self.steps.iter().map(TransferPlan::working_set_len).max().unwrap_or(0)
    }

    /// Number of Gaussians touched by at least one view.
    pub fn touched_count(&self) -> u64 {
        self.n_total - self.untouched.len() as u64
    }

    pub fn schedule(&self) -> FinalizationSchedule {
        let mut last_touch = vec![0u32; self.n_total as usize];
        let mut f_sets = vec![self.untouched.clone()];
        for s in &self.steps {
            for &g in &s.adam_set {
                last_touch[g as usize] = s.microbatch as u32;
            }
            f_sets.push(s.adam_set.clone());
        }
        FinalizationSchedule { last_touch, f_sets }
    }

    /// Re-derives every set from the working sets and compares.
    pub fn validate(&self) -> Result<()> {
        if self.pixels.len() != self.steps.len() {
            return Err(Error::inconsistent("pixel counts do not match microbatch count"));
        }
        if self.steps.iter().enumerate().any(|(i, s)| s.microbatch != i + 1) {
            return Err(Error::inconsistent("microbatches must be numbered 1..=B"));
        }
        for s in &self.steps {
            let blocks: [&[u32]; 6] = [
                &s.load_set,
                &s.cache_copy_set,
                &s.grad_store_set,
                &s.grad_carry_set,
                &s.adam_set,
                &s.invalidated,
            ];
            for b in blocks {
                if b.windows(2).any(|w| w[0] >= w[1]) || b.last().is_some_and(|&g| g as u64 >= self.n_total) {
                    return Err(Error::inconsistent(format!(
                        "microbatch {}: unsorted or out-of-range index",
                        s.microbatch
                    )));
                }
            }
        }
        let sets = self.working_sets();
        let expected = plan_batch(&sets, &finalization_schedule(&sets, self.n_total)?)?;
        if expected != self.steps {
            return Err(Error::inconsistent("transfer sets do not derive from the working sets"));
        }
        let sched = finalization_schedule(&sets, self.n_total)?;
        if sched.untouched() != self.untouched.as_slice() {
            return Err(Error::inconsistent("untouched set does not match the working sets"));
        }
        Ok(())
    }
}

/// Culls the views at positions `batch` of `scene`, orders them with
/// `strategy` and plans the transfers.
pub fn plan_scene_batch(
    scene: &Scene,
    batch: &[usize],
    k: f64,
    strategy: OrderStrategy,
    seed: u64,
    budget: SearchBudget,
) -> Result<BatchPlan> {
    if let Some(&bad) = batch.iter().find(|&&i| i >= scene.views.len()) {
        return Err(Error::config(format!("view position {bad} out of range for {} views", scene.views.len())));
    }
    let geoms = scene.geometries();
    let views: Vec<CameraView> = batch.iter().map(|&i| scene.views[i].clone()).collect();
    let sets = views.iter().map(|v| cull_geometries(&geoms, v, k)).collect::<Result<Vec<_>>>()?;
    let order = order_views(&sets, strategy, &views, &scene.aabb, seed, budget)?;
    let ordered_sets: Vec<SparsitySet> = order.iter().map(|&i| sets[i].clone()).collect();
    let ordered_views: Vec<CameraView> = order.iter().map(|&i| views[i].clone()).collect();
    let mut plan = BatchPlan::new(&ordered_sets, &ordered_views, scene.len() as u64)?;
    plan.meta = PlanMeta {
        strategy: Some(strategy.name().to_string()),
        seed: Some(seed),
        k: Some(k),
        scene_digest: Some(scene.digest()),
    };
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::{BTreeMap, BTreeSet};

    fn s(id: u64, idx: &[u32], n: u64) -> SparsitySet {
        SparsitySet::new(id, idx.to_vec(), n).unwrap()
    }

    fn plans(sets: &[SparsitySet], n: u64) -> Vec<TransferPlan> {
        plan_batch(sets, &finalization_schedule(sets, n).unwrap()).unwrap()
    }

    #[test]
    fn single_microbatch() {
        let p = plans(&[s(0, &[1, 4, 7], 10)], 10);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].load_set, vec![1, 4, 7]);
        assert_eq!(p[0].grad_store_set, vec![1, 4, 7]);
        assert!(p[0].cache_copy_set.is_empty() && p[0].grad_carry_set.is_empty());
        assert_eq!(p[0].adam_set, vec![1, 4, 7]);
    }

    #[test]
    fn identical_views_fully_cached() {
        let p = plans(&[s(0, &[2, 3], 5), s(1, &[2, 3], 5)], 5);
        assert!(p[1].load_set.is_empty());
        assert_eq!(p[1].cache_copy_set, vec![2, 3]);
        assert!(p[0].grad_store_set.is_empty());
        assert_eq!(p[0].grad_carry_set, vec![2, 3]);
        assert!(p[0].adam_set.is_empty());
        assert_eq!(p[1].grad_store_set, vec![2, 3]);
    }

    #[test]
    fn inconsistent_schedule_rejected() {
        let sets = [s(0, &[1], 4), s(1, &[2], 4)];
        let sched = finalization_schedule(&sets, 4).unwrap();
        let swapped = [sets[1].clone(), sets[0].clone()];
        assert!(plan_batch(&swapped, &sched).is_err());
    }

    #[test]
    fn tampered_plan_fails_validation() {
        let sets = [s(0, &[1, 2], 4), s(1, &[2, 3], 4)];
        let views: Vec<_> = (0..2)
            .map(|i| {
                crate::scene::CameraView::look_at(
                    i,
                    nalgebra::Vector3::new(0.0, -3.0, 0.0),
                    nalgebra::Vector3::zeros(),
                    nalgebra::Vector3::z(),
                    10.0,
                    8,
                    6,
                    0.1,
                    10.0,
                )
            })
            .collect();
        let mut bp = BatchPlan::new(&sets, &views, 4).unwrap();
        assert!(bp.validate().is_ok());
        assert_eq!(bp.pixels, vec![48, 48]);
        assert_eq!(bp.untouched, vec![0]);
        assert_eq!(bp.schedule(), finalization_schedule(&sets, 4).unwrap());
        bp.steps[1].load_set.push(0);
        assert!(bp.validate().is_err());
    }

    fn arb_sets() -> impl Strategy<Value = Vec<SparsitySet>> {
        proptest::collection::vec(proptest::collection::btree_set(0u32..50, 0..30), 1..8).prop_map(|raw| {
            raw.iter().enumerate().map(|(i, x)| s(i as u64, &x.iter().copied().collect::<Vec<_>>(), 50)).collect()
        })
    }

    proptest! {
        #[test]
        fn plan_invariants(sets in arb_sets()) {
            let p = plans(&sets, 50);
            for (i, step) in p.iter().enumerate() {
                let si: BTreeSet<u32> = sets[i].indices().iter().copied().collect();
                let load: BTreeSet<u32> = step.load_set.iter().copied().collect();
                let copy: BTreeSet<u32> = step.cache_copy_set.iter().copied().collect();
                prop_assert!(load.is_disjoint(&copy));
                prop_assert_eq!(&load | &copy, si.clone());
                let store: BTreeSet<u32> = step.grad_store_set.iter().copied().collect();
                let carry: BTreeSet<u32> = step.grad_carry_set.iter().copied().collect();
                prop_assert!(store.is_disjoint(&carry));
                prop_assert_eq!(&store | &carry, si.clone());
                prop_assert!(step.adam_set.iter().all(|g| store.contains(g)));
                prop_assert!(step.invalidated.is_empty());
                if i == 0 {
                    prop_assert!(copy.is_empty());
                }
            }
            prop_assert!(p.last().unwrap().grad_carry_set.is_empty());
        }

        /// Replays the plan with explicit device buffers and compares the host
        /// gradient sums against a step-by-step full-set accumulation.
        #[test]
        fn set_replay_matches_naive(sets in arb_sets()) {
            let p = plans(&sets, 50);
            let contrib = |i: usize, g: u32| ((i as u64 + 1) * 1000 + g as u64) as f64;

            let mut naive = vec![0.0f64; 50];
            for (i, set) in sets.iter().enumerate() {
                for &g in set.indices() {
                    naive[g as usize] += contrib(i, g);
                }
            }

            let mut host = vec![0.0f64; 50];
            let mut params: BTreeSet<u32> = BTreeSet::new();
            let mut grads: BTreeMap<u32, f64> = BTreeMap::new();
            let mut finalized = BTreeSet::new();
            for (i, step) in p.iter().enumerate() {
                // parameter buffer: cached copies must already be resident
                for g in &step.cache_copy_set {
                    prop_assert!(params.contains(g));
                }
                params = step.working_set().into_iter().collect();
                // gradient buffer: carried entries must already be present
                let carried: BTreeSet<u32> = grads.keys().copied().collect();
                prop_assert_eq!(carried, step.cache_copy_set.iter().copied().collect::<BTreeSet<_>>());
                for &g in sets[i].indices() {
                    *grads.entry(g).or_insert(0.0) += contrib(i, g);
                }
                for g in &step.grad_store_set {
                    host[*g as usize] += grads.remove(g).unwrap();
                }
                for &g in &step.adam_set {
                    prop_assert_eq!(host[g as usize], naive[g as usize]);
                    prop_assert!(finalized.insert(g));
                }
            }
            prop_assert!(grads.is_empty());
            prop_assert_eq!(host, naive);
        }
    }
}
