use serde::{Deserialize, Serialize};

use super::TransferPlan;
use crate::scene::AttributeLayout;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepVolume {
    pub microbatch: usize,
    pub host_to_device_bytes: u64,
    pub device_to_host_bytes: u64,
    /// Parameter records copied from the previous microbatch's buffer.
    pub device_copy_bytes: u64,
    /// Gradient records kept on device for the next microbatch.
    pub grad_carry_bytes: u64,
    /// Selection-critical attributes refreshed on device after host Adam.
    pub writeback_bytes: u64,
    pub invalidations: u64,
}

/// Byte totals for one batch with a per-microbatch breakdown.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VolumeReport {
    pub host_to_device_bytes: u64,
    pub device_to_host_bytes: u64,
    pub device_copy_bytes: u64,
    pub grad_carry_bytes: u64,
    pub writeback_bytes: u64,
    pub invalidations: u64,
    pub steps: Vec<StepVolume>,
}

impl VolumeReport {
    pub fn from_steps(steps: Vec<StepVolume>) -> Self {
        let sum = |f: fn(&StepVolume) -> u64| steps.iter().map(f).sum();
        Self {
            host_to_device_bytes: sum(|s| s.host_to_device_bytes),
            device_to_host_bytes: sum(|s| s.device_to_host_bytes),
            device_copy_bytes: sum(|s| s.device_copy_bytes),
            grad_carry_bytes: sum(|s| s.grad_carry_bytes),
            writeback_bytes: sum(|s| s.writeback_bytes),
            invalidations: sum(|s| s.invalidations),
            steps,
        }
    }

    /// Bytes crossing the host link in either direction.
    pub fn link_bytes(&self) -> u64 {
        self.host_to_device_bytes + self.device_to_host_bytes + self.writeback_bytes
    }

    /// Fractional reduction of host-link traffic relative to `baseline`.
    pub fn reduction_vs(&self, baseline: &VolumeReport) -> f64 {
        let b = baseline.link_bytes();
        if b == 0 {
            0.0
        } else {
            1.0 - self.link_bytes() as f64 / b as f64
        }
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("microbatch\th2d_bytes\td2h_bytes\tdevice_copy_bytes\tgrad_carry_bytes\twriteback_bytes\tinvalidations\n");
        let row = |out: &mut String, label: &str, s: &StepVolume| {
            out.push_str(&format!(
                "{label}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                s.host_to_device_bytes,
                s.device_to_host_bytes,
                s.device_copy_bytes,
                s.grad_carry_bytes,
                s.writeback_bytes,
                s.invalidations
            ));
        };
        for s in &self.steps {
            row(&mut out, &s.microbatch.to_string(), s);
        }
        let total = StepVolume {
            microbatch: 0,
            host_to_device_bytes: self.host_to_device_bytes,
            device_to_host_bytes: self.device_to_host_bytes,
            device_copy_bytes: self.device_copy_bytes,
            grad_carry_bytes: self.grad_carry_bytes,
            writeback_bytes: self.writeback_bytes,
            invalidations: self.invalidations,
        };
        row(&mut out, "total", &total);
        out
    }
}

/// Bytes moved by a plan under `layout`.
pub fn volume(plans: &[TransferPlan], layout: &AttributeLayout) -> VolumeReport {
    VolumeReport::from_steps(
        plans
            .iter()
            .map(|p| StepVolume {
                microbatch: p.microbatch,
                host_to_device_bytes: p.load_set.len() as u64 * layout.offload_record_bytes,
                device_to_host_bytes: p.grad_store_set.len() as u64 * layout.grad_record_bytes,
                device_copy_bytes: p.cache_copy_set.len() as u64 * layout.offload_record_bytes,
                grad_carry_bytes: p.grad_carry_set.len() as u64 * layout.grad_record_bytes,
                writeback_bytes: p.adam_set.len() as u64 * layout.selection_critical_bytes(),
                invalidations: p.invalidated.len() as u64,
            })
            .collect(),
    )
}

/// The same working sets without the cross-microbatch cache: every step
/// loads its full set and stores all of its gradients.
pub fn no_cache_volume(plans: &[TransferPlan], layout: &AttributeLayout) -> VolumeReport {
    VolumeReport::from_steps(
        plans
            .iter()
            .map(|p| {
                let n = p.working_set_len() as u64;
                StepVolume {
                    microbatch: p.microbatch,
                    host_to_device_bytes: n * layout.offload_record_bytes,
                    device_to_host_bytes: n * layout.grad_record_bytes,
                    writeback_bytes: p.adam_set.len() as u64 * layout.selection_critical_bytes(),
                    ..Default::default()
                }
            })
            .collect(),
    )
}

/// Every microbatch moves all `n` Gaussians in both directions.
pub fn naive_offload_volume(n: u64, batch: u64, layout: &AttributeLayout) -> VolumeReport {
    VolumeReport::from_steps(
        (1..=batch as usize)
            .map(|i| StepVolume {
                microbatch: i,
                host_to_device_bytes: n * layout.offload_record_bytes,
                device_to_host_bytes: n * layout.grad_record_bytes,
                ..Default::default()
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::culling::SparsitySet;
    use crate::schedule::finalization_schedule;
    use crate::transfer::plan_batch;
    use proptest::prelude::*;

    fn plans(raw: &[Vec<u32>], n: u64) -> Vec<TransferPlan> {
        let sets: Vec<_> =
            raw.iter().enumerate().map(|(i, x)| SparsitySet::from_unsorted(i as u64, x.clone(), n).unwrap()).collect();
        plan_batch(&sets, &finalization_schedule(&sets, n).unwrap()).unwrap()
    }

    #[test]
    fn arithmetic_examples() {
        let l = AttributeLayout::default();
        let p = plans(&[(0..1000).collect()], 2000);
        let v = volume(&p, &l);
        assert_eq!(v.steps[0].host_to_device_bytes, 256_000);
        assert_eq!(v.writeback_bytes, 40_000);
        assert_eq!(volume(&[], &l), VolumeReport::default());

        let naive = naive_offload_volume(1_000_000, 4, &l);
        assert_eq!(naive.host_to_device_bytes, 4 * 1_000_000 * 256);
        assert_eq!(naive.device_to_host_bytes, 4 * 1_000_000 * 256);
        assert_eq!(naive_offload_volume(10, 0, &l), VolumeReport::default());
    }

    #[test]
    fn table_has_total_row() {
        let v = volume(&plans(&[vec![1, 2], vec![2, 3]], 5), &AttributeLayout::default());
        let t = v.to_table();
        assert_eq!(t.lines().count(), 4);
        assert!(t.lines().last().unwrap().starts_with("total\t768\t768\t256\t256\t120"));
    }

    fn arb_raw() -> impl Strategy<Value = Vec<Vec<u32>>> {
        proptest::collection::vec(proptest::collection::vec(0u32..40, 0..30), 1..8)
    }

    proptest! {
        #[test]
        fn totals_and_relations(raw in arb_raw()) {
            let l = AttributeLayout::default();
            let p = plans(&raw, 40);
            let v = volume(&p, &l);
            prop_assert_eq!(v.host_to_device_bytes, v.steps.iter().map(|s| s.host_to_device_bytes).sum::<u64>());
            prop_assert_eq!(v.device_to_host_bytes, v.steps.iter().map(|s| s.device_to_host_bytes).sum::<u64>());

            let nc = no_cache_volume(&p, &l);
            prop_assert_eq!(v.host_to_device_bytes + v.device_copy_bytes, nc.host_to_device_bytes);
            prop_assert_eq!(v.device_to_host_bytes + v.grad_carry_bytes, nc.device_to_host_bytes);

            let naive = naive_offload_volume(40, raw.len() as u64, &l);
            prop_assert!(v.host_to_device_bytes <= naive.host_to_device_bytes);
            prop_assert!(v.device_to_host_bytes <= naive.device_to_host_bytes);

            // every (step, g) entering the working set is one load
            let mut entries = 0u64;
            let mut prev: std::collections::BTreeSet<u32> = Default::default();
            for x in &raw {
                let cur: std::collections::BTreeSet<u32> = x.iter().copied().collect();
                entries += cur.difference(&prev).count() as u64;
                prev = cur;
            }
            prop_assert_eq!(v.host_to_device_bytes, entries * l.offload_record_bytes);

            let mut rev = raw.clone();
            rev.reverse();
            let r = volume(&plans(&rev, 40), &l);
            prop_assert_eq!(
                v.host_to_device_bytes + v.device_to_host_bytes,
                r.host_to_device_bytes + r.device_to_host_bytes
            );
            prop_assert_eq!(v.writeback_bytes, r.writeback_bytes);
        }
    }
}
