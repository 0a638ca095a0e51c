use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{
    backward_params, render_params, AdamState, ArenaCounters, Image, Params, RenderConfig, TransferCounters,
};
use crate::culling::cull_geometries;
use crate::scene::{AttributeLayout, CameraView, GaussianAttributes, Geometry, Scene, NON_CRITICAL_FLOATS, PARAMS_PER_GAUSSIAN};
use crate::transfer::{volume, BatchPlan, VolumeReport};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdamTiming {
    /// Update `F_i` as soon as microbatch `i`'s gradients are stored.
    #[default]
    Early,
    /// Update every touched Gaussian after the last microbatch.
    EndOfBatch,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UntouchedPolicy {
    /// Gaussians no view touches are left bit-identical.
    #[default]
    Skip,
    /// They take a zero-gradient Adam step.
    MomentumDecay,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub render: RenderConfig,
    #[serde(default)]
    pub adam_timing: AdamTiming,
    #[serde(default)]
    pub untouched: UntouchedPolicy,
    #[serde(default)]
    pub layout: AttributeLayout,
    /// Device arena size in bytes; unbounded when absent.
    #[serde(default)]
    pub device_capacity: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchReport {
    pub plan: BatchPlan,
    pub volume: VolumeReport,
    pub executed: TransferCounters,
    /// Sum of per-view mean squared errors before the update.
    pub loss: f64,
    pub device_peak: u64,
}

/// Device footprint of executing `plan`: resident critical attributes plus
/// the current and previous microbatch's parameter and gradient buffers.
pub fn device_peak_bytes(plan: &BatchPlan, layout: &AttributeLayout) -> u64 {
    let per = layout.offload_record_bytes + layout.grad_record_bytes;
    let mut prev = 0u64;
    let mut peak = 0u64;
    for s in &plan.steps {
        let cur = s.working_set_len() as u64;
        peak = peak.max((prev + cur) * per);
        prev = cur;
    }
    plan.n_total * layout.selection_critical_bytes() + peak
}

fn check_batch(scene: &Scene, views: &[CameraView], targets: &[Image], adam: &AdamState) -> Result<()> {
    if views.len() != targets.len() {
        return Err(Error::config(format!("{} views but {} targets", views.len(), targets.len())));
    }
    for (v, t) in views.iter().zip(targets) {
        if (v.width, v.height) != (t.width, t.height) {
            return Err(Error::inconsistent(format!("target for view {} has the wrong size", v.id)));
        }
    }
    if adam.len() != scene.len() {
        return Err(Error::inconsistent(format!(
            "optimizer holds {} Gaussians, scene has {}",
            adam.len(),
            scene.len()
        )));
    }
    Ok(())
}

/// Sorted `(id, value)` buffer lookup.
fn find<T>(buf: &[(u32, T)], g: u32) -> Option<&T> {
    buf.binary_search_by_key(&g, |e| e.0).ok().map(|i| &buf[i].1)
}

/// One batch through the offloaded pipeline, executed sequentially with
/// explicit staging buffers. `order` is the microbatch sequence as positions
/// into `views`.
#[allow(clippy::too_many_arguments)]
pub fn train_batch(
    scene: &mut Scene,
    views: &[CameraView],
    targets: &[Image],
    order: &[usize],
    cfg: &TrainConfig,
    adam: &mut AdamState,
    arenas: &mut ArenaCounters,
) -> Result<BatchReport> {
    check_batch(scene, views, targets, adam)?;
    let mut seen = vec![false; views.len()];
    if order.len() != views.len() || order.iter().any(|&i| i >= views.len() || std::mem::replace(&mut seen[i], true)) {
        return Err(Error::config("order must be a permutation of the batch"));
    }
    let layout = &cfg.layout;
    let n = scene.len();

    // device-resident selection-critical attributes
    let mut resident: Vec<Geometry> = scene.geometries();
    let ordered_views: Vec<CameraView> = order.iter().map(|&i| views[i].clone()).collect();
    let sets = ordered_views
        .iter()
        .map(|v| cull_geometries(&resident, v, cfg.render.sigma_cutoff))
        .collect::<Result<Vec<_>>>()?;
    let plan = BatchPlan::new(&sets, &ordered_views, n as u64)?;
    let planned = volume(&plan.steps, layout);

    let peak = device_peak_bytes(&plan, layout);
    if let Some(cap) = arenas.device.capacity {
        if arenas.device.used + peak > cap {
            return Err(Error::Capacity { required: arenas.device.used + peak, capacity: cap });
        }
    }

    let step_no = adam.t + 1;
    let resident_bytes = n as u64 * layout.selection_critical_bytes();
    arenas.device.alloc(resident_bytes)?;
    let mut counters = TransferCounters::default();
    let mut host_grads: HashMap<u32, Params> = HashMap::new();
    let mut param_buf: Vec<(u32, [f32; NON_CRITICAL_FLOATS])> = Vec::new();
    let mut grad_buf: Vec<(u32, Params)> = Vec::new();
    let mut loss = 0.0;
    let buf_bytes = |len: usize| len as u64 * (layout.offload_record_bytes + layout.grad_record_bytes);

    for (i, step) in plan.steps.iter().enumerate() {
        let ws = step.working_set();
        arenas.device.alloc(buf_bytes(ws.len()))?;

        // stage parameters: cached records move within the device, the rest
        // come from the host
        let mut next_params = Vec::with_capacity(ws.len());
        for &g in &ws {
            let rec = if let Some(rec) = find(&param_buf, g).filter(|_| step.cache_copy_set.binary_search(&g).is_ok()) {
                counters.device_copy_bytes += layout.offload_record_bytes;
                *rec
            } else {
                counters.host_to_device_bytes += layout.offload_record_bytes;
                scene.gaussians[g as usize].non_critical()
            };
            next_params.push((g, rec));
        }
        counters.invalidations += step.invalidated.len() as u64;

        let params: Vec<Params> = next_params
            .iter()
            .map(|(g, rec)| GaussianAttributes::from_parts(&resident[*g as usize], rec).to_params_f64())
            .collect();
        let view = &ordered_views[i];
        let rendered = render_params(&ws, &params, view, &cfg.render)?;
        if rendered.visible.len() != ws.len() {
            return Err(Error::inconsistent(format!(
                "view {}: {} of {} staged Gaussians rasterized",
                view.id,
                rendered.visible.len(),
                ws.len()
            )));
        }
        let target = &targets[order[i]];
        loss += rendered.image.mse(target)?;
        let grads = backward_params(&rendered, &params, view, &rendered.image.mse_grad(target)?)?;

        // accumulate on top of gradients carried from the previous microbatch
        let mut next_grads = Vec::with_capacity(ws.len());
        for (&g, new) in ws.iter().zip(&grads) {
            let mut acc = find(&grad_buf, g).copied().unwrap_or([0.0; PARAMS_PER_GAUSSIAN]);
            for k in 0..PARAMS_PER_GAUSSIAN {
                acc[k] += new[k];
            }
            next_grads.push((g, acc));
        }
        arenas.device.free(buf_bytes(param_buf.len()));
        param_buf = next_params;
        grad_buf = next_grads;

        for &g in &step.grad_store_set {
            let dev = find(&grad_buf, g).expect("stored gradient is staged");
            let host = host_grads.entry(g).or_insert([0.0; PARAMS_PER_GAUSSIAN]);
            for k in 0..PARAMS_PER_GAUSSIAN {
                host[k] += dev[k];
            }
            counters.device_to_host_bytes += layout.grad_record_bytes;
        }
        counters.grad_carry_bytes += step.grad_carry_set.len() as u64 * layout.grad_record_bytes;
        grad_buf.retain(|(g, _)| step.grad_carry_set.binary_search(g).is_ok());

        if cfg.adam_timing == AdamTiming::Early {
            for &g in &step.adam_set {
                apply_adam(scene, adam, &mut resident, &host_grads, g, step_no, layout, &mut counters);
            }
        }
    }
    arenas.device.free(buf_bytes(param_buf.len()));
    debug_assert!(grad_buf.is_empty());

    if cfg.adam_timing == AdamTiming::EndOfBatch {
        for step in &plan.steps {
            for &g in &step.adam_set {
                apply_adam(scene, adam, &mut resident, &host_grads, g, step_no, layout, &mut counters);
            }
        }
    }
    if cfg.untouched == UntouchedPolicy::MomentumDecay {
        for &g in &plan.untouched {
            adam.decay(g as usize, &mut scene.gaussians[g as usize], step_no);
            resident[g as usize] = scene.gaussians[g as usize].geometry();
            arenas.untouched_writeback_bytes += layout.selection_critical_bytes();
        }
    }
    adam.t = step_no;
    arenas.device.free(resident_bytes);
    arenas.totals.add(&counters);

    Ok(BatchReport { plan, volume: planned, executed: counters, loss, device_peak: peak })
}

#[allow(clippy::too_many_arguments)]
fn apply_adam(
    scene: &mut Scene,
    adam: &mut AdamState,
    resident: &mut [Geometry],
    host_grads: &HashMap<u32, Params>,
    g: u32,
    step_no: u64,
    layout: &AttributeLayout,
    counters: &mut TransferCounters,
) {
    let grad = host_grads.get(&g).expect("finalized Gaussian has a stored gradient");
    adam.update(g as usize, &mut scene.gaussians[g as usize], grad, step_no);
    resident[g as usize] = scene.gaussians[g as usize].geometry();
    counters.writeback_bytes += layout.selection_critical_bytes();
}

/// Whole-batch training without offloading: every view is rendered against
/// the full parameter set, gradients are summed in view order and Adam runs
/// once over every Gaussian some view rasterized.
pub fn train_reference(
    scene: &mut Scene,
    views: &[CameraView],
    targets: &[Image],
    cfg: &TrainConfig,
    adam: &mut AdamState,
) -> Result<f64> {
    check_batch(scene, views, targets, adam)?;
    let ids: Vec<u32> = (0..scene.len() as u32).collect();
    let params: Vec<Params> = scene.gaussians.iter().map(GaussianAttributes::to_params_f64).collect();
    let mut acc: BTreeMap<u32, Params> = BTreeMap::new();
    let mut loss = 0.0;
    for (view, target) in views.iter().zip(targets) {
        let r = render_params(&ids, &params, view, &cfg.render)?;
        loss += r.image.mse(target)?;
        let grads = backward_params(&r, &params, view, &r.image.mse_grad(target)?)?;
        for &local in &r.visible {
            let a = acc.entry(local as u32).or_insert([0.0; PARAMS_PER_GAUSSIAN]);
            for k in 0..PARAMS_PER_GAUSSIAN {
                a[k] += grads[local][k];
            }
        }
    }
    let step_no = adam.t + 1;
    for (&g, grad) in &acc {
        adam.update(g as usize, &mut scene.gaussians[g as usize], grad, step_no);
    }
    if cfg.untouched == UntouchedPolicy::MomentumDecay {
        for g in 0..scene.len() {
            if !acc.contains_key(&(g as u32)) {
                adam.decay(g, &mut scene.gaussians[g], step_no);
            }
        }
    }
    adam.t = step_no;
    Ok(loss)
}
