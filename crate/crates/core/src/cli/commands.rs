use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{create_dir, write_manifest, write_text, AnalyzeArgs, CompareArgs, GenSceneArgs, PlanArgs, SimulateArgs, TrainArgs};
use crate::culling::{cull_all, cull_geometries, sparsity_stats, write_sets};
use crate::schedule::{order_views, OrderStrategy};
use crate::scene::{generate_synthetic_scene, AttributeLayout, CameraView, Scene, SceneSpec};
use crate::sim::{self, adam_trailing_time, metrics, CostModel, Mode, SimTrace};
use crate::train::{
    render_all, train_batch, AdamConfig, AdamState, ArenaCounters, Checkpoint, Image, RenderConfig, TrainConfig,
};
use crate::transfer::{naive_offload_volume, plan_scene_batch, volume, BatchPlan, VolumeReport};
use crate::{Error, Result};

/// Positions of the views in batch `step` of a run: a seeded sample of
/// `batch` distinct views out of `n_views`, in ascending order.
pub fn select_batch(n_views: usize, batch: usize, seed: u64, step: u64) -> Result<Vec<usize>> {
    if batch == 0 || batch > n_views {
        return Err(Error::config(format!("batch size {batch} not in 1..={n_views}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step);
    let mut picked = rand::seq::index::sample(&mut rng, n_views, batch).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

fn load_cost_model(path: Option<&Path>) -> Result<(CostModel, String)> {
    match path {
        Some(p) => Ok((CostModel::load(p)?, p.display().to_string())),
        None => Ok((CostModel::illustrative(), "built-in illustrative".to_string())),
    }
}

fn resolved(pairs: &[(&str, toml::Value)]) -> toml::Table {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn batch_size(requested: Option<usize>, scene: &Scene) -> usize {
    requested.unwrap_or(scene.views.len())
}

pub(super) fn gen_scene(a: &GenSceneArgs) -> Result<()> {
    let mut spec = SceneSpec::load(&a.spec)?;
    if let Some(n) = a.gaussians {
        spec.gaussians = n;
    }
    let scene = generate_synthetic_scene(&spec, a.seed)?;
    create_dir(&a.out)?;
    scene.save(&a.out)?;
    write_text(&a.out.join("scene_spec.toml"), &spec.to_toml_string())?;
    let digest = scene.digest();
    println!("{} Gaussians, {} views, digest {digest}", scene.len(), scene.views.len());
    write_manifest(&a.out, "gen-scene", a.seed, a, resolved(&[("digest", digest.into())]))
}

pub(super) fn analyze(a: &AnalyzeArgs) -> Result<()> {
    let scene = Scene::load(&a.scene)?;
    let sets = cull_all(&scene, a.k)?;
    let report = sparsity_stats(&sets)?;
    create_dir(&a.out)?;
    write_sets(&a.out.join("sets.spss"), &sets)?;
    write_text(&a.out.join("sparsity.tsv"), &report.to_table())?;
    let text = toml::to_string(&report).map_err(|e| Error::config(format!("sparsity report: {e}")))?;
    write_text(&a.out.join("sparsity.toml"), &text)?;
    println!("mean rho {:.4e}, max {:.4e}, min {:.4e} over {} views", report.mean, report.max, report.min, sets.len());
    write_manifest(&a.out, "analyze", 0, a, resolved(&[("scene_digest", scene.digest().into())]))
}

pub(super) fn plan(a: &PlanArgs) -> Result<()> {
    let o = &a.ordering;
    let scene = Scene::load(&a.scene)?;
    let b = batch_size(o.batch, &scene);
    let batch = select_batch(scene.views.len(), b, o.seed, a.batch_index)?;
    let plan = plan_scene_batch(&scene, &batch, o.k, o.strategy, o.seed, o.budget()?)?;
    let layout = AttributeLayout::default();
    let vol = volume(&plan.steps, &layout);
    let naive = naive_offload_volume(plan.n_total, b as u64, &layout);
    create_dir(&a.out)?;
    plan.save(&a.out)?;
    write_text(&a.out.join("volume.tsv"), &vol.to_table())?;
    write_text(&a.out.join("naive_volume.tsv"), &naive.to_table())?;
    let ids: Vec<String> = plan.view_ids().iter().map(u64::to_string).collect();
    println!(
        "order [{}]: {} B host->device, {} B device->host, {:.1}% less link traffic than naive",
        ids.join(" "),
        vol.host_to_device_bytes,
        vol.device_to_host_bytes,
        100.0 * vol.reduction_vs(&naive)
    );
    let positions: Vec<toml::Value> = batch.iter().map(|&i| toml::Value::Integer(i as i64)).collect();
    write_manifest(
        &a.out,
        "plan",
        o.seed,
        a,
        resolved(&[
            ("batch_size", (b as i64).into()),
            ("batch_positions", positions.into()),
            ("scene_digest", scene.digest().into()),
        ]),
    )
}

pub(super) fn simulate(a: &SimulateArgs) -> Result<()> {
    let plan = BatchPlan::load(&a.plan)?;
    if let Some(scene_dir) = &a.scene {
        let scene = Scene::load(scene_dir)?;
        let digest = scene.digest();
        if scene.len() as u64 != plan.n_total || plan.meta.scene_digest.as_deref().is_some_and(|d| d != digest) {
            return Err(Error::inconsistent(format!(
                "plan in {} was not built from scene {}",
                a.plan.display(),
                scene_dir.display()
            )));
        }
    }
    let (cm, cm_source) = load_cost_model(a.cost_model.as_deref())?;
    let trace = simulate_plan(&plan, &cm, a.mode)?;
    let window = a.window.unwrap_or(trace.makespan() / 20.0);
    let m = metrics(&trace, window)?;
    create_dir(&a.out)?;
    write_text(&a.out.join("trace.tsv"), &trace.to_tsv())?;
    write_text(&a.out.join("metrics.toml"), &m.to_toml_string())?;
    println!(
        "{}: makespan {:.6} s, {:.2} images/s, trailing adam {:.6} s",
        a.mode, m.makespan, m.throughput, m.adam_trailing
    );
    write_manifest(
        &a.out,
        "simulate",
        a.seed,
        a,
        resolved(&[
            ("cost_model_source", cm_source.into()),
            ("cost_model", toml::Value::Table(toml::from_str(&cm.to_toml_string()).expect("cost model is toml"))),
            ("window", window.into()),
        ]),
    )
}

fn simulate_plan(plan: &BatchPlan, cm: &CostModel, mode: Mode) -> Result<SimTrace> {
    sim::simulate(plan, &AttributeLayout::default(), cm, mode)
}

fn load_targets(dir: &Path, views: &[CameraView]) -> Result<Vec<Image>> {
    views.iter().map(|v| Image::load(&dir.join(format!("view_{}.spim", v.id)))).collect()
}

/// `scene` with seeded Gaussian noise on positions, colors and opacities.
pub(crate) fn perturbed(scene: &Scene, std: f64, seed: u64) -> Result<Scene> {
    let noise = Normal::new(0.0, std).map_err(|e| Error::config(format!("perturbation: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = scene.clone();
    for g in &mut out.gaussians {
        for p in &mut g.position {
            *p += noise.sample(&mut rng) as f32;
        }
        for c in &mut g.sh_coeffs[..3] {
            *c += noise.sample(&mut rng) as f32;
        }
        g.opacity_logit += noise.sample(&mut rng) as f32;
    }
    Ok(out)
}

pub(super) fn train(a: &TrainArgs) -> Result<()> {
    let o = &a.ordering;
    let truth = Scene::load(&a.scene)?;
    let render = RenderConfig { sigma_cutoff: o.k, ..RenderConfig::default() };
    let cfg = TrainConfig {
        render,
        adam_timing: a.adam_timing,
        untouched: a.untouched,
        layout: AttributeLayout::default(),
        device_capacity: a.device_capacity,
    };
    let targets = match &a.targets {
        Some(dir) => load_targets(dir, &truth.views)?,
        None => truth.views.iter().map(|v| render_all(&truth, v, &cfg.render)).collect::<Result<Vec<_>>>()?,
    };
    let (mut scene, mut adam, start) = match &a.resume {
        Some(dir) => {
            let ck = Checkpoint::load(dir)?;
            if ck.seed != o.seed {
                return Err(Error::config(format!("checkpoint seed {} differs from --seed {}", ck.seed, o.seed)));
            }
            if ck.scene.len() != truth.len() || ck.scene.views != truth.views {
                return Err(Error::inconsistent("checkpoint does not belong to this scene"));
            }
            (ck.scene, ck.adam, ck.step)
        }
        None => {
            let adam = AdamState::new(truth.len(), AdamConfig { lr: a.lr, ..AdamConfig::default() })?;
            (perturbed(&truth, a.perturb, o.seed)?, adam, 0)
        }
    };
    let b = batch_size(o.batch, &truth);
    let budget = o.budget()?;
    let mut arenas = ArenaCounters::new(a.device_capacity);
    let mut log = String::from("step\tviews\tloss\th2d_bytes\td2h_bytes\tcopy_bytes\tcarry_bytes\twriteback_bytes\tdevice_peak\n");
    for step in start..a.steps {
        let batch = select_batch(truth.views.len(), b, o.seed, step)?;
        let views: Vec<CameraView> = batch.iter().map(|&i| truth.views[i].clone()).collect();
        let imgs: Vec<Image> = batch.iter().map(|&i| targets[i].clone()).collect();
        let geoms = scene.geometries();
        let sets = views.iter().map(|v| cull_geometries(&geoms, v, o.k)).collect::<Result<Vec<_>>>()?;
        let order = order_views(&sets, o.strategy, &views, &scene.aabb, o.seed ^ step, budget)?;
        let r = train_batch(&mut scene, &views, &imgs, &order, &cfg, &mut adam, &mut arenas)?;
        let e = &r.executed;
        log += &format!(
            "{step}\t{}\t{:.9e}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            b, r.loss, e.host_to_device_bytes, e.device_to_host_bytes, e.device_copy_bytes, e.grad_carry_bytes,
            e.writeback_bytes, r.device_peak
        );
        println!("step {step}: loss {:.6e}", r.loss);
    }
    create_dir(&a.out)?;
    let ck_dir = a.out.join("checkpoint");
    create_dir(&ck_dir)?;
    Checkpoint { scene, adam, step: a.steps.max(start), seed: o.seed }.save(&ck_dir)?;
    write_text(&a.out.join("train_log.tsv"), &log)?;
    let arena = toml::to_string(&arenas).map_err(|e| Error::config(format!("arena report: {e}")))?;
    write_text(&a.out.join("arena.toml"), &arena)?;
    write_manifest(
        &a.out,
        "train",
        o.seed,
        a,
        resolved(&[
            ("batch_size", (b as i64).into()),
            ("start_step", (start as i64).into()),
            ("scene_digest", truth.digest().into()),
        ]),
    )
}

#[derive(Default)]
struct Row {
    volume: VolumeReport,
    makespan: f64,
    trailing: f64,
}

pub(super) fn compare(a: &CompareArgs) -> Result<()> {
    let o = &a.ordering;
    let scene = Scene::load(&a.scene)?;
    let (cm, cm_source) = load_cost_model(a.cost_model.as_deref())?;
    let layout = AttributeLayout::default();
    let b = batch_size(o.batch, &scene);
    let budget = o.budget()?;
    let mut rows: Vec<(String, Row)> =
        OrderStrategy::ALL.iter().map(|s| (s.name().to_string(), Row::default())).collect();
    let mut naive = Row::default();
    for j in 0..a.batches {
        let batch = select_batch(scene.views.len(), b, o.seed, j)?;
        for (s, (_, row)) in OrderStrategy::ALL.iter().zip(rows.iter_mut()) {
            let plan = plan_scene_batch(&scene, &batch, o.k, *s, o.seed, budget)?;
            let v = volume(&plan.steps, &layout);
            let t = simulate_plan(&plan, &cm, Mode::Clm)?;
            accumulate(row, &v, t.makespan(), adam_trailing_time(&t));
            if *s == OrderStrategy::Tsp {
                let tn = simulate_plan(&plan, &cm, Mode::Naive)?;
                let nv = naive_offload_volume(plan.n_total, b as u64, &layout);
                accumulate(&mut naive, &nv, tn.makespan(), adam_trailing_time(&tn));
            }
        }
    }
    let mut table = String::from("strategy\th2d_bytes\td2h_bytes\tlink_bytes\treduction_vs_naive\tmakespan_s\tadam_trailing_s\n");
    let naive_row = ("naive".to_string(), naive);
    for (name, r) in rows.iter().chain(std::iter::once(&naive_row)) {
        table += &format!(
            "{name}\t{}\t{}\t{}\t{:.6}\t{:.9e}\t{:.9e}\n",
            r.volume.host_to_device_bytes,
            r.volume.device_to_host_bytes,
            r.volume.link_bytes(),
            r.volume.reduction_vs(&naive_row.1.volume),
            r.makespan,
            r.trailing
        );
    }
    print!("{table}");
    create_dir(&a.out)?;
    write_text(&a.out.join("compare.tsv"), &table)?;
    write_manifest(
        &a.out,
        "compare",
        o.seed,
        a,
        resolved(&[
            ("batch_size", (b as i64).into()),
            ("cost_model_source", cm_source.into()),
            ("scene_digest", scene.digest().into()),
        ]),
    )
}

fn accumulate(row: &mut Row, v: &VolumeReport, makespan: f64, trailing: f64) {
    row.volume.host_to_device_bytes += v.host_to_device_bytes;
    row.volume.device_to_host_bytes += v.device_to_host_bytes;
    row.volume.device_copy_bytes += v.device_copy_bytes;
    row.volume.grad_carry_bytes += v.grad_carry_bytes;
    row.volume.writeback_bytes += v.writeback_bytes;
    row.makespan += makespan;
    row.trailing += trailing;
}
