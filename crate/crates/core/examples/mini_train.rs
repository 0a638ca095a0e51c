//! Trains a perturbed copy of a small scene back toward its own renders with
//! the offloaded pipeline, then checks the result against whole-batch training.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splatoff::culling::cull;
use splatoff::scene::{generate_synthetic_scene, SceneSpec};
use splatoff::schedule::{order_views, OrderStrategy, SearchBudget};
use splatoff::train::{render_all, train_batch, train_reference, AdamConfig, AdamState, ArenaCounters, TrainConfig};

fn main() -> splatoff::Result<()> {
    let mut spec = SceneSpec::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes/orbit.toml"))?;
    spec.gaussians = 500;
    spec.camera.views = 8;
    let truth = generate_synthetic_scene(&spec, 4)?;
    let cfg = TrainConfig::default();
    let targets = truth.views.iter().map(|v| render_all(&truth, v, &cfg.render)).collect::<Result<Vec<_>, _>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut start = truth.clone();
    for g in &mut start.gaussians {
        g.sh_coeffs[..3].iter_mut().for_each(|c| *c += rng.random_range(-0.5..0.5));
    }

    let adam_cfg = AdamConfig { lr: 0.02, ..AdamConfig::default() };
    let mut scene = start.clone();
    let mut adam = AdamState::new(scene.len(), adam_cfg)?;
    let mut arenas = ArenaCounters::new(None);
    for step in 0..30 {
        let sets = truth.views.iter().map(|v| cull(&scene, v, 3.0)).collect::<Result<Vec<_>, _>>()?;
        let order = order_views(&sets, OrderStrategy::Tsp, &truth.views, &scene.aabb, step, SearchBudget::Moves(10_000))?;
        let r = train_batch(&mut scene, &truth.views, &targets, &order, &cfg, &mut adam, &mut arenas)?;
        if step % 5 == 0 {
            println!("step {step:>2}: loss {:.5}, peak device {} B", r.loss, r.device_peak);
        }
    }
    let t = &arenas.totals;
    println!("moved {} B to device, {} B back, {} B copied on device", t.host_to_device_bytes, t.device_to_host_bytes, t.device_copy_bytes);

    let mut reference = start;
    let mut adam_ref = AdamState::new(reference.len(), adam_cfg)?;
    for _ in 0..30 {
        train_reference(&mut reference, &truth.views, &targets, &cfg, &mut adam_ref)?;
    }
    let same = scene.gaussians.iter().zip(&reference.gaussians).all(|(a, b)| a.to_params() == b.to_params());
    println!("identical to whole-batch training: {same}");
    Ok(())
}
