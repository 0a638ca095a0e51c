//! Host-to-device traffic of the cached plan against a cache-less plan and a
//! naive full offload, on grid flyovers of increasing altitude.

use std::path::Path;

use splatoff::cli::select_batch;
use splatoff::scene::{generate_synthetic_scene, AttributeLayout, CameraPath, SceneSpec};
use splatoff::schedule::{OrderStrategy, SearchBudget};
use splatoff::transfer::{naive_offload_volume, no_cache_volume, plan_scene_batch, volume};

fn main() -> splatoff::Result<()> {
    let layout = AttributeLayout::default();
    let base = SceneSpec::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes/grid_flyover.toml"))?;
    println!("{:>8} {:>6} {:>7} {:>12} {:>12} {:>12} {:>7}", "altitude", "batch", "rho", "cached", "no-cache", "naive", "saved");
    for altitude in [4.0, 10.0, 20.0, 40.0, 80.0] {
        let mut spec = base.clone();
        spec.camera.path = CameraPath::GridFlyover { altitude, tilt_deg: 10.0 };
        let scene = generate_synthetic_scene(&spec, 2)?;
        for b in [4, 16] {
            let batch = select_batch(scene.views.len(), b, 5, 0)?;
            let plan = plan_scene_batch(&scene, &batch, 3.0, OrderStrategy::Tsp, 0, SearchBudget::Moves(100_000))?;
            let rho = plan.working_sets().iter().map(|s| s.rho()).sum::<f64>() / b as f64;
            let cached = volume(&plan.steps, &layout);
            let nocache = no_cache_volume(&plan.steps, &layout);
            let naive = naive_offload_volume(plan.n_total, b as u64, &layout);
            println!(
                "{altitude:>8.0} {b:>6} {rho:>7.3} {:>12} {:>12} {:>12} {:>6.1}%",
                cached.host_to_device_bytes,
                nocache.host_to_device_bytes,
                naive.host_to_device_bytes,
                100.0 * cached.reduction_vs(&naive)
            );
        }
    }
    Ok(())
}
