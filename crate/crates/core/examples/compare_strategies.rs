//! Volume, simulated makespan and optimizer trailing time of every ordering
//! strategy over several seeded batches, with the naive baseline as last row.

use std::path::Path;

use splatoff::cli::select_batch;
use splatoff::scene::{generate_synthetic_scene, AttributeLayout, SceneSpec};
use splatoff::schedule::{OrderStrategy, SearchBudget};
use splatoff::sim::{adam_trailing_time, simulate, CostModel, Mode};
use splatoff::transfer::{naive_offload_volume, plan_scene_batch, volume};

fn main() -> splatoff::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes");
    let scene = generate_synthetic_scene(&SceneSpec::load(&dir.join("grid_flyover.toml"))?, 8)?;
    let cm = CostModel::load(&dir.join("cost_model.toml"))?;
    let layout = AttributeLayout::default();
    let (batches, b) = (10u64, 16usize);

    println!("{:>8} {:>14} {:>12} {:>14}", "strategy", "h2d MB/batch", "makespan ms", "trailing ms");
    let mut naive = (0.0, 0.0, 0.0);
    for s in OrderStrategy::ALL {
        let mut row = (0.0, 0.0, 0.0);
        for j in 0..batches {
            let batch = select_batch(scene.views.len(), b, 8, j)?;
            let plan = plan_scene_batch(&scene, &batch, 3.0, s, j, SearchBudget::Moves(100_000))?;
            let t = simulate(&plan, &layout, &cm, Mode::Clm)?;
            row.0 += volume(&plan.steps, &layout).host_to_device_bytes as f64;
            row.1 += t.makespan();
            row.2 += adam_trailing_time(&t);
            if s == OrderStrategy::Random {
                let tn = simulate(&plan, &layout, &cm, Mode::Naive)?;
                naive.0 += naive_offload_volume(plan.n_total, b as u64, &layout).host_to_device_bytes as f64;
                naive.1 += tn.makespan();
                naive.2 += adam_trailing_time(&tn);
            }
        }
        print_row(s.name(), row, batches);
    }
    print_row("naive", naive, batches);
    Ok(())
}

fn print_row(name: &str, (bytes, makespan, trailing): (f64, f64, f64), batches: u64) {
    let k = batches as f64;
    println!("{name:>8} {:>14.3} {:>12.3} {:>14.4}", bytes / k / 1e6, 1e3 * makespan / k, 1e3 * trailing / k);
}
