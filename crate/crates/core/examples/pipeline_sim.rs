//! Simulates one batch in pipelined and naive mode and prints both timelines.

use std::path::Path;

use splatoff::cli::select_batch;
use splatoff::scene::{generate_synthetic_scene, AttributeLayout, SceneSpec};
use splatoff::schedule::{OrderStrategy, SearchBudget};
use splatoff::sim::{metrics, simulate, CostModel, Mode, Resource};
use splatoff::transfer::plan_scene_batch;

fn main() -> splatoff::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes");
    let scene = generate_synthetic_scene(&SceneSpec::load(&dir.join("grid_flyover.toml"))?, 1)?;
    let cm = CostModel::load(&dir.join("cost_model.toml"))?;
    let batch = select_batch(scene.views.len(), 6, 1, 0)?;
    let plan = plan_scene_batch(&scene, &batch, 3.0, OrderStrategy::Tsp, 1, SearchBudget::Moves(50_000))?;

    let mut window = None;
    for mode in [Mode::Naive, Mode::Clm] {
        let trace = simulate(&plan, &AttributeLayout::default(), &cm, mode)?;
        let w = *window.get_or_insert(trace.makespan() / 20.0);
        let m = metrics(&trace, w)?;
        println!("== {mode}: makespan {:.3} ms, trailing adam {:.3} ms", 1e3 * m.makespan, 1e3 * m.adam_trailing);
        for r in Resource::ALL {
            let line: Vec<String> = trace
                .on(r)
                .map(|e| format!("{}{}[{:.2}-{:.2}]", e.kind.name(), e.microbatch, 1e3 * e.start, 1e3 * e.end))
                .collect();
            println!("  {:<9} {}", r.name(), line.join(" "));
        }
        println!("  compute idle: mean {:.3}, share of windows at most 10% idle {:.2}", m.mean_idle(), m.idle_cdf_at(0.1));
    }
    Ok(())
}
