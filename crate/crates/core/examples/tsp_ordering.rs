//! Orders one batch of views with every strategy and compares the symmetric
//! difference path length against the exact optimum.

use std::path::Path;
use std::time::Duration;

use splatoff::culling::{cull, SparsitySet};
use splatoff::schedule::{
    consecutive_overlap, distance_matrix, held_karp_exact, order_views, path_length, OrderStrategy, SearchBudget,
};
use splatoff::scene::{generate_synthetic_scene, CameraView, SceneSpec};

fn main() -> splatoff::Result<()> {
    let spec = SceneSpec::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes/grid_flyover.toml"))?;
    let scene = generate_synthetic_scene(&spec, 3)?;
    let picked = splatoff::cli::select_batch(scene.views.len(), 12, 3, 0)?;
    let views: Vec<CameraView> = picked.iter().map(|&i| scene.views[i].clone()).collect();
    let sets: Vec<SparsitySet> = views.iter().map(|v| cull(&scene, v, 3.0)).collect::<Result<_, _>>()?;
    let m = distance_matrix(&sets)?;

    let exact = held_karp_exact(&m)?;
    println!("{:>8}  {:>10}  {:>10}", "strategy", "path", "overlap");
    for s in OrderStrategy::ALL {
        let order = order_views(&sets, s, &views, &scene.aabb, 7, SearchBudget::WallClock(Duration::from_millis(1)))?;
        println!("{:>8}  {:>10}  {:>10}", s.name(), path_length(&order, &m), consecutive_overlap(&sets, &order));
    }
    println!("{:>8}  {:>10}  {:>10}", "optimum", exact.length, consecutive_overlap(&sets, &exact.order));
    Ok(())
}
