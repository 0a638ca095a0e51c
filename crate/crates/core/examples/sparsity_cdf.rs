//! Per-view sparsity of the three bundled capture styles and its empirical CDF.

use std::path::Path;

use splatoff::culling::{cull_all, sparsity_stats};
use splatoff::scene::{generate_synthetic_scene, SceneSpec};

fn main() -> splatoff::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes");
    for name in ["orbit", "street", "grid_flyover"] {
        let spec = SceneSpec::load(&dir.join(format!("{name}.toml")))?;
        let scene = generate_synthetic_scene(&spec, 1)?;
        let report = sparsity_stats(&cull_all(&scene, 3.0)?)?;
        println!(
            "{name:>12}: N={:<6} views={:<3} mean rho {:.4}  max {:.4}  min {:.4}",
            scene.len(),
            scene.views.len(),
            report.mean,
            report.max,
            report.min
        );
        let marks = [0.01, 0.05, 0.1, 0.25, 0.5, 1.0];
        let cdf: Vec<String> = marks.iter().map(|&r| format!("F({r})={:.2}", report.cdf_at(r))).collect();
        println!("{:>14}{}", "", cdf.join("  "));
    }
    Ok(())
}
