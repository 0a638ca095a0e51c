//! Fits the render-time and transfer cost models by least squares, from
//! timings of the local renderer and from synthetic link measurements.

use std::path::Path;
use std::time::Instant;

use splatoff::culling::cull;
use splatoff::scene::{generate_synthetic_scene, SceneSpec};
use splatoff::sim::{fit_render_cost, fit_transfer, CostModel, RenderSample};
use splatoff::train::{render, RenderConfig};

fn main() -> splatoff::Result<()> {
    let mut spec = SceneSpec::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes/orbit.toml"))?;
    let cfg = RenderConfig::default();
    let mut samples = Vec::new();
    for (n, w) in [(500, 32), (1000, 48), (2000, 64), (4000, 48), (8000, 32)] {
        spec.gaussians = n;
        spec.camera.views = 2;
        spec.camera.width = w;
        spec.camera.height = w * 3 / 4;
        let scene = generate_synthetic_scene(&spec, 0)?;
        for v in &scene.views {
            let set = cull(&scene, v, 3.0)?;
            let t0 = Instant::now();
            render(&scene, &set, v, &cfg)?;
            samples.push(RenderSample { gaussians: set.len() as u64, pixels: v.pixel_count(), seconds: t0.elapsed().as_secs_f64() });
        }
    }
    let fwd = fit_render_cost(&samples)?;
    println!("forward: {:.3e} s/Gaussian + {:.3e} s/pixel + {:.3e} s", fwd.per_gaussian, fwd.per_pixel, fwd.constant);

    // a 12 GB/s link with 8 us latency and a little jitter
    let link: Vec<(u64, f64)> = (1..=8u64)
        .map(|i| {
            let bytes = i * (1 << 22);
            (bytes, bytes as f64 / 12e9 + 8e-6 + 1e-7 * ((i * 7 % 5) as f64 - 2.0))
        })
        .collect();
    let (bandwidth, latency) = fit_transfer(&link)?;
    println!("link: {:.2} GB/s, {:.1} us latency", bandwidth / 1e9, latency * 1e6);

    let cm = CostModel {
        h2d_bandwidth: bandwidth,
        d2h_bandwidth: bandwidth,
        transfer_latency: latency,
        fwd,
        bwd: splatoff::sim::RenderCost {
            per_gaussian: 2.5 * fwd.per_gaussian,
            per_pixel: 2.5 * fwd.per_pixel,
            constant: 2.5 * fwd.constant,
        },
        ..CostModel::illustrative()
    };
    cm.validate()?;
    println!("\n{}", cm.to_toml_string());
    Ok(())
}
