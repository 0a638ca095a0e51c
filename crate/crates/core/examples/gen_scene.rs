//! Generates a scene from one of the bundled specs, saves it and reads it back.
//!
//! cargo run --example gen_scene -- [spec.toml] [seed]

use std::path::PathBuf;

use splatoff::scene::{generate_synthetic_scene, model_state_bytes, Scene, SceneSpec};

fn main() -> splatoff::Result<()> {
    let mut args = std::env::args().skip(1);
    let spec_path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenes/orbit.toml"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed must be an integer"));

    let spec = SceneSpec::load(&spec_path)?;
    let scene = generate_synthetic_scene(&spec, seed)?;
    println!("{}: {} Gaussians, {} views", spec_path.display(), scene.len(), scene.views.len());
    println!("aabb {:?} .. {:?}", scene.aabb.min, scene.aabb.max);
    println!("full training state: {:.2} MB", model_state_bytes(scene.len() as u64) as f64 / 1e6);

    let dir = tempfile_dir();
    scene.save(&dir)?;
    let back = Scene::load(&dir)?;
    assert_eq!(back.digest(), scene.digest());
    println!("saved to {} (digest {})", dir.display(), &scene.digest()[..16]);
    Ok(())
}

fn tempfile_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("splatoff-gen-scene-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    dir
}
