//! Deterministic synthetic scenes.
//!
//! Three camera topologies are provided: an orbit around a compact object,
//! a downward-looking grid flyover over a wide flat region (aerial city
//! captures), and a line of forward-looking cameras inside an elongated box
//! (street captures).

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::sh::SH_C0;
use super::{Aabb, CameraView, GaussianAttributes, Scene, SH_FLOATS};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub gaussians: u64,
    pub bounds: Aabb,
    pub camera: CameraSpec,
    #[serde(default)]
    pub scale: ScaleDistribution,
    #[serde(default)]
    pub appearance: AppearanceSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub path: CameraPath,
    pub views: u32,
    pub width: u32,
    pub height: u32,
    /// Horizontal field of view in degrees.
    #[serde(default = "default_fov")]
    pub fov_x_deg: f64,
    #[serde(default = "default_near")]
    pub near: f64,
    /// Far plane; defaults to the distance from the camera to the farthest
    /// box corner, so depth never clips the scene.
    #[serde(default)]
    pub far: Option<f64>,
}

fn default_fov() -> f64 {
    60.0
}

fn default_near() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CameraPath {
    /// Ring of cameras around the box center, looking at it.
    Orbit {
        /// Orbit radius as a multiple of the box half-diagonal.
        #[serde(default = "default_radius_factor")]
        radius_factor: f64,
        #[serde(default = "default_elevation")]
        elevation_deg: f64,
    },
    /// Regular grid of cameras above the box, looking down and tilted
    /// forward along +y.
    GridFlyover {
        altitude: f64,
        #[serde(default)]
        tilt_deg: f64,
    },
    /// Cameras spaced along the x axis inside the box, looking along +x.
    StreetLine {
        #[serde(default = "half")]
        lateral_fraction: f64,
        #[serde(default = "default_street_height")]
        height_fraction: f64,
    },
}

fn default_radius_factor() -> f64 {
    1.5
}

fn default_elevation() -> f64 {
    20.0
}

fn half() -> f64 {
    0.5
}

fn default_street_height() -> f64 {
    0.2
}

/// How per-axis scales are drawn (in log space).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScaleDistribution {
    /// Median scale is `factor` times the mean inter-Gaussian spacing
    /// `(volume / N)^(1/3)`, so denser scenes get smaller Gaussians.
    NeighborSpacing { factor: f64, log_std: f64 },
    /// Log-scale drawn from `Normal(mean, std)`.
    LogNormal { mean: f64, std: f64 },
}

impl Default for ScaleDistribution {
    fn default() -> Self {
        ScaleDistribution::NeighborSpacing { factor: 0.5, log_std: 0.3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppearanceSpec {
    pub opacity_logit_mean: f64,
    pub opacity_logit_std: f64,
    /// Standard deviation of the degree 1..=3 SH coefficients.
    pub sh_rest_std: f64,
}

impl Default for AppearanceSpec {
    fn default() -> Self {
        Self { opacity_logit_mean: 0.5, opacity_logit_std: 1.0, sh_rest_std: 0.05 }
    }
}

impl SceneSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::config(format!("scene spec: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scene spec serializes")
    }

    fn validate(&self) -> Result<()> {
        if self.gaussians == 0 {
            return Err(Error::config("scene spec: zero Gaussians"));
        }
        if self.camera.views == 0 {
            return Err(Error::config("scene spec: zero views"));
        }
        if self.camera.width == 0 || self.camera.height == 0 {
            return Err(Error::config("scene spec: empty image resolution"));
        }
        if !(self.camera.fov_x_deg > 0.0 && self.camera.fov_x_deg < 180.0) {
            return Err(Error::config("scene spec: fov_x_deg must be in (0, 180)"));
        }
        let ext = self.bounds.extent();
        if !(ext.iter().all(|e| *e > 0.0 && e.is_finite())) {
            return Err(Error::config("scene spec: bounds must have positive finite extent"));
        }
        match &self.scale {
            ScaleDistribution::NeighborSpacing { factor, log_std } => {
                if !(*factor > 0.0 && *log_std >= 0.0) {
                    return Err(Error::config("scene spec: bad neighbor-spacing scale"));
                }
            }
            ScaleDistribution::LogNormal { std, .. } => {
                if *std < 0.0 {
                    return Err(Error::config("scene spec: negative log-scale std"));
                }
            }
        }
        Ok(())
    }

    /// Cameras for this spec; independent of the Gaussian count and seed.
    pub fn cameras(&self) -> Result<Vec<CameraView>> {
        let cam = &self.camera;
        let b = &self.bounds;
        let lo = Vector3::from(b.min);
        let hi = Vector3::from(b.max);
        let center = (lo + hi) / 2.0;
        let ext = hi - lo;
        let focal = cam.width as f64 / 2.0 / (cam.fov_x_deg.to_radians() / 2.0).tan();
        let n = cam.views as usize;

        let mut poses: Vec<(Vector3<f64>, Vector3<f64>, Vector3<f64>)> = Vec::with_capacity(n);
        match cam.path {
            CameraPath::Orbit { radius_factor, elevation_deg } => {
                let r = radius_factor * ext.norm() / 2.0;
                let phi = elevation_deg.to_radians();
                for i in 0..n {
                    let theta = 2.0 * PI * i as f64 / n as f64;
                    let eye = center
                        + r * Vector3::new(theta.cos() * phi.cos(), theta.sin() * phi.cos(), phi.sin());
                    poses.push((eye, center, Vector3::z()));
                }
            }
            CameraPath::GridFlyover { altitude, tilt_deg } => {
                if !(altitude > 0.0) {
                    return Err(Error::config("grid-flyover altitude must be positive"));
                }
                let cols = (n as f64).sqrt().ceil() as usize;
                let rows = n.div_ceil(cols);
                let tilt = tilt_deg.to_radians();
                for i in 0..n {
                    let (row, col) = (i / cols, i % cols);
                    let x = lo.x + ext.x * (col as f64 + 0.5) / cols as f64;
                    let y = lo.y + ext.y * (row as f64 + 0.5) / rows as f64;
                    let eye = Vector3::new(x, y, hi.z + altitude);
                    let drop = eye.z - lo.z;
                    // aim at a ground point inside the footprint so the axis crosses the box
                    let ty = (y + drop * tilt.tan()).clamp(lo.y, hi.y);
                    let target = Vector3::new(x, ty, lo.z);
                    poses.push((eye, target, Vector3::y()));
                }
            }
            CameraPath::StreetLine { lateral_fraction, height_fraction } => {
                let y = lo.y + ext.y * lateral_fraction;
                let z = lo.z + ext.z * height_fraction;
                for i in 0..n {
                    let x = lo.x + ext.x * (i as f64 + 0.5) / n as f64;
                    let eye = Vector3::new(x, y, z);
                    poses.push((eye, eye + Vector3::x(), Vector3::z()));
                }
            }
        }

        let views = poses
            .into_iter()
            .enumerate()
            .map(|(i, (eye, target, up))| {
                let far = cam.far.unwrap_or_else(|| b.farthest_corner_distance(&eye).max(cam.near * 2.0));
                CameraView::look_at(i as u64, eye, target, up, focal, cam.width, cam.height, cam.near, far)
            })
            .collect::<Vec<_>>();
        for v in &views {
            v.validate()?;
        }
        Ok(views)
    }

    fn log_scale_distribution(&self) -> (f64, f64) {
        match self.scale {
            ScaleDistribution::NeighborSpacing { factor, log_std } => {
                let spacing = (self.bounds.volume() / self.gaussians as f64).cbrt();
                ((factor * spacing).ln(), log_std)
            }
            ScaleDistribution::LogNormal { mean, std } => (mean, std),
        }
    }
}

/// Builds the scene described by `spec`. The output depends only on `spec`
/// and `seed`.
pub fn generate_synthetic_scene(spec: &SceneSpec, seed: u64) -> Result<Scene> {
    spec.validate()?;
    let views = spec.cameras()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ls_mean, ls_std) = spec.log_scale_distribution();
    let app = &spec.appearance;
    let opacity = Normal::new(app.opacity_logit_mean, app.opacity_logit_std.max(0.0))
        .map_err(|e| Error::config(format!("opacity distribution: {e}")))?;

    let b = &spec.bounds;
    let mut gaussians = Vec::with_capacity(spec.gaussians as usize);
    for _ in 0..spec.gaussians {
        let mut g = GaussianAttributes::default();
        for a in 0..3 {
            let u: f64 = rng.random();
            g.position[a] = inside_f32(b.min[a] + u * (b.max[a] - b.min[a]), b.min[a], b.max[a]);
        }
        for a in 0..3 {
            let z: f64 = StandardNormal.sample(&mut rng);
            g.log_scale[a] = (ls_mean + ls_std * z.clamp(-3.0, 3.0)) as f32;
        }
        let mut q = [0.0f64; 4];
        loop {
            for c in q.iter_mut() {
                *c = StandardNormal.sample(&mut rng);
            }
            let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
            if n > 1e-6 {
                q.iter_mut().for_each(|c| *c /= n);
                break;
            }
        }
        g.rotation = q.map(|c| c as f32);
        for ch in 0..3 {
            let color: f64 = rng.random();
            g.sh_coeffs[ch] = ((color - 0.5) / SH_C0) as f32;
        }
        for k in 3..SH_FLOATS {
            let z: f64 = StandardNormal.sample(&mut rng);
            g.sh_coeffs[k] = (app.sh_rest_std * z) as f32;
        }
        g.opacity_logit = opacity.sample(&mut rng) as f32;
        gaussians.push(g);
    }

    Ok(Scene { gaussians, views, aabb: spec.bounds })
}

/// Nearest f32 to `x` that stays within `[lo, hi]` after widening.
fn inside_f32(x: f64, lo: f64, hi: f64) -> f32 {
    let mut v = x as f32;
    while (v as f64) > hi {
        v = v.next_down();
    }
    while (v as f64) < lo {
        v = v.next_up();
    }
    v
}
