//! Gaussian scene model, cameras, synthetic generation, file format and
//! memory accounting.

mod attributes;
mod camera;
pub(crate) mod generate;
mod memory;
pub mod sh;

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use attributes::{
    offset, pad_to, rotation_matrix, AttributeLayout, GaussianAttributes, Geometry,
    NON_CRITICAL_FLOATS, PARAMS_PER_GAUSSIAN, RECORD_ALIGN, SELECTION_CRITICAL_FLOATS,
    SH_COEFFS_PER_CHANNEL, SH_FLOATS,
};
pub use camera::CameraView;
pub use generate::{
    generate_synthetic_scene, AppearanceSpec, CameraPath, CameraSpec, ScaleDistribution, SceneSpec,
};
pub use memory::{estimate_gpu_memory, model_state_bytes, MemoryBreakdown};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn extent(&self) -> [f64; 3] {
        [self.max[0] - self.min[0], self.max[1] - self.min[1], self.max[2] - self.min[2]]
    }

    pub fn volume(&self) -> f64 {
        self.extent().iter().product()
    }

    pub fn center(&self) -> Vector3<f64> {
        (Vector3::from(self.min) + Vector3::from(self.max)) / 2.0
    }

    pub fn contains(&self, p: &[f32; 3]) -> bool {
        (0..3).all(|a| (p[a] as f64) >= self.min[a] && (p[a] as f64) <= self.max[a])
    }

    /// Index of the longest axis; the lowest index wins ties.
    pub fn principal_axis(&self) -> usize {
        let e = self.extent();
        let mut best = 0;
        for a in 1..3 {
            if e[a] > e[best] {
                best = a;
            }
        }
        best
    }

    pub fn translated(&self, d: &Vector3<f64>) -> Self {
        Self {
            min: [self.min[0] + d.x, self.min[1] + d.y, self.min[2] + d.z],
            max: [self.max[0] + d.x, self.max[1] + d.y, self.max[2] + d.z],
        }
    }

    pub(crate) fn farthest_corner_distance(&self, p: &Vector3<f64>) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..8 {
            let c = Vector3::new(
                if i & 1 == 0 { self.min[0] } else { self.max[0] },
                if i & 2 == 0 { self.min[1] } else { self.max[1] },
                if i & 4 == 0 { self.min[2] } else { self.max[2] },
            );
            best = best.max((c - p).norm());
        }
        best
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub gaussians: Vec<GaussianAttributes>,
    pub views: Vec<CameraView>,
    pub aabb: Aabb,
}

pub const BLOB_MAGIC: &[u8; 4] = b"SPOF";
pub const BLOB_VERSION: u32 = 1;
const DESCRIPTOR_FILE: &str = "scene.toml";
const BLOB_FILE: &str = "gaussians.spof";

#[derive(Debug, Serialize, Deserialize)]
struct Descriptor {
    format: String,
    version: u32,
    gaussians: u64,
    blob: String,
    aabb: Aabb,
    views: Vec<CameraView>,
}

impl Scene {
    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    pub fn geometries(&self) -> Vec<Geometry> {
        self.gaussians.iter().map(|g| g.geometry()).collect()
    }

    pub fn view(&self, id: u64) -> Option<&CameraView> {
        self.views.iter().find(|v| v.id == id)
    }

    /// Scene and cameras shifted by `d` in world space.
    pub fn translated(&self, d: &Vector3<f64>) -> Self {
        let gaussians = self
            .gaussians
            .iter()
            .map(|g| {
                let mut g = *g;
                for a in 0..3 {
                    g.position[a] = (g.position[a] as f64 + d[a]) as f32;
                }
                g
            })
            .collect();
        Self {
            gaussians,
            views: self.views.iter().map(|v| v.translated(d)).collect(),
            aabb: self.aabb.translated(d),
        }
    }

    /// Binary Gaussian blob: magic, version, count, then one little-endian
    /// f32 array per attribute in declaration order.
    pub fn to_blob(&self) -> Vec<u8> {
        encode_gaussians(&self.gaussians)
    }

    /// Writes `scene.toml` and `gaussians.spof` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let desc = Descriptor {
            format: "SPOF".into(),
            version: BLOB_VERSION,
            gaussians: self.gaussians.len() as u64,
            blob: BLOB_FILE.into(),
            aabb: self.aabb,
            views: self.views.clone(),
        };
        let text = toml::to_string(&desc).expect("descriptor serializes");
        let p = dir.join(DESCRIPTOR_FILE);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        write_gaussian_blob(&dir.join(BLOB_FILE), &self.gaussians)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let p = dir.join(DESCRIPTOR_FILE);
        let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let desc: Descriptor = toml::from_str(&text).map_err(|e| Error::format(&p, e.to_string()))?;
        if desc.format != "SPOF" || desc.version != BLOB_VERSION {
            return Err(Error::format(&p, format!("unsupported format {} v{}", desc.format, desc.version)));
        }
        let gaussians = read_gaussian_blob(&dir.join(&desc.blob))?;
        if gaussians.len() as u64 != desc.gaussians {
            return Err(Error::format(
                &p,
                format!("descriptor says {} Gaussians, blob has {}", desc.gaussians, gaussians.len()),
            ));
        }
        for v in &desc.views {
            v.validate()?;
        }
        Ok(Self { gaussians, views: desc.views, aabb: desc.aabb })
    }

    /// Hex SHA-256 over the blob and the camera descriptor.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.to_blob());
        for v in &self.views {
            h.update(toml::to_string(v).expect("view serializes"));
        }
        hex::encode(h.finalize())
    }
}

pub fn encode_gaussians(gs: &[GaussianAttributes]) -> Vec<u8> {
    let n = gs.len();
    let mut out = Vec::with_capacity(16 + n * PARAMS_PER_GAUSSIAN * 4);
    out.extend_from_slice(BLOB_MAGIC);
    out.extend_from_slice(&BLOB_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    let mut put = |xs: &[f32]| xs.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
    for g in gs {
        put(&g.position);
    }
    for g in gs {
        put(&g.log_scale);
    }
    for g in gs {
        put(&g.rotation);
    }
    for g in gs {
        put(&g.sh_coeffs);
    }
    for g in gs {
        put(&[g.opacity_logit]);
    }
    out
}

pub fn decode_gaussians(bytes: &[u8]) -> std::result::Result<Vec<GaussianAttributes>, String> {
    if bytes.len() < 16 || &bytes[0..4] != BLOB_MAGIC {
        return Err("missing SPOF magic".into());
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != BLOB_VERSION {
        return Err(format!("unsupported blob version {version}"));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let expected = n
        .checked_mul(PARAMS_PER_GAUSSIAN * 4)
        .and_then(|b| b.checked_add(16))
        .ok_or("Gaussian count overflows")?;
    if bytes.len() != expected {
        return Err(format!("expected {expected} bytes for {n} Gaussians, found {}", bytes.len()));
    }
    let mut floats = bytes[16..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()));
    let mut gs = vec![GaussianAttributes::default(); n];
    let mut fill = |get: &mut dyn FnMut(&mut GaussianAttributes) -> &mut [f32]| {
        for g in gs.iter_mut() {
            for slot in get(g).iter_mut() {
                *slot = floats.next().expect("length checked");
            }
        }
    };
    fill(&mut |g| &mut g.position);
    fill(&mut |g| &mut g.log_scale);
    fill(&mut |g| &mut g.rotation);
    fill(&mut |g| &mut g.sh_coeffs);
    fill(&mut |g| std::slice::from_mut(&mut g.opacity_logit));
    Ok(gs)
}

pub fn write_gaussian_blob(path: &Path, gs: &[GaussianAttributes]) -> Result<()> {
    std::fs::write(path, encode_gaussians(gs)).map_err(|e| Error::io(path, e))
}

pub fn read_gaussian_blob(path: &Path) -> Result<Vec<GaussianAttributes>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_gaussians(&bytes).map_err(|r| Error::format(path, r))
}
