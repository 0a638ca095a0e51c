//! `plan.toml` (descriptor and per-step counts) plus `plan.bin` (index
//! blocks as little-endian u32, in descriptor order).

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BatchPlan, PlanMeta, TransferPlan};
use crate::{Error, Result};

pub const PLAN_DESCRIPTOR: &str = "plan.toml";
pub const PLAN_BLOB: &str = "plan.bin";
const MAGIC: &[u8; 4] = b"SPPL";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Descriptor {
    format: String,
    version: u32,
    n_total: u64,
    blob: String,
    blob_sha256: String,
    untouched: u64,
    #[serde(default)]
    meta: PlanMeta,
    steps: Vec<StepDescriptor>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepDescriptor {
    microbatch: usize,
    view_id: u64,
    pixels: u64,
    load: u64,
    copy: u64,
    store: u64,
    carry: u64,
    adam: u64,
    invalidated: u64,
}

impl BatchPlan {
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut blob = Vec::new();
        blob.extend_from_slice(MAGIC);
        blob.extend_from_slice(&VERSION.to_le_bytes());
        let mut put = |xs: &[u32]| xs.iter().for_each(|x| blob.extend_from_slice(&x.to_le_bytes()));
        for s in &self.steps {
            for block in [&s.load_set, &s.cache_copy_set, &s.grad_store_set, &s.grad_carry_set, &s.adam_set, &s.invalidated] {
                put(block);
            }
        }
        put(&self.untouched);
        let desc = Descriptor {
            format: "SPPL".into(),
            version: VERSION,
            n_total: self.n_total,
            blob: PLAN_BLOB.into(),
            blob_sha256: hex::encode(Sha256::digest(&blob)),
            untouched: self.untouched.len() as u64,
            meta: self.meta.clone(),
            steps: self
                .steps
                .iter()
                .zip(&self.pixels)
                .map(|(s, &pixels)| StepDescriptor {
                    microbatch: s.microbatch,
                    view_id: s.view_id,
                    pixels,
                    load: s.load_set.len() as u64,
                    copy: s.cache_copy_set.len() as u64,
                    store: s.grad_store_set.len() as u64,
                    carry: s.grad_carry_set.len() as u64,
                    adam: s.adam_set.len() as u64,
                    invalidated: s.invalidated.len() as u64,
                })
                .collect(),
        };
        let p = dir.join(PLAN_BLOB);
        std::fs::write(&p, &blob).map_err(|e| Error::io(&p, e))?;
        let p = dir.join(PLAN_DESCRIPTOR);
        std::fs::write(&p, toml::to_string(&desc).expect("plan descriptor serializes")).map_err(|e| Error::io(&p, e))
    }

    /// Loads and fully re-validates a plan directory.
    pub fn load(dir: &Path) -> Result<Self> {
        let dp = dir.join(PLAN_DESCRIPTOR);
        let text = std::fs::read_to_string(&dp).map_err(|e| Error::io(&dp, e))?;
        let desc: Descriptor = toml::from_str(&text).map_err(|e| Error::format(&dp, e.to_string()))?;
        if desc.format != "SPPL" || desc.version != VERSION {
            return Err(Error::format(&dp, format!("unsupported format {} v{}", desc.format, desc.version)));
        }
        let bp = dir.join(&desc.blob);
        let blob = std::fs::read(&bp).map_err(|e| Error::io(&bp, e))?;
        if hex::encode(Sha256::digest(&blob)) != desc.blob_sha256 {
            return Err(Error::format(&bp, "checksum mismatch"));
        }
        if blob.len() < 8 || &blob[..4] != MAGIC {
            return Err(Error::format(&bp, "missing SPPL header"));
        }
        let mut words = blob[8..].chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap()));
        if blob.len() % 4 != 0 {
            return Err(Error::format(&bp, "blob length not a multiple of 4"));
        }
        let mut take = |n: u64| -> Result<Vec<u32>> {
            let v: Vec<u32> = words.by_ref().take(n as usize).collect();
            if v.len() as u64 == n {
                Ok(v)
            } else {
                Err(Error::format(&bp, "blob shorter than descriptor counts"))
            }
        };
        let mut steps = Vec::with_capacity(desc.steps.len());
        for d in &desc.steps {
            steps.push(TransferPlan {
                microbatch: d.microbatch,
                view_id: d.view_id,
                load_set: take(d.load)?,
                cache_copy_set: take(d.copy)?,
                grad_store_set: take(d.store)?,
                grad_carry_set: take(d.carry)?,
                adam_set: take(d.adam)?,
                invalidated: take(d.invalidated)?,
            });
        }
        let untouched = take(desc.untouched)?;
        if words.next().is_some() {
            return Err(Error::format(&bp, "trailing data after last block"));
        }
        let plan = BatchPlan {
            n_total: desc.n_total,
            pixels: desc.steps.iter().map(|d| d.pixels).collect(),
            steps,
            untouched,
            meta: desc.meta,
        };
        plan.validate().map_err(|e| Error::format(&dp, e.to_string()))?;
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::culling::cull_all;
    use crate::scene::{generate::tests_support::orbit_spec, generate_synthetic_scene};

    #[test]
    fn round_trip_and_corruption() {
        let scene = generate_synthetic_scene(&orbit_spec(300, 5), 2).unwrap();
        let sets = cull_all(&scene, 3.0).unwrap();
        let mut plan = BatchPlan::new(&sets, &scene.views, scene.len() as u64).unwrap();
        plan.meta.strategy = Some("tsp".into());
        plan.meta.seed = Some(4);
        let dir = tempfile::tempdir().unwrap();
        plan.save(dir.path()).unwrap();
        assert_eq!(BatchPlan::load(dir.path()).unwrap(), plan);

        let bin = dir.path().join(PLAN_BLOB);
        let mut bytes = std::fs::read(&bin).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 1;
        std::fs::write(&bin, bytes).unwrap();
        assert!(matches!(BatchPlan::load(dir.path()), Err(Error::Format { .. })));
    }
}
