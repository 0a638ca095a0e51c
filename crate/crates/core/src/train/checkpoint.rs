use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdamConfig, AdamState};
use crate::scene::{read_gaussian_blob, write_gaussian_blob, GaussianAttributes, Scene};
use crate::{Error, Result};

const STATE_FILE: &str = "trainer.toml";
const M_FILE: &str = "adam_m.spof";
const V_FILE: &str = "adam_v.spof";

/// Scene parameters, optimizer moments and loop position. Moments reuse the
/// Gaussian blob format, one 59-float record per Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub scene: Scene,
    pub adam: AdamState,
    /// Batches completed by the training loop.
    pub step: u64,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainerState {
    step: u64,
    seed: u64,
    adam_t: u64,
    adam: AdamConfig,
}

impl Checkpoint {
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.scene.save(dir)?;
        let pack = |rows: &[[f32; crate::scene::PARAMS_PER_GAUSSIAN]]| -> Vec<GaussianAttributes> {
            rows.iter().map(GaussianAttributes::from_params).collect()
        };
        write_gaussian_blob(&dir.join(M_FILE), &pack(&self.adam.m))?;
        write_gaussian_blob(&dir.join(V_FILE), &pack(&self.adam.v))?;
        let state = TrainerState { step: self.step, seed: self.seed, adam_t: self.adam.t, adam: self.adam.config };
        let p = dir.join(STATE_FILE);
        std::fs::write(&p, toml::to_string(&state).expect("state serializes")).map_err(|e| Error::io(&p, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let scene = Scene::load(dir)?;
        let p = dir.join(STATE_FILE);
        let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let state: TrainerState = toml::from_str(&text).map_err(|e| Error::format(&p, e.to_string()))?;
        let unpack = |name: &str| -> Result<Vec<[f32; crate::scene::PARAMS_PER_GAUSSIAN]>> {
            let rows = read_gaussian_blob(&dir.join(name))?;
            if rows.len() != scene.len() {
                return Err(Error::format(dir.join(name), "moment count does not match the scene"));
            }
            Ok(rows.iter().map(GaussianAttributes::to_params).collect())
        };
        let adam = AdamState { config: state.adam, t: state.adam_t, m: unpack(M_FILE)?, v: unpack(V_FILE)? };
        adam.config.validate()?;
        Ok(Self { scene, adam, step: state.step, seed: state.seed })
    }
}
