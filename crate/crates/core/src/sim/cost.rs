use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `per_gaussian * |S| + per_pixel * pixels + constant` seconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderCost {
    pub per_gaussian: f64,
    pub per_pixel: f64,
    pub constant: f64,
}

impl RenderCost {
    pub fn eval(&self, gaussians: u64, pixels: u64) -> f64 {
        self.per_gaussian * gaussians as f64 + self.per_pixel * pixels as f64 + self.constant
    }
}

/// `per_param * finalized * 59 + constant` seconds per optimizer chunk.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamCost {
    pub per_param: f64,
    pub constant: f64,
}

/// Affine timing model for the three simulated resources.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    /// Bytes per second.
    pub h2d_bandwidth: f64,
    pub d2h_bandwidth: f64,
    /// Seconds added to every transfer.
    pub transfer_latency: f64,
    pub fwd: RenderCost,
    pub bwd: RenderCost,
    pub adam: AdamCost,
    /// Culling and ordering, charged once before the first load.
    pub sched_overhead: f64,
}

impl CostModel {
    /// A consumer-GPU-like preset for examples; not a measurement.
    pub fn illustrative() -> Self {
        Self {
            h2d_bandwidth: 20e9,
            d2h_bandwidth: 20e9,
            transfer_latency: 10e-6,
            fwd: RenderCost { per_gaussian: 2e-9, per_pixel: 2e-9, constant: 2e-4 },
            bwd: RenderCost { per_gaussian: 5e-9, per_pixel: 5e-9, constant: 4e-4 },
            adam: AdamCost { per_param: 0.5e-9, constant: 5e-5 },
            sched_overhead: 1e-3,
        }
    }

    /// No time anywhere; every coefficient zero, bandwidths unbounded.
    pub fn zero() -> Self {
        Self {
            h2d_bandwidth: f64::INFINITY,
            d2h_bandwidth: f64::INFINITY,
            transfer_latency: 0.0,
            fwd: RenderCost::default(),
            bwd: RenderCost::default(),
            adam: AdamCost::default(),
            sched_overhead: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let coeffs = [
            ("transfer_latency", self.transfer_latency),
            ("fwd.per_gaussian", self.fwd.per_gaussian),
            ("fwd.per_pixel", self.fwd.per_pixel),
            ("fwd.constant", self.fwd.constant),
            ("bwd.per_gaussian", self.bwd.per_gaussian),
            ("bwd.per_pixel", self.bwd.per_pixel),
            ("bwd.constant", self.bwd.constant),
            ("adam.per_param", self.adam.per_param),
            ("adam.constant", self.adam.constant),
            ("sched_overhead", self.sched_overhead),
        ];
        if let Some((name, v)) = coeffs.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::config(format!("cost coefficient {name} must be finite and >= 0, got {v}")));
        }
        for (name, bw) in [("h2d_bandwidth", self.h2d_bandwidth), ("d2h_bandwidth", self.d2h_bandwidth)] {
            if bw.is_nan() || bw <= 0.0 {
                return Err(Error::config(format!("{name} must be > 0, got {bw}")));
            }
        }
        Ok(())
    }

    pub fn h2d_time(&self, bytes: u64) -> f64 {
        bytes as f64 / self.h2d_bandwidth + self.transfer_latency
    }

    pub fn d2h_time(&self, bytes: u64) -> f64 {
        bytes as f64 / self.d2h_bandwidth + self.transfer_latency
    }

    pub fn adam_time(&self, finalized: u64) -> f64 {
        self.adam.per_param * (finalized * crate::scene::PARAMS_PER_GAUSSIAN as u64) as f64 + self.adam.constant
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cm: Self = toml::from_str(s).map_err(|e| Error::config(format!("cost model: {e}")))?;
        cm.validate()?;
        Ok(cm)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("cost model serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}

/// One timed render pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderSample {
    pub gaussians: u64,
    pub pixels: u64,
    pub seconds: f64,
}

/// Non-negative least-squares fit of a [`RenderCost`]. Columns whose
/// unconstrained coefficient comes out negative are dropped and the rest
/// refitted.
pub fn fit_render_cost(samples: &[RenderSample]) -> Result<RenderCost> {
    let cols = |s: &RenderSample| [s.gaussians as f64, s.pixels as f64, 1.0];
    let coef = nonneg_lstsq(samples.len(), |i| cols(&samples[i]).to_vec(), |i| samples[i].seconds, 3)?;
    Ok(RenderCost { per_gaussian: coef[0], per_pixel: coef[1], constant: coef[2] })
}

/// Fits `seconds = bytes / bandwidth + latency` from timed copies.
pub fn fit_transfer(samples: &[(u64, f64)]) -> Result<(f64, f64)> {
    let coef = nonneg_lstsq(samples.len(), |i| vec![samples[i].0 as f64, 1.0], |i| samples[i].1, 2)?;
    if coef[0] <= 0.0 {
        return Err(Error::config("transfer timings do not grow with size"));
    }
    Ok((1.0 / coef[0], coef[1]))
}

fn nonneg_lstsq(
    rows: usize,
    row: impl Fn(usize) -> Vec<f64>,
    rhs: impl Fn(usize) -> f64,
    ncols: usize,
) -> Result<Vec<f64>> {
    if rows < ncols {
        return Err(Error::config(format!("need at least {ncols} samples, got {rows}")));
    }
    let mut active: Vec<usize> = (0..ncols).collect();
    loop {
        let a = DMatrix::from_fn(rows, active.len(), |r, c| row(r)[active[c]]);
        let b = DVector::from_fn(rows, |r, _| rhs(r));
        // column scaling keeps the normal problem well conditioned
        let norms: Vec<f64> = (0..active.len()).map(|c| a.column(c).norm().max(f64::MIN_POSITIVE)).collect();
        let scaled = DMatrix::from_fn(rows, active.len(), |r, c| a[(r, c)] / norms[c]);
        let x = scaled
            .svd(true, true)
            .solve(&b, 1e-12)
            .map_err(|e| Error::config(format!("least-squares fit failed: {e}")))?;
        let coef: Vec<f64> = (0..active.len()).map(|c| x[c] / norms[c]).collect();
        match coef.iter().position(|&c| c < 0.0) {
            Some(p) if active.len() > 1 => {
                active.remove(p);
            }
            _ => {
                let mut out = vec![0.0; ncols];
                for (c, &col) in active.iter().enumerate() {
                    out[col] = coef[c].max(0.0);
                }
                return Ok(out);
            }
        }
    }
}
