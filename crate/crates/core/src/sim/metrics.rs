use serde::{Deserialize, Serialize};

use super::{EventKind, Resource, SimTrace};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdlePoint {
    pub idle_fraction: f64,
    /// Share of windows with idle fraction at most `idle_fraction`.
    pub cumulative: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairOverlap {
    pub a: Resource,
    pub b: Resource,
    /// Time both are busy over time either is busy.
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub makespan: f64,
    /// Images per second.
    pub throughput: f64,
    pub window: f64,
    /// Compute idle fraction of every window, in time order.
    pub window_idle: Vec<f64>,
    pub idle_cdf: Vec<IdlePoint>,
    pub compute_busy: f64,
    pub comm_busy: f64,
    pub adam_busy: f64,
    pub adam_trailing: f64,
    pub overlaps: Vec<PairOverlap>,
}

impl SimMetrics {
    /// Empirical CDF of window idle fractions evaluated at `x`.
    pub fn idle_cdf_at(&self, x: f64) -> f64 {
        if self.window_idle.is_empty() {
            return 1.0;
        }
        self.window_idle.iter().filter(|&&v| v <= x).count() as f64 / self.window_idle.len() as f64
    }

    pub fn mean_idle(&self) -> f64 {
        if self.makespan == 0.0 {
            0.0
        } else {
            1.0 - self.compute_busy / self.makespan
        }
    }

    /// Whether this run's idle CDF lies on or above `other`'s everywhere.
    pub fn idle_dominates(&self, other: &SimMetrics) -> bool {
        let mut xs: Vec<f64> = self.window_idle.iter().chain(&other.window_idle).copied().collect();
        xs.sort_by(f64::total_cmp);
        xs.iter().all(|&x| self.idle_cdf_at(x) >= other.idle_cdf_at(x) - 1e-12)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("metrics serialize")
    }
}

/// Merged busy intervals of one resource.
fn busy_intervals(trace: &SimTrace, r: Resource) -> Vec<(f64, f64)> {
    let mut iv: Vec<(f64, f64)> = trace.on(r).filter(|e| e.end > e.start).map(|e| (e.start, e.end)).collect();
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(iv.len());
    for (s, e) in iv {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

fn measure(iv: &[(f64, f64)]) -> f64 {
    iv.iter().map(|(s, e)| e - s).sum()
}

fn intersect_measure(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (mut i, mut j, mut total) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if hi > lo {
            total += hi - lo;
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

/// `max(0, last ADAM end - last ST end)`.
pub fn adam_trailing_time(trace: &SimTrace) -> f64 {
    let last = |k: EventKind| trace.events.iter().filter(|e| e.kind == k).map(|e| e.end).fold(f64::NEG_INFINITY, f64::max);
    let (adam, st) = (last(EventKind::Adam), last(EventKind::St));
    if adam.is_finite() && st.is_finite() {
        (adam - st).max(0.0)
    } else {
        0.0
    }
}

pub fn metrics(trace: &SimTrace, window: f64) -> Result<SimMetrics> {
    if !(window > 0.0 && window.is_finite()) {
        return Err(Error::config(format!("window must be positive, got {window}")));
    }
    if trace.events.is_empty() {
        return Err(Error::config("empty trace"));
    }
    let makespan = trace.makespan();
    let compute = busy_intervals(trace, Resource::Compute);
    let mut window_idle = Vec::new();
    let mut t = 0.0;
    let mut k = 0u64;
    while t < makespan {
        let hi = ((k + 1) as f64 * window).min(makespan);
        let busy = intersect_measure(&compute, &[(t, hi)]);
        window_idle.push((1.0 - busy / (hi - t)).clamp(0.0, 1.0));
        k += 1;
        t = k as f64 * window;
    }
    let mut sorted = window_idle.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut idle_cdf: Vec<IdlePoint> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let point = IdlePoint { idle_fraction: v, cumulative: (i + 1) as f64 / n };
        match idle_cdf.last_mut() {
            Some(last) if last.idle_fraction == v => *last = point,
            _ => idle_cdf.push(point),
        }
    }
    let ivs: Vec<Vec<(f64, f64)>> = Resource::ALL.iter().map(|&r| busy_intervals(trace, r)).collect();
    let mut overlaps = Vec::new();
    for a in 0..3 {
        for b in a + 1..3 {
            let inter = intersect_measure(&ivs[a], &ivs[b]);
            let union = measure(&ivs[a]) + measure(&ivs[b]) - inter;
            overlaps.push(PairOverlap {
                a: Resource::ALL[a],
                b: Resource::ALL[b],
                fraction: if union > 0.0 { inter / union } else { 0.0 },
            });
        }
    }
    Ok(SimMetrics {
        makespan,
        throughput: if makespan > 0.0 { trace.batch_size as f64 / makespan } else { 0.0 },
        window,
        window_idle,
        idle_cdf,
        compute_busy: trace.busy_time(Resource::Compute),
        comm_busy: trace.busy_time(Resource::Comm),
        adam_busy: trace.busy_time(Resource::HostAdam),
        adam_trailing: adam_trailing_time(trace),
        overlaps,
    })
}
