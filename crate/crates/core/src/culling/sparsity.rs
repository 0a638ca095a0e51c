use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Sorted, duplicate-free indices of the Gaussians one view touches.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SparsitySet {
    pub view_id: u64,
    indices: Vec<u32>,
    pub n_total: u64,
}

impl SparsitySet {
    /// Validates ordering and range.
    pub fn new(view_id: u64, indices: Vec<u32>, n_total: u64) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::inconsistent(format!("view {view_id}: indices not strictly increasing")));
        }
        if let Some(&last) = indices.last() {
            if last as u64 >= n_total {
                return Err(Error::inconsistent(format!(
                    "view {view_id}: index {last} out of range for {n_total} Gaussians"
                )));
            }
        }
        Ok(Self { view_id, indices, n_total })
    }

    /// Sorts and dedups arbitrary indices.
    pub fn from_unsorted(view_id: u64, mut indices: Vec<u32>, n_total: u64) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        Self::new(view_id, indices, n_total)
    }

    pub(crate) fn from_sorted(view_id: u64, indices: Vec<u32>, n_total: u64) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Self { view_id, indices, n_total }
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, g: u32) -> bool {
        self.indices.binary_search(&g).is_ok()
    }

    /// `|S| / N`; zero for an empty scene.
    pub fn rho(&self) -> f64 {
        if self.n_total == 0 {
            0.0
        } else {
            self.indices.len() as f64 / self.n_total as f64
        }
    }

    pub fn intersection_len(&self, other: &Self) -> usize {
        merge_count(&self.indices, &other.indices)
    }

    pub fn intersection(&self, other: &Self) -> Vec<u32> {
        merge_filter(&self.indices, &other.indices, true)
    }

    /// Elements of `self` not in `other`.
    pub fn difference(&self, other: &Self) -> Vec<u32> {
        merge_filter(&self.indices, &other.indices, false)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.intersection_len(other) == self.len()
    }

    /// Record layout: view id (u64), count (u64), indices (u32), little-endian.
    pub fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.view_id.to_le_bytes());
        out.extend_from_slice(&(self.indices.len() as u64).to_le_bytes());
        for i in &self.indices {
            out.extend_from_slice(&i.to_le_bytes());
        }
    }

    /// Decodes one record from the front of `bytes`, returning the rest.
    pub fn decode(bytes: &[u8], n_total: u64) -> std::result::Result<(Self, &[u8]), String> {
        if bytes.len() < 16 {
            return Err("truncated set header".into());
        }
        let view_id = u64::from_le_bytes(bytes[0..8].try_into().unwrap());
        let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let end = count.checked_mul(4).and_then(|b| b.checked_add(16)).ok_or("count overflows")?;
        if bytes.len() < end {
            return Err(format!("truncated set body for view {view_id}"));
        }
        let indices = bytes[16..end]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let set = Self::new(view_id, indices, n_total).map_err(|e| e.to_string())?;
        Ok((set, &bytes[end..]))
    }
}

fn merge_count(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Elements of `a` that are (`keep_common`) or are not in `b`.
fn merge_filter(a: &[u32], b: &[u32], keep_common: bool) -> Vec<u32> {
    let mut out = Vec::new();
    let mut j = 0;
    for &x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        let common = j < b.len() && b[j] == x;
        if common == keep_common {
            out.push(x);
        }
    }
    out
}

const SETS_MAGIC: &[u8; 4] = b"SPSS";

/// File wrapper: magic, N (u64), set count (u64), then set records.
pub fn write_sets(path: &Path, sets: &[SparsitySet]) -> Result<()> {
    let n_total = sets.first().map_or(0, |s| s.n_total);
    let mut out = Vec::new();
    out.extend_from_slice(SETS_MAGIC);
    out.extend_from_slice(&n_total.to_le_bytes());
    out.extend_from_slice(&(sets.len() as u64).to_le_bytes());
    for s in sets {
        s.encode(&mut out);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_sets(path: &Path) -> Result<Vec<SparsitySet>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 20 || &bytes[0..4] != SETS_MAGIC {
        return Err(Error::format(path, "missing SPSS header"));
    }
    let n_total = u64::from_le_bytes(bytes[4..12].try_into().unwrap());
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let mut rest = &bytes[20..];
    let mut sets = Vec::new();
    for _ in 0..count {
        let (s, r) = SparsitySet::decode(rest, n_total).map_err(|e| Error::format(path, e))?;
        sets.push(s);
        rest = r;
    }
    if !rest.is_empty() {
        return Err(Error::format(path, "trailing bytes after last set"));
    }
    Ok(sets)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub rho: f64,
    /// Fraction of views with sparsity `<= rho`.
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    pub n_total: u64,
    pub views: Vec<(u64, u64, f64)>,
    pub mean: f64,
    pub max: f64,
    pub min: f64,
    pub cdf: Vec<CdfPoint>,
}

impl SparsityReport {
    /// Empirical CDF evaluated at `rho`.
    pub fn cdf_at(&self, rho: f64) -> f64 {
        self.cdf.iter().take_while(|p| p.rho <= rho).last().map_or(0.0, |p| p.fraction)
    }

    /// Tab-separated per-view table followed by the CDF table.
    pub fn to_table(&self) -> String {
        let mut s = String::from("view_id\tcount\trho\n");
        for (id, count, rho) in &self.views {
            s += &format!("{id}\t{count}\t{rho:.6e}\n");
        }
        s += &format!("# n_total={} mean={:.6e} max={:.6e} min={:.6e}\n", self.n_total, self.mean, self.max, self.min);
        s += "rho\tcdf\n";
        for p in &self.cdf {
            s += &format!("{:.6e}\t{:.6}\n", p.rho, p.fraction);
        }
        s
    }
}

/// Per-view sparsity, summary statistics and the empirical CDF (one point
/// per distinct sparsity value).
pub fn sparsity_stats(sets: &[SparsitySet]) -> Result<SparsityReport> {
    let first = sets.first().ok_or_else(|| Error::config("sparsity_stats needs at least one set"))?;
    let n_total = first.n_total;
    if sets.iter().any(|s| s.n_total != n_total) {
        return Err(Error::inconsistent("sets disagree on Gaussian count"));
    }
    let views: Vec<_> = sets.iter().map(|s| (s.view_id, s.len() as u64, s.rho())).collect();
    let mut rhos: Vec<f64> = views.iter().map(|v| v.2).collect();
    rhos.sort_by(f64::total_cmp);
    let n = rhos.len() as f64;
    let mut cdf: Vec<CdfPoint> = Vec::new();
    for (i, &r) in rhos.iter().enumerate() {
        let fraction = (i + 1) as f64 / n;
        match cdf.last_mut() {
            Some(p) if p.rho == r => p.fraction = fraction,
            _ => cdf.push(CdfPoint { rho: r, fraction }),
        }
    }
    Ok(SparsityReport {
        n_total,
        mean: rhos.iter().sum::<f64>() / n,
        max: *rhos.last().unwrap(),
        min: rhos[0],
        views,
        cdf,
    })
}
