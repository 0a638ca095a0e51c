use crate::culling::SparsitySet;
use crate::{Error, Result};

/// Symmetric-difference distances `|S_i xor S_j|` between views of a batch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<u64>,
}

impl DistanceMatrix {
    /// Builds a matrix from a full row-major table. The table must be square,
    /// symmetric and zero on the diagonal.
    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::config("distance matrix must be square"));
        }
        for i in 0..n {
            if rows[i][i] != 0 {
                return Err(Error::config("distance matrix diagonal must be zero"));
            }
            for j in 0..i {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::config("distance matrix must be symmetric"));
                }
            }
        }
        Ok(Self { n, data: rows.concat() })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.data[i * self.n + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> {
        self.data.chunks(self.n.max(1)).take(self.n)
    }

    pub fn satisfies_triangle_inequality(&self) -> bool {
        let n = self.n;
        (0..n).all(|i| {
            (0..n).all(|j| (0..n).all(|k| self.get(i, j) <= self.get(i, k) + self.get(k, j)))
        })
    }
}

/// `m[i][j] = |S_i| + |S_j| - 2 |S_i & S_j|`.
pub fn distance_matrix(sets: &[SparsitySet]) -> Result<DistanceMatrix> {
    if let Some(first) = sets.first() {
        if let Some(bad) = sets.iter().find(|s| s.n_total != first.n_total) {
            return Err(Error::inconsistent(format!(
                "view {} has n_total {} but view {} has {}",
                bad.view_id, bad.n_total, first.view_id, first.n_total
            )));
        }
    }
    let n = sets.len();
    let mut data = vec![0u64; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let inter = sets[i].intersection_len(&sets[j]) as u64;
            let d = sets[i].len() as u64 + sets[j].len() as u64 - 2 * inter;
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    Ok(DistanceMatrix { n, data })
}
