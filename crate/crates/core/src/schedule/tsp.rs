//! Open-path TSP over a batch: greedy construction, 2-opt/3-opt local
//! search and an exact Held-Karp oracle for small instances.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DistanceMatrix;
use crate::{Error, Result};

/// Largest instance the exact solver accepts.
pub const MAX_EXACT_VIEWS: usize = 15;

/// A Hamiltonian path (no return edge) and its length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tour {
    pub order: Vec<usize>,
    pub length: u64,
}

impl Tour {
    pub fn new(order: Vec<usize>, m: &DistanceMatrix) -> Self {
        let length = path_length(&order, m);
        Self { order, length }
    }

    pub fn is_permutation_of(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        self.order.len() == n
            && self.order.iter().all(|&v| v < n && !std::mem::replace(&mut seen[v], true))
    }
}

pub fn path_length(order: &[usize], m: &DistanceMatrix) -> u64 {
    order.windows(2).map(|w| m.get(w[0], w[1])).sum()
}

/// Limit on local-search effort.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchBudget {
    WallClock(Duration),
    /// Number of candidate moves evaluated; reproducible across machines.
    Moves(u64),
}

impl SearchBudget {
    /// One millisecond of wall clock.
    pub fn default_wall_clock() -> Self {
        SearchBudget::WallClock(Duration::from_millis(1))
    }
}

/// Greedy chain from `start`, always stepping to the nearest unvisited view
/// (lowest index on ties).
pub fn nearest_neighbor_init(m: &DistanceMatrix, start: usize) -> Result<Tour> {
    let n = m.len();
    if n == 0 {
        return Ok(Tour { order: vec![], length: 0 });
    }
    if start >= n {
        return Err(Error::config(format!("start {start} out of range for {n} views")));
    }
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut cur = start;
    visited[cur] = true;
    order.push(cur);
    for _ in 1..n {
        let next = (0..n)
            .filter(|&j| !visited[j])
            .min_by_key(|&j| (m.get(cur, j), j))
            .expect("unvisited view remains");
        visited[next] = true;
        order.push(next);
        cur = next;
    }
    Ok(Tour::new(order, m))
}

struct Meter {
    budget: SearchBudget,
    started: Instant,
    evaluated: u64,
}

impl Meter {
    fn exhausted(&mut self) -> bool {
        self.evaluated += 1;
        match self.budget {
            SearchBudget::Moves(max) => self.evaluated > max,
            // reading the clock on every move would dominate small instances
            SearchBudget::WallClock(d) => self.evaluated % 64 == 0 && self.started.elapsed() >= d,
        }
    }
}

/// Edge weight where `None` endpoints stand for the open ends of the path.
#[inline]
fn w(m: &DistanceMatrix, a: Option<usize>, b: Option<usize>) -> i64 {
    match (a, b) {
        (Some(a), Some(b)) => m.get(a, b) as i64,
        _ => 0,
    }
}

#[derive(Clone, Copy, Debug)]
enum Move {
    /// Reverse `order[i..=j]`.
    TwoOpt { i: usize, j: usize },
    /// Swap the adjacent segments `order[i..=j]` and `order[j+1..=k]`,
    /// optionally reversing either.
    ThreeOpt { i: usize, j: usize, k: usize, rev_first: bool, rev_second: bool },
}

fn apply(order: &mut Vec<usize>, mv: Move) {
    match mv {
        Move::TwoOpt { i, j } => order[i..=j].reverse(),
        Move::ThreeOpt { i, j, k, rev_first, rev_second } => {
            let mut b: Vec<usize> = order[i..=j].to_vec();
            let mut c: Vec<usize> = order[j + 1..=k].to_vec();
            if rev_first {
                b.reverse();
            }
            if rev_second {
                c.reverse();
            }
            c.extend(b);
            order.splice(i..=k, c);
        }
    }
}

/// First improving move, scanning from a rotated start position.
fn find_improvement(order: &[usize], m: &DistanceMatrix, offset: usize, meter: &mut Meter) -> Option<Option<Move>> {
    let n = order.len();
    let at = |p: isize| -> Option<usize> {
        if p < 0 || p as usize >= n {
            None
        } else {
            Some(order[p as usize])
        }
    };
    for r in 0..n {
        let i = (r + offset) % n;
        let a_end = at(i as isize - 1);
        let b_start = Some(order[i]);
        for j in i..n {
            let b_end = Some(order[j]);
            let after_b = at(j as isize + 1);
            if j > i && !(i == 0 && j == n - 1) {
                if meter.exhausted() {
                    return None;
                }
                let delta = w(m, a_end, b_end) + w(m, b_start, after_b)
                    - w(m, a_end, b_start)
                    - w(m, b_end, after_b);
                if delta < 0 {
                    return Some(Some(Move::TwoOpt { i, j }));
                }
            }
            for k in j + 1..n {
                let c_start = after_b;
                let c_end = Some(order[k]);
                let d_start = at(k as isize + 1);
                let removed = w(m, a_end, b_start) + w(m, b_end, c_start) + w(m, c_end, d_start);
                for (rev_first, rev_second) in [(false, false), (true, false), (false, true), (true, true)] {
                    if meter.exhausted() {
                        return None;
                    }
                    let (bs, be) = if rev_first { (b_end, b_start) } else { (b_start, b_end) };
                    let (cs, ce) = if rev_second { (c_end, c_start) } else { (c_start, c_end) };
                    // A C B D with optional reversals
                    let added = w(m, a_end, cs) + w(m, ce, bs) + w(m, be, d_start);
                    if added < removed {
                        return Some(Some(Move::ThreeOpt { i, j, k, rev_first, rev_second }));
                    }
                }
            }
        }
    }
    Some(None)
}

/// Descends to a 2-opt/3-opt local optimum. `None` when the budget ran out.
fn descend(order: &mut Vec<usize>, m: &DistanceMatrix, rng: &mut ChaCha8Rng, meter: &mut Meter) -> Option<()> {
    let n = order.len();
    loop {
        let offset = rng.random_range(0..n);
        match find_improvement(order, m, offset, meter)? {
            Some(mv) => apply(order, mv),
            None => return Some(()),
        }
    }
}

/// Random segment exchange with random reversals.
fn kick(order: &mut Vec<usize>, rng: &mut ChaCha8Rng) {
    let n = order.len();
    let i = rng.random_range(0..n - 2);
    let j = rng.random_range(i..n - 1);
    let k = rng.random_range(j + 1..n);
    apply(order, Move::ThreeOpt { i, j, k, rev_first: rng.random_bool(0.5), rev_second: rng.random_bool(0.5) });
}

/// Consecutive unproductive kicks per view before the search gives up early.
const STALE_KICKS_PER_VIEW: usize = 50;

/// Improves `tour` with first-improvement 2-opt and 3-opt moves. Each local
/// optimum is perturbed by a seeded random segment exchange and descended
/// again; the search ends when the budget runs out or
/// `STALE_KICKS_PER_VIEW * n` kicks in a row fail to improve the best tour.
/// Never lengthens the tour.
pub fn local_search(tour: &Tour, m: &DistanceMatrix, budget: SearchBudget, seed: u64) -> Tour {
    let n = tour.order.len();
    let mut best = Tour { order: tour.order.clone(), length: path_length(&tour.order, m) };
    if n <= 2 {
        return best;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut meter = Meter { budget, started: Instant::now(), evaluated: 0 };
    let mut current = best.order.clone();
    let mut stale = 0;
    loop {
        let finished = descend(&mut current, m, &mut rng, &mut meter).is_some();
        let length = path_length(&current, m);
        if length < best.length {
            best = Tour { order: current.clone(), length };
            stale = 0;
        } else {
            stale += 1;
            current.clone_from(&best.order);
        }
        if !finished || n < 4 || stale > STALE_KICKS_PER_VIEW * n {
            return best;
        }
        kick(&mut current, &mut rng);
    }
}

/// Optimal open path by dynamic programming over subsets.
pub fn held_karp_exact(m: &DistanceMatrix) -> Result<Tour> {
    let n = m.len();
    if n > MAX_EXACT_VIEWS {
        return Err(Error::config(format!(
            "exact solver limited to {MAX_EXACT_VIEWS} views, got {n}"
        )));
    }
    if n == 0 {
        return Ok(Tour { order: vec![], length: 0 });
    }
    let full = (1usize << n) - 1;
    let mut cost = vec![u64::MAX; (1 << n) * n];
    let mut parent = vec![u8::MAX; (1 << n) * n];
    for v in 0..n {
        cost[(1 << v) * n + v] = 0;
    }
    for mask in 1..=full {
        for last in 0..n {
            let c = cost[mask * n + last];
            if c == u64::MAX || mask & (1 << last) == 0 {
                continue;
            }
            for next in 0..n {
                if mask & (1 << next) != 0 {
                    continue;
                }
                let nm = mask | (1 << next);
                let nc = c + m.get(last, next);
                if nc < cost[nm * n + next] {
                    cost[nm * n + next] = nc;
                    parent[nm * n + next] = last as u8;
                }
            }
        }
    }
    let (mut last, length) = (0..n)
        .map(|v| (v, cost[full * n + v]))
        .min_by_key(|&(v, c)| (c, v))
        .expect("non-empty");
    let mut order = Vec::with_capacity(n);
    let mut mask = full;
    loop {
        order.push(last);
        let p = parent[mask * n + last];
        mask &= !(1 << last);
        if p == u8::MAX {
            break;
        }
        last = p as usize;
    }
    order.reverse();
    debug_assert_eq!(path_length(&order, m), length);
    Ok(Tour { order, length })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[u64]]) -> DistanceMatrix {
        DistanceMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn three() -> DistanceMatrix {
        matrix(&[&[0, 1, 5], &[1, 0, 2], &[5, 2, 0]])
    }

    /// All permutations by Heap's algorithm.
    fn brute_force(m: &DistanceMatrix) -> u64 {
        fn rec(k: usize, a: &mut Vec<usize>, m: &DistanceMatrix, best: &mut u64) {
            if k == 1 {
                *best = (*best).min(path_length(a, m));
                return;
            }
            for i in 0..k {
                rec(k - 1, a, m, best);
                if k % 2 == 0 {
                    a.swap(i, k - 1);
                } else {
                    a.swap(0, k - 1);
                }
            }
        }
        let mut a: Vec<usize> = (0..m.len()).collect();
        let mut best = u64::MAX;
        rec(a.len(), &mut a, m, &mut best);
        best
    }

    fn random_matrix(n: usize, seed: u64) -> DistanceMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = vec![vec![0u64; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let d = rng.random_range(1..100);
                rows[i][j] = d;
                rows[j][i] = d;
            }
        }
        DistanceMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn nearest_neighbor_examples() {
        let single = matrix(&[&[0]]);
        assert_eq!(nearest_neighbor_init(&single, 0).unwrap(), Tour { order: vec![0], length: 0 });
        let t = nearest_neighbor_init(&three(), 0).unwrap();
        assert_eq!(t.order, vec![0, 1, 2]);
        assert_eq!(t.length, 3);
        assert!(nearest_neighbor_init(&three(), 3).is_err());
        // tie between 1 and 2 from 0 goes to the lower index
        let tie = matrix(&[&[0, 4, 4], &[4, 0, 1], &[4, 1, 0]]);
        assert_eq!(nearest_neighbor_init(&tie, 0).unwrap().order, vec![0, 1, 2]);
    }

    #[test]
    fn held_karp_small_cases() {
        let two = matrix(&[&[0, 7], &[7, 0]]);
        assert_eq!(held_karp_exact(&two).unwrap().length, 7);
        let t = held_karp_exact(&three()).unwrap();
        assert_eq!(t.length, 3);
        assert!(t.order == vec![0, 1, 2] || t.order == vec![2, 1, 0]);
        assert!(held_karp_exact(&random_matrix(16, 1)).is_err());
    }

    #[test]
    fn held_karp_matches_enumeration() {
        for seed in 0..20 {
            let m = random_matrix(2 + (seed as usize % 6), seed);
            let t = held_karp_exact(&m).unwrap();
            assert!(t.is_permutation_of(m.len()));
            assert_eq!(t.length, brute_force(&m), "seed {seed}");
        }
    }

    #[test]
    fn held_karp_beats_random_permutations() {
        use rand::seq::SliceRandom;
        let m = random_matrix(8, 42);
        let best = held_karp_exact(&m).unwrap().length;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p: Vec<usize> = (0..8).collect();
        for _ in 0..1000 {
            p.shuffle(&mut rng);
            assert!(best <= path_length(&p, &m));
        }
    }

    #[test]
    fn two_node_tour_unchanged() {
        let two = matrix(&[&[0, 7], &[7, 0]]);
        let t = Tour::new(vec![1, 0], &two);
        assert_eq!(local_search(&t, &two, SearchBudget::Moves(1000), 0), t);
    }

    #[test]
    fn crossing_path_is_uncrossed() {
        // points on a line at 0, 1, 2, 3; the path 0-2-1-3 crosses itself
        let pos = [0i64, 1, 2, 3];
        let rows: Vec<Vec<u64>> =
            pos.iter().map(|a| pos.iter().map(|b| (a - b).unsigned_abs()).collect()).collect();
        let m = DistanceMatrix::from_rows(&rows).unwrap();
        let t = Tour::new(vec![0, 2, 1, 3], &m);
        assert_eq!(t.length, 5);
        let improved = local_search(&t, &m, SearchBudget::Moves(10_000), 3);
        assert!(improved.length < t.length);
        assert_eq!(improved.length, 3);
    }

    #[test]
    fn local_search_never_worse_and_near_optimal() {
        for seed in 0..50 {
            let n = 3 + seed as usize % 8;
            let m = random_matrix(n, 100 + seed);
            let init = nearest_neighbor_init(&m, seed as usize % n).unwrap();
            let t = local_search(&init, &m, SearchBudget::Moves(1_000_000), seed);
            assert!(t.is_permutation_of(n));
            assert_eq!(t.length, path_length(&t.order, &m));
            assert!(t.length <= init.length);
            let best = held_karp_exact(&m).unwrap().length;
            assert!(best <= t.length);
            assert!(t.length as f64 <= 1.05 * best as f64, "seed {seed}: {} vs {best}", t.length);
        }
    }

    #[test]
    fn move_budget_is_deterministic() {
        let m = random_matrix(12, 9);
        let init = nearest_neighbor_init(&m, 0).unwrap();
        let a = local_search(&init, &m, SearchBudget::Moves(500), 5);
        let b = local_search(&init, &m, SearchBudget::Moves(500), 5);
        assert_eq!(a, b);
        let none = local_search(&init, &m, SearchBudget::Moves(0), 5);
        assert_eq!(none, init);
    }
}
