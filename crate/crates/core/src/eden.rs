//! Memoryless cluster exploration for the slab crossing time under
//! Exponential(a) weights.
//!
//! A cluster `C ⊂ H_0` with `i` vertices and `S` in-plane perimeter edges has
//! `i + S` unexplored edges leaving it: one `+e_1` exit per vertex and the `S`
//! perimeter edges. By the memoryless property the next edge to be crossed is
//! uniform among them and the waiting time is Exponential(a (i + S)). An exit
//! ends the exploration; otherwise the new vertex joins the cluster.
//!
//! Vertices of `H_0` are stored sparsely (nonzero in-plane coordinates only)
//! and indexed by an additive Zobrist key, so the key of `w ± e_k` is derived
//! from the key of `w` in O(1). Each step costs O(d) hash probes.

use hashbrown::HashTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::perimeter_lower_bound;
use crate::error::{FppError, Result};
use crate::lattice::{Coord, EdgeId, LatticePoint};
use crate::mix;
use crate::slab::PassageSample;

pub const DEFAULT_CLUSTER_CAP: usize = 1_000_000;

const NO_SLOT: u32 = u32::MAX;
const ZOBRIST_SALT: u64 = 0xC1A5_7E12_D0E5_A11E;

/// Sorted `(axis, value)` pairs with `value != 0`.
type Sparse = Vec<(u32, Coord)>;

#[inline]
fn zobrist(axis: u32, value: Coord) -> u64 {
    if value == 0 {
        0
    } else {
        mix::mix64(ZOBRIST_SALT ^ ((axis as u64) << 32) ^ (value as u32 as u64))
    }
}

#[inline]
fn coord_of(p: &Sparse, axis: u32) -> Coord {
    p.binary_search_by_key(&axis, |&(a, _)| a).map_or(0, |k| p[k].1)
}

fn shifted(p: &Sparse, axis: u32, delta: Coord) -> Sparse {
    let mut out = p.clone();
    match out.binary_search_by_key(&axis, |&(a, _)| a) {
        Ok(k) => {
            out[k].1 += delta;
            if out[k].1 == 0 {
                out.remove(k);
            }
        }
        Err(k) => out.insert(k, (axis, delta)),
    }
    out
}

/// In-plane direction `dir ∈ [0, 2(d-1))`: axis `1 + dir / 2`, positive when
/// `dir` is even. `dir ^ 1` is the opposite direction.
#[inline]
fn decode(dir: u32) -> (u32, Coord) {
    (1 + dir / 2, if dir % 2 == 0 { 1 } else { -1 })
}

/// State of the exploration: the infected cluster in `H_0`, its perimeter
/// edges and the elapsed time.
#[derive(Clone, Debug)]
pub struct ClusterState {
    dim: usize,
    rate: f64,
    dirs: u32,
    points: Vec<Sparse>,
    keys: Vec<u64>,
    index: HashTable<u32>,
    /// Perimeter edges as (infected vertex, direction), sampled by position.
    perimeter: Vec<(u32, u32)>,
    /// Position in `perimeter` of (vertex, direction), or `NO_SLOT`.
    slot: Vec<u32>,
    elapsed: f64,
    exit: Option<u32>,
}

impl ClusterState {
    /// The singleton cluster `{0}`.
    pub fn new(dim: usize, rate: f64) -> Result<Self> {
        if dim < 2 {
            return Err(FppError::domain(format!("dimension must be at least 2, got {dim}")));
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(FppError::domain(format!("rate must be positive, got {rate}")));
        }
        let dirs = 2 * (dim as u32 - 1);
        let mut index = HashTable::new();
        index.insert_unique(0, 0u32, |_| 0);
        Ok(ClusterState {
            dim,
            rate,
            dirs,
            points: vec![Vec::new()],
            keys: vec![0],
            index,
            perimeter: (0..dirs).map(|dir| (0, dir)).collect(),
            slot: (0..dirs).collect(),
            elapsed: 0.0,
            exit: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// `i`, the number of infected vertices.
    pub fn infected_count(&self) -> usize {
        self.points.len()
    }

    /// `S`, the number of in-plane perimeter edges.
    pub fn perimeter_count(&self) -> usize {
        self.perimeter.len()
    }

    /// One `+e_1` edge per infected vertex.
    pub fn exit_candidates(&self) -> usize {
        self.points.len()
    }

    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }

    pub fn exited(&self) -> bool {
        self.exit.is_some()
    }

    fn dense(&self, p: &Sparse, first: Coord) -> LatticePoint {
        let mut c = vec![0; self.dim];
        c[0] = first;
        for &(a, v) in p {
            c[a as usize] = v;
        }
        LatticePoint::new(c).expect("dimension checked at construction")
    }

    pub fn infected_points(&self) -> Vec<LatticePoint> {
        self.points.iter().map(|p| self.dense(p, 0)).collect()
    }

    pub fn perimeter_edges(&self) -> Vec<EdgeId> {
        self.perimeter
            .iter()
            .map(|&(v, dir)| {
                let (axis, delta) = decode(dir);
                let base = if delta > 0 {
                    self.dense(&self.points[v as usize], 0)
                } else {
                    self.dense(&shifted(&self.points[v as usize], axis, -1), 0)
                };
                EdgeId::new(base, axis as usize)
            })
            .collect()
    }

    /// Vertex of `H_1` reached by the exit edge, once exited.
    pub fn exit_vertex(&self) -> Option<LatticePoint> {
        self.exit.map(|v| self.dense(&self.points[v as usize], 1))
    }

    /// Largest |x_j| over infected vertices.
    pub fn reach(&self) -> u32 {
        self.points
            .iter()
            .flat_map(|p| p.iter().map(|&(_, v)| v.unsigned_abs()))
            .max()
            .unwrap_or(0)
    }

    fn find(&self, key: u64, probe: impl Fn() -> Sparse) -> Option<u32> {
        self.index
            .find(key, |&vid| self.keys[vid as usize] == key && self.points[vid as usize] == probe())
            .copied()
    }

    #[inline]
    fn neighbor_key(&self, vid: u32, axis: u32, delta: Coord) -> u64 {
        let p = &self.points[vid as usize];
        let c = coord_of(p, axis);
        self.keys[vid as usize]
            .wrapping_sub(zobrist(axis, c))
            .wrapping_add(zobrist(axis, c + delta))
    }

    fn is_infected_neighbor(&self, vid: u32, dir: u32) -> bool {
        let (axis, delta) = decode(dir);
        let key = self.neighbor_key(vid, axis, delta);
        self.find(key, || shifted(&self.points[vid as usize], axis, delta)).is_some()
    }

    fn add_perimeter(&mut self, vid: u32, dir: u32) {
        self.slot[(vid * self.dirs + dir) as usize] = self.perimeter.len() as u32;
        self.perimeter.push((vid, dir));
    }

    fn remove_perimeter(&mut self, vid: u32, dir: u32) {
        let at = (vid * self.dirs + dir) as usize;
        let pos = self.slot[at];
        debug_assert_ne!(pos, NO_SLOT, "edge ({vid}, {dir}) is not on the perimeter");
        let last = self.perimeter.pop().expect("perimeter nonempty");
        if (pos as usize) < self.perimeter.len() {
            self.perimeter[pos as usize] = last;
            self.slot[(last.0 * self.dirs + last.1) as usize] = pos;
        }
        self.slot[at] = NO_SLOT;
    }

    /// Advance to the next infection. Returns `true` once the crossed edge is
    /// an exit; the state is frozen from then on.
    pub fn dhar_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        if self.exit.is_some() {
            return true;
        }
        let i = self.points.len();
        let total = i + self.perimeter.len();
        let u = mix::open_unit(rng.gen::<u64>());
        self.elapsed += -u.ln() / (self.rate * total as f64);

        let pick = rng.gen_range(0..total);
        if pick < i {
            self.exit = Some(pick as u32);
            return true;
        }
        let (v, dir) = self.perimeter[pick - i];
        let (axis, delta) = decode(dir);
        let w_key = self.neighbor_key(v, axis, delta);
        let w_point = shifted(&self.points[v as usize], axis, delta);
        let wid = i as u32;

        self.points.push(w_point);
        self.keys.push(w_key);
        let keys = &self.keys;
        self.index.insert_unique(w_key, wid, |&id| keys[id as usize]);
        self.slot.extend(std::iter::repeat(NO_SLOT).take(self.dirs as usize));

        for d2 in 0..self.dirs {
            let (ax, dl) = decode(d2);
            let key = self.neighbor_key(wid, ax, dl);
            match self.find(key, || shifted(&self.points[wid as usize], ax, dl)) {
                Some(u) => self.remove_perimeter(u, d2 ^ 1),
                None => self.add_perimeter(wid, d2),
            }
        }
        debug_assert!(self.isoperimetric_ok(), "S below the isoperimetric bound");
        false
    }

    /// `s_i <= S`, checked for `d >= 4`.
    pub fn isoperimetric_ok(&self) -> bool {
        if self.dim < 4 {
            return true;
        }
        let s_i = perimeter_lower_bound(self.dim, self.points.len()).unwrap_or(0.0);
        self.perimeter.len() as f64 >= s_i * (1.0 - 1e-12)
    }

    /// `S` recomputed by scanning every infected vertex's in-plane neighbors.
    pub fn recount_perimeter(&self) -> usize {
        (0..self.points.len() as u32)
            .map(|v| (0..self.dirs).filter(|&dir| !self.is_infected_neighbor(v, dir)).count())
            .sum()
    }
}

#[derive(Clone, Debug)]
pub struct EdenOptions {
    pub cluster_cap: usize,
    /// Recount the perimeter from scratch after every step (O(i d) per step).
    pub verify_perimeter: bool,
}

impl Default for EdenOptions {
    fn default() -> Self {
        EdenOptions { cluster_cap: DEFAULT_CLUSTER_CAP, verify_perimeter: false }
    }
}

/// Runs the exploration from `{0}` until the first exit, drawing from `rng`.
pub fn explore<R: Rng + ?Sized>(
    dim: usize,
    rate: f64,
    rng: &mut R,
    opts: &EdenOptions,
) -> Result<ClusterState> {
    let mut state = ClusterState::new(dim, rate)?;
    while !state.dhar_step(rng) {
        if state.infected_count() > opts.cluster_cap {
            return Err(FppError::BudgetExceeded { cap: opts.cluster_cap });
        }
        if opts.verify_perimeter {
            assert_eq!(state.recount_perimeter(), state.perimeter_count(), "perimeter bookkeeping drifted");
            assert!(state.isoperimetric_ok(), "S below the isoperimetric bound");
        }
    }
    Ok(state)
}

/// One draw of the slab crossing time under Exponential(`rate`) weights,
/// driven by a ChaCha8 stream seeded with `seed`.
pub fn sample_s01_eden(dim: usize, rate: f64, seed: u64, opts: &EdenOptions) -> Result<PassageSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let state = explore(dim, rate, &mut rng, opts)?;
    Ok(PassageSample {
        value: state.elapsed(),
        exit_vertex: state.exit_vertex().expect("explore returns after an exit"),
        settled_count: state.infected_count(),
        dimension: dim,
        seed_used: seed,
        reach: state.reach(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::canonical_edge;
    use std::collections::HashSet;

    #[test]
    fn singleton_counts() {
        for d in [2usize, 3, 5, 50] {
            let st = ClusterState::new(d, 1.0).unwrap();
            assert_eq!(st.infected_count(), 1);
            assert_eq!(st.perimeter_count(), 2 * (d - 1));
            assert_eq!(st.exit_candidates() + st.perimeter_count(), 2 * d - 1);
        }
        // d = 2: H_0 is a line, so two perimeter edges plus one exit.
        assert_eq!(ClusterState::new(2, 1.0).unwrap().perimeter_count() + 1, 3);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ClusterState::new(1, 1.0).is_err());
        assert!(ClusterState::new(3, 0.0).is_err());
    }

    #[test]
    fn non_exit_step_grows_cluster_and_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let mut st = ClusterState::new(4, 1.0).unwrap();
            loop {
                let (i, t) = (st.infected_count(), st.elapsed());
                let exited = st.dhar_step(&mut rng);
                assert!(st.elapsed() > t);
                if exited {
                    assert_eq!(st.infected_count(), i);
                    break;
                }
                assert_eq!(st.infected_count(), i + 1);
            }
        }
    }

    #[test]
    fn frozen_after_exit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let st = explore(3, 1.0, &mut rng, &EdenOptions::default()).unwrap();
        let mut again = st.clone();
        assert!(again.dhar_step(&mut rng));
        assert_eq!(again.elapsed(), st.elapsed());
        assert_eq!(again.infected_count(), st.infected_count());
    }

    #[test]
    fn cluster_structure_matches_lattice_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in [2usize, 3, 4, 6] {
            for _ in 0..30 {
                let mut st = ClusterState::new(d, 1.0).unwrap();
                while !st.dhar_step(&mut rng) {
                    let pts = st.infected_points();
                    let set: HashSet<_> = pts.iter().cloned().collect();
                    assert_eq!(set.len(), pts.len());
                    assert!(set.contains(&LatticePoint::origin(d)));
                    // Perimeter edges: in-plane edges with exactly one infected endpoint.
                    let mut expected = HashSet::new();
                    for p in &pts {
                        for axis in 1..d {
                            for delta in [1, -1] {
                                let q = p.shifted(axis, delta);
                                if !set.contains(&q) {
                                    expected.insert(canonical_edge(p, &q).unwrap());
                                }
                            }
                        }
                    }
                    let got: HashSet<_> = st.perimeter_edges().into_iter().collect();
                    assert_eq!(got, expected);
                    assert_eq!(st.perimeter_count(), expected.len());
                    assert_eq!(st.recount_perimeter(), st.perimeter_count());
                    // Connected: BFS from the origin reaches every vertex.
                    let mut seen = HashSet::from([LatticePoint::origin(d)]);
                    let mut stack = vec![LatticePoint::origin(d)];
                    while let Some(p) = stack.pop() {
                        for axis in 1..d {
                            for delta in [1, -1] {
                                let q = p.shifted(axis, delta);
                                if set.contains(&q) && seen.insert(q.clone()) {
                                    stack.push(q);
                                }
                            }
                        }
                    }
                    assert_eq!(seen.len(), set.len());
                }
                assert_eq!(st.exit_vertex().unwrap().coord(0), 1);
            }
        }
    }

    #[test]
    fn rate_scaling_is_pathwise() {
        for seed in 0..100 {
            let one = sample_s01_eden(6, 1.0, seed, &EdenOptions::default()).unwrap();
            let three = sample_s01_eden(6, 3.0, seed, &EdenOptions::default()).unwrap();
            assert_eq!(one.exit_vertex, three.exit_vertex);
            assert!((three.value - one.value / 3.0).abs() <= 1e-12 * one.value);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let opts = EdenOptions { cluster_cap: 2, ..Default::default() };
        let mut hit = false;
        for seed in 0..200 {
            match sample_s01_eden(8, 1.0, seed, &opts) {
                Err(FppError::BudgetExceeded { cap: 2 }) => hit = true,
                Ok(s) => assert!(s.settled_count <= 2),
                Err(e) => panic!("{e}"),
            }
        }
        assert!(hit);
    }
}
