//! Exact passage times on a single weight realization: the non-backtracking
//! slab crossing time, point-to-hyperplane and point-to-point times.
//!
//! All searches are lazy best-first (Dijkstra) searches over the implicit
//! lattice. Edge weights are pulled from a [`WeightField`] on first touch, so
//! only the explored neighborhood of the start is ever evaluated.

use std::cmp::{Ordering, Reverse};
use std::collections::hash_map::Entry as MapEntry;
use std::collections::{BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{FppError, Result};
use crate::lattice::{hyperplane_index, Coord, EdgeId, HyperplaneIndex, LatticePoint};
use crate::weights::WeightField;

pub const DEFAULT_BUDGET_CAP: usize = 10_000_000;

/// One realization of a slab crossing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PassageSample {
    pub value: f64,
    /// Endpoint of the optimal path, in the next hyperplane.
    pub exit_vertex: LatticePoint,
    /// Vertices settled by the search (cluster size for the Eden sampler).
    pub settled_count: usize,
    pub dimension: usize,
    pub seed_used: u64,
    /// Largest in-plane distance from the start among settled vertices. The
    /// optimal path never leaves this radius.
    pub reach: u32,
}

#[derive(Clone, Debug)]
pub struct SlabOptions {
    pub budget_cap: usize,
    /// Confine in-plane vertices to `|x_j - start_j| <= r` for `j >= 1`.
    pub box_radius: Option<u32>,
    /// After the first exit is found, keep settling until this many times as
    /// many vertices are settled and return the minimum exit over all of them.
    /// `1` stops at the first exit.
    pub overrun: usize,
}

impl Default for SlabOptions {
    fn default() -> Self {
        SlabOptions { budget_cap: DEFAULT_BUDGET_CAP, box_radius: None, overrun: 1 }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum Kind {
    // Exits sort first so that an exit tied with an in-plane vertex ends the search.
    Exit,
    Vertex,
}

#[derive(Debug)]
struct HeapEntry {
    value: f64,
    kind: Kind,
    point: LatticePoint,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then(self.kind.cmp(&other.kind))
            .then_with(|| self.point.cmp(&other.point))
    }
}

type MinHeap = BinaryHeap<Reverse<HeapEntry>>;

/// Edge between `p` and `p + delta e_axis`, `delta = ±1`.
#[inline]
fn step_edge(p: &LatticePoint, q: &LatticePoint, delta: Coord, axis: usize) -> EdgeId {
    if delta > 0 {
        EdgeId { base: p.clone(), axis }
    } else {
        EdgeId { base: q.clone(), axis }
    }
}

/// Non-backtracking crossing time from `start ∈ H_k` to `H_{k+1}`: the
/// infimum of T(γ) over paths whose vertices other than the last stay in
/// `H_k` and whose last edge is `v → v + e_1`.
///
/// The search settles in-plane vertices in order of distance and, for each
/// settled `v`, queues the exit candidate `dist(v) + τ(v, v + e_1)`. It stops
/// when the smallest queued exit is no larger than every queued in-plane
/// distance, at which point no unsettled vertex can produce a smaller exit.
pub fn slab_crossing_time<W: WeightField>(
    weights: &W,
    start: &LatticePoint,
    k: HyperplaneIndex,
    opts: &SlabOptions,
) -> Result<PassageSample> {
    if hyperplane_index(start) != k {
        return Err(FppError::domain(format!("start {start} does not lie in H_{}", k.0)));
    }
    let d = start.dim();
    let in_box = |q: &LatticePoint| match opts.box_radius {
        Some(r) => q.in_plane_radius(start) <= r,
        None => true,
    };

    let mut heap = MinHeap::new();
    let mut tentative: HashMap<LatticePoint, f64> = HashMap::new();
    let mut settled: HashSet<LatticePoint> = HashSet::new();
    let mut reach = 0u32;
    // (value, exit vertex, settled count when found)
    let mut found: Option<(f64, LatticePoint, usize)> = None;

    tentative.insert(start.clone(), 0.0);
    heap.push(Reverse(HeapEntry { value: 0.0, kind: Kind::Vertex, point: start.clone() }));

    while let Some(Reverse(HeapEntry { value, kind, point })) = heap.pop() {
        match kind {
            Kind::Exit => {
                if found.is_none() {
                    found = Some((value, point, settled.len()));
                    if opts.overrun <= 1 {
                        break;
                    }
                }
            }
            Kind::Vertex => {
                if settled.contains(&point) {
                    continue;
                }
                if let Some((_, _, at)) = &found {
                    if settled.len() >= at * opts.overrun {
                        break;
                    }
                }
                if settled.len() >= opts.budget_cap {
                    return Err(FppError::BudgetExceeded { cap: opts.budget_cap });
                }
                reach = reach.max(point.in_plane_radius(start));

                let exit_value = value + weights.weight(&EdgeId { base: point.clone(), axis: 0 });
                match &mut found {
                    None => heap.push(Reverse(HeapEntry {
                        value: exit_value,
                        kind: Kind::Exit,
                        point: point.shifted(0, 1),
                    })),
                    Some((best, exit, _)) => {
                        if exit_value < *best {
                            *best = exit_value;
                            *exit = point.shifted(0, 1);
                        }
                    }
                }

                for axis in 1..d {
                    for delta in [1, -1] {
                        let q = point.shifted(axis, delta);
                        if !in_box(&q) || settled.contains(&q) {
                            continue;
                        }
                        let nv = value + weights.weight(&step_edge(&point, &q, delta, axis));
                        relax(&mut tentative, &mut heap, q, nv);
                    }
                }
                settled.insert(point);
            }
        }
    }

    let (value, exit_vertex, settled_at_exit) =
        found.expect("every settled vertex queues an exit, so the search cannot run dry");
    Ok(PassageSample {
        value,
        exit_vertex,
        settled_count: if opts.overrun <= 1 { settled_at_exit } else { settled.len() },
        dimension: d,
        seed_used: weights.seed(),
        reach,
    })
}

#[inline]
fn relax(tentative: &mut HashMap<LatticePoint, f64>, heap: &mut MinHeap, q: LatticePoint, nv: f64) {
    match tentative.entry(q) {
        MapEntry::Occupied(mut o) => {
            if nv < *o.get() {
                *o.get_mut() = nv;
                heap.push(Reverse(HeapEntry { value: nv, kind: Kind::Vertex, point: o.key().clone() }));
            }
        }
        MapEntry::Vacant(v) => {
            heap.push(Reverse(HeapEntry { value: nv, kind: Kind::Vertex, point: v.key().clone() }));
            v.insert(nv);
        }
    }
}

/// Plain Dijkstra from `source` over vertices accepted by `in_region`, until
/// a vertex accepted by `is_target` is settled.
fn dijkstra_to<W, R, T>(
    weights: &W,
    source: &LatticePoint,
    in_region: R,
    is_target: T,
    budget_cap: usize,
) -> Result<f64>
where
    W: WeightField,
    R: Fn(&LatticePoint) -> bool,
    T: Fn(&LatticePoint) -> bool,
{
    let d = source.dim();
    let mut heap = MinHeap::new();
    let mut tentative: HashMap<LatticePoint, f64> = HashMap::new();
    let mut settled: HashSet<LatticePoint> = HashSet::new();
    tentative.insert(source.clone(), 0.0);
    heap.push(Reverse(HeapEntry { value: 0.0, kind: Kind::Vertex, point: source.clone() }));

    while let Some(Reverse(HeapEntry { value, point, .. })) = heap.pop() {
        if settled.contains(&point) {
            continue;
        }
        if is_target(&point) {
            return Ok(value);
        }
        if settled.len() >= budget_cap {
            return Err(FppError::BudgetExceeded { cap: budget_cap });
        }
        for axis in 0..d {
            for delta in [1, -1] {
                let q = point.shifted(axis, delta);
                if !in_region(&q) || settled.contains(&q) {
                    continue;
                }
                let nv = value + weights.weight(&step_edge(&point, &q, delta, axis));
                relax(&mut tentative, &mut heap, q, nv);
            }
        }
        settled.insert(point);
    }
    Err(FppError::domain("target is unreachable inside the search region"))
}

/// Shortest passage time from the origin of Z^`dim` to `H_n`, using paths in
/// the box `0 <= x_1 <= n`, `|x_j| <= box_radius` for the other axes.
pub fn point_to_hyperplane_time<W: WeightField>(
    weights: &W,
    dim: usize,
    n: Coord,
    box_radius: u32,
    budget_cap: usize,
) -> Result<f64> {
    if n < 1 {
        return Err(FppError::domain(format!("target hyperplane must satisfy n >= 1, got {n}")));
    }
    let origin = LatticePoint::origin(dim);
    dijkstra_to(
        weights,
        &origin,
        |q| (0..=n).contains(&q.coord(0)) && q.in_plane_radius(&origin) <= box_radius,
        |q| q.coord(0) == n,
        budget_cap,
    )
}

/// [`point_to_hyperplane_time`] with the radius doubled from `initial_radius`
/// until two consecutive values agree. Returns the value and the radius at
/// which it stabilized.
pub fn stabilized_point_to_hyperplane_time<W: WeightField>(
    weights: &W,
    dim: usize,
    n: Coord,
    initial_radius: u32,
    budget_cap: usize,
) -> Result<(f64, u32)> {
    const MAX_DOUBLINGS: usize = 12;
    let mut r = initial_radius.max(1);
    let mut prev = point_to_hyperplane_time(weights, dim, n, r, budget_cap)?;
    for _ in 0..MAX_DOUBLINGS {
        let next = point_to_hyperplane_time(weights, dim, n, 2 * r, budget_cap)?;
        if next == prev {
            return Ok((prev, r));
        }
        prev = next;
        r *= 2;
    }
    Err(FppError::domain(format!(
        "point-to-hyperplane time did not stabilize by radius {r}"
    )))
}

/// T(x, y) restricted to the axis-aligned bounding box of `{x, y}` widened by
/// `box_radius` on every axis.
pub fn point_to_point_time<W: WeightField>(
    weights: &W,
    x: &LatticePoint,
    y: &LatticePoint,
    box_radius: u32,
    budget_cap: usize,
) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(FppError::domain("endpoints have different dimensions"));
    }
    if x == y {
        return Err(FppError::domain("point-to-point time needs distinct endpoints"));
    }
    let r = box_radius as i64;
    let bounds: Vec<(i64, i64)> = x
        .coords()
        .iter()
        .zip(y.coords())
        .map(|(&a, &b)| ((a.min(b) as i64) - r, (a.max(b) as i64) + r))
        .collect();
    dijkstra_to(
        weights,
        x,
        |q| {
            q.coords()
                .iter()
                .zip(&bounds)
                .all(|(&c, &(lo, hi))| (lo..=hi).contains(&(c as i64)))
        },
        |q| q == y,
        budget_cap,
    )
}

/// `n` consecutive slab crossings on one realization: crossing `k` starts at
/// the exit vertex of crossing `k - 1` (the origin for `k = 0`).
pub fn greedy_concatenation<W: WeightField>(
    weights: &W,
    dim: usize,
    n: usize,
    opts: &SlabOptions,
) -> Result<Vec<PassageSample>> {
    if n == 0 {
        return Err(FppError::domain("greedy concatenation needs n >= 1"));
    }
    let mut start = LatticePoint::origin(dim);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let s = slab_crossing_time(weights, &start, HyperplaneIndex(k as Coord), opts)?;
        start = s.exit_vertex.clone();
        out.push(s);
    }
    Ok(out)
}
