//! Points, nearest-neighbor edges and hyperplanes of Z^d.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{FppError, Result};

pub type Coord = i32;

/// A vertex of Z^d. Ordering is lexicographic on the coordinates.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticePoint(Vec<Coord>);

impl LatticePoint {
    pub fn new(coords: Vec<Coord>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(FppError::domain(format!(
                "dimension must be at least 2, got {}",
                coords.len()
            )));
        }
        Ok(LatticePoint(coords))
    }

    pub fn origin(dim: usize) -> Self {
        assert!(dim >= 2, "dimension must be at least 2");
        LatticePoint(vec![0; dim])
    }

    /// `origin + n e_1`.
    pub fn on_axis(dim: usize, n: Coord) -> Self {
        let mut p = Self::origin(dim);
        p.0[0] = n;
        p
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn coords(&self) -> &[Coord] {
        &self.0
    }

    #[inline]
    pub fn coord(&self, axis: usize) -> Coord {
        self.0[axis]
    }

    /// `self + delta * e_axis`.
    #[inline]
    pub fn shifted(&self, axis: usize, delta: Coord) -> Self {
        let mut c = self.0.clone();
        c[axis] = c[axis]
            .checked_add(delta)
            .expect("lattice coordinate overflow");
        LatticePoint(c)
    }

    pub fn l1_distance(&self, other: &Self) -> u64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (*a as i64 - *b as i64).unsigned_abs())
            .sum()
    }

    /// Largest |x_j| over the in-plane axes j >= 1 (0-based), relative to `center`.
    pub fn in_plane_radius(&self, center: &Self) -> u32 {
        self.0[1..]
            .iter()
            .zip(&center.0[1..])
            .map(|(a, b)| (*a as i64 - *b as i64).unsigned_abs() as u32)
            .max()
            .unwrap_or(0)
    }

    /// Words of the stable serialization: the dimension, then each coordinate
    /// reinterpreted as an unsigned 32-bit integer. The words are integers, so
    /// the digest built from them does not depend on platform byte order.
    pub fn key_words(&self) -> impl Iterator<Item = u64> + '_ {
        std::iter::once(self.0.len() as u64).chain(self.0.iter().map(|&c| c as u32 as u64))
    }

    /// Little-endian byte form of [`key_words`](Self::key_words): dimension as
    /// u32, then each coordinate as i32.
    pub fn stable_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 * (self.0.len() + 1));
        out.extend_from_slice(&(self.0.len() as u32).to_le_bytes());
        for c in &self.0 {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out
    }
}

impl fmt::Debug for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, c) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// The edge `{base, base + e_axis}`. Every nearest-neighbor edge has exactly
/// one representation: `base` is the endpoint with the smaller coordinate
/// along `axis`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct EdgeId {
    pub base: LatticePoint,
    pub axis: usize,
}

impl EdgeId {
    pub fn new(base: LatticePoint, axis: usize) -> Self {
        debug_assert!(axis < base.dim());
        EdgeId { base, axis }
    }

    pub fn endpoints(&self) -> (LatticePoint, LatticePoint) {
        (self.base.clone(), self.base.shifted(self.axis, 1))
    }

    pub fn key_words(&self) -> impl Iterator<Item = u64> + '_ {
        self.base.key_words().chain(std::iter::once(self.axis as u64))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct HyperplaneIndex(pub Coord);

/// `p ± e_k` for every axis, ordered (axis 0 +, axis 0 −, axis 1 +, …).
pub fn neighbors(p: &LatticePoint) -> Vec<LatticePoint> {
    (0..p.dim())
        .flat_map(|k| [p.shifted(k, 1), p.shifted(k, -1)])
        .collect()
}

pub fn canonical_edge(p: &LatticePoint, q: &LatticePoint) -> Result<EdgeId> {
    let not_adjacent = || FppError::NotAdjacent(p.to_string(), q.to_string());
    if p.dim() != q.dim() {
        return Err(not_adjacent());
    }
    let mut differing = p
        .coords()
        .iter()
        .zip(q.coords())
        .enumerate()
        .filter(|(_, (a, b))| a != b);
    let (axis, (a, b)) = differing.next().ok_or_else(not_adjacent)?;
    if differing.next().is_some() || (*a as i64 - *b as i64).abs() != 1 {
        return Err(not_adjacent());
    }
    let base = if a < b { p.clone() } else { q.clone() };
    Ok(EdgeId { base, axis })
}

#[inline]
pub fn hyperplane_index(p: &LatticePoint) -> HyperplaneIndex {
    HyperplaneIndex(p.coord(0))
}
