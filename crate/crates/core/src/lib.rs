//! First-passage percolation on Z^d: exact slab crossing times on lazily
//! generated weight fields, the Eden exploration sampler, numerical
//! moment bounds and a Monte Carlo harness around them.

pub mod bounds;
pub mod cli;
pub mod eden;
pub mod error;
pub mod experiments;
pub mod lattice;
pub mod mix;
pub mod quad;
pub mod slab;
pub mod stats;
pub mod weights;

pub use error::{FppError, Result};
pub use lattice::{canonical_edge, hyperplane_index, neighbors, EdgeId, HyperplaneIndex, LatticePoint};
pub use slab::PassageSample;
pub use weights::{CouplingMap, Family, WeightField, WeightModel};
