//! Geodesic distance bases and descriptors for non-rigid shape matching.
//!
//! The crate is `no_std` (with `alloc`). Enable the `std` feature for
//! `std::error::Error` impls, and `parallel` to spread independent geodesic
//! propagations and nearest-neighbour queries over a rayon pool.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod eval;
pub mod gdd;
pub mod geodesics;
pub mod kdtree;
pub mod lbo;
pub mod linalg;
pub mod lowrank;
pub mod matching;
mod math;
pub mod mesh;
pub mod shapes;

pub use error::{Error, Result};
pub use eval::DistortionCurve;
pub use gdd::GeodesicDistanceDescriptor;
pub use geodesics::{DistanceField, GeodesicEngine, SampleSet, Solver};
pub use lbo::{LaplacianPair, LboBasis};
pub use lowrank::{GeodesicBasis, LowRankFactorization};
pub use matching::{Alignment, Correspondence, LandmarkSet};
pub use mesh::{TriangleMesh, VertexWeights};

/// Maps `f` over `0..n`, in parallel when the `parallel` feature is on.
/// Output order always follows the index.
#[cfg(feature = "parallel")]
pub(crate) fn par_map<T: Send>(
    n: usize,
    f: impl Fn(usize) -> T + Sync + Send,
) -> alloc::vec::Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T>(n: usize, f: impl Fn(usize) -> T) -> alloc::vec::Vec<T> {
    (0..n).map(f).collect()
}
