use alloc::string::String;

/// Errors produced by the geometry and matching routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("face {face}: vertex index {index} out of range (n = {n})")]
    FaceIndexOutOfRange { face: usize, index: usize, n: usize },
    #[error("face {face}: repeated vertex index {index}")]
    RepeatedFaceIndex { face: usize, index: usize },
    #[error("face {face}: degenerate triangle (area {area:e})")]
    DegenerateFace { face: usize, area: f64 },
    #[error("mesh is disconnected: {components} components, vertex {vertex} not reachable from vertex 0")]
    Disconnected { components: usize, vertex: usize },
    #[error("vertex index {index} out of range (n = {n})")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("vertex {vertex} unreachable from source {origin}")]
    Unreachable { origin: usize, vertex: usize },
    #[error("invalid sample count {p}: expected {min} <= p <= {n}")]
    InvalidSampleCount { p: usize, min: usize, n: usize },
    #[error("rank collapse: sampled submatrix has effective rank {effective_rank}")]
    RankCollapse { effective_rank: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix too large for dense decomposition: n = {n} > {max}")]
    TooLarge { n: usize, max: usize },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("eigensolver did not converge: {converged} of {requested} eigenpairs")]
    NoConvergence { converged: usize, requested: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for failures of a numerical procedure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankCollapse { .. } | Error::NoConvergence { .. } | Error::Unreachable { .. }
        )
    }
}

pub type Result<T> = core::result::Result<T, Error>;
