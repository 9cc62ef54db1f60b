//! Low-rank factorization of the geodesic distance matrix and the geodesic
//! distance basis.
//!
//! A factorization `D ≈ S T Sᵀ` is built from `p` farthest-point-sampled
//! distance rows by a Nyström extension: with `B` the `p × n` sampled rows
//! and `M = B[:, samples]`, the `k` largest-magnitude eigenpairs `(U, Σ)` of
//! `M` give `S = Bᵀ U Σ⁻¹` and `T = Σ`. [`orthogonalize`] turns any such
//! factorization into an orthonormal basis `Q̃` with signed eigenvalues `Λ̃`
//! through a QR factorization of `S` and an eigendecomposition of `R T Rᵀ`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geodesics::{self, GeodesicEngine, Solver};
use crate::lbo::LboBasis;
use crate::linalg::{self, EigenOrder};
use crate::mesh::TriangleMesh;

/// Largest `n` accepted by [`exact_basis`].
pub const MAX_DENSE_SIZE: usize = 4000;

/// Eigenvalues of the sampled submatrix below this fraction of the largest
/// magnitude are discarded before the Nyström extension.
pub const PSEUDO_INVERSE_CUTOFF: f64 = 1e-10;

/// `D ≈ S T Sᵀ` with `S: n × k` and symmetric `T: k × k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactorization {
    s: DMatrix<f64>,
    t: DMatrix<f64>,
}

impl LowRankFactorization {
    pub fn new(s: DMatrix<f64>, t: DMatrix<f64>) -> Result<Self> {
        if t.nrows() != t.ncols() || s.ncols() != t.nrows() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "S is {}x{}, T is {}x{}",
                s.nrows(),
                s.ncols(),
                t.nrows(),
                t.ncols()
            )));
        }
        let scale = t.amax().max(1.0);
        let asym = linalg::max_asymmetry(&t);
        if asym > 1e-10 * scale {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(LowRankFactorization { s, t })
    }

    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn t(&self) -> &DMatrix<f64> {
        &self.t
    }

    pub fn rank(&self) -> usize {
        self.t.nrows()
    }

    /// Dense `S T Sᵀ`; desk-scale use only.
    pub fn to_dense(&self) -> DMatrix<f64> {
        &self.s * &self.t * self.s.transpose()
    }
}

/// Orthonormal basis `Q` (columns) with signed eigenvalues ordered by
/// descending magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicBasis {
    q: DMatrix<f64>,
    eigenvalues: DVector<f64>,
}

impl GeodesicBasis {
    pub fn new(q: DMatrix<f64>, eigenvalues: DVector<f64>) -> Result<Self> {
        if q.ncols() != eigenvalues.len() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{} basis columns but {} eigenvalues",
                q.ncols(),
                eigenvalues.len()
            )));
        }
        Ok(GeodesicBasis { q, eigenvalues })
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Number of basis vectors.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn n_vertices(&self) -> usize {
        self.q.nrows()
    }

    /// The leading `k` basis vectors.
    pub fn truncated(&self, k: usize) -> GeodesicBasis {
        let k = k.min(self.len());
        GeodesicBasis {
            q: self.q.columns(0, k).into_owned(),
            eigenvalues: self.eigenvalues.rows(0, k).into_owned(),
        }
    }

    /// `Σ_c Q[i,c] λ_c Q[j,c]`, bitwise symmetric in `(i, j)`.
    pub fn reconstruct_entry(&self, i: usize, j: usize) -> Result<f64> {
        let n = self.n_vertices();
        for idx in [i, j] {
            if idx >= n {
                return Err(Error::IndexOutOfRange { index: idx, n });
            }
        }
        Ok((0..self.len())
            .map(|c| self.eigenvalues[c] * (self.q[(i, c)] * self.q[(j, c)]))
            .sum())
    }

    /// Dense `Q Λ Qᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut scaled = self.q.clone();
        for (c, mut col) in scaled.column_iter_mut().enumerate() {
            col *= self.eigenvalues[c];
        }
        scaled * self.q.transpose()
    }
}

/// Knobs for [`build_factorization_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationOptions {
    pub samples: usize,
    /// Defaults to `⌈p / 2⌉`.
    pub rank: Option<usize>,
    pub seed_vertex: usize,
    pub solver: Solver,
}

impl FactorizationOptions {
    pub fn new(samples: usize) -> Self {
        FactorizationOptions {
            samples,
            rank: None,
            seed_vertex: 0,
            solver: Solver::FastMarching,
        }
    }
}

/// Minimal sample count accepted by [`build_factorization`].
pub const MIN_SAMPLES: usize = 4;

pub fn build_factorization(
    mesh: &TriangleMesh,
    p: usize,
    solver: Solver,
) -> Result<LowRankFactorization> {
    build_factorization_with(
        mesh,
        &FactorizationOptions {
            solver,
            ..FactorizationOptions::new(p)
        },
    )
}

pub fn build_factorization_with(
    mesh: &TriangleMesh,
    opts: &FactorizationOptions,
) -> Result<LowRankFactorization> {
    let n = mesh.n_vertices();
    let p = opts.samples;
    if p < MIN_SAMPLES || p > n {
        return Err(Error::InvalidSampleCount {
            p,
            min: MIN_SAMPLES,
            n,
        });
    }
    let engine = GeodesicEngine::new(mesh, opts.solver);
    let (samples, fields) = engine.farthest_point_sampling_with_fields(p, opts.seed_vertex)?;
    let mut rows = DMatrix::from_fn(p, n, |i, j| fields[i][j]);
    geodesics::symmetrize_sampled(&mut rows, samples.indices());
    let rank = opts.rank.unwrap_or(p.div_ceil(2));
    factorize_sampled_rows(&rows, samples.indices(), rank)
}

/// Nyström factorization from symmetrized sampled rows (`p × n`, row `i`
/// holding distances from `samples[i]`).
pub fn factorize_sampled_rows(
    rows: &DMatrix<f64>,
    samples: &[usize],
    rank: usize,
) -> Result<LowRankFactorization> {
    let p = samples.len();
    if rows.nrows() != p {
        return Err(Error::DimensionMismatch(alloc::format!(
            "{} rows for {} samples",
            rows.nrows(),
            p
        )));
    }
    if rank == 0 || rank > p {
        return Err(Error::InvalidArgument(alloc::format!(
            "rank {rank} for {p} samples"
        )));
    }
    let sub = linalg::symmetrized(&rows.select_columns(samples.iter()));
    let (sigma, u) = linalg::symmetric_eigen(sub, EigenOrder::Magnitude);
    let largest = sigma.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let effective = sigma
        .iter()
        .filter(|s| s.abs() >= PSEUDO_INVERSE_CUTOFF * largest)
        .count();
    if effective < 2 {
        return Err(Error::RankCollapse {
            effective_rank: effective,
        });
    }
    let k = rank.min(effective);
    if k < rank {
        log::warn!(
            "sampled submatrix has effective rank {effective}; factorization rank reduced to {k}"
        );
    }
    let mut u_scaled = u.columns(0, k).into_owned();
    for (c, mut col) in u_scaled.column_iter_mut().enumerate() {
        col /= sigma[c];
    }
    let s = rows.transpose() * u_scaled;
    let t = DMatrix::from_diagonal(&sigma.rows(0, k).into_owned());
    LowRankFactorization::new(s, t)
}

/// `S = 𝒬R`, `R T Rᵀ = V Λ̃ Vᵀ`, `Q̃ = 𝒬V`; so `Q̃ Λ̃ Q̃ᵀ = S T Sᵀ`.
pub fn orthogonalize(fact: &LowRankFactorization) -> GeodesicBasis {
    let qr = fact.s.clone().qr();
    let q_frame = qr.q();
    let r = qr.r();
    let core = linalg::symmetrized(&(&r * &fact.t * r.transpose()));
    let (vals, v) = linalg::symmetric_eigen(core, EigenOrder::Magnitude);
    let mut q = q_frame * v;
    linalg::canonicalize_signs(&mut q);
    GeodesicBasis {
        q,
        eigenvalues: vals,
    }
}

/// Leading `k` eigenpairs (by `|λ|`) of a dense symmetric matrix.
pub fn exact_basis(d: &DMatrix<f64>, k: usize) -> Result<GeodesicBasis> {
    let n = d.nrows();
    if d.ncols() != n {
        return Err(Error::DimensionMismatch(alloc::format!(
            "{}x{} matrix",
            n,
            d.ncols()
        )));
    }
    if n > MAX_DENSE_SIZE {
        return Err(Error::TooLarge {
            n,
            max: MAX_DENSE_SIZE,
        });
    }
    let asym = linalg::max_asymmetry(d);
    if asym > 1e-8 * d.amax().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(alloc::format!(
            "k = {k} for n = {n}"
        )));
    }
    let (vals, vecs) = linalg::symmetric_eigen(linalg::symmetrized(d), EigenOrder::Magnitude);
    let mut q = vecs.columns(0, k).into_owned();
    linalg::canonicalize_signs(&mut q);
    Ok(GeodesicBasis {
        q,
        eigenvalues: vals.rows(0, k).into_owned(),
    })
}

/// Ground-truth distance columns used to score truncated reconstructions.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    columns: Vec<usize>,
    values: DMatrix<f64>,
}

impl ProbeSet {
    /// `values[:, c]` holds the true distances from every vertex to `columns[c]`.
    pub fn new(columns: Vec<usize>, values: DMatrix<f64>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Empty("probe set"));
        }
        if values.ncols() != columns.len() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{} probe columns but {} value columns",
                columns.len(),
                values.ncols()
            )));
        }
        Ok(ProbeSet { columns, values })
    }

    /// Probes by direct geodesic propagation from each probe vertex.
    pub fn from_mesh(mesh: &TriangleMesh, columns: Vec<usize>, solver: Solver) -> Result<Self> {
        let rows = GeodesicEngine::new(mesh, solver).rows(&columns)?;
        ProbeSet::new(columns, rows.transpose())
    }

    /// Probes taken from a dense ground-truth matrix.
    pub fn from_matrix(d: &DMatrix<f64>, columns: Vec<usize>) -> Result<Self> {
        let values = d.select_columns(columns.iter());
        ProbeSet::new(columns, values)
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_entries(&self) -> usize {
        self.values.len()
    }
}

/// A basis whose truncations can be compared on a [`ProbeSet`].
#[derive(Debug, Clone, Copy)]
pub enum CurveBasis<'a> {
    Geodesic(&'a GeodesicBasis),
    Lbo(&'a LboBasis),
}

impl CurveBasis<'_> {
    fn len(&self) -> usize {
        match self {
            CurveBasis::Geodesic(b) => b.len(),
            CurveBasis::Lbo(b) => b.len(),
        }
    }
}

/// For each basis, the root-sum-square error over all probe entries of the
/// `k`-truncated reconstruction, for `k = 1..=len`.
///
/// A geodesic basis reconstructs column `j` as `Q_k Λ_k Q_kᵀ[:, j]`; an LBO
/// basis as the mass-weighted projection `Φ_k Φ_kᵀ M d_j`.
pub fn reconstruction_error_curve(
    bases: &[CurveBasis<'_>],
    probe: &ProbeSet,
) -> Result<Vec<Vec<f64>>> {
    let n = probe.values.nrows();
    let mut out = Vec::with_capacity(bases.len());
    for basis in bases {
        let len = basis.len();
        let mut sq = alloc::vec![0.0; len];
        let basis_n = match basis {
            CurveBasis::Geodesic(b) => b.n_vertices(),
            CurveBasis::Lbo(b) => b.n_vertices(),
        };
        if basis_n != n || probe.columns.iter().any(|&j| j >= n) {
            return Err(Error::DimensionMismatch(alloc::format!(
                "basis on {basis_n} vertices, probe on {n}"
            )));
        }
        for (pc, &j) in probe.columns.iter().enumerate() {
            let mut resid: Vec<f64> = probe.values.column(pc).iter().copied().collect();
            for c in 0..len {
                match basis {
                    CurveBasis::Geodesic(b) => {
                        let coef = b.eigenvalues[c] * b.q[(j, c)];
                        for (i, r) in resid.iter_mut().enumerate() {
                            *r -= b.q[(i, c)] * coef;
                        }
                    }
                    CurveBasis::Lbo(b) => {
                        let phi = b.phi().column(c);
                        let mass = b.mass();
                        let coef: f64 = (0..n)
                            .map(|i| phi[i] * mass[i] * probe.values[(i, pc)])
                            .sum();
                        for (i, r) in resid.iter_mut().enumerate() {
                            *r -= phi[i] * coef;
                        }
                    }
                }
                sq[c] += resid.iter().map(|r| r * r).sum::<f64>();
            }
        }
        out.push(sq.into_iter().map(crate::math::sqrt).collect());
    }
    Ok(out)
}
