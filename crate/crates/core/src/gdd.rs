//! Geodesic distance descriptors: per-vertex rows of `X = Q·√|Λ|` with a
//! ±1 column signature `J`, so that `D ≈ X diag(J) Xᵀ`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geodesics::{GeodesicEngine, Solver};
use crate::lowrank::GeodesicBasis;
use crate::math;
use crate::mesh::TriangleMesh;

/// Eigenvalues below this fraction of the largest magnitude are dropped.
pub const ZERO_EIGENVALUE_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicDistanceDescriptor {
    x: DMatrix<f64>,
    signature: Vec<i8>,
    eigenvalues: Vec<f64>,
}

impl GeodesicDistanceDescriptor {
    /// Checks that `signature` holds only ±1 and agrees with the eigenvalue
    /// signs and column count.
    pub fn new(x: DMatrix<f64>, signature: Vec<i8>, eigenvalues: Vec<f64>) -> Result<Self> {
        if x.ncols() != signature.len() || signature.len() != eigenvalues.len() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "X has {} columns, {} signs, {} eigenvalues",
                x.ncols(),
                signature.len(),
                eigenvalues.len()
            )));
        }
        for (c, (&s, &l)) in signature.iter().zip(&eigenvalues).enumerate() {
            if !(s == 1 || s == -1) || (l != 0.0 && (l > 0.0) != (s > 0)) {
                return Err(Error::InvalidArgument(alloc::format!(
                    "column {c}: sign {s} does not match eigenvalue {l}"
                )));
            }
        }
        Ok(GeodesicDistanceDescriptor {
            x,
            signature,
            eigenvalues,
        })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn signature(&self) -> &[i8] {
        &self.signature
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn k(&self) -> usize {
        self.signature.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.x.nrows()
    }

    pub fn row(&self, i: usize) -> Result<DescriptorRow<'_>> {
        self.check(i)?;
        Ok(DescriptorRow {
            gdd: self,
            index: i,
        })
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> GeodesicDistanceDescriptor {
        GeodesicDistanceDescriptor {
            x: self.x.select_columns(cols.iter()),
            signature: cols.iter().map(|&c| self.signature[c]).collect(),
            eigenvalues: cols.iter().map(|&c| self.eigenvalues[c]).collect(),
        }
    }

    pub fn truncated(&self, k: usize) -> GeodesicDistanceDescriptor {
        let cols: Vec<usize> = (0..k.min(self.k())).collect();
        self.select_columns(&cols)
    }

    /// Rows permuted so that old row `i` becomes row `perm[i]`.
    pub fn permuted_rows(&self, perm: &[usize]) -> Result<GeodesicDistanceDescriptor> {
        let n = self.n_vertices();
        if perm.len() != n {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{} entries for {n} rows",
                perm.len()
            )));
        }
        let mut x = DMatrix::zeros(n, self.k());
        let mut seen = alloc::vec![false; n];
        for (i, &p) in perm.iter().enumerate() {
            if p >= n || seen[p] {
                return Err(Error::InvalidArgument("not a permutation".into()));
            }
            seen[p] = true;
            x.set_row(p, &self.x.row(i));
        }
        Ok(GeodesicDistanceDescriptor { x, ..self.clone() })
    }

    /// `X·C`. The caller is responsible for `C` being block-orthogonal if
    /// the reconstruction is to be preserved.
    pub fn transformed(&self, c: &DMatrix<f64>) -> Result<GeodesicDistanceDescriptor> {
        if c.nrows() != self.k() || c.ncols() != self.k() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "C is {}x{}, k = {}",
                c.nrows(),
                c.ncols(),
                self.k()
            )));
        }
        Ok(GeodesicDistanceDescriptor {
            x: &self.x * c,
            ..self.clone()
        })
    }

    /// Dense `X diag(J) Xᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut xj = self.x.clone();
        for (c, mut col) in xj.column_iter_mut().enumerate() {
            col *= f64::from(self.signature[c]);
        }
        xj * self.x.transpose()
    }

    fn check(&self, i: usize) -> Result<()> {
        if i >= self.n_vertices() {
            return Err(Error::IndexOutOfRange {
                index: i,
                n: self.n_vertices(),
            });
        }
        Ok(())
    }
}

/// Borrowed view of one descriptor row.
#[derive(Debug, Clone, Copy)]
pub struct DescriptorRow<'a> {
    gdd: &'a GeodesicDistanceDescriptor,
    index: usize,
}

impl DescriptorRow<'_> {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn values(&self) -> Vec<f64> {
        self.gdd.x.row(self.index).iter().copied().collect()
    }

    pub fn signature(&self) -> &[i8] {
        &self.gdd.signature
    }
}

pub fn build_gdd(basis: &GeodesicBasis) -> GeodesicDistanceDescriptor {
    let lambda = basis.eigenvalues();
    let max = lambda.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    let keep: Vec<usize> = (0..basis.len())
        .filter(|&c| lambda[c] != 0.0 && lambda[c].abs() >= ZERO_EIGENVALUE_CUTOFF * max)
        .collect();
    if keep.len() < basis.len() {
        log::debug!("dropping {} zero eigenvalues", basis.len() - keep.len());
    }
    let mut x = basis.q().select_columns(keep.iter());
    for (j, mut col) in x.column_iter_mut().enumerate() {
        col *= math::sqrt(lambda[keep[j]].abs());
    }
    GeodesicDistanceDescriptor {
        x,
        signature: keep
            .iter()
            .map(|&c| if lambda[c] > 0.0 { 1 } else { -1 })
            .collect(),
        eigenvalues: keep.iter().map(|&c| lambda[c]).collect(),
    }
}

/// Euclidean distance between descriptor rows; the signature is ignored.
pub fn descriptor_distance(gdd: &GeodesicDistanceDescriptor, i: usize, j: usize) -> Result<f64> {
    gdd.check(i)?;
    gdd.check(j)?;
    let x = &gdd.x;
    Ok(math::sqrt(
        (0..gdd.k())
            .map(|c| (x[(i, c)] - x[(j, c)]) * (x[(i, c)] - x[(j, c)]))
            .sum(),
    ))
}

/// `Σ_c J_c X[i,c] X[j,c]`.
pub fn reconstruct_distance(gdd: &GeodesicDistanceDescriptor, i: usize, j: usize) -> Result<f64> {
    gdd.check(i)?;
    gdd.check(j)?;
    let x = &gdd.x;
    Ok((0..gdd.k())
        .map(|c| f64::from(gdd.signature[c]) * (x[(i, c)] * x[(j, c)]))
        .sum())
}

/// Sampled Gromov–Hausdorff-style discrepancy of a vertex map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledObjective {
    /// Root mean square over the `s²` sampled entries.
    pub rms: f64,
    /// Raw sum of squared differences.
    pub raw_sq_sum: f64,
}

/// Draws `sample_size` distinct vertices of `mesh` (sorted) from a seeded
/// ChaCha8 stream.
pub fn sample_vertices(n: usize, sample_size: usize, seed: u64) -> Result<Vec<usize>> {
    if sample_size == 0 || sample_size > n {
        return Err(Error::InvalidArgument(alloc::format!(
            "sample size {sample_size} for {n} vertices"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, sample_size).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// The sampled source-side block is shared by every map scored against the
/// same first mesh, so it is computed once.
#[derive(Debug, Clone)]
pub struct ObjectiveSampler {
    samples: Vec<usize>,
    block: DMatrix<f64>,
    solver: Solver,
}

impl ObjectiveSampler {
    pub fn new(
        mesh1: &TriangleMesh,
        sample_size: usize,
        seed: u64,
        solver: Solver,
    ) -> Result<Self> {
        let samples = sample_vertices(mesh1.n_vertices(), sample_size, seed)?;
        let block = sampled_block(mesh1, &samples, solver)?;
        Ok(ObjectiveSampler {
            samples,
            block,
            solver,
        })
    }

    pub fn samples(&self) -> &[usize] {
        &self.samples
    }

    /// Compares `D₁[s, t]` with `D₂[map(s), map(t)]` over sampled `s, t`.
    pub fn evaluate(&self, map: &[usize], mesh2: &TriangleMesh) -> Result<SampledObjective> {
        let n2 = mesh2.n_vertices();
        let mut images = Vec::with_capacity(self.samples.len());
        for &s in &self.samples {
            let t = *map.get(s).ok_or(Error::IndexOutOfRange {
                index: s,
                n: map.len(),
            })?;
            if t >= n2 {
                return Err(Error::IndexOutOfRange { index: t, n: n2 });
            }
            images.push(t);
        }
        let block2 = sampled_block(mesh2, &images, self.solver)?;
        let raw: f64 = self
            .block
            .iter()
            .zip(block2.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let s = self.samples.len() as f64;
        Ok(SampledObjective {
            rms: math::sqrt(raw / (s * s)),
            raw_sq_sum: raw,
        })
    }
}

/// Symmetrized `s×s` geodesic block among `points` (duplicates allowed).
fn sampled_block(mesh: &TriangleMesh, points: &[usize], solver: Solver) -> Result<DMatrix<f64>> {
    let engine = GeodesicEngine::new(mesh, solver);
    let mut unique: Vec<usize> = points.to_vec();
    unique.sort_unstable();
    unique.dedup();
    let rows = crate::par_map(unique.len(), |r| engine.distances_to(unique[r], &unique));
    let mut slot = BTreeMap::new();
    for (r, &u) in unique.iter().enumerate() {
        slot.insert(u, r);
    }
    let mut table = Vec::with_capacity(rows.len());
    for row in rows {
        table.push(row?);
    }
    let s = points.len();
    Ok(DMatrix::from_fn(s, s, |a, b| {
        let (ra, rb) = (slot[&points[a]], slot[&points[b]]);
        0.5 * (table[ra][rb] + table[rb][ra])
    }))
}

/// One-shot [`ObjectiveSampler`] evaluation.
pub fn gh_objective_sampled(
    map: &[usize],
    mesh1: &TriangleMesh,
    mesh2: &TriangleMesh,
    sample_size: usize,
    seed: u64,
    solver: Solver,
) -> Result<SampledObjective> {
    if map.len() != mesh1.n_vertices() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "map has {} entries, mesh has {} vertices",
            map.len(),
            mesh1.n_vertices()
        )));
    }
    ObjectiveSampler::new(mesh1, sample_size, seed, solver)?.evaluate(map, mesh2)
}
