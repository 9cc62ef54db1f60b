//! Cotangent Laplace–Beltrami operator and its eigenbasis.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, EigenOrder};
use crate::math;
use crate::mesh::{vertex_areas, TriangleMesh};

/// Square sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().expect("non-empty") += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseMatrix {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Entries of row `r` as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r)
            .find(|&(col, _)| col == c)
            .map_or(0.0, |(_, v)| v)
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate().take(self.n) {
            *out = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                d[(r, c)] = v;
            }
        }
        d
    }
}

/// Cotangent stiffness matrix with its lumped (diagonal) mass matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianPair {
    stiffness: SparseMatrix,
    mass: Vec<f64>,
}

impl LaplacianPair {
    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn n(&self) -> usize {
        self.mass.len()
    }
}

/// Positive semi-definite cotangent stiffness `L` (so that `L·𝟙 = 0`) and
/// barycentric lumped mass. Negative cotangent weights are kept.
pub fn build_laplacian(mesh: &TriangleMesh) -> LaplacianPair {
    let n = mesh.n_vertices();
    let pos = mesh.vertices();
    let mut triplets = Vec::with_capacity(12 * mesh.n_faces());
    for f in mesh.faces() {
        for corner in 0..3 {
            let k = f[corner];
            let i = f[(corner + 1) % 3];
            let j = f[(corner + 2) % 3];
            let e1 = math::sub(pos[i], pos[k]);
            let e2 = math::sub(pos[j], pos[k]);
            let cot = math::dot(e1, e2) / math::norm(math::cross(e1, e2));
            let w = 0.5 * cot;
            triplets.push((i, j, -w));
            triplets.push((j, i, -w));
            triplets.push((i, i, w));
            triplets.push((j, j, w));
        }
    }
    LaplacianPair {
        stiffness: SparseMatrix::from_triplets(n, triplets),
        mass: vertex_areas(mesh).areas().to_vec(),
    }
}

/// Mass-orthonormal eigenfunctions `Φ` (columns) of the generalized problem
/// `L φ = λ M φ`, ascending frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct LboBasis {
    phi: DMatrix<f64>,
    frequencies: Vec<f64>,
    mass: Vec<f64>,
}

impl LboBasis {
    pub fn new(phi: DMatrix<f64>, frequencies: Vec<f64>, mass: Vec<f64>) -> Result<Self> {
        if phi.ncols() != frequencies.len() || phi.nrows() != mass.len() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "phi {}x{}, {} frequencies, {} masses",
                phi.nrows(),
                phi.ncols(),
                frequencies.len(),
                mass.len()
            )));
        }
        Ok(LboBasis {
            phi,
            frequencies,
            mass,
        })
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn n_vertices(&self) -> usize {
        self.phi.nrows()
    }

    pub fn truncated(&self, k: usize) -> LboBasis {
        let k = k.min(self.len());
        LboBasis {
            phi: self.phi.columns(0, k).into_owned(),
            frequencies: self.frequencies[..k].to_vec(),
            mass: self.mass.clone(),
        }
    }

    /// `Φ · coeffs`.
    pub fn reconstruct(&self, coeffs: &DVector<f64>) -> Result<DVector<f64>> {
        if coeffs.len() != self.len() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{} coefficients for {} basis functions",
                coeffs.len(),
                self.len()
            )));
        }
        Ok(&self.phi * coeffs)
    }
}

/// How [`lbo_eigenbasis_with`] solves the eigenproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenMethod {
    /// Dense for `n <= DENSE_LBO_LIMIT`, shift-invert Lanczos otherwise.
    #[default]
    Auto,
    Dense,
    ShiftInvert,
}

pub const DENSE_LBO_LIMIT: usize = 2000;

pub fn lbo_eigenbasis(lap: &LaplacianPair, k: usize) -> Result<LboBasis> {
    lbo_eigenbasis_with(lap, k, EigenMethod::Auto)
}

pub fn lbo_eigenbasis_with(lap: &LaplacianPair, k: usize, method: EigenMethod) -> Result<LboBasis> {
    let n = lap.n();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(alloc::format!(
            "k = {k} for n = {n}"
        )));
    }
    let inv_sqrt_mass: Vec<f64> = lap.mass.iter().map(|m| 1.0 / math::sqrt(*m)).collect();
    let dense = match method {
        EigenMethod::Auto => n <= DENSE_LBO_LIMIT,
        EigenMethod::Dense => true,
        EigenMethod::ShiftInvert => false,
    };
    // eigenvectors of the symmetric M^{-1/2} L M^{-1/2}
    let (mut freqs, u) = if dense {
        let mut a = lap.stiffness.to_dense();
        for r in 0..n {
            for c in 0..n {
                a[(r, c)] *= inv_sqrt_mass[r] * inv_sqrt_mass[c];
            }
        }
        let (vals, vecs) = linalg::symmetric_eigen(linalg::symmetrized(&a), EigenOrder::Ascending);
        (
            vals.iter().take(k).copied().collect::<Vec<_>>(),
            vecs.columns(0, k).into_owned(),
        )
    } else {
        shift_invert_smallest(lap, &inv_sqrt_mass, k)?
    };
    let mut phi = u;
    for r in 0..n {
        for c in 0..k {
            phi[(r, c)] *= inv_sqrt_mass[r];
        }
    }
    linalg::canonicalize_signs(&mut phi);
    for f in &mut freqs {
        if *f < 0.0 {
            *f = 0.0;
        }
    }
    Ok(LboBasis {
        phi,
        frequencies: freqs,
        mass: lap.mass.clone(),
    })
}

fn shift_invert_smallest(
    lap: &LaplacianPair,
    inv_sqrt_mass: &[f64],
    k: usize,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = lap.n();
    let diag: Vec<f64> = (0..n)
        .map(|r| lap.stiffness.get(r, r) * inv_sqrt_mass[r] * inv_sqrt_mass[r])
        .collect();
    let mean_diag = diag.iter().sum::<f64>() / n as f64;
    let shift = 10.0 * mean_diag / n as f64;
    let mut tmp = vec![0.0; n];
    let mut scaled = vec![0.0; n];
    let mut apply_shifted = |x: &[f64], y: &mut [f64]| {
        for i in 0..n {
            scaled[i] = x[i] * inv_sqrt_mass[i];
        }
        lap.stiffness.mul_vec(&scaled, &mut tmp);
        for i in 0..n {
            y[i] = tmp[i] * inv_sqrt_mass[i] + shift * x[i];
        }
    };
    let precond: Vec<f64> = diag.iter().map(|d| 1.0 / (d + shift)).collect();
    let mut failed = false;
    let (theta, vecs) = linalg::lanczos_largest(n, k, 1e-10, 0x1b0, |x, y| {
        if !conjugate_gradient(&mut apply_shifted, &precond, x, y, 1e-12, 20 * n) {
            failed = true;
        }
    })?;
    if failed {
        log::warn!("conjugate gradient hit its iteration cap inside the LBO eigensolver");
    }
    let freqs = theta.iter().map(|t| 1.0 / t - shift).collect();
    Ok((freqs, vecs))
}

/// Jacobi-preconditioned CG for an SPD operator; returns false when the
/// iteration cap is reached before the relative residual drops below `tol`.
fn conjugate_gradient(
    apply: &mut impl FnMut(&[f64], &mut [f64]),
    precond: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> bool {
    let n = b.len();
    x.iter_mut().for_each(|v| *v = 0.0);
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(precond).map(|(a, p)| a * p).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let b_norm = math::sqrt(b.iter().map(|v| v * v).sum()).max(f64::MIN_POSITIVE);
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for _ in 0..max_iter {
        let r_norm = math::sqrt(r.iter().map(|v| v * v).sum());
        if r_norm <= tol * b_norm {
            return true;
        }
        apply(&p, &mut ap);
        let alpha = rz / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * precond[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    false
}

/// Mass-weighted coefficients `Φᵀ M f`.
pub fn project(basis: &LboBasis, f: &DVector<f64>) -> Result<DVector<f64>> {
    if f.len() != basis.n_vertices() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "function has {} values, basis has {} vertices",
            f.len(),
            basis.n_vertices()
        )));
    }
    let weighted = DVector::from_iterator(f.len(), f.iter().zip(&basis.mass).map(|(v, m)| v * m));
    Ok(basis.phi.transpose() * weighted)
}
