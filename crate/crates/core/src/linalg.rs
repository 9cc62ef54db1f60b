//! Dense and matrix-free eigen helpers shared by the basis modules.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math;

/// Full symmetric eigendecomposition, columns reordered by `order`.
pub(crate) fn symmetric_eigen(m: DMatrix<f64>, order: EigenOrder) -> (DVector<f64>, DMatrix<f64>) {
    let eig = m.symmetric_eigen();
    reorder(&eig.eigenvalues, &eig.eigenvectors, order)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum EigenOrder {
    /// Descending `|λ|`.
    Magnitude,
    /// Ascending `λ`.
    Ascending,
}

pub(crate) fn reorder(
    values: &DVector<f64>,
    vectors: &DMatrix<f64>,
    order: EigenOrder,
) -> (DVector<f64>, DMatrix<f64>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    match order {
        EigenOrder::Magnitude => {
            idx.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)))
        }
        EigenOrder::Ascending => {
            idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)))
        }
    }
    let vals = DVector::from_iterator(idx.len(), idx.iter().map(|&i| values[i]));
    let vecs = vectors.select_columns(idx.iter());
    (vals, vecs)
}

/// Flips each column so that its largest-magnitude entry is positive (the
/// first one on ties).
pub(crate) fn canonicalize_signs(q: &mut DMatrix<f64>) {
    for mut col in q.column_iter_mut() {
        let mut best = 0;
        for i in 1..col.len() {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if !col.is_empty() && col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

pub(crate) fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in (j + 1)..m.nrows() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub(crate) fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Nearest orthogonal matrix in Frobenius norm (orthogonal polar factor).
pub fn polar_orthogonal(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.is_empty() {
        return m.clone();
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    u * v_t
}

/// Largest-eigenvalue pairs of a symmetric linear operator by Lanczos with
/// full reorthogonalization. Restarts with a larger Krylov space until all
/// requested Ritz pairs have relative residual below `tol`.
pub(crate) fn lanczos_largest(
    n: usize,
    k: usize,
    tol: f64,
    seed: u64,
    mut apply: impl FnMut(&[f64], &mut [f64]),
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(alloc::format!(
            "lanczos: k = {k}, n = {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut steps = (2 * k + 20).min(n);
    let mut converged;
    loop {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps + 1);
        let mut alpha = Vec::with_capacity(steps);
        let mut beta: Vec<f64> = Vec::with_capacity(steps);
        let norm0 = math::sqrt(start.iter().map(|x| x * x).sum());
        basis.push(start.iter().map(|x| x / norm0).collect());
        let mut w = vec![0.0; n];
        let mut last_beta = 0.0;
        for j in 0..steps {
            apply(&basis[j], &mut w);
            let a: f64 = w.iter().zip(&basis[j]).map(|(x, y)| x * y).sum();
            alpha.push(a);
            // two passes of classical Gram-Schmidt against the whole basis
            for _ in 0..2 {
                for b in &basis {
                    let c: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
                    for (x, y) in w.iter_mut().zip(b) {
                        *x -= c * y;
                    }
                }
            }
            let bnorm = math::sqrt(w.iter().map(|x| x * x).sum());
            last_beta = bnorm;
            if j + 1 == steps {
                break;
            }
            if bnorm < 1e-14 {
                // invariant subspace found: finish with what we have
                break;
            }
            beta.push(bnorm);
            basis.push(w.iter().map(|x| x / bnorm).collect());
        }
        let m = alpha.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let (theta, s) = symmetric_eigen(t, EigenOrder::Ascending);
        let want = k.min(m);
        let scale = theta
            .iter()
            .fold(0.0f64, |acc, x| acc.max(x.abs()))
            .max(f64::MIN_POSITIVE);
        converged = 0;
        for r in 0..want {
            let col = m - 1 - r;
            let resid = (last_beta * s[(m - 1, col)]).abs();
            if resid <= tol * theta[col].abs().max(scale * f64::EPSILON) {
                converged += 1;
            } else {
                break;
            }
        }
        let exhausted = m < steps || steps == n;
        if converged >= k || (exhausted && m >= k) {
            let mut values = Vec::with_capacity(k);
            let mut vecs = DMatrix::zeros(n, k);
            for r in 0..k {
                let col = m - 1 - r;
                values.push(theta[col]);
                for (j, b) in basis.iter().take(m).enumerate() {
                    let coef = s[(j, col)];
                    for i in 0..n {
                        vecs[(i, r)] += coef * b[i];
                    }
                }
            }
            return Ok((values, vecs));
        }
        if steps == n {
            break;
        }
        steps = (steps * 2).min(n);
    }
    Err(Error::NoConvergence {
        converged,
        requested: k,
    })
}
