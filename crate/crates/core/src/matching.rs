//! Descriptor-space matching: block-orthogonal Procrustes, ICP, the three
//! initialisations and LBO refinement.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gdd::GeodesicDistanceDescriptor;
use crate::kdtree::KdTree;
use crate::lbo::LboBasis;
use crate::linalg::polar_orthogonal;
use crate::math;

/// Tolerance used when validating block orthogonality.
pub const ORTHOGONALITY_TOL: f64 = 1e-8;

/// A vertex map from shape 1 into shape 2, not necessarily bijective.
#[derive(Debug, Clone, PartialEq)]
pub struct Correspondence {
    map: Vec<usize>,
    residuals: Option<Vec<f64>>,
}

impl Correspondence {
    /// Validates every target against `n2`.
    pub fn new(map: Vec<usize>, n2: usize) -> Result<Self> {
        if map.is_empty() {
            return Err(Error::Empty("correspondence"));
        }
        if let Some(&bad) = map.iter().find(|&&t| t >= n2) {
            return Err(Error::IndexOutOfRange { index: bad, n: n2 });
        }
        Ok(Correspondence {
            map,
            residuals: None,
        })
    }

    pub fn identity(n: usize) -> Self {
        Correspondence {
            map: (0..n).collect(),
            residuals: None,
        }
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    /// Descriptor-space residuals, present when produced by ICP.
    pub fn residuals(&self) -> Option<&[f64]> {
        self.residuals.as_deref()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Fraction of entries equal to `truth`.
    pub fn agreement(&self, truth: &[usize]) -> f64 {
        let same = self.map.iter().zip(truth).filter(|(a, b)| a == b).count();
        same as f64 / self.map.len().max(1) as f64
    }
}

/// A block-orthogonal `k×k` matrix `C` with the signature it respects.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    c: DMatrix<f64>,
    signature: Vec<i8>,
    estimated_block: usize,
}

impl Alignment {
    pub fn new(c: DMatrix<f64>, signature: Vec<i8>) -> Result<Self> {
        let k = signature.len();
        if c.shape() != (k, k) {
            return Err(Error::DimensionMismatch(alloc::format!(
                "C is {}x{}, signature has {k} entries",
                c.nrows(),
                c.ncols()
            )));
        }
        let a = Alignment {
            c,
            signature,
            estimated_block: k,
        };
        let dev = a.orthogonality_defect();
        if dev > ORTHOGONALITY_TOL {
            return Err(Error::InvalidArgument(alloc::format!(
                "C is not block-orthogonal (defect {dev:e})"
            )));
        }
        Ok(a)
    }

    pub fn identity(signature: Vec<i8>) -> Self {
        let k = signature.len();
        Alignment {
            c: DMatrix::identity(k, k),
            signature,
            estimated_block: k,
        }
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn signature(&self) -> &[i8] {
        &self.signature
    }

    pub fn k(&self) -> usize {
        self.signature.len()
    }

    /// Leading columns that were actually estimated; the rest is identity.
    pub fn estimated_block(&self) -> usize {
        self.estimated_block
    }

    /// `max(|CᵀC − I|, |cross-signature entries|)`.
    pub fn orthogonality_defect(&self) -> f64 {
        let k = self.k();
        let gram = self.c.transpose() * &self.c - DMatrix::identity(k, k);
        let mut worst = gram.amax();
        for a in 0..k {
            for b in 0..k {
                if self.signature[a] != self.signature[b] {
                    worst = worst.max(self.c[(a, b)].abs());
                }
            }
        }
        worst
    }

    /// Whether `other` shares this alignment's signature.
    pub fn compatible_with(&self, signature: &[i8]) -> bool {
        self.signature == signature
    }
}

/// Corresponding vertex pairs `(in shape 1, in shape 2)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LandmarkSet {
    pairs: Vec<(usize, usize)>,
}

impl LandmarkSet {
    pub fn new(pairs: Vec<(usize, usize)>, n1: usize, n2: usize) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Empty("landmark set"));
        }
        for (i, &(a, b)) in pairs.iter().enumerate() {
            if a >= n1 {
                return Err(Error::IndexOutOfRange { index: a, n: n1 });
            }
            if b >= n2 {
                return Err(Error::IndexOutOfRange { index: b, n: n2 });
            }
            if pairs[..i].contains(&(a, b)) {
                return Err(Error::InvalidArgument(alloc::format!(
                    "duplicate landmark pair ({a}, {b})"
                )));
            }
        }
        Ok(LandmarkSet { pairs })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Truncates both descriptors to at most `k` columns and then to the shared
/// per-sign counts, pairing the `r`-th positive (negative) column of one with
/// the `r`-th positive (negative) column of the other. Columns follow the
/// first descriptor's order.
pub fn align_signatures(
    x1: &GeodesicDistanceDescriptor,
    x2: &GeodesicDistanceDescriptor,
    k: usize,
) -> Result<(GeodesicDistanceDescriptor, GeodesicDistanceDescriptor)> {
    let t1 = x1.truncated(k);
    let t2 = x2.truncated(k);
    let split = |s: &[i8]| -> (Vec<usize>, Vec<usize>) { (0..s.len()).partition(|&c| s[c] > 0) };
    let (pos1, neg1) = split(t1.signature());
    let (pos2, neg2) = split(t2.signature());
    let np = pos1.len().min(pos2.len());
    let nn = neg1.len().min(neg2.len());
    let mut cols1 = Vec::with_capacity(np + nn);
    let mut cols2 = Vec::with_capacity(np + nn);
    let (mut rp, mut rn) = (0, 0);
    for c in 0..t1.k() {
        if t1.signature()[c] > 0 && rp < np {
            cols1.push(c);
            cols2.push(pos2[rp]);
            rp += 1;
        } else if t1.signature()[c] < 0 && rn < nn {
            cols1.push(c);
            cols2.push(neg2[rn]);
            rn += 1;
        }
    }
    if cols1.is_empty() {
        return Err(Error::DimensionMismatch(
            "descriptors share no columns".into(),
        ));
    }
    if cols1.len() < t1.k() || cols2.len() < t2.k() {
        log::warn!(
            "signature mismatch: truncating to {} shared columns ({} positive, {} negative)",
            cols1.len(),
            np,
            nn
        );
    }
    Ok((t1.select_columns(&cols1), t2.select_columns(&cols2)))
}

fn sign_blocks(signature: &[i8]) -> [Vec<usize>; 2] {
    let (pos, neg) = (0..signature.len()).partition(|&c| signature[c] > 0);
    [pos, neg]
}

/// Block-wise polar factor of a `k×k` matrix; cross-signature entries of the
/// input are ignored.
fn block_polar(m: &DMatrix<f64>, signature: &[i8]) -> DMatrix<f64> {
    let k = signature.len();
    let mut c = DMatrix::zeros(k, k);
    for block in sign_blocks(signature) {
        if block.is_empty() {
            continue;
        }
        let sub = m.select_rows(block.iter()).select_columns(block.iter());
        let p = polar_orthogonal(&sub);
        for (r, &br) in block.iter().enumerate() {
            for (s, &bs) in block.iter().enumerate() {
                c[(br, bs)] = p[(r, s)];
            }
        }
    }
    c
}

fn check_signature(a: &DMatrix<f64>, b: &DMatrix<f64>, signature: &[i8]) -> Result<()> {
    if a.ncols() != signature.len() || b.ncols() != signature.len() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "A has {} columns, B has {}, signature has {}",
            a.ncols(),
            b.ncols(),
            signature.len()
        )));
    }
    if signature.iter().any(|&s| s != 1 && s != -1) {
        return Err(Error::InvalidArgument(
            "signature entries must be ±1".into(),
        ));
    }
    Ok(())
}

/// Block-orthogonal `C` minimising `‖A C − B‖_F`.
pub fn procrustes(a: &DMatrix<f64>, b: &DMatrix<f64>, signature: &[i8]) -> Result<Alignment> {
    check_signature(a, b, signature)?;
    if a.nrows() != b.nrows() || a.nrows() == 0 {
        return Err(Error::DimensionMismatch(alloc::format!(
            "A has {} rows, B has {}",
            a.nrows(),
            b.nrows()
        )));
    }
    let g = a.transpose() * b;
    Ok(Alignment {
        c: block_polar(&g, signature),
        signature: signature.to_vec(),
        estimated_block: signature.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpOptions {
    pub max_iters: usize,
    /// Stop once the relative drop of the mean squared residual is at most this.
    pub tol: f64,
}

impl Default for IcpOptions {
    fn default() -> Self {
        IcpOptions {
            max_iters: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub enum IcpInit {
    Alignment(Alignment),
    Correspondence(Correspondence),
}

#[derive(Debug, Clone)]
pub struct IcpResult {
    pub correspondence: Correspondence,
    pub alignment: Alignment,
    /// Mean squared residual after each completed iteration.
    pub history: Vec<f64>,
    pub converged: bool,
    /// Largest row residual, the `(2,∞)` norm of `P X₁ C − X₂`.
    pub max_row_residual: f64,
    pub rms_residual: f64,
}

/// ICP over descriptor rows. Both descriptors must share the same
/// signature; see [`align_signatures`].
pub fn icp_match(
    x1: &GeodesicDistanceDescriptor,
    x2: &GeodesicDistanceDescriptor,
    init: &IcpInit,
    opts: IcpOptions,
) -> Result<IcpResult> {
    if x1.signature() != x2.signature() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "signatures differ ({} vs {} columns); align them first",
            x1.k(),
            x2.k()
        )));
    }
    icp_rows(x1.x(), x2.x(), x1.signature(), init, opts)
}

fn row_major(m: &DMatrix<f64>, cols: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * cols);
    for i in 0..m.nrows() {
        out.extend((0..cols).map(|c| m[(i, c)]));
    }
    out
}

struct Target<'a> {
    b: &'a DMatrix<f64>,
    flat: Vec<f64>,
    k: usize,
}

impl Target<'_> {
    fn row(&self, j: usize) -> &[f64] {
        &self.flat[j * self.k..(j + 1) * self.k]
    }

    fn gathered(&self, map: &[usize]) -> DMatrix<f64> {
        self.b.select_rows(map.iter())
    }
}

fn mean_sq_residual(y: &[f64], target: &Target<'_>, map: &[usize]) -> f64 {
    let k = target.k;
    let total: f64 = map
        .iter()
        .enumerate()
        .map(|(i, &j)| math::sq_dist(&y[i * k..(i + 1) * k], target.row(j)))
        .sum();
    total / map.len() as f64
}

fn icp_rows(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    signature: &[i8],
    init: &IcpInit,
    opts: IcpOptions,
) -> Result<IcpResult> {
    check_signature(a, b, signature)?;
    let k = signature.len();
    let n1 = a.nrows();
    if n1 == 0 || b.nrows() == 0 || k == 0 {
        return Err(Error::Empty("descriptor rows"));
    }
    let target = Target {
        b,
        flat: row_major(b, k),
        k,
    };
    let tree = KdTree::new(b);
    let nearest_all = |y: &[f64], tree: &KdTree, dim: usize| -> Vec<(usize, f64)> {
        crate::par_map(n1, |i| {
            tree.nearest(&y[i * dim..(i + 1) * dim])
                .expect("non-empty target")
        })
    };

    // initial map
    let mut map: Vec<usize> = match init {
        IcpInit::Correspondence(corr) => {
            if corr.len() != n1 {
                return Err(Error::DimensionMismatch(alloc::format!(
                    "correspondence has {} entries for {n1} rows",
                    corr.len()
                )));
            }
            if let Some(&bad) = corr.map().iter().find(|&&t| t >= b.nrows()) {
                return Err(Error::IndexOutOfRange {
                    index: bad,
                    n: b.nrows(),
                });
            }
            corr.map().to_vec()
        }
        IcpInit::Alignment(al) => {
            if al.signature() != signature {
                return Err(Error::DimensionMismatch(
                    "alignment signature differs from the descriptors".into(),
                ));
            }
            let block = al.estimated_block().clamp(1, k);
            let y = a * al.c();
            if block < k {
                let sub = b.columns(0, block).into_owned();
                let sub_tree = KdTree::new(&sub);
                nearest_all(&row_major(&y, block), &sub_tree, block)
                    .into_iter()
                    .map(|(j, _)| j)
                    .collect()
            } else {
                nearest_all(&row_major(&y, k), &tree, k)
                    .into_iter()
                    .map(|(j, _)| j)
                    .collect()
            }
        }
    };

    let mut c = procrustes(a, &target.gathered(&map), signature)?.c;
    let mut y = row_major(&(a * &c), k);
    let mut current = mean_sq_residual(&y, &target, &map);
    let mut history = vec![current];
    let mut converged = current == 0.0;
    let mut iter = 1;
    while !converged && iter < opts.max_iters {
        iter += 1;
        // assignment step: exact nearest neighbours, keeping the previous
        // match unless the new one is at least as close
        let found = nearest_all(&y, &tree, k);
        let mut sum = 0.0;
        for (i, (j, d)) in found.into_iter().enumerate() {
            let old = math::sq_dist(&y[i * k..(i + 1) * k], target.row(map[i]));
            if d <= old {
                map[i] = j;
                sum += d;
            } else {
                sum += old;
            }
        }
        let after_nn = sum / n1 as f64;
        // alignment step, rejected if rounding makes it worse
        let c_new = procrustes(a, &target.gathered(&map), signature)?.c;
        let y_new = row_major(&(a * &c_new), k);
        let after_procrustes = mean_sq_residual(&y_new, &target, &map);
        let next = if after_procrustes <= after_nn {
            c = c_new;
            y = y_new;
            after_procrustes
        } else {
            after_nn
        };
        history.push(next);
        converged = current - next <= opts.tol * current;
        current = next;
    }

    let residuals: Vec<f64> = (0..n1)
        .map(|i| math::sqrt(math::sq_dist(&y[i * k..(i + 1) * k], target.row(map[i]))))
        .collect();
    let max_row_residual = residuals.iter().fold(0.0f64, |m, r| m.max(*r));
    let rms_residual = math::sqrt(residuals.iter().map(|r| r * r).sum::<f64>() / n1 as f64);
    Ok(IcpResult {
        correspondence: Correspondence {
            map,
            residuals: Some(residuals),
        },
        alignment: Alignment {
            c,
            signature: signature.to_vec(),
            estimated_block: k,
        },
        history,
        converged,
        max_row_residual,
        rms_residual,
    })
}

/// Procrustes over all matched row pairs.
pub fn init_from_correspondence(
    corr: &Correspondence,
    x1: &GeodesicDistanceDescriptor,
    x2: &GeodesicDistanceDescriptor,
) -> Result<Alignment> {
    if corr.len() != x1.n_vertices() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "correspondence has {} entries, shape has {} vertices",
            corr.len(),
            x1.n_vertices()
        )));
    }
    if let Some(&bad) = corr.map().iter().find(|&&t| t >= x2.n_vertices()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            n: x2.n_vertices(),
        });
    }
    if x1.signature() != x2.signature() {
        return Err(Error::DimensionMismatch(
            "signatures differ; align them first".into(),
        ));
    }
    procrustes(
        x1.x(),
        &x2.x().select_rows(corr.map().iter()),
        x1.signature(),
    )
}

/// Result of [`init_from_descriptors`].
#[derive(Debug, Clone)]
pub struct DescriptorInit {
    pub alignment: Alignment,
    /// Fewer descriptor functions than columns: the least-squares problem
    /// was solved in the least-norm sense.
    pub underdetermined: bool,
}

/// Solves `F₁ᵀW₁ C ≈ F₂ᵀW₂` with `F = Qᵀ·desc`, then projects to the nearest
/// block-orthogonal matrix. Since `X = Q W`, `FᵀW = descᵀ X`.
pub fn init_from_descriptors(
    desc1: &DMatrix<f64>,
    desc2: &DMatrix<f64>,
    x1: &GeodesicDistanceDescriptor,
    x2: &GeodesicDistanceDescriptor,
) -> Result<DescriptorInit> {
    if x1.signature() != x2.signature() {
        return Err(Error::DimensionMismatch(
            "signatures differ; align them first".into(),
        ));
    }
    if desc1.nrows() != x1.n_vertices()
        || desc2.nrows() != x2.n_vertices()
        || desc1.ncols() != desc2.ncols()
    {
        return Err(Error::DimensionMismatch(alloc::format!(
            "descriptors {}x{} and {}x{} for shapes of {} and {} vertices",
            desc1.nrows(),
            desc1.ncols(),
            desc2.nrows(),
            desc2.ncols(),
            x1.n_vertices(),
            x2.n_vertices()
        )));
    }
    let d = desc1.ncols();
    if d == 0 {
        return Err(Error::Empty("descriptor functions"));
    }
    let k = x1.k();
    let underdetermined = d < k;
    if underdetermined {
        log::warn!("{d} descriptor functions for {k} columns: using the least-norm solution");
    }
    let a = desc1.transpose() * x1.x();
    let b = desc2.transpose() * x2.x();
    let svd = a.svd(true, true);
    let cutoff = 1e-12 * svd.singular_values.max();
    let pinv = svd
        .pseudo_inverse(cutoff)
        .map_err(|e| Error::InvalidArgument(e.into()))?;
    let c_ls = pinv * b;
    Ok(DescriptorInit {
        alignment: Alignment {
            c: block_polar(&c_ls, x1.signature()),
            signature: x1.signature().to_vec(),
            estimated_block: k,
        },
        underdetermined,
    })
}

/// `0.1 ×` mean squared landmark row norm.
fn default_penalty(a: &DMatrix<f64>) -> f64 {
    0.1 * a.row_iter().map(|r| r.norm_squared()).sum::<f64>() / a.nrows() as f64
}

/// Estimates the leading `block×block` part of `C` from landmark rows,
/// penalising off-diagonal entries, and embeds it into a `k×k` identity.
///
/// Over orthogonal blocks the penalised objective equals, up to a constant,
/// `−2 tr(CᵀG) − penalty·Σ C_aa²` with `G = X̂₁ᵀX̂₂`; it is minimised by
/// majorisation steps `C ← polar(G + penalty·diag(C))`, each of which cannot
/// increase it. `penalty = None` selects `0.1 ×` the mean squared norm of the
/// landmark rows of `X̂₁`.
pub fn init_from_landmarks(
    x1: &GeodesicDistanceDescriptor,
    x2: &GeodesicDistanceDescriptor,
    landmarks: &LandmarkSet,
    block: usize,
    penalty: Option<f64>,
) -> Result<Alignment> {
    if x1.signature() != x2.signature() {
        return Err(Error::DimensionMismatch(
            "signatures differ; align them first".into(),
        ));
    }
    let k = x1.k();
    if block == 0 || block > k {
        return Err(Error::InvalidArgument(alloc::format!(
            "block {block} exceeds shared k = {k}"
        )));
    }
    for &(p, q) in landmarks.pairs() {
        if p >= x1.n_vertices() {
            return Err(Error::IndexOutOfRange {
                index: p,
                n: x1.n_vertices(),
            });
        }
        if q >= x2.n_vertices() {
            return Err(Error::IndexOutOfRange {
                index: q,
                n: x2.n_vertices(),
            });
        }
    }
    let rows1: Vec<usize> = landmarks.pairs().iter().map(|p| p.0).collect();
    let rows2: Vec<usize> = landmarks.pairs().iter().map(|p| p.1).collect();
    let a = x1
        .x()
        .select_rows(rows1.iter())
        .columns(0, block)
        .into_owned();
    let b = x2
        .x()
        .select_rows(rows2.iter())
        .columns(0, block)
        .into_owned();
    let signature = &x1.signature()[..block];
    let mu = penalty.unwrap_or_else(|| default_penalty(&a));
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::InvalidArgument(alloc::format!(
            "penalty must be finite and non-negative, got {mu}"
        )));
    }
    let mut g = a.transpose() * b;
    for r in 0..block {
        for s in 0..block {
            if signature[r] != signature[s] {
                g[(r, s)] = 0.0;
            }
        }
    }
    let score = |c: &DMatrix<f64>| 2.0 * c.dot(&g) + mu * c.diagonal().norm_squared();
    let from_polar = block_polar(&g, signature);
    let from_signs =
        DMatrix::from_diagonal(&g.diagonal().map(|v| if v < 0.0 { -1.0 } else { 1.0 }));
    let mut c = if score(&from_signs) > score(&from_polar) {
        from_signs
    } else {
        from_polar
    };
    if mu > 0.0 {
        let mut best = score(&c);
        for _ in 0..2000 {
            let mut m = g.clone();
            for r in 0..block {
                m[(r, r)] += mu * c[(r, r)];
            }
            let next = block_polar(&m, signature);
            let s = score(&next);
            if s < best {
                break;
            }
            let moved = (&next - &c).norm();
            c = next;
            let gain = s - best;
            best = s;
            if moved <= 1e-13 || gain <= 1e-15 * best.abs() {
                break;
            }
        }
    }
    let mut full = DMatrix::identity(k, k);
    full.view_mut((0, 0), (block, block)).copy_from(&c);
    Ok(Alignment {
        c: full,
        signature: x1.signature().to_vec(),
        estimated_block: block,
    })
}

/// ICP on rows of the LBO eigenfunctions (all signs positive), started from
/// `corr`.
pub fn postprocess_lbo(
    corr: &Correspondence,
    phi1: &LboBasis,
    phi2: &LboBasis,
    opts: IcpOptions,
) -> Result<IcpResult> {
    let k = phi1.len().min(phi2.len());
    if k == 0 {
        return Err(Error::Empty("LBO basis"));
    }
    let a = phi1.phi().columns(0, k).into_owned();
    let b = phi2.phi().columns(0, k).into_owned();
    icp_rows(
        &a,
        &b,
        &vec![1; k],
        &IcpInit::Correspondence(corr.clone()),
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_block_orthogonal(signature: &[i8], rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let k = signature.len();
        let m = DMatrix::from_fn(k, k, |_, _| rng.random::<f64>() - 0.5);
        block_polar(&m, signature)
    }

    #[test]
    fn identity_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = DMatrix::from_fn(20, 4, |_, _| rng.random::<f64>());
        let al = procrustes(&a, &a, &[1, -1, 1, -1]).unwrap();
        assert!((al.c() - DMatrix::identity(4, 4)).amax() < 1e-10);
    }

    #[test]
    fn recovers_block_orthogonal_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sig = [1, 1, -1, 1, -1, -1];
        let c0 = random_block_orthogonal(&sig, &mut rng);
        let a = DMatrix::from_fn(30, 6, |_, _| rng.random::<f64>() - 0.5);
        let al = procrustes(&a, &(&a * &c0), &sig).unwrap();
        assert!((al.c() - c0).amax() < 1e-8);
        assert!(al.orthogonality_defect() < 1e-10);
    }

    #[test]
    fn one_dimensional_reflection() {
        let a = DMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
        let b = DMatrix::from_column_slice(2, 1, &[-1.0, -2.0]);
        let al = procrustes(&a, &b, &[1]).unwrap();
        assert!((al.c()[(0, 0)] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn procrustes_rejects_mismatch() {
        let a = DMatrix::zeros(3, 2);
        assert!(procrustes(&a, &DMatrix::zeros(4, 2), &[1, 1]).is_err());
        assert!(procrustes(&a, &DMatrix::zeros(3, 2), &[1]).is_err());
        assert!(procrustes(&a, &DMatrix::zeros(3, 2), &[1, 0]).is_err());
    }

    fn toy_descriptor(n: usize, sig: &[i8], seed: u64) -> GeodesicDistanceDescriptor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = sig.len();
        // decaying column scales keep the problem well conditioned
        let x = DMatrix::from_fn(n, k, |_, c| (rng.random::<f64>() - 0.5) / (1.0 + c as f64));
        let eig = (0..k)
            .map(|c| f64::from(sig[c]) * x.column(c).norm_squared())
            .collect();
        GeodesicDistanceDescriptor::new(x, sig.to_vec(), eig).unwrap()
    }

    #[test]
    fn icp_fixed_point_on_identical_descriptors() {
        let x = toy_descriptor(80, &[1, -1, 1, 1], 3);
        let r = icp_match(
            &x,
            &x,
            &IcpInit::Alignment(Alignment::identity(x.signature().to_vec())),
            IcpOptions::default(),
        )
        .unwrap();
        assert_eq!(
            r.correspondence.map(),
            (0..80).collect::<Vec<_>>().as_slice()
        );
        assert!(r.max_row_residual < 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn icp_recovers_permutation_from_true_correspondence() {
        let sig = [1, -1, 1, -1, 1];
        let x = toy_descriptor(120, &sig, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut perm: Vec<usize> = (0..120).collect();
        for i in (1..120).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let c0 = random_block_orthogonal(&sig, &mut rng);
        let x2 = x.permuted_rows(&perm).unwrap().transformed(&c0).unwrap();
        let corr = Correspondence::new(perm.clone(), 120).unwrap();
        let r = icp_match(
            &x,
            &x2,
            &IcpInit::Correspondence(corr),
            IcpOptions::default(),
        )
        .unwrap();
        assert_eq!(r.correspondence.map(), perm.as_slice());
        assert!((r.alignment.c() - c0).amax() < 1e-8);
        for w in r.history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn signature_alignment_pairs_by_rank() {
        let x1 = toy_descriptor(10, &[1, -1, 1, 1, -1], 6);
        let x2 = toy_descriptor(10, &[1, 1, -1, -1, -1], 7);
        let (a, b) = align_signatures(&x1, &x2, 5).unwrap();
        assert_eq!(a.signature(), &[1, -1, 1, -1]);
        assert_eq!(b.signature(), a.signature());
        assert_eq!(a.x().column(2), x1.x().column(2));
        assert_eq!(b.x().column(1), x2.x().column(2));
        assert_eq!(b.x().column(2), x2.x().column(1));
        assert_eq!(b.x().column(3), x2.x().column(3));
    }

    #[test]
    fn landmarks_zero_penalty_is_procrustes() {
        let sig = [1, -1, 1, 1, -1, 1];
        let x = toy_descriptor(40, &sig, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c0 = random_block_orthogonal(&sig, &mut rng);
        let noise = DMatrix::from_fn(40, 6, |_, _| 0.01 * (rng.random::<f64>() - 0.5));
        let x2 = GeodesicDistanceDescriptor::new(
            x.x() * &c0 + noise,
            sig.to_vec(),
            x.eigenvalues().to_vec(),
        )
        .unwrap();
        let all = LandmarkSet::new((0..40).map(|i| (i, i)).collect(), 40, 40).unwrap();
        let got = init_from_landmarks(&x, &x2, &all, 4, Some(0.0)).unwrap();
        let want = procrustes(
            &x.x().columns(0, 4).into_owned(),
            &x2.x().columns(0, 4).into_owned(),
            &sig[..4],
        )
        .unwrap();
        assert!((got.c().view((0, 0), (4, 4)) - want.c()).amax() < 1e-8);
        assert_eq!(got.c()[(5, 5)], 1.0);
        assert_eq!(got.estimated_block(), 4);
        assert!(init_from_landmarks(&x, &x2, &all, 7, None).is_err());
    }

    #[test]
    fn huge_penalty_gives_signed_diagonal() {
        let sig = [1, -1, 1, 1, -1, 1];
        let x = toy_descriptor(40, &sig, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c0 = random_block_orthogonal(&sig, &mut rng);
        let x2 = x.transformed(&c0).unwrap();
        let lm = LandmarkSet::new((0..5).map(|i| (i, i)).collect(), 40, 40).unwrap();
        let al = init_from_landmarks(&x, &x2, &lm, 6, Some(1e6)).unwrap();
        for r in 0..6 {
            for s in 0..6 {
                if r == s {
                    assert!((al.c()[(r, s)].abs() - 1.0).abs() < 1e-3);
                } else {
                    assert!(al.c()[(r, s)].abs() <= 1e-3);
                }
            }
        }
    }

    #[test]
    fn descriptor_init_identity_and_degenerate() {
        let sig = [1, -1, 1, 1];
        let x = toy_descriptor(30, &sig, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let desc = DMatrix::from_fn(30, 8, |_, _| rng.random::<f64>());
        let init = init_from_descriptors(&desc, &desc, &x, &x).unwrap();
        assert!(!init.underdetermined);
        assert!((init.alignment.c() - DMatrix::identity(4, 4)).amax() < 1e-6);
        let constant = DMatrix::from_element(30, 1, 1.0);
        let degenerate = init_from_descriptors(&constant, &constant, &x, &x).unwrap();
        assert!(degenerate.underdetermined);
        assert!(degenerate.alignment.orthogonality_defect() < 1e-10);
    }

    #[test]
    fn containers_validate() {
        assert!(Correspondence::new(vec![0, 3], 3).is_err());
        assert!(Correspondence::new(vec![], 3).is_err());
        assert!(LandmarkSet::new(vec![], 3, 3).is_err());
        assert!(LandmarkSet::new(vec![(0, 1), (0, 1)], 3, 3).is_err());
        assert!(LandmarkSet::new(vec![(0, 3)], 3, 3).is_err());
        let mut c = DMatrix::identity(2, 2);
        c[(0, 1)] = 1e-3;
        assert!(Alignment::new(c, vec![1, 1]).is_err());
        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(Alignment::new(swap.clone(), vec![1, -1]).is_err());
        assert!(Alignment::new(swap, vec![1, 1]).is_ok());
    }
}
