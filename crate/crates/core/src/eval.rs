//! Distortion curves and sampled-objective tables.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gdd::ObjectiveSampler;
use crate::geodesics::{GeodesicEngine, Solver};
use crate::math;
use crate::mesh::TriangleMesh;

/// Cumulative fraction of vertices whose normalised geodesic error is at
/// most each threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionCurve {
    pub thresholds: Vec<f64>,
    pub fractions: Vec<f64>,
}

impl DistortionCurve {
    /// Fraction at the first threshold `>= t`, if any.
    pub fn fraction_at(&self, t: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .position(|&x| x >= t)
            .map(|i| self.fractions[i])
    }
}

/// `0, 0.005, …, 0.25`.
pub fn default_thresholds() -> Vec<f64> {
    (0..=50).map(|i| i as f64 * 0.005).collect()
}

/// Geodesic distance on `mesh2` between `corr[v]` and `truth[v]` for every
/// source vertex, divided by `√area(mesh2)`.
pub fn distortion_errors(
    corr: &[usize],
    truth: &[usize],
    mesh2: &TriangleMesh,
    solver: Solver,
) -> Result<Vec<f64>> {
    if corr.len() != truth.len() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "correspondence has {} sources, truth has {}",
            corr.len(),
            truth.len()
        )));
    }
    let n2 = mesh2.n_vertices();
    if let Some(&bad) = corr.iter().chain(truth).find(|&&t| t >= n2) {
        return Err(Error::IndexOutOfRange { index: bad, n: n2 });
    }
    // one early-stopping propagation per distinct mapped vertex
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (v, (&c, &t)) in corr.iter().zip(truth).enumerate() {
        if c != t {
            groups.entry(c).or_default().push(v);
        }
    }
    let groups: Vec<(usize, Vec<usize>)> = groups.into_iter().collect();
    let engine = GeodesicEngine::new(mesh2, solver);
    let found = crate::par_map(groups.len(), |g| {
        let (src, ref verts) = groups[g];
        let targets: Vec<usize> = verts.iter().map(|&v| truth[v]).collect();
        engine.distances_to(src, &targets)
    });
    let scale = 1.0 / math::sqrt(mesh2.total_area());
    let mut errors = alloc::vec![0.0; corr.len()];
    for ((_, verts), dists) in groups.iter().zip(found) {
        for (&v, d) in verts.iter().zip(dists?) {
            errors[v] = d * scale;
        }
    }
    Ok(errors)
}

/// Empirical CDF of `errors` at each threshold.
pub fn curve_from_errors(errors: &[f64], thresholds: &[f64]) -> Result<DistortionCurve> {
    if errors.is_empty() {
        return Err(Error::Empty("error list"));
    }
    if thresholds.iter().any(|t| !(*t >= 0.0)) || thresholds.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument(
            "thresholds must be non-negative and ascending".into(),
        ));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let fractions = thresholds
        .iter()
        .map(|&t| sorted.partition_point(|&e| e <= t) as f64 / n)
        .collect();
    Ok(DistortionCurve {
        thresholds: thresholds.to_vec(),
        fractions,
    })
}

pub fn distortion_curve(
    corr: &[usize],
    truth: &[usize],
    mesh2: &TriangleMesh,
    thresholds: &[f64],
    solver: Solver,
) -> Result<DistortionCurve> {
    curve_from_errors(&distortion_errors(corr, truth, mesh2, solver)?, thresholds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveRow {
    pub name: String,
    pub rms: f64,
    pub raw_sq_sum: f64,
}

/// Scores every named map on one shared vertex sample; rows keep the input
/// order.
pub fn objective_table(
    corrs: &[(String, Vec<usize>)],
    mesh1: &TriangleMesh,
    mesh2: &TriangleMesh,
    sample_size: usize,
    seed: u64,
    solver: Solver,
) -> Result<Vec<ObjectiveRow>> {
    if corrs.is_empty() {
        return Err(Error::Empty("correspondence list"));
    }
    let n1 = mesh1.n_vertices();
    for (name, map) in corrs {
        if map.len() != n1 {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{name}: {} entries for {n1} vertices",
                map.len()
            )));
        }
    }
    let sampler = ObjectiveSampler::new(mesh1, sample_size, seed, solver)?;
    corrs
        .iter()
        .map(|(name, map)| {
            let v = sampler.evaluate(map, mesh2)?;
            Ok(ObjectiveRow {
                name: name.clone(),
                rms: v.rms,
                raw_sq_sum: v.raw_sq_sum,
            })
        })
        .collect()
}
