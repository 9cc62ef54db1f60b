//! The pipeline stages as plain functions. Subcommands and the pipeline
//! call the same code, so running the stages one by one reproduces the
//! pipeline's files byte for byte.

use std::path::Path;

use gdd_core::eval::{self, DistortionCurve, ObjectiveRow};
use gdd_core::gdd::build_gdd;
use gdd_core::lbo::{build_laplacian, lbo_eigenbasis, LboBasis};
use gdd_core::lowrank::{
    build_factorization_with, exact_basis, orthogonalize, FactorizationOptions,
};
use gdd_core::matching::{
    align_signatures, icp_match, init_from_correspondence, init_from_descriptors,
    init_from_landmarks, postprocess_lbo, IcpInit, IcpOptions, IcpResult,
};
use gdd_core::{
    geodesics, Correspondence, GeodesicBasis, GeodesicDistanceDescriptor, LandmarkSet, Solver,
    TriangleMesh,
};
use nalgebra::DMatrix;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::solver_name;
use crate::error::{GddError, Result};
use crate::matfile;
use crate::meshio::{self, MeshFormat};

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| GddError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// A loaded mesh together with the hash of its file.
pub struct LoadedMesh {
    pub mesh: TriangleMesh,
    pub sha256: String,
}

pub fn load(path: &Path, format: Option<MeshFormat>) -> Result<LoadedMesh> {
    let mesh = meshio::load_mesh(path, format)?;
    Ok(LoadedMesh {
        mesh,
        sha256: sha256_file(path)?,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct BasisParams {
    pub samples: usize,
    /// Truncation after orthogonalisation; `None` keeps `⌈p/2⌉`.
    pub k: Option<usize>,
    pub solver: Solver,
    pub seed_vertex: usize,
}

pub fn basis(mesh: &LoadedMesh, p: BasisParams) -> Result<(GeodesicBasis, Map<String, Value>)> {
    let opts = FactorizationOptions {
        seed_vertex: p.seed_vertex,
        solver: p.solver,
        ..FactorizationOptions::new(p.samples)
    };
    let full = orthogonalize(&build_factorization_with(&mesh.mesh, &opts)?);
    let k = p.k.unwrap_or(full.len());
    if k == 0 || k > full.len() {
        return Err(GddError::Usage(format!(
            "k = {k} but {} samples give at most {} basis vectors",
            p.samples,
            full.len()
        )));
    }
    let prov = provenance(&[
        ("mesh_sha256", json!(mesh.sha256)),
        ("method", json!("sampled")),
        ("samples", json!(p.samples)),
        ("k", json!(k)),
        ("solver", json!(solver_name(p.solver))),
        ("seed_vertex", json!(p.seed_vertex)),
    ]);
    Ok((full.truncated(k), prov))
}

/// Dense oracle basis from every distance row; desk-scale meshes only.
pub fn exact(
    mesh: &LoadedMesh,
    k: usize,
    solver: Solver,
) -> Result<(GeodesicBasis, Map<String, Value>)> {
    let d = geodesics::distance_matrix(&mesh.mesh, solver)?;
    let b = exact_basis(&d, k)?;
    let prov = provenance(&[
        ("mesh_sha256", json!(mesh.sha256)),
        ("method", json!("exact")),
        ("k", json!(k)),
        ("solver", json!(solver_name(solver))),
    ]);
    Ok((b, prov))
}

pub fn lbo(mesh: &LoadedMesh, k: usize) -> Result<(LboBasis, Map<String, Value>)> {
    let b = lbo_eigenbasis(&build_laplacian(&mesh.mesh), k)?;
    Ok((
        b,
        provenance(&[("mesh_sha256", json!(mesh.sha256)), ("k", json!(k))]),
    ))
}

pub fn gdd(
    basis: &GeodesicBasis,
    basis_header: &Map<String, Value>,
) -> (GeodesicDistanceDescriptor, Map<String, Value>) {
    let mut prov = Map::new();
    for key in ["mesh_sha256", "samples", "solver", "method"] {
        if let Some(v) = basis_header.get(key) {
            prov.insert(key.into(), v.clone());
        }
    }
    (build_gdd(basis), prov)
}

pub fn provenance(items: &[(&str, Value)]) -> Map<String, Value> {
    items
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

pub enum MatchInit {
    Landmarks(Vec<(usize, usize)>),
    Correspondence(Correspondence),
    Descriptors(DMatrix<f64>, DMatrix<f64>),
}

#[derive(Debug, Clone, Copy)]
pub struct MatchParams {
    pub k: usize,
    pub block: usize,
    pub penalty: Option<f64>,
    pub icp: IcpOptions,
}

pub struct MatchOutcome {
    pub icp: IcpResult,
    /// Present when LBO refinement ran.
    pub refined: Option<IcpResult>,
    pub shared_k: usize,
}

impl MatchOutcome {
    pub fn correspondence(&self) -> &Correspondence {
        self.refined
            .as_ref()
            .map_or(&self.icp.correspondence, |r| &r.correspondence)
    }
}

pub fn run_match(
    x1: &GeodesicDistanceDescriptor,
    x2: &GeodesicDistanceDescriptor,
    init: &MatchInit,
    params: MatchParams,
    lbo: Option<(&LboBasis, &LboBasis)>,
) -> Result<MatchOutcome> {
    let (a, b) = align_signatures(x1, x2, params.k)?;
    let (n1, n2) = (a.n_vertices(), b.n_vertices());
    let icp_init = match init {
        MatchInit::Landmarks(pairs) => {
            let set = LandmarkSet::new(pairs.clone(), n1, n2)?;
            let block = params.block.min(a.k());
            IcpInit::Alignment(init_from_landmarks(&a, &b, &set, block, params.penalty)?)
        }
        MatchInit::Correspondence(c) => IcpInit::Alignment(init_from_correspondence(c, &a, &b)?),
        MatchInit::Descriptors(d1, d2) => {
            IcpInit::Alignment(init_from_descriptors(d1, d2, &a, &b)?.alignment)
        }
    };
    let icp = icp_match(&a, &b, &icp_init, params.icp)?;
    let refined = match lbo {
        Some((p1, p2)) => Some(postprocess_lbo(&icp.correspondence, p1, p2, params.icp)?),
        None => None,
    };
    Ok(MatchOutcome {
        icp,
        refined,
        shared_k: a.k(),
    })
}

pub fn report_json(outcome: &MatchOutcome) -> Value {
    let one = |r: &IcpResult| {
        json!({
            "iterations": r.history.len(),
            "converged": r.converged,
            "history": r.history,
            "max_row_residual": r.max_row_residual,
            "rms_residual": r.rms_residual,
        })
    };
    json!({
        "shared_k": outcome.shared_k,
        "icp": one(&outcome.icp),
        "lbo_refinement": outcome.refined.as_ref().map(one),
    })
}

pub fn curve(
    corr: &Correspondence,
    truth: &Correspondence,
    mesh2: &TriangleMesh,
    solver: Solver,
) -> Result<DistortionCurve> {
    Ok(eval::distortion_curve(
        corr.map(),
        truth.map(),
        mesh2,
        &eval::default_thresholds(),
        solver,
    )?)
}

pub fn objective(
    named: &[(String, Vec<usize>)],
    mesh1: &TriangleMesh,
    mesh2: &TriangleMesh,
    samples: usize,
    seed: u64,
    solver: Solver,
) -> Result<Vec<ObjectiveRow>> {
    Ok(eval::objective_table(
        named, mesh1, mesh2, samples, seed, solver,
    )?)
}

pub fn read_landmarks(path: &Path) -> Result<Vec<(usize, usize)>> {
    matfile::read_pairs(path)
}

pub fn read_descriptors(path: &Path) -> Result<DMatrix<f64>> {
    Ok(matfile::read_matrix(path)?.1)
}
