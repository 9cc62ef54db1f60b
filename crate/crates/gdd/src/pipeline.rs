//! End-to-end run with staged outputs and a manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use gdd_core::matching::IcpOptions;
use serde_json::{json, Map, Value};

use crate::cli::load_init;
use crate::config::{InitMode, PipelineConfig};
use crate::error::{GddError, Result};
use crate::matfile;
use crate::meshio::MeshFormat;
use crate::stages::{self, BasisParams, MatchParams};

pub const MANIFEST: &str = "manifest.json";

/// Files left in the output directory.
#[derive(Debug, Clone)]
pub struct PipelineOutputs {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

struct Staging {
    dir: PathBuf,
    files: Vec<String>,
    timings: Vec<(&'static str, f64)>,
}

impl Staging {
    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        matfile::write_text(&self.dir.join(name), text)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn stage<T>(
        &mut self,
        name: &'static str,
        f: impl FnOnce(&mut Self) -> Result<T>,
    ) -> Result<T> {
        let start = Instant::now();
        let out = f(self).map_err(|e| e.in_stage(name))?;
        self.timings.push((name, start.elapsed().as_secs_f64()));
        Ok(out)
    }
}

fn staging_dir(output: &Path) -> PathBuf {
    let name = output
        .file_name()
        .map_or_else(|| "gdd-out".into(), |n| n.to_string_lossy().into_owned());
    let parent = output
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    parent.join(format!(".{name}.staging-{}", std::process::id()))
}

/// Runs every stage into a scratch directory and moves the results into
/// `cfg.output` only when all stages succeed.
pub fn run_pipeline(cfg: &PipelineConfig, fmt: Option<MeshFormat>) -> Result<PipelineOutputs> {
    let dir = staging_dir(&cfg.output);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).map_err(|e| GddError::io(&dir, e))?;
    }
    std::fs::create_dir_all(&dir).map_err(|e| GddError::io(&dir, e))?;
    let mut st = Staging {
        dir: dir.clone(),
        files: Vec::new(),
        timings: Vec::new(),
    };
    let result = stages_into(cfg, fmt, &mut st);
    if let Err(e) = result {
        let _ = std::fs::remove_dir_all(&dir);
        return Err(e);
    }
    let out = &cfg.output;
    std::fs::create_dir_all(out).map_err(|e| GddError::io(out, e))?;
    for f in &st.files {
        let to = out.join(f);
        std::fs::rename(dir.join(f), &to).map_err(|e| GddError::io(&to, e))?;
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok(PipelineOutputs {
        dir: out.clone(),
        files: st.files,
    })
}

fn stages_into(cfg: &PipelineConfig, fmt: Option<MeshFormat>, st: &mut Staging) -> Result<()> {
    let init_mode = cfg.init.clone().ok_or_else(|| {
        GddError::Usage(
            "pipeline needs an initialisation (init = landmarks|corr|descriptors)".into(),
        )
    })?;
    let (m1, m2) = st.stage("load", |_| {
        Ok((
            stages::load(&cfg.mesh1, fmt)?,
            stages::load(&cfg.mesh2, fmt)?,
        ))
    })?;

    let params = BasisParams {
        samples: cfg.samples,
        k: None,
        solver: cfg.solver,
        seed_vertex: cfg.seed_vertex,
    };
    let (b1, b2) = st.stage("basis", |st| {
        let (b1, p1) = stages::basis(&m1, params)?;
        let (b2, p2) = stages::basis(&m2, params)?;
        st.write("basis1.csv", &matfile::format_basis(&b1, &p1))?;
        st.write("basis2.csv", &matfile::format_basis(&b2, &p2))?;
        Ok(((b1, p1), (b2, p2)))
    })?;

    let (x1, x2) = st.stage("gdd", |st| {
        let (x1, q1) = stages::gdd(&b1.0, &b1.1);
        let (x2, q2) = stages::gdd(&b2.0, &b2.1);
        st.write("gdd1.csv", &matfile::format_gdd(&x1, &q1))?;
        st.write("gdd2.csv", &matfile::format_gdd(&x2, &q2))?;
        Ok((x1, x2))
    })?;

    let lbo = if cfg.post_lbo > 0 {
        Some(st.stage("lbo", |st| {
            let (l1, p1) = stages::lbo(&m1, cfg.post_lbo)?;
            let (l2, p2) = stages::lbo(&m2, cfg.post_lbo)?;
            st.write("lbo1.csv", &matfile::format_lbo(&l1, &p1))?;
            st.write("lbo2.csv", &matfile::format_lbo(&l2, &p2))?;
            Ok((l1, l2))
        })?)
    } else {
        None
    };

    let outcome = st.stage("match", |st| {
        let init = load_init(&init_mode, m1.mesh.n_vertices(), m2.mesh.n_vertices())?;
        let mp = MatchParams {
            k: cfg.k,
            block: cfg.block,
            penalty: cfg.penalty,
            icp: IcpOptions {
                max_iters: cfg.max_iters,
                tol: cfg.tol,
            },
        };
        let out = stages::run_match(&x1, &x2, &init, mp, lbo.as_ref().map(|(a, b)| (a, b)))?;
        st.write(
            "correspondence.csv",
            &matfile::format_correspondence(out.correspondence()),
        )?;
        st.write(
            "match_report.json",
            &format!("{:#}\n", stages::report_json(&out)),
        )?;
        Ok(out)
    })?;

    st.stage("eval", |st| {
        let n2 = m2.mesh.n_vertices();
        let truth = match &cfg.truth {
            Some(t) => Some(matfile::read_correspondence(t, m1.mesh.n_vertices(), n2)?),
            None => None,
        };
        if let Some(t) = &truth {
            let curve = stages::curve(outcome.correspondence(), t, &m2.mesh, cfg.solver)?;
            st.write("curve.csv", &matfile::format_curve(&curve))?;
        }
        if cfg.objective_samples > 0 {
            let s = cfg.objective_samples.min(m1.mesh.n_vertices());
            if s < cfg.objective_samples {
                log::warn!("objective sample size reduced to {s}, the vertex count of mesh1");
            }
            let mut table = vec![("gdd".to_string(), outcome.correspondence().map().to_vec())];
            if let Some(t) = truth {
                table.push(("truth".to_string(), t.map().to_vec()));
            }
            let rows = stages::objective(&table, &m1.mesh, &m2.mesh, s, cfg.seed, cfg.solver)?;
            st.write("objective.csv", &matfile::format_objective(&rows))?;
        }
        Ok(())
    })?;

    let mut inputs = Map::new();
    inputs.insert(
        "mesh1".into(),
        json!({ "path": cfg.mesh1, "sha256": m1.sha256 }),
    );
    inputs.insert(
        "mesh2".into(),
        json!({ "path": cfg.mesh2, "sha256": m2.sha256 }),
    );
    let mut extra: Vec<(&str, &PathBuf)> = Vec::new();
    match &init_mode {
        InitMode::Landmarks(p) | InitMode::Correspondence(p) => extra.push(("init_file", p)),
        InitMode::Descriptors(a, b) => {
            extra.push(("init_file", a));
            extra.push(("init_file2", b));
        }
    }
    if let Some(t) = &cfg.truth {
        extra.push(("truth", t));
    }
    for (key, p) in extra {
        inputs.insert(
            key.into(),
            json!({ "path": p, "sha256": stages::sha256_file(p)? }),
        );
    }
    let stages_json: Vec<Value> = st
        .timings
        .iter()
        .map(|(n, s)| json!({ "stage": n, "wall_seconds": s }))
        .collect();
    let manifest = json!({
        "config": cfg.to_kv(),
        "inputs": inputs,
        "stages": stages_json,
        "outputs": st.files,
        "tool_version": env!("CARGO_PKG_VERSION"),
    });
    st.write(MANIFEST, &format!("{manifest:#}\n"))
}
