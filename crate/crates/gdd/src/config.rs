//! Flat `key = value` pipeline configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gdd_core::Solver;

use crate::error::{GddError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    Landmarks(PathBuf),
    Correspondence(PathBuf),
    Descriptors(PathBuf, PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub mesh1: PathBuf,
    pub mesh2: PathBuf,
    pub samples: usize,
    pub k: usize,
    pub solver: Solver,
    pub seed_vertex: usize,
    pub init: Option<InitMode>,
    pub block: usize,
    pub penalty: Option<f64>,
    pub max_iters: usize,
    pub tol: f64,
    /// LBO refinement with this many eigenfunctions; 0 disables it.
    pub post_lbo: usize,
    pub truth: Option<PathBuf>,
    pub objective_samples: usize,
    pub seed: u64,
    pub output: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mesh1: PathBuf::new(),
            mesh2: PathBuf::new(),
            samples: 100,
            k: 50,
            solver: Solver::FastMarching,
            seed_vertex: 0,
            init: None,
            block: 20,
            penalty: None,
            max_iters: 100,
            tol: 1e-6,
            post_lbo: 0,
            truth: None,
            objective_samples: 1000,
            seed: 0,
            output: PathBuf::from("gdd-out"),
        }
    }
}

pub fn solver_name(s: Solver) -> &'static str {
    match s {
        Solver::FastMarching => "fast_marching",
        Solver::Dijkstra => "dijkstra",
    }
}

pub fn parse_solver(s: &str) -> std::result::Result<Solver, String> {
    match s.replace('-', "_").as_str() {
        "fast_marching" | "fmm" => Ok(Solver::FastMarching),
        "dijkstra" => Ok(Solver::Dijkstra),
        other => Err(format!(
            "unknown solver `{other}` (expected fast_marching or dijkstra)"
        )),
    }
}

const KEYS: &[&str] = &[
    "mesh1",
    "mesh2",
    "samples",
    "k",
    "solver",
    "seed_vertex",
    "init",
    "init_file",
    "init_file2",
    "block",
    "penalty",
    "max_iters",
    "tol",
    "post_lbo",
    "truth",
    "objective_samples",
    "seed",
    "output",
];

impl PipelineConfig {
    /// Flat, sorted `key = value` lines; unset optional keys are omitted.
    pub fn to_kv(&self) -> BTreeMap<String, String> {
        let mut kv = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            kv.insert(k.to_string(), v);
        };
        put("mesh1", self.mesh1.display().to_string());
        put("mesh2", self.mesh2.display().to_string());
        put("samples", self.samples.to_string());
        put("k", self.k.to_string());
        put("solver", solver_name(self.solver).into());
        put("seed_vertex", self.seed_vertex.to_string());
        match &self.init {
            None => put("init", "none".into()),
            Some(InitMode::Landmarks(p)) => {
                put("init", "landmarks".into());
                put("init_file", p.display().to_string());
            }
            Some(InitMode::Correspondence(p)) => {
                put("init", "corr".into());
                put("init_file", p.display().to_string());
            }
            Some(InitMode::Descriptors(a, b)) => {
                put("init", "descriptors".into());
                put("init_file", a.display().to_string());
                put("init_file2", b.display().to_string());
            }
        }
        put("block", self.block.to_string());
        if let Some(p) = self.penalty {
            put("penalty", p.to_string());
        }
        put("max_iters", self.max_iters.to_string());
        put("tol", self.tol.to_string());
        put("post_lbo", self.post_lbo.to_string());
        if let Some(t) = &self.truth {
            put("truth", t.display().to_string());
        }
        put("objective_samples", self.objective_samples.to_string());
        put("seed", self.seed.to_string());
        put("output", self.output.display().to_string());
        kv
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.to_kv() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Applies `key = value` pairs on top of `self`.
    pub fn apply(&mut self, kv: &BTreeMap<String, String>) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(k: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("`{k}`: invalid value `{v}`"))
        }
        for (k, v) in kv {
            let v = v.as_str();
            match k.as_str() {
                "mesh1" => self.mesh1 = v.into(),
                "mesh2" => self.mesh2 = v.into(),
                "samples" => self.samples = num(k, v)?,
                "k" => self.k = num(k, v)?,
                "solver" => self.solver = parse_solver(v)?,
                "seed_vertex" => self.seed_vertex = num(k, v)?,
                "block" => self.block = num(k, v)?,
                "penalty" => self.penalty = Some(num(k, v)?),
                "max_iters" => self.max_iters = num(k, v)?,
                "tol" => self.tol = num(k, v)?,
                "post_lbo" => self.post_lbo = num(k, v)?,
                "truth" => self.truth = Some(v.into()),
                "objective_samples" => self.objective_samples = num(k, v)?,
                "seed" => self.seed = num(k, v)?,
                "output" => self.output = v.into(),
                "init" | "init_file" | "init_file2" => {}
                other => {
                    return Err(format!(
                        "unknown config key `{other}` (known: {})",
                        KEYS.join(", ")
                    ))
                }
            }
        }
        if let Some(mode) = kv.get("init") {
            let file = |key: &str| {
                kv.get(key)
                    .map(PathBuf::from)
                    .ok_or_else(|| format!("init = {mode} needs `{key}`"))
            };
            self.init = match mode.as_str() {
                "none" => None,
                "landmarks" => Some(InitMode::Landmarks(file("init_file")?)),
                "corr" | "correspondence" => Some(InitMode::Correspondence(file("init_file")?)),
                "descriptors" => Some(InitMode::Descriptors(
                    file("init_file")?,
                    file("init_file2")?,
                )),
                other => return Err(format!("unknown init mode `{other}`")),
            };
        }
        Ok(())
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str) -> std::result::Result<BTreeMap<String, String>, (usize, String)> {
    let mut kv = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err((i + 1, format!("expected `key = value`, found `{line}`")));
        };
        if kv
            .insert(k.trim().to_string(), v.trim().to_string())
            .is_some()
        {
            return Err((i + 1, format!("key `{}` set twice", k.trim())));
        }
    }
    Ok(kv)
}

pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| GddError::io(path, e))?;
    let kv = parse_kv(&text).map_err(|(line, msg)| GddError::parse(path, line, msg))?;
    let mut cfg = PipelineConfig::default();
    cfg.apply(&kv)
        .map_err(|msg| GddError::parse(path, 0, msg))?;
    Ok(cfg)
}
