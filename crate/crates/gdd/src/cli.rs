//! Command-line front end.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gdd_core::geodesics::{symmetrize_sampled, GeodesicEngine};
use gdd_core::lowrank::{reconstruction_error_curve, CurveBasis, ProbeSet};
use gdd_core::matching::IcpOptions;
use gdd_core::Solver;
use serde_json::json;

use crate::config::{parse_solver, solver_name, InitMode, PipelineConfig};
use crate::error::{GddError, Result, EXIT_OK, EXIT_USAGE};
use crate::matfile::{self, AnyBasis};
use crate::meshio::MeshFormat;
use crate::pipeline;
use crate::stages::{self, BasisParams, MatchInit, MatchParams};

#[derive(Debug, Parser)]
#[command(
    name = "gdd",
    version,
    about = "Geodesic distance bases, descriptors and shape matching"
)]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "GDD_THREADS")]
    pub threads: Option<usize>,
    /// Mesh format when it cannot be told from the extension.
    #[arg(long, global = true, value_parser = parse_format)]
    pub mesh_format: Option<MeshFormat>,
    /// Log more (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_format(s: &str) -> std::result::Result<MeshFormat, String> {
    s.parse()
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Geodesic distance rows from given or farthest-point-sampled sources.
    Geodesics(GeodesicsArgs),
    /// Approximate geodesic distance basis from sampled rows.
    Basis(BasisArgs),
    /// Laplace–Beltrami eigenbasis.
    Lbo(LboArgs),
    /// Descriptor matrix from a basis file.
    Gdd(GddArgs),
    /// Match two descriptor files.
    Match(MatchArgs),
    /// Distortion curves and sampled objective values.
    Eval(EvalArgs),
    /// Reconstruction error against truncation size for one or more bases.
    ReconCurve(ReconArgs),
    /// basis → gdd → match → eval in one go.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct GeodesicsArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long, default_value = "fast_marching", value_parser = parse_solver)]
    pub solver: Solver,
    /// Comma-separated source vertices.
    #[arg(
        long,
        value_delimiter = ',',
        conflicts_with = "fps",
        required_unless_present = "fps"
    )]
    pub sources: Vec<usize>,
    /// Use this many farthest-point samples as sources.
    #[arg(long)]
    pub fps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed_vertex: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BasisArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    /// Basis size (default: half the samples, rounded up).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value = "fast_marching", value_parser = parse_solver)]
    pub solver: Solver,
    #[arg(long, default_value_t = 0)]
    pub seed_vertex: usize,
    /// Dense eigendecomposition of the full distance matrix instead.
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LboArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub k: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GddArgs {
    #[arg(long)]
    pub basis: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[arg(long)]
    pub gdd1: PathBuf,
    #[arg(long)]
    pub gdd2: PathBuf,
    /// `landmarks <file>`, `corr <file>` or `descriptors <file1> <file2>`.
    #[arg(long, num_args = 2..=3, value_names = ["MODE", "FILE"], required = true)]
    pub init: Vec<String>,
    #[arg(long, default_value_t = 50)]
    pub k: usize,
    #[arg(long, default_value_t = 20)]
    pub block: usize,
    /// Off-diagonal penalty for landmark initialisation.
    #[arg(long)]
    pub penalty: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Refine with ICP on two LBO basis files.
    #[arg(long, num_args = 2, value_names = ["LBO1", "LBO2"])]
    pub post_lbo: Option<Vec<PathBuf>>,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON summary of residuals and iteration history.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Source mesh; needed for --objective.
    #[arg(long)]
    pub mesh1: Option<PathBuf>,
    #[arg(long)]
    pub mesh2: PathBuf,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Correspondence files, optionally as `name=path`.
    #[arg(long, required = true, num_args = 1..)]
    pub corr: Vec<String>,
    /// One curve file per --corr, in the same order.
    #[arg(long, num_args = 1..)]
    pub curve_out: Vec<PathBuf>,
    #[arg(long)]
    pub objective: bool,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Objective table destination (default: stdout).
    #[arg(long)]
    pub objective_out: Option<PathBuf>,
    #[arg(long, default_value = "fast_marching", value_parser = parse_solver)]
    pub solver: Solver,
}

#[derive(Debug, Args)]
pub struct ReconArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    /// Basis or LBO files.
    #[arg(long, required = true, num_args = 1..)]
    pub basis: Vec<PathBuf>,
    /// Distance columns computed as ground truth.
    #[arg(long, default_value_t = 20)]
    pub probe_columns: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "fast_marching", value_parser = parse_solver)]
    pub solver: Solver,
    /// Destination (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Flat `key = value` file; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub mesh1: Option<PathBuf>,
    #[arg(long)]
    pub mesh2: Option<PathBuf>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_parser = parse_solver)]
    pub solver: Option<Solver>,
    #[arg(long)]
    pub seed_vertex: Option<usize>,
    #[arg(long, num_args = 2..=3, value_names = ["MODE", "FILE"])]
    pub init: Option<Vec<String>>,
    #[arg(long)]
    pub block: Option<usize>,
    #[arg(long)]
    pub penalty: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// LBO refinement with this many eigenfunctions (0 = off).
    #[arg(long)]
    pub post_lbo: Option<usize>,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub objective_samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn parse_init(words: &[String]) -> Result<InitMode> {
    match words {
        [m, f] if m == "landmarks" => Ok(InitMode::Landmarks(f.into())),
        [m, f] if m == "corr" || m == "correspondence" => Ok(InitMode::Correspondence(f.into())),
        [m, a, b] if m == "descriptors" => Ok(InitMode::Descriptors(a.into(), b.into())),
        _ => Err(GddError::Usage(format!(
            "--init expects `landmarks <file>`, `corr <file>` or `descriptors <file1> <file2>`, got `{}`",
            words.join(" ")
        ))),
    }
}

/// Parses arguments and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let fmt = cli.mesh_format;
    match &cli.command {
        Command::Geodesics(a) => geodesics(a, fmt),
        Command::Basis(a) => {
            let mesh = stages::load(&a.mesh, fmt)?;
            let (basis, prov) = if a.exact {
                let k =
                    a.k.ok_or_else(|| GddError::Usage("--exact needs --k".into()))?;
                stages::exact(&mesh, k, a.solver)?
            } else {
                let p = BasisParams {
                    samples: a.samples,
                    k: a.k,
                    solver: a.solver,
                    seed_vertex: a.seed_vertex,
                };
                stages::basis(&mesh, p)?
            };
            matfile::write_text(&a.out, &matfile::format_basis(&basis, &prov))
        }
        Command::Lbo(a) => {
            let mesh = stages::load(&a.mesh, fmt)?;
            let (basis, prov) = stages::lbo(&mesh, a.k)?;
            matfile::write_text(&a.out, &matfile::format_lbo(&basis, &prov))
        }
        Command::Gdd(a) => {
            let (header, _) = matfile::read_matrix(&a.basis)?;
            let basis = matfile::read_basis(&a.basis)?;
            let prov = header.as_object().cloned().unwrap_or_default();
            let (g, prov) = stages::gdd(&basis, &prov);
            matfile::write_text(&a.out, &matfile::format_gdd(&g, &prov))
        }
        Command::Match(a) => match_cmd(a),
        Command::Eval(a) => eval_cmd(a, fmt),
        Command::ReconCurve(a) => recon(a, fmt),
        Command::Pipeline(a) => {
            let cfg = pipeline_config(a)?;
            pipeline::run_pipeline(&cfg, fmt).map(|_| ())
        }
    }
}

fn geodesics(a: &GeodesicsArgs, fmt: Option<MeshFormat>) -> Result<()> {
    let mesh = stages::load(&a.mesh, fmt)?;
    let engine = GeodesicEngine::new(&mesh.mesh, a.solver);
    let sources: Vec<usize> = match a.fps {
        Some(p) => engine
            .farthest_point_sampling(p, a.seed_vertex)?
            .indices()
            .to_vec(),
        None => a.sources.clone(),
    };
    let mut rows = engine.rows(&sources)?;
    symmetrize_sampled(&mut rows, &sources);
    let header = json!({
        "kind": "geodesics",
        "mesh_sha256": mesh.sha256,
        "solver": solver_name(a.solver),
        "sources": sources,
    });
    matfile::write_text(&a.out, &matfile::format_matrix(&header, &rows))
}

fn match_cmd(a: &MatchArgs) -> Result<()> {
    let x1 = matfile::read_gdd(&a.gdd1)?;
    let x2 = matfile::read_gdd(&a.gdd2)?;
    let init = load_init(&parse_init(&a.init)?, x1.n_vertices(), x2.n_vertices())?;
    let lbo = match &a.post_lbo {
        Some(files) => Some((matfile::read_lbo(&files[0])?, matfile::read_lbo(&files[1])?)),
        None => None,
    };
    let params = MatchParams {
        k: a.k,
        block: a.block,
        penalty: a.penalty,
        icp: IcpOptions {
            max_iters: a.max_iters,
            tol: a.tol,
        },
    };
    let out = stages::run_match(&x1, &x2, &init, params, lbo.as_ref().map(|(p, q)| (p, q)))?;
    matfile::write_text(
        &a.out,
        &matfile::format_correspondence(out.correspondence()),
    )?;
    if let Some(r) = &a.report {
        matfile::write_text(r, &format!("{:#}\n", stages::report_json(&out)))?;
    }
    Ok(())
}

pub(crate) fn load_init(mode: &InitMode, n1: usize, n2: usize) -> Result<MatchInit> {
    Ok(match mode {
        InitMode::Landmarks(p) => MatchInit::Landmarks(stages::read_landmarks(p)?),
        InitMode::Correspondence(p) => {
            MatchInit::Correspondence(matfile::read_correspondence(p, n1, n2)?)
        }
        InitMode::Descriptors(p, q) => {
            MatchInit::Descriptors(stages::read_descriptors(p)?, stages::read_descriptors(q)?)
        }
    })
}

fn named(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((name, path)) if !name.is_empty() => (name.to_string(), PathBuf::from(path)),
        _ => {
            let p = PathBuf::from(spec);
            let name = p
                .file_stem()
                .map_or_else(|| spec.to_string(), |s| s.to_string_lossy().into_owned());
            (name, p)
        }
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => matfile::write_text(p, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| GddError::io("<stdout>", e)),
    }
}

fn eval_cmd(a: &EvalArgs, fmt: Option<MeshFormat>) -> Result<()> {
    if !a.curve_out.is_empty() && a.curve_out.len() != a.corr.len() {
        return Err(GddError::Usage(format!(
            "{} --curve-out files for {} --corr files",
            a.curve_out.len(),
            a.corr.len()
        )));
    }
    if !a.curve_out.is_empty() && a.truth.is_none() {
        return Err(GddError::Usage("--curve-out needs --truth".into()));
    }
    if !a.objective && a.curve_out.is_empty() {
        return Err(GddError::Usage(
            "nothing to do: pass --curve-out and/or --objective".into(),
        ));
    }
    let mesh2 = stages::load(&a.mesh2, fmt)?;
    let mesh1 = match &a.mesh1 {
        Some(p) => Some(stages::load(p, fmt)?),
        None => None,
    };
    let n2 = mesh2.mesh.n_vertices();
    let n1 = mesh1.as_ref().map(|m| m.mesh.n_vertices());
    let mut corrs = Vec::new();
    for spec in &a.corr {
        let (name, path) = named(spec);
        let n = match n1 {
            Some(n) => n,
            None => matfile::read_pairs(&path)?.len(),
        };
        corrs.push((name, matfile::read_correspondence(&path, n, n2)?));
    }
    if let Some(t) = &a.truth {
        let truth = matfile::read_correspondence(t, corrs[0].1.len(), n2)?;
        for ((_, c), out) in corrs.iter().zip(&a.curve_out) {
            let curve = stages::curve(c, &truth, &mesh2.mesh, a.solver)?;
            matfile::write_text(out, &matfile::format_curve(&curve))?;
        }
    }
    if a.objective {
        let Some(m1) = &mesh1 else {
            return Err(GddError::Usage("--objective needs --mesh1".into()));
        };
        let table: Vec<(String, Vec<usize>)> = corrs
            .iter()
            .map(|(n, c)| (n.clone(), c.map().to_vec()))
            .collect();
        let rows = stages::objective(&table, &m1.mesh, &mesh2.mesh, a.samples, a.seed, a.solver)?;
        write_or_print(
            a.objective_out.as_deref(),
            &matfile::format_objective(&rows),
        )?;
    }
    Ok(())
}

fn recon(a: &ReconArgs, fmt: Option<MeshFormat>) -> Result<()> {
    let mesh = stages::load(&a.mesh, fmt)?;
    let n = mesh.mesh.n_vertices();
    let columns = gdd_core::gdd::sample_vertices(n, a.probe_columns.min(n), a.seed)?;
    let probe = ProbeSet::from_mesh(&mesh.mesh, columns, a.solver)?;
    let loaded: Vec<(String, AnyBasis)> = a
        .basis
        .iter()
        .map(|p| Ok((named(&p.to_string_lossy()).0, matfile::read_any_basis(p)?)))
        .collect::<Result<_>>()?;
    let views: Vec<CurveBasis<'_>> = loaded
        .iter()
        .map(|(_, b)| match b {
            AnyBasis::Geodesic(g) => CurveBasis::Geodesic(g),
            AnyBasis::Lbo(l) => CurveBasis::Lbo(l),
        })
        .collect();
    let curves = reconstruction_error_curve(&views, &probe)?;
    let mut text = String::from("k");
    for (name, _) in &loaded {
        text.push(',');
        text.push_str(name);
    }
    text.push('\n');
    let longest = curves.iter().map(Vec::len).max().unwrap_or(0);
    for k in 0..longest {
        text.push_str(&(k + 1).to_string());
        for c in &curves {
            text.push(',');
            if let Some(v) = c.get(k) {
                text.push_str(&v.to_string());
            }
        }
        text.push('\n');
    }
    write_or_print(a.out.as_deref(), &text)
}

fn pipeline_config(a: &PipelineArgs) -> Result<PipelineConfig> {
    let mut cfg = match &a.config {
        Some(p) => crate::config::load_config(p)?,
        None => PipelineConfig::default(),
    };
    macro_rules! over {
        ($($field:ident),*) => { $( if let Some(v) = &a.$field { cfg.$field = v.clone(); } )* };
    }
    over!(
        mesh1,
        mesh2,
        samples,
        k,
        solver,
        seed_vertex,
        block,
        max_iters,
        tol,
        post_lbo,
        objective_samples,
        seed,
        output
    );
    if let Some(p) = a.penalty {
        cfg.penalty = Some(p);
    }
    if let Some(t) = &a.truth {
        cfg.truth = Some(t.clone());
    }
    if let Some(words) = &a.init {
        cfg.init = Some(parse_init(words)?);
    }
    if cfg.mesh1.as_os_str().is_empty() || cfg.mesh2.as_os_str().is_empty() {
        return Err(GddError::Usage(
            "pipeline needs mesh1 and mesh2 (flags or config)".into(),
        ));
    }
    Ok(cfg)
}
