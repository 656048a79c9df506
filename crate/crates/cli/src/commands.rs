//! Subcommand definitions and their implementations.

use crate::error::{CliError, CliResult};
use crate::io::*;
use crate::manifest::Manifest;
use crate::model_spec::{ModelSpec, NewDataSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gfield::areal::{
    besag_precision, bym2_precision, kronecker_precision, scale_besag, temporal_precision, AdjacencyGraph, IndexBase, TemporalKind, TemporalModel,
};
use gfield::fem::{assemble_barrier_precision, assemble_precision, BarrierSpec, MaternParams, DEFAULT_RANGE_FRACTION};
use gfield::inference::{fit, predict, FitResult, GridConfig, Strategy, Summary};
use gfield::mesh::{build_mesh_zoned, MeshConfig};
use gfield::stencil::{grid_operator_l1, grid_precision, Grid2D};
use gfield::{Constraints, Gmrf, PrecisionModel};
use serde_json::json;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "gfield", version, about = "Gaussian random fields on meshes, grids and graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build or inspect triangular meshes.
    #[command(subcommand)]
    Mesh(MeshCommand),
    /// Assemble a precision matrix.
    #[command(subcommand)]
    Assemble(AssembleCommand),
    /// Draw samples from a Gaussian field given its precision.
    Sample(SampleArgs),
    /// Fit a latent Gaussian model.
    Fit(FitArgs),
    /// Predict at new locations from a fitted model.
    Predict(PredictArgs),
    /// Serve the HTTP API and the mesh builder UI.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum MeshCommand {
    Build(MeshBuildArgs),
    Info {
        #[arg(long)]
        mesh: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct MeshBuildArgs {
    /// CSV with header `x,y[,value]`.
    #[arg(long)]
    pub points: PathBuf,
    /// CSV polygon with header `x,y`.
    #[arg(long)]
    pub boundary: Option<PathBuf>,
    #[arg(long)]
    pub max_edge: f64,
    /// Defaults to twice `--max-edge`.
    #[arg(long)]
    pub max_edge_outer: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub extend: f64,
    #[arg(long, default_value_t = 21.0)]
    pub min_angle: f64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TimeKind {
    Iid,
    Ar1,
    Rw1,
    Rw2,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GridOperator {
    /// `κ² I + D`, the first-order operator.
    L1,
    /// Precision `τ² L₁ᵀ L₁ / h²`.
    Precision,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// Adjacency file: region count, then `index count neighbours..` per line.
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub zero_based: bool,
}

#[derive(Debug, Subcommand)]
pub enum AssembleCommand {
    Spde {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        range: f64,
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 2)]
        alpha: u32,
        #[arg(short, long)]
        output: PathBuf,
    },
    Besag {
        #[command(flatten)]
        graph: GraphArgs,
        /// Scale to unit geometric-mean marginal variance.
        #[arg(long)]
        scale: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
    Bym2 {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        phi: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
    Kron {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, value_enum)]
        time_kind: TimeKind,
        #[arg(long)]
        length: usize,
        /// Lag-one correlation for `ar1`.
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        scale_space: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
    Barrier {
        #[arg(long)]
        mesh: PathBuf,
        /// CSV polygon `x,y`; triangles with centroid inside form the barrier.
        #[arg(long)]
        polygon: PathBuf,
        #[arg(long)]
        range: f64,
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = DEFAULT_RANGE_FRACTION)]
        fraction: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
    GridStencil {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long)]
        h: f64,
        #[arg(long)]
        kappa: f64,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long, value_enum, default_value = "precision")]
        operator: GridOperator,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long = "Q", visible_alias = "q")]
    pub q: PathBuf,
    /// Constraint sidecar written by `assemble`.
    #[arg(long)]
    pub constraints: Option<PathBuf>,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "eb")]
    pub strategy: Strategy,
    #[arg(long)]
    pub grid_step: Option<f64>,
    #[arg(long)]
    pub grid_drop: Option<f64>,
    #[arg(long)]
    pub grid_max_steps: Option<usize>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long = "new")]
    pub new_data: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8787)]
    pub port: u16,
    /// Directory with the UI build; an embedded page is served otherwise.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

/// Constraint sidecar `<Q>.constraints.json`.
#[derive(Debug, serde::Serialize, serde::Deserialize)]
pub struct ConstraintFile {
    pub rank_deficiency: usize,
    pub constraints: Option<Constraints>,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Mesh(MeshCommand::Build(a)) => mesh_build(a),
        Command::Mesh(MeshCommand::Info { mesh }) => {
            let m = read_mesh(&resolve_input(&mesh)?)?;
            let mut text = serde_json::to_string_pretty(&m.quality(None))?;
            text.push('\n');
            let _ = std::io::Write::write_all(&mut std::io::stdout(), text.as_bytes());
            Ok(())
        }
        Command::Assemble(a) => assemble(a),
        Command::Sample(a) => sample(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Serve(a) => crate::serve::serve_blocking(&a.host, a.port, a.static_dir),
    }
}

fn mesh_build(a: MeshBuildArgs) -> CliResult<()> {
    let points = resolve_input(&a.points)?;
    let boundary = a.boundary.as_deref().map(resolve_input).transpose()?;
    let out = resolve_output(&a.output)?;
    let (locs, _) = read_points_csv(&points)?;
    let poly = boundary.as_deref().map(read_points_csv).transpose()?.map(|p| p.0);
    let config = MeshConfig {
        max_edge_inner: a.max_edge,
        max_edge_outer: a.max_edge_outer.unwrap_or(2.0 * a.max_edge),
        extension_distance: a.extend,
        min_angle: a.min_angle,
    };
    let built = build_mesh_zoned(&locs, poly.as_deref(), &config)?;
    let mut text = built.mesh.to_json()?;
    text.push('\n');
    write_bytes(&out, text.as_bytes())?;
    let mut man = Manifest::new("mesh build", serde_json::to_value(config)?, None);
    man.input(&points)?;
    if let Some(b) = &boundary {
        man.input(b)?;
    }
    man.output(&out)?;
    man.write_for(&out)?;
    Ok(())
}

fn read_graph_arg(g: &GraphArgs) -> CliResult<(PathBuf, AdjacencyGraph)> {
    let path = resolve_input(&g.graph)?;
    let base = if g.zero_based { IndexBase::Zero } else { IndexBase::One };
    let graph = AdjacencyGraph::parse(&read_text(&path)?, base).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok((path, graph))
}

fn assemble(cmd: AssembleCommand) -> CliResult<()> {
    let mut inputs = Vec::new();
    let (name, params, output, model): (&str, serde_json::Value, PathBuf, PrecisionModel) = match cmd {
        AssembleCommand::Spde { mesh, range, sigma, alpha, output } => {
            let path = resolve_input(&mesh)?;
            let m = read_mesh(&path)?;
            inputs.push(path);
            let nu = alpha as f64 - 1.0;
            let spde = MaternParams::new(range, sigma, nu)?.to_spde()?;
            let q = assemble_precision(&m, &spde, None, None)?;
            ("assemble spde", json!({"range": range, "sigma": sigma, "alpha": alpha}), output, q)
        }
        AssembleCommand::Besag { graph, scale, output } => {
            let (path, g) = read_graph_arg(&graph)?;
            inputs.push(path);
            let mut q = besag_precision(&g, None)?;
            if scale {
                q = scale_besag(&q)?.0;
            }
            ("assemble besag", json!({"scale": scale, "zero_based": graph.zero_based}), output, q)
        }
        AssembleCommand::Bym2 { graph, tau, phi, output } => {
            let (path, g) = read_graph_arg(&graph)?;
            inputs.push(path);
            let q = bym2_precision(&g, tau, phi)?;
            ("assemble bym2", json!({"tau": tau, "phi": phi, "zero_based": graph.zero_based}), output, q)
        }
        AssembleCommand::Kron { graph, time_kind, length, rho, scale_space, output } => {
            let (path, g) = read_graph_arg(&graph)?;
            inputs.push(path);
            let kind = match (time_kind, rho) {
                (TimeKind::Ar1, Some(rho)) => TemporalKind::Ar1 { rho },
                (TimeKind::Ar1, None) => return Err(CliError::Usage("--time-kind ar1 needs --rho".into())),
                (_, Some(_)) => return Err(CliError::Usage("--rho only applies to --time-kind ar1".into())),
                (TimeKind::Iid, None) => TemporalKind::Iid,
                (TimeKind::Rw1, None) => TemporalKind::Rw1,
                (TimeKind::Rw2, None) => TemporalKind::Rw2,
            };
            let t = temporal_precision(&TemporalModel::new(kind, length)?)?;
            let mut s = besag_precision(&g, None)?;
            if scale_space {
                s = scale_besag(&s)?.0;
            }
            let q = kronecker_precision(&t, &s)?;
            ("assemble kron", json!({"time": kind, "length": length, "scale_space": scale_space, "zero_based": graph.zero_based}), output, q)
        }
        AssembleCommand::Barrier { mesh, polygon, range, sigma, fraction, output } => {
            let mpath = resolve_input(&mesh)?;
            let ppath = resolve_input(&polygon)?;
            let m = read_mesh(&mpath)?;
            let (poly, _) = read_points_csv(&ppath)?;
            inputs.extend([mpath, ppath]);
            let mut spec = BarrierSpec::from_polygon(&m, &poly, range);
            spec.range_fraction_in_barrier = fraction;
            let q = assemble_barrier_precision(&m, &spec, sigma)?;
            let params = json!({"range": range, "sigma": sigma, "fraction": fraction, "barrier_triangles": spec.barrier_triangles.len()});
            ("assemble barrier", params, output, q)
        }
        AssembleCommand::GridStencil { rows, cols, h, kappa, tau, operator, output } => {
            let grid = Grid2D::new(rows, cols, h)?;
            let q = match operator {
                GridOperator::L1 => PrecisionModel::new(grid_operator_l1(&grid, kappa)?, "grid operator L1")?,
                GridOperator::Precision => grid_precision(&grid, kappa, tau)?,
            };
            let op = match operator {
                GridOperator::L1 => "l1",
                GridOperator::Precision => "precision",
            };
            ("assemble grid-stencil", json!({"rows": rows, "cols": cols, "h": h, "kappa": kappa, "tau": tau, "operator": op}), output, q)
        }
    };
    let out = resolve_output(&output)?;
    write_matrix(&out, &model.q)?;
    let mut man = Manifest::new(name, params, None);
    for i in &inputs {
        man.input(i)?;
    }
    man.output(&out)?;
    if model.rank_deficiency > 0 || model.constraints.is_some() {
        let side = sidecar(&out, ".constraints.json");
        write_json(&side, &ConstraintFile { rank_deficiency: model.rank_deficiency, constraints: model.constraints.clone() })?;
        man.output(&side)?;
    }
    man.write_for(&out)?;
    Ok(())
}

fn read_constraints(path: &Path) -> CliResult<ConstraintFile> {
    let raw: ConstraintFile = read_json(path)?;
    let constraints = match raw.constraints {
        Some(c) => {
            let rows = (0..c.len()).map(|i| c.matrix().row_vector(i)).collect();
            Some(Constraints::new(rows, c.rhs().to_vec())?)
        }
        None => None,
    };
    Ok(ConstraintFile { rank_deficiency: raw.rank_deficiency, constraints })
}

/// Shortest round-trip decimal form.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn sample(a: SampleArgs) -> CliResult<()> {
    if a.n == 0 {
        return Err(CliError::input("--n must be at least 1"));
    }
    let qpath = resolve_input(&a.q)?;
    let cpath = a.constraints.as_deref().map(resolve_input).transpose()?;
    let out = resolve_output(&a.output)?;
    let mut model = PrecisionModel::new(read_matrix(&qpath)?, "sample")?;
    if let Some(c) = &cpath {
        let cf = read_constraints(c)?;
        model = model.intrinsic(cf.rank_deficiency);
        if let Some(c) = cf.constraints {
            model = model.with_constraints(c)?;
        }
    }
    let draws = Gmrf::new(model)?.sample(a.n, a.seed);
    let n = draws[0].len();
    let header: Vec<String> = std::iter::once("node".to_string()).chain((0..a.n).map(|d| format!("draw_{d}"))).collect();
    write_csv(&out, &header, (0..n).map(|i| std::iter::once(i.to_string()).chain(draws.iter().map(|d| num(d[i]))).collect()))?;
    let mut man = Manifest::new("sample", json!({"n": a.n}), Some(a.seed));
    man.input(&qpath)?;
    if let Some(c) = &cpath {
        man.input(c)?;
    }
    man.output(&out)?;
    man.write_for(&out)?;
    Ok(())
}

fn load_model(path: &Path) -> CliResult<(PathBuf, ModelSpec, crate::model_spec::BuiltModel)> {
    let path = resolve_input(path)?;
    let spec: ModelSpec = read_json(&path)?;
    let base = path.parent().unwrap_or(Path::new("/")).to_path_buf();
    let built = spec.build(&base)?;
    Ok((path, spec, built))
}

fn fit_cmd(a: FitArgs) -> CliResult<()> {
    let (mpath, _, built) = load_model(&a.model)?;
    let out = resolve_output(&a.output)?;
    let mut grid = GridConfig::default();
    if let Some(s) = a.grid_step {
        grid.step_sd = s;
    }
    if let Some(d) = a.grid_drop {
        grid.log_drop = d;
    }
    if let Some(m) = a.grid_max_steps {
        grid.max_steps = m;
    }
    let grid = (a.strategy == Strategy::Grid).then_some(grid);
    let result = fit(&built.model, a.strategy, grid, None)?;
    write_json(&out, &result)?;
    let mut man = Manifest::new("fit", json!({"strategy": a.strategy, "grid": grid}), None);
    man.input(&mpath)?;
    for f in &built.files {
        man.input(f)?;
    }
    man.output(&out)?;
    man.write_for(&out)?;
    Ok(())
}

fn summary_rows<'a>(scale: &'static str, s: &'a Summary) -> impl Iterator<Item = Vec<String>> + 'a {
    (0..s.mean.len()).map(move |i| {
        let mut r = vec![i.to_string(), scale.to_string(), num(s.mean[i]), num(s.sd[i])];
        r.extend(s.quantiles.iter().map(|q| num(q[i])));
        r
    })
}

fn predict_cmd(a: PredictArgs) -> CliResult<()> {
    let (mpath, spec, built) = load_model(&a.model)?;
    let fpath = resolve_input(&a.fit)?;
    let npath = resolve_input(&a.new_data)?;
    let out = resolve_output(&a.output)?;
    let fitted: FitResult = read_json(&fpath)?;
    if fitted.theta_names != built.model.theta_names() {
        return Err(CliError::input("fit does not match the model's hyperparameters"));
    }
    let new: NewDataSpec = read_json(&npath)?;
    let a_new = built.projection(&spec, &new)?;
    let pred = predict(&built.model, &fitted, &a_new, a.n, a.seed)?;
    let mut header: Vec<String> = ["index", "scale", "mean", "sd"].iter().map(|s| s.to_string()).collect();
    header.extend(pred.quantile_levels.iter().map(|p| format!("q{p}")));
    let rows = summary_rows("linear", &pred.linear).chain(pred.response.iter().flat_map(|r| summary_rows("response", r)));
    write_csv(&out, &header, rows)?;
    let mut man = Manifest::new("predict", json!({"n": a.n}), Some(a.seed));
    for p in [&mpath, &fpath, &npath] {
        man.input(p)?;
    }
    for f in &built.files {
        man.input(f)?;
    }
    man.output(&out)?;
    man.write_for(&out)?;
    Ok(())
}
