//! JSON description of a latent model and of prediction targets.
//!
//! ```json
//! {
//!   "likelihood": {"family": "poisson", "exposure": [..]},
//!   "y": [..],
//!   "intercept": true,
//!   "covariates": {"x1": [..]},
//!   "components": [
//!     {"name": "field", "kind": "spde", "mesh": "mesh.json", "locations": [[x, y], ..],
//!      "prior": {"r0": 1, "alpha_r": 0.05, "sigma0": 1, "alpha_s": 0.05}},
//!     {"name": "area", "kind": "bym2", "graph": "areas.graph", "index": [..],
//!      "prior": {"u": 1, "alpha": 0.01}}
//!   ]
//! }
//! ```
//!
//! Relative paths are resolved against the directory of the model file.

use crate::error::{CliError, CliResult};
use crate::io::{read_mesh, read_text, resolve_input};
use gfield::areal::{AdjacencyGraph, IndexBase};
use gfield::fem::FemMatrices;
use gfield::inference::{Component, FixedEffects, LatentModel, Likelihood};
use gfield::mesh::{projection_matrix, Mesh, Point};
use gfield::priors::{PcPrecisionPrior, PcRangeSigmaPrior};
use gfield::SparseMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

fn yes() -> bool {
    true
}

fn two() -> u32 {
    2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub likelihood: Likelihood,
    pub y: Vec<f64>,
    #[serde(default = "yes")]
    pub intercept: bool,
    #[serde(default)]
    pub covariates: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub components: Vec<ComponentSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: KindSpec,
    #[serde(default)]
    pub fixed_theta: Option<Vec<f64>>,
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KindSpec {
    Spde {
        mesh: PathBuf,
        locations: Vec<Point>,
        #[serde(default = "two")]
        alpha: u32,
        prior: PcRangeSigmaPrior,
    },
    Iid {
        size: usize,
        index: Vec<usize>,
        prior: PcPrecisionPrior,
    },
    Besag {
        graph: PathBuf,
        #[serde(default)]
        zero_based: bool,
        index: Vec<usize>,
        prior: PcPrecisionPrior,
    },
    Bym2 {
        graph: PathBuf,
        #[serde(default)]
        zero_based: bool,
        index: Vec<usize>,
        prior: PcPrecisionPrior,
    },
}

/// Prediction targets: `n` new rows, per-component locations or indices,
/// covariate values. Components that are not listed contribute nothing.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewDataSpec {
    pub n: usize,
    #[serde(default)]
    pub components: BTreeMap<String, NewComponent>,
    #[serde(default)]
    pub covariates: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewComponent {
    #[serde(default)]
    pub locations: Option<Vec<Point>>,
    #[serde(default)]
    pub index: Option<Vec<usize>>,
}

/// Model built from a spec, with what is needed to project new data.
pub struct BuiltModel {
    pub model: LatentModel,
    meshes: BTreeMap<String, Mesh>,
    fixed_names: Vec<String>,
    /// Input files the model depends on.
    pub files: Vec<PathBuf>,
}

fn indicator(index: &[usize], n: usize, what: &str) -> CliResult<SparseMatrix> {
    if let Some(&i) = index.iter().find(|&&i| i >= n) {
        return Err(CliError::input(format!("{what}: index {i} out of range (size {n})")));
    }
    let t: Vec<_> = index.iter().enumerate().map(|(r, &c)| (r, c, 1.0)).collect();
    Ok(SparseMatrix::from_triplets(index.len(), n, &t))
}

fn point_projection(mesh: &Mesh, locations: &[Point], what: &str) -> CliResult<SparseMatrix> {
    let p = projection_matrix(mesh, locations);
    if let Some(k) = p.outside.iter().position(|&o| o) {
        return Err(CliError::input(format!("{what}: location {k} lies outside the mesh")));
    }
    Ok(p.matrix)
}

fn read_graph(path: &Path, zero_based: bool) -> CliResult<AdjacencyGraph> {
    let base = if zero_based { IndexBase::Zero } else { IndexBase::One };
    AdjacencyGraph::parse(&read_text(path)?, base).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

impl ModelSpec {
    pub fn build(&self, base: &Path) -> CliResult<BuiltModel> {
        let n = self.y.len();
        let mut files = Vec::new();
        let mut resolve = |p: &Path| -> CliResult<PathBuf> {
            let r = resolve_input(&base.join(p))?;
            files.push(r.clone());
            Ok(r)
        };
        let mut meshes = BTreeMap::new();
        let mut comps = Vec::new();
        for c in &self.components {
            let what = format!("component '{}'", c.name);
            let built = match &c.kind {
                KindSpec::Spde { mesh, locations, alpha, prior } => {
                    let m = read_mesh(&resolve(mesh)?)?;
                    let a = point_projection(&m, locations, &what)?;
                    let fem = FemMatrices::new(&m, None)?;
                    meshes.insert(c.name.clone(), m);
                    Component::spde(&c.name, fem, *alpha, a, *prior)?
                }
                KindSpec::Iid { size, index, prior } => Component::iid(&c.name, *size, indicator(index, *size, &what)?, *prior)?,
                KindSpec::Besag { graph, zero_based, index, prior } => {
                    let g = read_graph(&resolve(graph)?, *zero_based)?;
                    Component::besag(&c.name, &g, indicator(index, g.n(), &what)?, *prior)?
                }
                KindSpec::Bym2 { graph, zero_based, index, prior } => {
                    let g = read_graph(&resolve(graph)?, *zero_based)?;
                    Component::bym2(&c.name, &g, indicator(index, g.n(), &what)?, *prior)?
                }
            };
            let mut built = built;
            if let Some(t) = &c.fixed_theta {
                built = built.with_fixed_theta(t.clone())?;
            }
            if let Some(t) = &c.initial {
                built = built.with_initial(t.clone())?;
            }
            comps.push(built);
        }
        let (fixed_names, fixed) = self.fixed_effects(n, &self.covariates)?;
        let fixed_effects = (!fixed_names.is_empty()).then(|| FixedEffects { names: fixed_names.clone(), design: fixed });
        let model = LatentModel::new(comps, fixed_effects, self.likelihood.clone(), self.y.clone())?;
        Ok(BuiltModel { model, meshes, fixed_names, files })
    }

    fn fixed_effects(&self, n: usize, covariates: &BTreeMap<String, Vec<f64>>) -> CliResult<(Vec<String>, SparseMatrix)> {
        let mut names = Vec::new();
        let mut t = Vec::new();
        if self.intercept {
            names.push("intercept".to_string());
            t.extend((0..n).map(|i| (i, 0, 1.0)));
        }
        for name in self.covariates.keys() {
            let v = covariates.get(name).ok_or_else(|| CliError::input(format!("covariate '{name}' is missing")))?;
            if v.len() != n {
                return Err(CliError::input(format!("covariate '{name}' has {} values, expected {n}", v.len())));
            }
            let col = names.len();
            names.push(name.clone());
            t.extend(v.iter().enumerate().map(|(i, &x)| (i, col, x)));
        }
        Ok((names.clone(), SparseMatrix::from_triplets(n, names.len(), &t)))
    }
}

impl BuiltModel {
    /// Joint projection matrix for prediction targets.
    pub fn projection(&self, spec: &ModelSpec, new: &NewDataSpec) -> CliResult<SparseMatrix> {
        let m = new.n;
        for name in new.components.keys() {
            if !spec.components.iter().any(|c| &c.name == name) {
                return Err(CliError::input(format!("new data names unknown component '{name}'")));
            }
        }
        let mut blocks = Vec::new();
        for (c, comp) in spec.components.iter().zip(&self.model.components) {
            let what = format!("new data for '{}'", c.name);
            let a = match (new.components.get(&c.name), &c.kind) {
                (None, _) => SparseMatrix::zeros(m, comp.effect_dim()),
                (Some(nc), KindSpec::Spde { .. }) => {
                    let locs = nc.locations.as_ref().ok_or_else(|| CliError::input(format!("{what}: needs locations")))?;
                    point_projection(&self.meshes[&c.name], locs, &what)?
                }
                (Some(nc), _) => {
                    let idx = nc.index.as_ref().ok_or_else(|| CliError::input(format!("{what}: needs index")))?;
                    indicator(idx, comp.effect_dim(), &what)?
                }
            };
            if a.n_rows() != m {
                return Err(CliError::input(format!("{what}: {} rows, expected n = {m}", a.n_rows())));
            }
            blocks.push(a);
        }
        let design = if self.fixed_names.is_empty() {
            None
        } else {
            let mut cov = new.covariates.clone();
            for name in spec.covariates.keys() {
                cov.entry(name.clone()).or_insert_with(|| vec![0.0; m]);
            }
            let shadow = ModelSpec { y: vec![0.0; m], ..spec.clone() };
            Some(shadow.fixed_effects(m, &cov)?.1)
        };
        Ok(self.model.joint_projection(&blocks, design.as_ref())?)
    }
}
