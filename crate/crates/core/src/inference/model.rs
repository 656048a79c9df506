use crate::areal::{besag_precision, scale_besag, AdjacencyGraph, Bym2};
use crate::error::{check_dim, Error, Result};
use crate::fem::{log_tau_for_sigma, FemMatrices};
use crate::gmrf::{Constraints, PrecisionModel};
use crate::priors::{bym2_weight_logdensity_uniform, PcPrecisionPrior, PcRangeSigmaPrior};
use crate::sparse::SparseMatrix;
use serde::{Deserialize, Serialize};

/// Prior precision of fixed effects.
pub const FIXED_EFFECT_PRECISION: f64 = 1e-4;

/// Upper bound on the number of free hyperparameters.
pub const MAX_THETA: usize = 20;

fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Observation model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Likelihood {
    /// `y ~ N(η, 1/τ₀)`; `noise_precision` fixes `τ₀`, otherwise `log τ₀` is
    /// a hyperparameter with a PC prior.
    Gaussian {
        #[serde(default)]
        noise_precision: Option<f64>,
        #[serde(default = "default_noise_prior")]
        prior: PcPrecisionPrior,
    },
    /// `y ~ Poisson(E exp(η))`.
    Poisson {
        #[serde(default)]
        exposure: Option<Vec<f64>>,
    },
}

fn default_noise_prior() -> PcPrecisionPrior {
    PcPrecisionPrior { u: 1.0, alpha: 0.01 }
}

impl Likelihood {
    pub fn gaussian(prior: PcPrecisionPrior) -> Self {
        Likelihood::Gaussian { noise_precision: None, prior }
    }

    pub fn gaussian_known(noise_precision: f64) -> Self {
        Likelihood::Gaussian { noise_precision: Some(noise_precision), prior: default_noise_prior() }
    }

    pub fn poisson() -> Self {
        Likelihood::Poisson { exposure: None }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, Likelihood::Gaussian { .. })
    }
}

/// Latent effect family and the prior on its hyperparameters.
#[derive(Debug, Clone)]
pub enum ComponentKind {
    /// Fixed precision, no hyperparameters.
    Fixed(PrecisionModel),
    /// `τ I`; θ = `log τ`.
    Iid { n: usize, prior: PcPrecisionPrior },
    /// `τ R*` with `R*` the scaled Besag structure; θ = `log τ`.
    Besag { scaled: PrecisionModel, prior: PcPrecisionPrior },
    /// BYM2 over `(b, u*)`; θ = (`log τ`, `logit w`).
    Bym2 { model: Box<Bym2>, prior: PcPrecisionPrior },
    /// Matérn SPDE on a mesh; θ = (`log range`, `log σ`).
    Spde { fem: Box<FemMatrices>, alpha: u32, prior: PcRangeSigmaPrior },
}

/// One additive term `A_k u_k` of the linear predictor.
#[derive(Debug, Clone)]
pub struct Component {
    pub name: String,
    pub kind: ComponentKind,
    /// `n_obs × latent_dim`.
    pub projection: SparseMatrix,
    /// Hyperparameters held at these values instead of being estimated.
    pub fixed_theta: Option<Vec<f64>>,
    pub initial: Option<Vec<f64>>,
}

impl Component {
    fn build(name: &str, kind: ComponentKind, projection: SparseMatrix) -> Result<Self> {
        let c = Component { name: name.to_string(), kind, projection, fixed_theta: None, initial: None };
        let padded = c.pad(&c.projection)?;
        Ok(Component { projection: padded, ..c })
    }

    pub fn fixed(name: &str, model: PrecisionModel, projection: SparseMatrix) -> Result<Self> {
        Self::build(name, ComponentKind::Fixed(model), projection)
    }

    pub fn iid(name: &str, n: usize, projection: SparseMatrix, prior: PcPrecisionPrior) -> Result<Self> {
        prior.validate()?;
        Self::build(name, ComponentKind::Iid { n, prior }, projection)
    }

    pub fn besag(name: &str, graph: &AdjacencyGraph, projection: SparseMatrix, prior: PcPrecisionPrior) -> Result<Self> {
        prior.validate()?;
        let (scaled, _) = scale_besag(&besag_precision(graph, None)?)?;
        Self::build(name, ComponentKind::Besag { scaled, prior }, projection)
    }

    /// `projection` maps observations to the `n` area effects `b`.
    pub fn bym2(name: &str, graph: &AdjacencyGraph, projection: SparseMatrix, prior: PcPrecisionPrior) -> Result<Self> {
        prior.validate()?;
        let model = Box::new(Bym2::new(graph, None)?);
        Self::build(name, ComponentKind::Bym2 { model, prior }, projection)
    }

    pub fn spde(name: &str, fem: FemMatrices, alpha: u32, projection: SparseMatrix, prior: PcRangeSigmaPrior) -> Result<Self> {
        prior.validate()?;
        if !(2..=4).contains(&alpha) {
            return Err(Error::InvalidParameter(format!("alpha must be 2..=4, got {alpha}")));
        }
        Self::build(name, ComponentKind::Spde { fem: Box::new(fem), alpha, prior }, projection)
    }

    pub fn with_fixed_theta(mut self, theta: Vec<f64>) -> Result<Self> {
        check_dim(self.n_theta_total(), theta.len())?;
        self.fixed_theta = Some(theta);
        Ok(self)
    }

    pub fn with_initial(mut self, theta: Vec<f64>) -> Result<Self> {
        check_dim(self.n_theta_total(), theta.len())?;
        self.initial = Some(theta);
        Ok(self)
    }

    /// Length of the effect that observations load on.
    pub fn effect_dim(&self) -> usize {
        match &self.kind {
            ComponentKind::Fixed(m) => m.dim(),
            ComponentKind::Iid { n, .. } => *n,
            ComponentKind::Besag { scaled, .. } => scaled.dim(),
            ComponentKind::Bym2 { model, .. } => model.n(),
            ComponentKind::Spde { fem, .. } => fem.n(),
        }
    }

    pub fn latent_dim(&self) -> usize {
        match &self.kind {
            ComponentKind::Bym2 { model, .. } => 2 * model.n(),
            _ => self.effect_dim(),
        }
    }

    /// Pad an `m × effect_dim` matrix to `m × latent_dim`.
    pub fn pad(&self, a: &SparseMatrix) -> Result<SparseMatrix> {
        let (e, l) = (self.effect_dim(), self.latent_dim());
        if a.n_cols() == l {
            return Ok(a.clone());
        }
        check_dim(e, a.n_cols())?;
        SparseMatrix::hstack(&[a, &SparseMatrix::zeros(a.n_rows(), l - e)])
    }

    fn n_theta_total(&self) -> usize {
        match &self.kind {
            ComponentKind::Fixed(_) => 0,
            ComponentKind::Iid { .. } | ComponentKind::Besag { .. } => 1,
            ComponentKind::Bym2 { .. } | ComponentKind::Spde { .. } => 2,
        }
    }

    pub fn n_theta(&self) -> usize {
        if self.fixed_theta.is_some() {
            0
        } else {
            self.n_theta_total()
        }
    }

    fn theta_labels(&self) -> Vec<String> {
        let n = &self.name;
        match &self.kind {
            ComponentKind::Fixed(_) => vec![],
            ComponentKind::Iid { .. } | ComponentKind::Besag { .. } => vec![format!("log_precision[{n}]")],
            ComponentKind::Bym2 { .. } => vec![format!("log_precision[{n}]"), format!("logit_weight[{n}]")],
            ComponentKind::Spde { .. } => vec![format!("log_range[{n}]"), format!("log_sigma[{n}]")],
        }
    }

    fn default_initial(&self) -> Vec<f64> {
        match &self.kind {
            ComponentKind::Fixed(_) => vec![],
            ComponentKind::Iid { .. } | ComponentKind::Besag { .. } => vec![0.0],
            ComponentKind::Bym2 { .. } => vec![0.0, 0.0],
            ComponentKind::Spde { prior, .. } => vec![(3.0 * prior.r0).ln(), (prior.sigma0 / 3.0).ln()],
        }
    }

    /// Prior precision model at hyperparameters `theta` (all of them,
    /// including fixed ones).
    pub fn precision(&self, theta: &[f64]) -> Result<PrecisionModel> {
        check_dim(self.n_theta_total(), theta.len())?;
        match &self.kind {
            ComponentKind::Fixed(m) => Ok(m.clone()),
            ComponentKind::Iid { n, .. } => PrecisionModel::new(SparseMatrix::diagonal(&vec![theta[0].exp(); *n]), format!("iid[{}]", self.name)),
            ComponentKind::Besag { scaled, .. } => Ok(scaled.scaled(theta[0].exp())),
            ComponentKind::Bym2 { model, .. } => model.precision(theta[0].exp(), logistic(theta[1])),
            ComponentKind::Spde { fem, alpha, .. } => {
                let nu = *alpha as f64 - 1.0;
                let kappa = (8.0 * nu).sqrt() / theta[0].exp();
                let tau = log_tau_for_sigma(kappa, nu, theta[1].exp()).exp();
                let n = fem.n();
                let q = fem.precision(&vec![kappa; n], &vec![tau; n], *alpha)?;
                PrecisionModel::new(q, format!("spde[{}]", self.name))
            }
        }
    }

    /// Log prior density of the internal-scale hyperparameters.
    fn log_prior(&self, theta: &[f64]) -> Result<f64> {
        match &self.kind {
            ComponentKind::Fixed(_) => Ok(0.0),
            ComponentKind::Iid { prior, .. } | ComponentKind::Besag { prior, .. } => prior.log_density_log_tau(theta[0]),
            ComponentKind::Bym2 { prior, .. } => {
                let w = logistic(theta[1]);
                Ok(prior.log_density_log_tau(theta[0])? + bym2_weight_logdensity_uniform(w)? + w.ln() + (1.0 - w).ln())
            }
            ComponentKind::Spde { prior, .. } => prior.log_density_log_scale(theta[0], theta[1]),
        }
    }
}

/// Fixed effects `X β` with vague Gaussian prior.
#[derive(Debug, Clone)]
pub struct FixedEffects {
    pub names: Vec<String>,
    /// `n_obs × p`.
    pub design: SparseMatrix,
}

impl FixedEffects {
    pub fn intercept(n_obs: usize) -> Self {
        FixedEffects { names: vec!["intercept".into()], design: SparseMatrix::from_triplets(n_obs, 1, &(0..n_obs).map(|i| (i, 0, 1.0)).collect::<Vec<_>>()) }
    }
}

/// Latent Gaussian model `η = Σ A_k u_k + X β`, `y | η ~ likelihood`.
#[derive(Debug, Clone)]
pub struct LatentModel {
    pub components: Vec<Component>,
    pub fixed_effects: Option<FixedEffects>,
    pub likelihood: Likelihood,
    pub y: Vec<f64>,
}

/// Position of one component inside the stacked latent vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentBlock {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

impl LatentModel {
    pub fn new(components: Vec<Component>, fixed_effects: Option<FixedEffects>, likelihood: Likelihood, y: Vec<f64>) -> Result<Self> {
        let m = LatentModel { components, fixed_effects, likelihood, y };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.y.len();
        for c in &self.components {
            check_dim(n, c.projection.n_rows())?;
            check_dim(c.latent_dim(), c.projection.n_cols())?;
        }
        if let Some(f) = &self.fixed_effects {
            check_dim(n, f.design.n_rows())?;
            check_dim(f.names.len(), f.design.n_cols())?;
        }
        match &self.likelihood {
            Likelihood::Gaussian { noise_precision, prior } => {
                prior.validate()?;
                if let Some(p) = noise_precision {
                    if !(*p > 0.0 && p.is_finite()) {
                        return Err(Error::NonPositivePrecision(*p));
                    }
                }
                if let Some(v) = self.y.iter().find(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter(format!("observation {v} is not finite")));
                }
            }
            Likelihood::Poisson { exposure } => {
                if let Some(e) = exposure {
                    check_dim(n, e.len())?;
                    if let Some(v) = e.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                        return Err(Error::NonPositiveArgument(*v));
                    }
                }
                if let Some(v) = self.y.iter().find(|v| !(**v >= 0.0 && v.fract() == 0.0)) {
                    return Err(Error::InvalidParameter(format!("Poisson count {v} is not a non-negative integer")));
                }
            }
        }
        if self.n_theta() > MAX_THETA {
            return Err(Error::InvalidParameter(format!("{} hyperparameters exceed the limit of {MAX_THETA}", self.n_theta())));
        }
        Ok(())
    }

    fn noise_is_free(&self) -> bool {
        matches!(self.likelihood, Likelihood::Gaussian { noise_precision: None, .. })
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn n_fixed(&self) -> usize {
        self.fixed_effects.as_ref().map_or(0, |f| f.names.len())
    }

    /// Free hyperparameters.
    pub fn n_theta(&self) -> usize {
        usize::from(self.noise_is_free()) + self.components.iter().map(Component::n_theta).sum::<usize>()
    }

    pub fn theta_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.noise_is_free() {
            names.push("log_precision[noise]".to_string());
        }
        for c in self.components.iter().filter(|c| c.fixed_theta.is_none()) {
            names.extend(c.theta_labels());
        }
        names
    }

    pub fn initial_theta(&self) -> Vec<f64> {
        let mut t = Vec::new();
        if self.noise_is_free() {
            t.push(0.0);
        }
        for c in self.components.iter().filter(|c| c.fixed_theta.is_none()) {
            t.extend(c.initial.clone().unwrap_or_else(|| c.default_initial()));
        }
        t
    }

    pub fn latent_dim(&self) -> usize {
        self.components.iter().map(Component::latent_dim).sum::<usize>() + self.n_fixed()
    }

    pub fn blocks(&self) -> Vec<LatentBlock> {
        let mut off = 0;
        let mut out = Vec::new();
        for c in &self.components {
            out.push(LatentBlock { name: c.name.clone(), offset: off, len: c.latent_dim() });
            off += c.latent_dim();
        }
        if let Some(f) = &self.fixed_effects {
            for name in &f.names {
                out.push(LatentBlock { name: name.clone(), offset: off, len: 1 });
                off += 1;
            }
        }
        out
    }

    /// `[A_1 … A_K X]`.
    pub fn projection(&self) -> Result<SparseMatrix> {
        let mut blocks: Vec<&SparseMatrix> = self.components.iter().map(|c| &c.projection).collect();
        if let Some(f) = &self.fixed_effects {
            blocks.push(&f.design);
        }
        if blocks.is_empty() {
            return Ok(SparseMatrix::zeros(self.n_obs(), 0));
        }
        SparseMatrix::hstack(&blocks)
    }

    /// Joint projection for new locations from per-component matrices in
    /// effect coordinates (BYM2 blocks map onto `b` only) and an optional
    /// fixed-effect design.
    pub fn joint_projection(&self, per_component: &[SparseMatrix], fixed_design: Option<&SparseMatrix>) -> Result<SparseMatrix> {
        check_dim(self.components.len(), per_component.len())?;
        let m = per_component.first().map(SparseMatrix::n_rows).or(fixed_design.map(SparseMatrix::n_rows)).unwrap_or(0);
        let mut padded = Vec::new();
        for (c, a) in self.components.iter().zip(per_component) {
            check_dim(m, a.n_rows())?;
            padded.push(c.pad(a)?);
        }
        if self.n_fixed() > 0 {
            let x = fixed_design.ok_or(Error::DimensionMismatch { expected: self.n_fixed(), got: 0 })?;
            check_dim(m, x.n_rows())?;
            check_dim(self.n_fixed(), x.n_cols())?;
            padded.push(x.clone());
        }
        let refs: Vec<&SparseMatrix> = padded.iter().collect();
        SparseMatrix::hstack(&refs)
    }

    /// Split free θ into the noise precision (if Gaussian) and per-component
    /// full hyperparameter vectors.
    pub(crate) fn unpack(&self, theta: &[f64]) -> Result<(Option<f64>, Vec<Vec<f64>>)> {
        check_dim(self.n_theta(), theta.len())?;
        let mut it = theta.iter().copied();
        let noise = match &self.likelihood {
            Likelihood::Gaussian { noise_precision: Some(p), .. } => Some(p.ln()),
            Likelihood::Gaussian { noise_precision: None, .. } => it.next(),
            Likelihood::Poisson { .. } => None,
        };
        let per = self
            .components
            .iter()
            .map(|c| match &c.fixed_theta {
                Some(t) => t.clone(),
                None => it.by_ref().take(c.n_theta()).collect(),
            })
            .collect();
        Ok((noise, per))
    }

    /// Joint prior precision of the latent vector.
    pub fn prior_precision(&self, theta: &[f64]) -> Result<PrecisionModel> {
        let (_, per) = self.unpack(theta)?;
        let models: Vec<PrecisionModel> = self.components.iter().zip(&per).map(|(c, t)| c.precision(t)).collect::<Result<_>>()?;
        let n = self.latent_dim();
        let fixed = SparseMatrix::diagonal(&vec![FIXED_EFFECT_PRECISION; self.n_fixed()]);
        let mut qs: Vec<&SparseMatrix> = models.iter().map(|m| &m.q).collect();
        qs.push(&fixed);
        let q = SparseMatrix::block_diag(&qs);
        let mut constraints: Option<Constraints> = None;
        let mut rank = 0;
        let mut off = 0;
        for m in &models {
            if let Some(c) = &m.constraints {
                let e = c.embed(off, n);
                constraints = Some(match constraints {
                    Some(acc) => acc.stack(&e)?,
                    None => e,
                });
            }
            rank += m.rank_deficiency;
            off += m.dim();
        }
        let mut joint = PrecisionModel::new(q, "latent")?.intrinsic(rank);
        if let Some(c) = constraints {
            joint = joint.with_constraints(c)?;
        }
        Ok(joint)
    }

    /// Log prior density of the free hyperparameters.
    pub fn log_prior_theta(&self, theta: &[f64]) -> Result<f64> {
        let (noise, per) = self.unpack(theta)?;
        let mut lp = 0.0;
        if let (Likelihood::Gaussian { noise_precision: None, prior }, Some(t)) = (&self.likelihood, noise) {
            lp += prior.log_density_log_tau(t)?;
        }
        for (c, t) in self.components.iter().zip(&per) {
            if c.fixed_theta.is_none() {
                lp += c.log_prior(t)?;
            }
        }
        Ok(lp)
    }
}
