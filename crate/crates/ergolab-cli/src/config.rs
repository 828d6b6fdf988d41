//! Experiment configuration: JSON schema, validation, and construction of
//! the core objects an experiment needs.
//!
//! Unknown keys are rejected everywhere and every default is materialized
//! into the resolved config, so the echo in the run manifest re-validates
//! byte-for-byte.

use anyhow::{anyhow, bail, Context};
use ergolab::ergodic::{Gauge, PhiSpec};
use ergolab::model::{make_langevin, make_ou, make_poly_drift, LyapunovSpec, SdeModel};
use ergolab::oracle::{GridSpec, InvariantOracle1D};
use ergolab::poly::Poly;
use ergolab::schedule::CheckpointSchedule;
use ergolab::simulate::Scheme;
use serde::{Deserialize, Serialize};
use std::f64::consts::E;

pub const DEFAULT_ORACLE_POINTS: usize = 48_001;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExperimentConfig {
    Sde(SdeExperiment),
    Slln(SllnExperiment),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeExperiment {
    pub model: ModelCfg,
    pub scheme: String,
    pub schedule: ScheduleCfg,
    #[serde(default)]
    pub x0: X0Cfg,
    pub estimators: Vec<EstimatorCfg>,
    pub ensemble: EnsembleCfg,
    #[serde(default)]
    pub invariant: InvariantCfg,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelCfg {
    Ou {
        lambda: f64,
        mu: f64,
        sigma_scale: f64,
    },
    /// Gradient diffusion dX = −U′(X)dt + √(2ε)dW with polynomial U
    /// (ascending coefficients).
    Langevin {
        potential: Vec<f64>,
        epsilon: f64,
    },
    /// Arbitrary polynomial drift with constant noise; no stationary-law
    /// ground truth unless the drift integrates to a confining potential.
    PolyDrift {
        drift: Vec<f64>,
        sigma: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleCfg {
    pub t0: f64,
    /// Exactly one of `ratio` / `t_end` must be given; `t_end` means
    /// "span [t0, t_end] with `count` checkpoints".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    pub count: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum X0Cfg {
    /// Draw the start from the model's stationary law (requires an
    /// invariant-measure oracle, or the exact-ou scheme which is always
    /// stationary).
    Named(String),
    Point(f64),
}

impl Default for X0Cfg {
    fn default() -> Self {
        X0Cfg::Named("stationary".into())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EstimatorCfg {
    /// Running suprema of V(X_s)/log s and |X_s|/g(s).
    Envelope {
        gauge: GaugeCfg,
        #[serde(default = "default_envelope_delta")]
        delta: f64,
        #[serde(default = "default_t_min")]
        t_min: f64,
        /// Geometric refinement between checkpoints for exact-scheme runs.
        #[serde(default = "default_oversample")]
        oversample_ratio: f64,
    },
    /// Martingale decomposition of e^{δV(X)}: M, ⟨M⟩, and their /t rates.
    Martingale {
        #[serde(default = "default_bracket_delta")]
        delta: f64,
    },
    /// Running time-average of a named observable.
    Birkhoff { phi: PhiCfg },
}

fn default_envelope_delta() -> f64 {
    0.9
}

fn default_bracket_delta() -> f64 {
    0.2
}

fn default_t_min() -> f64 {
    E
}

fn default_oversample() -> f64 {
    1.05
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeCfg {
    pub coeff: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", deny_unknown_fields)]
pub enum PhiCfg {
    #[serde(rename = "x")]
    X,
    #[serde(rename = "x^2")]
    XSquared,
    #[serde(rename = "abs-pow")]
    AbsPow { p: f64 },
    #[serde(rename = "exp-v")]
    ExpV { delta: f64 },
}

impl PhiCfg {
    pub fn to_spec(&self) -> PhiSpec {
        match self {
            PhiCfg::X => PhiSpec::X,
            PhiCfg::XSquared => PhiSpec::XSquared,
            PhiCfg::AbsPow { p } => PhiSpec::AbsPow { p: *p },
            PhiCfg::ExpV { delta } => PhiSpec::ExpV { delta: *delta },
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleCfg {
    pub seeds: u64,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvariantCfg {
    #[serde(default)]
    pub grid_radius: GridRadius,
    #[serde(default = "default_points")]
    pub points: usize,
}

impl Default for InvariantCfg {
    fn default() -> Self {
        InvariantCfg {
            grid_radius: GridRadius::default(),
            points: DEFAULT_ORACLE_POINTS,
        }
    }
}

fn default_points() -> usize {
    DEFAULT_ORACLE_POINTS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridRadius {
    Named(AutoTag),
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl Default for GridRadius {
    fn default() -> Self {
        GridRadius::Named(AutoTag::Auto)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SllnExperiment {
    pub family: SllnFamily,
    pub seeds: u64,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SllnFamily {
    /// i.i.d. symmetric Pareto with tail index α.
    Pareto { alpha: f64, p: f64, n_max: usize },
    /// φ evaluated on an exact OU chain at fixed spacing.
    OuFunctional {
        p: f64,
        n_max: usize,
        phi: PhiCfg,
        #[serde(default = "default_lambda")]
        lambda: f64,
        #[serde(default = "default_sigma_scale")]
        sigma_scale: f64,
        #[serde(default = "default_spacing")]
        spacing: f64,
    },
    /// Continuous-time scaled integrals T^{−(1/p+ε)}∫φ(X)ds on a standard
    /// OU path; reports decay, never pass/fail.
    Continuous {
        p: f64,
        eps_exp: f64,
        t_max: f64,
        phi: PhiCfg,
        #[serde(default = "default_cont_dt")]
        dt: f64,
        #[serde(default = "default_cont_t0")]
        t0: f64,
    },
}

fn default_lambda() -> f64 {
    2.0
}

fn default_sigma_scale() -> f64 {
    1.0
}

fn default_spacing() -> f64 {
    1.0
}

fn default_cont_dt() -> f64 {
    0.01
}

fn default_cont_t0() -> f64 {
    10.0
}

/// Everything a validated SDE experiment needs at run time.
#[derive(Debug)]
pub struct ResolvedSde {
    pub model: SdeModel,
    pub scheme: Scheme,
    pub schedule: CheckpointSchedule,
    pub x0: X0Cfg,
    pub estimators: Vec<EstimatorCfg>,
    pub seeds: u64,
    pub master_seed: u64,
    pub oracle: Option<InvariantOracle1D>,
}

pub fn parse_config(text: &str) -> anyhow::Result<ExperimentConfig> {
    let cfg: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| anyhow!("config parse error: {e}"))?;
    Ok(cfg)
}

impl ModelCfg {
    pub fn build(&self) -> anyhow::Result<SdeModel> {
        let model = match self {
            ModelCfg::Ou {
                lambda,
                mu,
                sigma_scale,
            } => make_ou(*lambda, *mu, *sigma_scale).map_err(field_err)?,
            ModelCfg::Langevin { potential, epsilon } => {
                let (m, _) = make_langevin(Poly::new(potential.clone()), *epsilon)
                    .map_err(field_err)?;
                m
            }
            ModelCfg::PolyDrift { drift, sigma } => {
                make_poly_drift(Poly::new(drift.clone()), *sigma).map_err(field_err)?
            }
        };
        Ok(model)
    }
}

fn field_err(e: ergolab::Error) -> anyhow::Error {
    anyhow!("{e}")
}

impl SdeExperiment {
    /// Full validation: builds every object the run will use, so `validate`
    /// catches exactly what `run` would trip over.
    pub fn resolve(&self) -> anyhow::Result<ResolvedSde> {
        let model = self.model.build()?;
        let scheme: Scheme = self
            .scheme
            .parse()
            .map_err(|e: ergolab::Error| anyhow!("{e}"))?;

        let schedule = match (self.schedule.ratio, self.schedule.t_end) {
            (Some(r), None) => {
                CheckpointSchedule::new(self.schedule.t0, r, self.schedule.count, self.schedule.dt)
                    .map_err(field_err)?
            }
            (None, Some(te)) => CheckpointSchedule::spanning(
                self.schedule.t0,
                te,
                self.schedule.count,
                self.schedule.dt,
            )
            .map_err(field_err)?,
            _ => bail!("config error at `schedule`: give exactly one of `ratio` or `t_end`"),
        };

        if self.ensemble.seeds == 0 {
            bail!("config error at `ensemble.seeds`: need at least one path");
        }

        if self.estimators.is_empty() {
            bail!("config error at `estimators`: need at least one estimator");
        }
        for est in &self.estimators {
            match est {
                EstimatorCfg::Envelope {
                    gauge,
                    delta,
                    t_min,
                    oversample_ratio,
                } => {
                    Gauge::new(gauge.coeff, gauge.exponent).map_err(field_err)?;
                    LyapunovSpec::quadratic(*delta).map_err(field_err)?;
                    if !(*t_min > 1.0) {
                        bail!("config error at `t_min`: must exceed 1");
                    }
                    if !(*oversample_ratio > 1.0) {
                        bail!("config error at `oversample_ratio`: must exceed 1");
                    }
                }
                EstimatorCfg::Martingale { delta } => {
                    LyapunovSpec::quadratic(*delta).map_err(field_err)?;
                    if scheme == Scheme::ExactOu {
                        bail!(
                            "config error at `estimators`: the martingale tracker integrates \
                             densely; use a dense scheme"
                        );
                    }
                }
                EstimatorCfg::Birkhoff { phi } => {
                    let lyap = LyapunovSpec::quadratic(0.5).map_err(field_err)?;
                    drop(phi.to_spec().build(Some(&lyap)).map_err(field_err)?);
                    if scheme == Scheme::ExactOu {
                        bail!(
                            "config error at `estimators`: Birkhoff averages integrate densely; \
                             use a dense scheme"
                        );
                    }
                }
            }
        }

        if scheme == Scheme::ExactOu && !matches!(self.model, ModelCfg::Ou { .. }) {
            bail!("config error at `scheme`: exact-ou applies only to the ou model");
        }
        if scheme == Scheme::ExactOu && matches!(self.x0, X0Cfg::Point(_)) {
            bail!(
                "config error at `x0`: exact-ou always starts from the stationary law; \
                 remove x0 or set it to \"stationary\""
            );
        }
        if let X0Cfg::Named(name) = &self.x0 {
            if name != "stationary" {
                bail!("config error at `x0`: unknown start `{name}` (use a number or \"stationary\")");
            }
        }

        let needs_oracle = matches!(self.x0, X0Cfg::Named(_)) && scheme != Scheme::ExactOu;
        let oracle = if model.invariant.is_some() {
            let grid = GridSpec {
                radius: match self.invariant.grid_radius {
                    GridRadius::Named(AutoTag::Auto) => None,
                    GridRadius::Fixed(r) => Some(r),
                },
                points: self.invariant.points,
            };
            Some(InvariantOracle1D::for_model(&model, grid).map_err(field_err)?)
        } else {
            if needs_oracle {
                bail!(
                    "config error at `x0`: stationary start needs an invariant-measure oracle, \
                     but model `{}` has no gradient structure",
                    model.label
                );
            }
            None
        };

        Ok(ResolvedSde {
            model,
            scheme,
            schedule,
            x0: self.x0.clone(),
            estimators: self.estimators.clone(),
            seeds: self.ensemble.seeds,
            master_seed: self.ensemble.master_seed,
            oracle,
        })
    }
}

impl SllnExperiment {
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.seeds == 0 {
            bail!("config error at `seeds`: need at least one seed");
        }
        match &self.family {
            SllnFamily::Pareto { alpha, p, n_max } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    bail!("config error at `alpha`: tail index must lie in (0,1)");
                }
                if !(*p > 0.0 && *p < 1.0) {
                    bail!("config error at `p`: must lie in (0,1)");
                }
                if *n_max == 0 {
                    bail!("config error at `n_max`: must be positive");
                }
            }
            SllnFamily::OuFunctional { p, n_max, phi, .. } => {
                if !(*p > 0.0 && *p < 1.0) {
                    bail!("config error at `p`: must lie in (0,1)");
                }
                if *n_max == 0 {
                    bail!("config error at `n_max`: must be positive");
                }
                let lyap = LyapunovSpec::quadratic(0.5).map_err(field_err)?;
                drop(phi.to_spec().build(Some(&lyap)).map_err(field_err)?);
            }
            SllnFamily::Continuous {
                p,
                eps_exp,
                t_max,
                phi,
                dt,
                t0,
            } => {
                if !(*p > 0.0 && *p < 1.0) {
                    bail!("config error at `p`: must lie in (0,1)");
                }
                if !(*eps_exp > 0.0) {
                    bail!("config error at `eps_exp`: must be positive");
                }
                if !(*t0 > 1.0) || !(*t_max > *t0) {
                    bail!("config error at `t_max`: need t_max > t0 > 1");
                }
                if !(*dt > 0.0) {
                    bail!("config error at `dt`: must be positive");
                }
                let lyap = LyapunovSpec::quadratic(0.5).map_err(field_err)?;
                drop(phi.to_spec().build(Some(&lyap)).map_err(field_err)?);
            }
        }
        Ok(())
    }
}

/// Resolved-config echo: serializes with every default filled in, suitable
/// for the manifest and for re-validation.
pub fn echo_config(cfg: &ExperimentConfig) -> anyhow::Result<serde_json::Value> {
    serde_json::to_value(cfg).context("serializing resolved config")
}
