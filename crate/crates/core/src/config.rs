//! Experiment configuration.
//!
//! Configuration files are TOML key-value documents. Every key is optional;
//! the defaults reproduce the aligned synthetic experiment
//! (`f*(x) = 0.5 x` on `[-1, 1]`, penalty `d^2/dx^2`). Unknown keys are
//! rejected. A complete file with all defaults:
//!
//! ```toml
//! seed = 0                      # overridden by --seed
//!
//! [system]                      # X_{t+1} = f*(X_t) + W_t on [-L, L]^dim
//! dim = 1
//! half_width = 1.0
//! fstar = ["0.5*x1"]            # one expression per output (x1, x2, ...)
//! noise_std = 0.1               # per-coordinate std, truncated at 4 std
//! initial = "dirac"             # or "uniform"
//! x0 = [0.0]                    # start state for "dirac"
//!
//! [estimator]
//! basis_size = 81
//! sobolev_order = 2.0
//! ridge = 1e-3                  # Sobolev ridge is ridge * T^(-ridge_power)
//! ridge_power = 0.8
//! physics_weight = 100.0
//!
//! [operator]                    # empty terms = Laplacian on every output
//! order = 2
//! terms = [{ output = 1, alpha = [2], coeff = 1.0 }]   # coeff may be "expr"
//!
//! [regularizer]
//! measure = "input_cube"        # or "medium_cube"
//! # nodes_per_axis = 400
//!
//! [sweep]
//! t_grid = [128, 256, 512, 1024, 2048, 4096, 8192, 16384]
//! reps = 20
//! eval_len = 5000
//! eval_trajectories = 20
//! burn_in_fraction = 0.25
//!
//! [simulate]
//! length = 1000
//! trajectories = 1
//!
//! [fit]
//! # data = "dataset.csv"       # otherwise a dataset is simulated
//!
//! [theory]
//! theta = 9.0
//! delta = 0.05
//! persistence = 1.0
//! rho_tilde = 1.0
//! c_c = 1.0
//! c_c_prime = 1.0
//! rho_f = 1.0
//! c_h_factor = 1.0
//! sup_bound = 1.0
//! # sigma_w = 0.01              # default: noise_std^2
//! r_fstar = 0.0                 # alignment of the truth; 0 uses the floor
//! r_fstar_floor = 1e-8
//!
//! [bounds]
//! t_grid = [100, 1000, 10000, 100000, 1000000]
//! r_fstar = [0.1, 0.01, 0.0001, 1e-8]
//! # sigma_w = [0.01, 0.1]
//!
//! [moc]
//! t_grid = [64, 128, 256, 512, 1024]
//! reps = 20
//! rho = 1.0                     # class radius used by the theoretical curves
//!
//! # [chain]                     # optional finite chain for dependence.csv
//! # transition = [0.9, 0.1, 0.2, 0.8]   # row-major
//! # horizon = 4
//!
//! [unicycle]
//! dt = 0.05
//! noise_std = 1.0
//! speed = [0.0, 1.0]
//! turn_rate = [-1.0, 1.0]
//! basis_size = 243
//! sobolev_order = 10.0
//! ridge = 1e-2
//! ridge_power = 0.8
//! physics_weight = 10.0
//! penalty_nodes = 20000
//! t_grid = [300, 758, 1916, 4842, 12236, 30920, 78137, 100000]  # log-spaced
//! reps = 20
//! eval_len = 20000
//! eval_trajectories = 1
//! burn_in_fraction = 0.25
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data_process::{DynSystem, FiniteChain, InitialLaw};
use crate::error::{Error, Result};
use crate::estimator::{FitConfig, PhysicsPenalty, PreparedEstimator};
use crate::expr::Expr;
use crate::field::FnField;
use crate::fourier_space::{Cube, FourierBasis, QuadratureSpec};
use crate::harness::{log_grid, Arm, Overlay, SweepConfig, Unicycle};
use crate::pde_operator::{Coefficient, LinearDiffOp, OperatorTerm, RegularizerMeasure};
use crate::theory_bounds::ProblemParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub system: SystemSection,
    pub estimator: EstimatorSection,
    pub operator: OperatorSection,
    pub regularizer: RegularizerSection,
    pub sweep: SweepSection,
    pub simulate: SimulateSection,
    pub fit: FitSection,
    pub theory: TheorySection,
    pub bounds: BoundsSection,
    pub moc: MocSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainSection>,
    pub unicycle: UnicycleSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub dim: usize,
    pub half_width: f64,
    pub fstar: Vec<String>,
    pub noise_std: f64,
    pub initial: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            dim: 1,
            half_width: 1.0,
            fstar: vec!["0.5*x1".into()],
            noise_std: 0.1,
            initial: "dirac".into(),
            x0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSection {
    pub basis_size: usize,
    pub sobolev_order: f64,
    pub ridge: f64,
    pub ridge_power: f64,
    pub physics_weight: f64,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self {
            basis_size: 81,
            sobolev_order: 2.0,
            ridge: 1e-3,
            ridge_power: 0.8,
            physics_weight: 100.0,
        }
    }
}

/// Coefficient of an operator term: a number or an expression in `x1, x2, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoeffSpec {
    Number(f64),
    Expression(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    /// 1-based output index.
    pub output: usize,
    pub alpha: Vec<u32>,
    pub coeff: CoeffSpec,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
    pub terms: Vec<TermSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularizerSection {
    pub measure: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes_per_axis: Option<usize>,
}

impl Default for RegularizerSection {
    fn default() -> Self {
        Self {
            measure: "input_cube".into(),
            nodes_per_axis: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub t_grid: Vec<usize>,
    pub reps: usize,
    pub eval_len: usize,
    pub eval_trajectories: usize,
    pub burn_in_fraction: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            t_grid: (7..=14).map(|k| 1usize << k).collect(),
            reps: 20,
            eval_len: 5000,
            eval_trajectories: 20,
            burn_in_fraction: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub length: usize,
    pub trajectories: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            length: 1000,
            trajectories: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheorySection {
    pub theta: f64,
    pub delta: f64,
    pub persistence: f64,
    pub rho_tilde: f64,
    pub c_c: f64,
    pub c_c_prime: f64,
    pub rho_f: f64,
    pub c_h_factor: f64,
    pub sup_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_w: Option<f64>,
    pub r_fstar: f64,
    pub r_fstar_floor: f64,
}

impl Default for TheorySection {
    fn default() -> Self {
        let p = ProblemParams::default();
        Self {
            theta: p.theta,
            delta: p.delta,
            persistence: p.persistence,
            rho_tilde: p.rho_tilde,
            c_c: p.c_c,
            c_c_prime: p.c_c_prime,
            rho_f: p.rho_f,
            c_h_factor: p.c_h_factor,
            sup_bound: p.sup_bound,
            sigma_w: None,
            r_fstar: 0.0,
            r_fstar_floor: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsSection {
    pub t_grid: Vec<f64>,
    pub r_fstar: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_w: Option<Vec<f64>>,
}

impl Default for BoundsSection {
    fn default() -> Self {
        Self {
            t_grid: vec![1e2, 1e3, 1e4, 1e5, 1e6],
            r_fstar: vec![1e-1, 1e-2, 1e-4, 1e-8],
            sigma_w: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MocSection {
    pub t_grid: Vec<usize>,
    pub reps: usize,
    pub rho: f64,
}

impl Default for MocSection {
    fn default() -> Self {
        Self {
            t_grid: vec![64, 128, 256, 512, 1024],
            reps: 20,
            rho: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    /// Row-major transition matrix.
    pub transition: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
}

fn default_horizon() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnicycleSection {
    pub dt: f64,
    pub noise_std: f64,
    pub speed: [f64; 2],
    pub turn_rate: [f64; 2],
    pub basis_size: usize,
    pub sobolev_order: f64,
    pub ridge: f64,
    pub ridge_power: f64,
    pub physics_weight: f64,
    pub penalty_nodes: usize,
    pub t_grid: Vec<usize>,
    pub reps: usize,
    pub eval_len: usize,
    pub eval_trajectories: usize,
    pub burn_in_fraction: f64,
}

impl Default for UnicycleSection {
    fn default() -> Self {
        let model = Unicycle::default();
        Self {
            dt: model.dt,
            noise_std: model.noise_std,
            speed: [model.speed.0, model.speed.1],
            turn_rate: [model.turn_rate.0, model.turn_rate.1],
            basis_size: 243,
            sobolev_order: 10.0,
            ridge: 1e-2,
            ridge_power: 0.8,
            physics_weight: 10.0,
            penalty_nodes: 20_000,
            t_grid: log_grid(300, 100_000, 8),
            reps: 20,
            eval_len: 20_000,
            eval_trajectories: 1,
            burn_in_fraction: 0.25,
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// The effective configuration, defaults included, as TOML.
    pub fn echo(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("# could not serialize configuration: {e}"))
    }

    pub fn cube(&self) -> Result<Cube> {
        Cube::new(self.system.dim, self.system.half_width)
    }

    /// The true dynamics `f*` parsed from `system.fstar`.
    pub fn fstar(&self) -> Result<FnField> {
        let dim = self.system.dim;
        if self.system.fstar.len() != dim {
            return Err(Error::Config(format!(
                "system.fstar has {} expressions, expected {dim}",
                self.system.fstar.len()
            )));
        }
        let exprs: Vec<Expr> = self
            .system
            .fstar
            .iter()
            .map(|s| Expr::parse(s, dim))
            .collect::<Result<_>>()?;
        Ok(FnField::new(dim, dim, move |x: &[f64], out: &mut [f64]| {
            for (o, e) in out.iter_mut().zip(&exprs) {
                *o = e.eval(x);
            }
        }))
    }

    pub fn system(&self) -> Result<DynSystem> {
        let cube = self.cube()?;
        let init = match self.system.initial.as_str() {
            "dirac" => InitialLaw::Dirac(self.system.x0.clone().unwrap_or_else(|| vec![0.0; self.system.dim])),
            "uniform" => InitialLaw::UniformCube,
            other => return Err(Error::Config(format!("system.initial must be 'dirac' or 'uniform', got '{other}'"))),
        };
        if let InitialLaw::Dirac(x0) = &init {
            if x0.len() != self.system.dim {
                return Err(Error::Config("system.x0 must have one entry per dimension".into()));
            }
        }
        DynSystem::new(Arc::new(self.fstar()?), cube, self.system.noise_std, init).map_err(config_error)
    }

    pub fn basis(&self) -> Result<Arc<FourierBasis>> {
        Ok(Arc::new(FourierBasis::new(self.cube()?, self.estimator.basis_size)?))
    }

    pub fn operator(&self) -> Result<LinearDiffOp> {
        let dim = self.system.dim;
        if self.operator.terms.is_empty() {
            return Ok(LinearDiffOp::laplacian(dim, dim));
        }
        let terms = self
            .operator
            .terms
            .iter()
            .map(|t| {
                if t.output == 0 || t.output > dim {
                    return Err(Error::Config(format!("operator term output {} outside 1..={dim}", t.output)));
                }
                let coeff = match &t.coeff {
                    CoeffSpec::Number(v) => Coefficient::Constant(*v),
                    CoeffSpec::Expression(s) => Coefficient::Expression(Expr::parse(s, dim)?),
                };
                Ok(OperatorTerm {
                    output: t.output - 1,
                    alpha: t.alpha.clone(),
                    coeff,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let order = self
            .operator
            .order
            .unwrap_or_else(|| terms.iter().map(|t| t.alpha.iter().sum::<u32>()).max().unwrap_or(0));
        LinearDiffOp::new(dim, dim, order, terms).map_err(config_error)
    }

    pub fn measure(&self) -> Result<RegularizerMeasure> {
        let quadrature = self
            .regularizer
            .nodes_per_axis
            .map_or(QuadratureSpec::Default, QuadratureSpec::NodesPerAxis);
        match self.regularizer.measure.as_str() {
            "input_cube" => Ok(RegularizerMeasure::input_cube(&self.cube()?, quadrature)),
            "medium_cube" => Ok(RegularizerMeasure::MediumCube { quadrature }),
            other => Err(Error::Config(format!(
                "regularizer.measure must be 'input_cube' or 'medium_cube', got '{other}'"
            ))),
        }
    }

    /// Estimator with the configured physics penalty (weights set per use).
    pub fn estimator(&self) -> Result<PreparedEstimator> {
        let cfg = FitConfig {
            basis: self.basis()?,
            sobolev_order: self.estimator.sobolev_order,
            ridge: self.estimator.ridge,
            physics_weight: self.estimator.physics_weight,
            penalty: PhysicsPenalty::Operator {
                op: self.operator()?,
                measure: self.measure()?,
            },
        };
        PreparedEstimator::new(cfg, self.system.dim)
    }

    /// Theory parameters for an experiment with the given dimensions.
    pub fn problem_params(&self, sobolev_order: f64, dx: usize, dy: usize, half_width: f64, noise_std: f64) -> Result<ProblemParams> {
        let t = &self.theory;
        if sobolev_order.fract() != 0.0 || sobolev_order < 1.0 {
            return Err(Error::Config(format!("theory needs an integer Sobolev order, got {sobolev_order}")));
        }
        let params = ProblemParams {
            s: sobolev_order as u32,
            dx: dx as u32,
            dy: dy as u32,
            sigma_w: t.sigma_w.unwrap_or(noise_std * noise_std),
            theta: t.theta,
            persistence: t.persistence,
            rho_tilde: t.rho_tilde,
            c_c: t.c_c,
            c_c_prime: t.c_c_prime,
            rho_f: t.rho_f,
            c_h_factor: t.c_h_factor,
            sup_bound: t.sup_bound,
            delta: t.delta,
            half_width,
        };
        params.validate().map_err(config_error)?;
        Ok(params)
    }

    /// Theory parameters of the configured dynamical system.
    pub fn system_params(&self) -> Result<ProblemParams> {
        self.problem_params(
            self.estimator.sobolev_order,
            self.system.dim,
            self.system.dim,
            self.system.half_width,
            self.system.noise_std,
        )
    }

    pub fn effective_r_fstar(&self) -> f64 {
        self.theory.r_fstar.max(self.theory.r_fstar_floor)
    }

    fn overlays(&self, params: Result<ProblemParams>) -> (Overlay, Overlay) {
        match params {
            Ok(params) => (
                Overlay::Regularized {
                    params: params.clone(),
                    r_fstar: self.effective_r_fstar(),
                },
                Overlay::Unregularized { params },
            ),
            Err(e) => {
                log::warn!("theory overlay disabled: {e}");
                (Overlay::None, Overlay::None)
            }
        }
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            t_grid: self.sweep.t_grid.clone(),
            reps: self.sweep.reps,
            seed: self.seed,
            eval_len: self.sweep.eval_len,
            eval_trajectories: self.sweep.eval_trajectories,
            burn_in_fraction: self.sweep.burn_in_fraction,
        }
    }

    /// The regularized and unregularized arms of the rate sweep.
    pub fn sweep_arms(&self) -> Result<Vec<Arm>> {
        let est = self.estimator()?;
        let (reg_overlay, unreg_overlay) = self.overlays(self.system_params());
        Ok(vec![
            Arm {
                name: "regularized".into(),
                estimator: est.clone(),
                ridge: self.estimator.ridge,
                ridge_power: self.estimator.ridge_power,
                physics_weight: self.estimator.physics_weight,
                overlay: reg_overlay,
            },
            Arm {
                name: "unregularized".into(),
                estimator: est,
                ridge: self.estimator.ridge,
                ridge_power: self.estimator.ridge_power,
                physics_weight: 0.0,
                overlay: unreg_overlay,
            },
        ])
    }

    pub fn unicycle_model(&self) -> Result<Unicycle> {
        let u = &self.unicycle;
        let model = Unicycle {
            dt: u.dt,
            noise_std: u.noise_std,
            speed: (u.speed[0], u.speed[1]),
            turn_rate: (u.turn_rate[0], u.turn_rate[1]),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn unicycle_sweep_config(&self) -> SweepConfig {
        let u = &self.unicycle;
        SweepConfig {
            t_grid: u.t_grid.clone(),
            reps: u.reps,
            seed: self.seed,
            eval_len: u.eval_len,
            eval_trajectories: u.eval_trajectories,
            burn_in_fraction: u.burn_in_fraction,
        }
    }

    /// Unicycle arms: the regularized one adds the Monte Carlo non-slip
    /// penalty to the same Sobolev ridge.
    pub fn unicycle_arms(&self, model: &Unicycle) -> Result<Vec<Arm>> {
        let u = &self.unicycle;
        let basis = Arc::new(FourierBasis::new(Cube::new(crate::harness::UNICYCLE_FEATURES, 1.0)?, u.basis_size)?);
        let q = model.nonslip_penalty_matrix(&basis, u.penalty_nodes, self.seed)?;
        let make = |penalty| {
            PreparedEstimator::new(
                FitConfig {
                    basis: Arc::clone(&basis),
                    sobolev_order: u.sobolev_order,
                    ridge: u.ridge,
                    physics_weight: u.physics_weight,
                    penalty,
                },
                3,
            )
        };
        let params = self.problem_params(u.sobolev_order, crate::harness::UNICYCLE_FEATURES, 3, 1.0, u.noise_std);
        let (reg_overlay, unreg_overlay) = self.overlays(params);
        Ok(vec![
            Arm {
                name: "regularized".into(),
                estimator: make(PhysicsPenalty::Coupled(q))?,
                ridge: u.ridge,
                ridge_power: u.ridge_power,
                physics_weight: u.physics_weight,
                overlay: reg_overlay,
            },
            Arm {
                name: "unregularized".into(),
                estimator: make(PhysicsPenalty::None)?,
                ridge: u.ridge,
                ridge_power: u.ridge_power,
                physics_weight: 0.0,
                overlay: unreg_overlay,
            },
        ])
    }

    pub fn chain(&self) -> Result<Option<(FiniteChain, usize)>> {
        let Some(c) = &self.chain else { return Ok(None) };
        let n = (c.transition.len() as f64).sqrt().round() as usize;
        if n * n != c.transition.len() || n == 0 {
            return Err(Error::Config(format!(
                "chain.transition has {} entries, not a square count",
                c.transition.len()
            )));
        }
        let chain = match &c.initial {
            Some(init) => FiniteChain::new(n, c.transition.clone(), init.clone()),
            None => FiniteChain::with_uniform_start(n, c.transition.clone()),
        }
        .map_err(config_error)?;
        Ok(Some((chain, c.horizon)))
    }
}

/// Validation failures of configured objects are configuration errors.
fn config_error(e: Error) -> Error {
    match e {
        Error::Domain(m) | Error::Dimension(m) => Error::Config(m),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = Config::default();
        let back = Config::parse(&cfg.echo()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn operator_terms_accept_numbers_and_expressions() {
        let cfg = Config::parse(
            r#"
            [system]
            dim = 2
            fstar = ["0.5*x1", "0.5*x2"]
            [operator]
            terms = [
              { output = 1, alpha = [2, 0], coeff = 1.0 },
              { output = 1, alpha = [0, 2], coeff = "1 + 0.1*sin(x2)" },
              { output = 2, alpha = [1, 1], coeff = 2 },
            ]
            "#,
        )
        .unwrap();
        let op = cfg.operator().unwrap();
        assert_eq!(op.order(), 2);
        assert!(!op.has_constant_coefficients());
        assert_eq!(op.terms()[2].output, 1);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        assert!(matches!(Config::parse("sede = 3"), Err(Error::Config(_))));
        let cfg = Config::parse("[regularizer]\nmeasure = \"sphere\"").unwrap();
        assert!(matches!(cfg.measure(), Err(Error::Config(_))));
        let cfg = Config::parse("[system]\nfstar = [\"2*x1\"]").unwrap();
        assert!(matches!(cfg.system(), Err(Error::Config(_))));
        let cfg = Config::parse("[chain]\ntransition = [0.5, 0.5, 1.0]").unwrap();
        assert!(matches!(cfg.chain(), Err(Error::Config(_))));
    }

    #[test]
    fn chain_is_row_major() {
        let cfg = Config::parse("[chain]\ntransition = [1.0, 0.0, 0.25, 0.75]\nhorizon = 3").unwrap();
        let (chain, horizon) = cfg.chain().unwrap().unwrap();
        assert_eq!(chain.n_states(), 2);
        assert_eq!(horizon, 3);
    }
}
