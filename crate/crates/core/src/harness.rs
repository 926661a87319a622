//! Experiment orchestration: rate sweeps comparing a physics-regularized
//! arm against an unregularized one, log-log slope fits, the unicycle
//! experiment, and report emission (CSV, SVG, manifest).
//!
//! Every `(T, rep)` cell draws its training data from a stream derived from
//! the master seed and the cell coordinates, so reports do not depend on
//! the number of worker threads.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::data_process::{simulate, DynSystem};
use crate::error::{Error, Result};
use crate::estimator::{DesignMoments, PreparedEstimator};
use crate::field::VectorField;
use crate::fourier_space::FourierBasis;
use crate::seeding;
use crate::theory_bounds::{noreg_rate, rate_bound_prob, BoundKind, NamedConstant, ProblemParams};

/// Stream tags separating the roles of random draws.
const TAG_TRAIN: u64 = 1;
const TAG_EVAL: u64 = 2;
const TAG_PENALTY: u64 = 3;

/// Two-sided 95% normal quantile used for cell confidence intervals.
const Z_95: f64 = 1.959_963_984_540_054;

/// Inputs and targets, row-major.
#[derive(Debug, Clone, Default)]
pub struct Sample {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
}

/// Where training and evaluation data come from.
pub trait DataSource: Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    /// `len` noisy training pairs.
    fn training(&self, len: usize, rng: &mut ChaCha8Rng) -> Sample;
    /// Fresh inputs paired with the noiseless targets `f*(x)`.
    fn evaluation(&self, len: usize, n_traj: usize, seed: u64) -> Result<Sample>;
}

/// Data from one trajectory of an autonomous system per training set.
#[derive(Debug, Clone)]
pub struct SystemSource(pub DynSystem);

impl DataSource for SystemSource {
    fn input_dim(&self) -> usize {
        self.0.cube().dim()
    }

    fn output_dim(&self) -> usize {
        self.0.cube().dim()
    }

    fn training(&self, len: usize, rng: &mut ChaCha8Rng) -> Sample {
        let tr = self.0.trajectory(len, rng);
        Sample {
            inputs: tr.raw_inputs().to_vec(),
            targets: tr.raw_targets().to_vec(),
        }
    }

    fn evaluation(&self, len: usize, n_traj: usize, seed: u64) -> Result<Sample> {
        let data = simulate(&self.0, len, n_traj, seed)?;
        let fstar = self.0.fstar();
        let mut out = Sample::default();
        let mut y = vec![0.0; fstar.out_dim()];
        for x in data.inputs() {
            fstar.eval_into(x, &mut y);
            out.inputs.extend_from_slice(x);
            out.targets.extend_from_slice(&y);
        }
        Ok(out)
    }
}

/// Euler-discretized unicycle with state `(x1, x2, heading)` and input
/// `(speed, turn rate)`.
///
/// The learned map sends normalized features of `(state, input)` in
/// `[-1, 1]^5` to the state increment. Positions live in `[-1, 1]^2` and the
/// heading in `[0, pi/2]`; a trajectory restarts from a uniform state when
/// the next state leaves that box. Inputs are uniform on the configured box
/// and observations of the increment carry Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Unicycle {
    pub dt: f64,
    pub noise_std: f64,
    pub speed: (f64, f64),
    pub turn_rate: (f64, f64),
}

impl Default for Unicycle {
    fn default() -> Self {
        Self {
            dt: 0.05,
            noise_std: 1.0,
            speed: (0.0, 1.0),
            turn_rate: (-1.0, 1.0),
        }
    }
}

pub const UNICYCLE_FEATURES: usize = 5;

impl Unicycle {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.noise_std >= 0.0) {
            return Err(Error::Config("unicycle dt must be positive and noise_std non-negative".into()));
        }
        if !(self.speed.1 > self.speed.0) || !(self.turn_rate.1 > self.turn_rate.0) {
            return Err(Error::Config("unicycle input ranges must be non-empty".into()));
        }
        Ok(())
    }

    /// Lebesgue measure of the state-input box.
    pub fn box_volume(&self) -> f64 {
        4.0 * FRAC_PI_2 * (self.speed.1 - self.speed.0) * (self.turn_rate.1 - self.turn_rate.0)
    }

    pub fn features(&self, state: &[f64; 3], input: &[f64; 2]) -> [f64; UNICYCLE_FEATURES] {
        let scale = |v: f64, (lo, hi): (f64, f64)| 2.0 * (v - lo) / (hi - lo) - 1.0;
        [
            state[0],
            state[1],
            scale(state[2], (0.0, FRAC_PI_2)),
            scale(input[0], self.speed),
            scale(input[1], self.turn_rate),
        ]
    }

    /// Inverse of [`Unicycle::features`].
    pub fn decode(&self, xi: &[f64]) -> ([f64; 3], [f64; 2]) {
        let unscale = |v: f64, (lo, hi): (f64, f64)| lo + (v + 1.0) * (hi - lo) / 2.0;
        (
            [xi[0], xi[1], unscale(xi[2], (0.0, FRAC_PI_2))],
            [unscale(xi[3], self.speed), unscale(xi[4], self.turn_rate)],
        )
    }

    /// Noiseless increment `dt (v cos th, v sin th, omega)`.
    pub fn increment(&self, state: &[f64; 3], input: &[f64; 2]) -> [f64; 3] {
        let (s, c) = state[2].sin_cos();
        [self.dt * input[0] * c, self.dt * input[0] * s, self.dt * input[1]]
    }

    fn random_state(&self, rng: &mut ChaCha8Rng) -> [f64; 3] {
        [
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
            rng.random_range(0.0..=FRAC_PI_2),
        ]
    }

    fn random_input(&self, rng: &mut ChaCha8Rng) -> [f64; 2] {
        [
            rng.random_range(self.speed.0..=self.speed.1),
            rng.random_range(self.turn_rate.0..=self.turn_rate.1),
        ]
    }

    fn in_box(state: &[f64; 3]) -> bool {
        state[0].abs() <= 1.0 && state[1].abs() <= 1.0 && (0.0..=FRAC_PI_2).contains(&state[2])
    }

    /// A trajectory of `len` steps: features and noisy (or clean) increments.
    pub fn rollout(&self, len: usize, rng: &mut ChaCha8Rng, noisy: bool) -> Sample {
        let mut out = Sample {
            inputs: Vec::with_capacity(len * UNICYCLE_FEATURES),
            targets: Vec::with_capacity(len * 3),
        };
        let mut state = self.random_state(rng);
        for _ in 0..len {
            let input = self.random_input(rng);
            let h = self.increment(&state, &input);
            out.inputs.extend_from_slice(&self.features(&state, &input));
            for v in h {
                let w: f64 = if noisy {
                    let z: f64 = StandardNormal.sample(rng);
                    self.noise_std * z
                } else {
                    0.0
                };
                out.targets.push(v + w);
            }
            let next = [state[0] + h[0], state[1] + h[1], state[2] + h[2]];
            state = if Self::in_box(&next) { next } else { self.random_state(rng) };
        }
        out
    }

    /// Uniform draws of `(state, input)` as feature rows.
    pub fn uniform_nodes(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n)
            .flat_map(|_| {
                let s = self.random_state(rng);
                let u = self.random_input(rng);
                self.features(&s, &u)
            })
            .collect()
    }

    /// Quadratic form `Q` on the stacked coefficients `(z_1, z_2, z_3)` with
    /// `z^T Q z` equal to the Monte Carlo estimate of the squared lateral
    /// velocity integrated over the state-input box, for `n_nodes` uniform
    /// nodes.
    pub fn nonslip_penalty_matrix(&self, basis: &FourierBasis, n_nodes: usize, seed: u64) -> Result<DMatrix<f64>> {
        if basis.dim() != UNICYCLE_FEATURES {
            return Err(Error::Dimension(format!("unicycle basis must be {UNICYCLE_FEATURES}-dimensional")));
        }
        if n_nodes == 0 {
            return Err(Error::Config("non-slip penalty needs at least one node".into()));
        }
        let m = basis.size();
        let mut rng = seeding::stream(seed, &[TAG_PENALTY]);
        let nodes = self.uniform_nodes(n_nodes, &mut rng);
        let phi = basis.design_matrix(&nodes);
        let mut a = DMatrix::zeros(n_nodes, 2 * m);
        for (r, xi) in nodes.chunks_exact(UNICYCLE_FEATURES).enumerate() {
            let (state, _) = self.decode(xi);
            let (s, c) = state[2].sin_cos();
            for j in 0..m {
                a[(r, j)] = -s * phi[(r, j)];
                a[(r, m + j)] = c * phi[(r, j)];
            }
        }
        let block = a.tr_mul(&a) * (self.box_volume() / n_nodes as f64);
        let mut q = DMatrix::zeros(3 * m, 3 * m);
        q.view_mut((0, 0), (2 * m, 2 * m)).copy_from(&block);
        Ok(q)
    }
}

/// Lateral velocity `h_2 cos th - h_1 sin th` of an increment `h` at heading `th`.
pub fn nonslip_residual(heading: f64, h: &[f64]) -> f64 {
    let (s, c) = heading.sin_cos();
    h[1] * c - h[0] * s
}

/// Monte Carlo estimate of the non-slip penalty of a field on features,
/// with its standard error.
pub fn nonslip_penalty_mc(model: &Unicycle, field: &dyn VectorField, n_nodes: usize, seed: u64) -> Result<(f64, f64)> {
    if field.in_dim() != UNICYCLE_FEATURES || field.out_dim() < 2 || n_nodes < 2 {
        return Err(Error::Dimension("non-slip penalty needs a field R^5 -> R^3 and two nodes".into()));
    }
    let mut rng = seeding::stream(seed, &[TAG_PENALTY]);
    let nodes = model.uniform_nodes(n_nodes, &mut rng);
    let mut h = vec![0.0; field.out_dim()];
    let values: Vec<f64> = nodes
        .chunks_exact(UNICYCLE_FEATURES)
        .map(|xi| {
            field.eval_into(xi, &mut h);
            let (state, _) = model.decode(xi);
            nonslip_residual(state[2], &h).powi(2)
        })
        .collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let vol = model.box_volume();
    Ok((vol * mean, vol * (var / n).sqrt()))
}

/// Truth of the unicycle in feature coordinates, as a vector field.
#[derive(Debug, Clone)]
pub struct UnicycleTruth(pub Unicycle);

impl VectorField for UnicycleTruth {
    fn in_dim(&self) -> usize {
        UNICYCLE_FEATURES
    }

    fn out_dim(&self) -> usize {
        3
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let (s, u) = self.0.decode(x);
        out.copy_from_slice(&self.0.increment(&s, &u));
    }
}

impl DataSource for Unicycle {
    fn input_dim(&self) -> usize {
        UNICYCLE_FEATURES
    }

    fn output_dim(&self) -> usize {
        3
    }

    fn training(&self, len: usize, rng: &mut ChaCha8Rng) -> Sample {
        self.rollout(len, rng, true)
    }

    fn evaluation(&self, len: usize, n_traj: usize, seed: u64) -> Result<Sample> {
        let mut out = Sample::default();
        for j in 0..n_traj {
            let mut rng = seeding::stream(seed, &[j as u64]);
            let s = self.rollout(len, &mut rng, false);
            out.inputs.extend(s.inputs);
            out.targets.extend(s.targets);
        }
        Ok(out)
    }
}

/// Theoretical curve drawn next to an arm.
#[derive(Debug, Clone)]
pub enum Overlay {
    None,
    /// In-probability rate with physics regularization at alignment `r_fstar`.
    Regularized { params: ProblemParams, r_fstar: f64 },
    /// In-probability rate without physics regularization.
    Unregularized { params: ProblemParams },
}

impl Overlay {
    fn bound(&self, t: f64) -> Result<Option<f64>> {
        Ok(match self {
            Overlay::None => None,
            Overlay::Regularized { params, r_fstar } => Some(rate_bound_prob(t, *r_fstar, params)?.bound),
            Overlay::Unregularized { params } => Some(noreg_rate(t, BoundKind::Probability, params)?.bound),
        })
    }

    fn burn_in(&self, t: f64) -> Result<Option<f64>> {
        Ok(match self {
            Overlay::None => None,
            Overlay::Regularized { params, r_fstar } => Some(rate_bound_prob(t, *r_fstar, params)?.burn_in),
            Overlay::Unregularized { params } => Some(noreg_rate(t, BoundKind::Probability, params)?.burn_in),
        })
    }

    fn audit(&self, t: f64) -> Result<Vec<NamedConstant>> {
        Ok(match self {
            Overlay::None => Vec::new(),
            Overlay::Regularized { params, r_fstar } => rate_bound_prob(t, *r_fstar, params)?.audit(),
            Overlay::Unregularized { params } => noreg_rate(t, BoundKind::Probability, params)?.audit(),
        })
    }
}

/// One estimator configuration swept over `T`. The Sobolev ridge follows
/// `ridge * T^(-ridge_power)`; the physics weight is fixed.
#[derive(Debug, Clone)]
pub struct Arm {
    pub name: String,
    pub estimator: PreparedEstimator,
    pub ridge: f64,
    pub ridge_power: f64,
    pub physics_weight: f64,
    pub overlay: Overlay,
}

impl Arm {
    pub fn ridge_at(&self, t: usize) -> f64 {
        self.ridge * (t as f64).powf(-self.ridge_power)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub t_grid: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    /// Length and number of the fresh trajectories used to measure risk.
    pub eval_len: usize,
    pub eval_trajectories: usize,
    /// Fraction of the smallest grid points excluded from slope fits.
    pub burn_in_fraction: f64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_grid.len() < 4 {
            return Err(Error::Config(format!("T grid needs at least 4 points, got {}", self.t_grid.len())));
        }
        if self.t_grid.windows(2).any(|w| w[1] <= w[0]) || self.t_grid[0] == 0 {
            return Err(Error::Config("T grid must be positive and strictly increasing".into()));
        }
        if self.reps < 5 {
            return Err(Error::Config(format!("need at least 5 repetitions, got {}", self.reps)));
        }
        if self.eval_len == 0 || self.eval_trajectories == 0 {
            return Err(Error::Config("evaluation length and trajectory count must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(Error::Config("burn-in fraction must lie in [0, 1)".into()));
        }
        if self.t_grid.len() - self.burn_in_index() < 3 {
            return Err(Error::Config("fewer than 3 grid points remain after the burn-in".into()));
        }
        Ok(())
    }

    /// Index of the first grid point used in slope fits.
    pub fn burn_in_index(&self) -> usize {
        (self.burn_in_fraction * self.t_grid.len() as f64).floor() as usize
    }
}

/// Ordinary least squares on `(log T, log risk)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub std_err: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_points: usize,
}

pub fn slope_fit(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::Domain(format!("slope fit needs at least 3 points, got {}", points.len())));
    }
    if let Some((t, r)) = points.iter().find(|(t, r)| !(*t > 0.0 && *r > 0.0)) {
        return Err(Error::Domain(format!("slope fit needs positive values, got ({t}, {r})")));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("slope fit needs at least two distinct T values".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let std_err = (rss / (n - 2.0) / sxx).sqrt();
    let quantile = StudentsT::new(0.0, 1.0, n - 2.0)
        .map_err(|e| Error::Numerical(format!("t distribution: {e}")))?
        .inverse_cdf(0.975);
    Ok(SlopeFit {
        slope,
        intercept,
        std_err,
        ci_lo: slope - quantile * std_err,
        ci_hi: slope + quantile * std_err,
        n_points: points.len(),
    })
}

/// Aggregated risk of one arm at one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub t: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub n_ok: usize,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmReport {
    pub name: String,
    pub cells: Vec<CellStats>,
    pub slope: SlopeFit,
    /// Per-repetition risks, `risks[grid index][rep]` (NaN for failed fits).
    pub risks: Vec<Vec<f64>>,
    pub theory_burn_in: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub t: usize,
    pub rep: usize,
    pub arm: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub label: String,
    pub seed: u64,
    pub t_grid: Vec<usize>,
    pub burn_in_index: usize,
    pub arms: Vec<ArmReport>,
    pub failures: Vec<CellFailure>,
    /// Post-burn-in cells whose mean risk exceeds the theoretical overlay.
    pub findings: Vec<String>,
    pub audit: Vec<(String, NamedConstant)>,
    /// Effective configuration, echoed at the end of the manifest.
    pub config_echo: String,
}

impl RateReport {
    pub fn arm(&self, name: &str) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.name == name)
    }
}

/// Largest tolerated share of failed `(T, rep, arm)` fits.
const MAX_FAILURE_SHARE: f64 = 0.2;

/// Runs every arm on every `(T, rep)` cell. All arms of a cell see the same
/// training data and are scored against the same evaluation set.
pub fn rate_sweep(label: &str, cfg: &SweepConfig, source: &dyn DataSource, arms: &[Arm]) -> Result<RateReport> {
    cfg.validate()?;
    let basis = match arms.first() {
        Some(a) => Arc::clone(&a.estimator.config().basis),
        None => return Err(Error::Config("a sweep needs at least one arm".into())),
    };
    if arms.iter().any(|a| a.estimator.config().basis.size() != basis.size()) {
        return Err(Error::Config("all arms must share one basis".into()));
    }
    if basis.dim() != source.input_dim() {
        return Err(Error::Dimension("basis and data source dimensions differ".into()));
    }
    let (p, d) = (source.output_dim(), source.input_dim());
    let eval = source.evaluation(cfg.eval_len, cfg.eval_trajectories, seeding::derive_seed(cfg.seed, &[TAG_EVAL]))?;
    let eval_moments = DesignMoments::from_rows(&basis, eval.inputs.chunks_exact(d), eval.targets.chunks_exact(p), p);

    let cells: Vec<(usize, usize)> = (0..cfg.t_grid.len())
        .flat_map(|ti| (0..cfg.reps).map(move |rep| (ti, rep)))
        .collect();
    let outcomes: Vec<Vec<std::result::Result<f64, String>>> = cells
        .par_iter()
        .map(|&(ti, rep)| {
            let t = cfg.t_grid[ti];
            let mut rng = seeding::stream(cfg.seed, &[TAG_TRAIN, t as u64, rep as u64]);
            let sample = source.training(t, &mut rng);
            let moments = DesignMoments::from_rows(&basis, sample.inputs.chunks_exact(d), sample.targets.chunks_exact(p), p);
            arms.iter()
                .map(|arm| {
                    arm.estimator
                        .with_weights(arm.ridge_at(t), arm.physics_weight)
                        .and_then(|est| est.fit_moments(&moments))
                        .map(|fit| eval_moments.mean_sq_error(fit.coeffs.coeffs()))
                        .map_err(|e| e.to_string())
                })
                .collect()
        })
        .collect();

    let mut failures = Vec::new();
    let mut risks = vec![vec![vec![f64::NAN; cfg.reps]; cfg.t_grid.len()]; arms.len()];
    for (&(ti, rep), outcome) in cells.iter().zip(&outcomes) {
        for (ai, r) in outcome.iter().enumerate() {
            match r {
                Ok(v) => risks[ai][ti][rep] = *v,
                Err(message) => failures.push(CellFailure {
                    t: cfg.t_grid[ti],
                    rep,
                    arm: arms[ai].name.clone(),
                    message: message.clone(),
                }),
            }
        }
    }
    let total = (cells.len() * arms.len()) as f64;
    if failures.len() as f64 > MAX_FAILURE_SHARE * total {
        return Err(Error::Numerical(format!(
            "{} of {} fits failed; first failure: {}",
            failures.len(),
            total,
            failures[0].message
        )));
    }

    let burn = cfg.burn_in_index();
    let mut findings = Vec::new();
    let mut audit = Vec::new();
    let mut arm_reports = Vec::with_capacity(arms.len());
    for (ai, arm) in arms.iter().enumerate() {
        let mut cells_out = Vec::with_capacity(cfg.t_grid.len());
        for (ti, &t) in cfg.t_grid.iter().enumerate() {
            let ok: Vec<f64> = risks[ai][ti].iter().copied().filter(|v| v.is_finite()).collect();
            let n = ok.len();
            let mean = if n > 0 { ok.iter().sum::<f64>() / n as f64 } else { f64::NAN };
            let std_dev = if n > 1 {
                (ok.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
            } else {
                0.0
            };
            let half = Z_95 * std_dev / (n.max(1) as f64).sqrt();
            let bound = arm.overlay.bound(t as f64)?;
            if let Some(b) = bound {
                if ti >= burn && mean > b {
                    let msg = format!("arm {} at T = {t}: mean risk {mean:e} exceeds the bound {b:e}", arm.name);
                    log::warn!("{msg}");
                    findings.push(msg);
                }
            }
            cells_out.push(CellStats {
                t,
                mean,
                std_dev,
                n_ok: n,
                ci_lo: mean - half,
                ci_hi: mean + half,
                bound,
            });
        }
        let points: Vec<(f64, f64)> = cells_out[burn..].iter().map(|c| (c.t as f64, c.mean)).collect();
        let slope = slope_fit(&points)?;
        let t_max = *cfg.t_grid.last().expect("validated grid") as f64;
        audit.extend(arm.overlay.audit(t_max)?.into_iter().map(|c| (arm.name.clone(), c)));
        arm_reports.push(ArmReport {
            name: arm.name.clone(),
            cells: cells_out,
            slope,
            risks: risks[ai].clone(),
            theory_burn_in: arm.overlay.burn_in(t_max)?,
        });
    }
    Ok(RateReport {
        label: label.to_string(),
        seed: cfg.seed,
        t_grid: cfg.t_grid.clone(),
        burn_in_index: burn,
        arms: arm_reports,
        failures,
        findings,
        audit,
        config_echo: String::new(),
    })
}

/// `n` log-spaced integers from `lo` to `hi`, rounded and deduplicated.
pub fn log_grid(lo: usize, hi: usize, n: usize) -> Vec<usize> {
    if n < 2 || lo == 0 || hi <= lo {
        return vec![lo.max(1)];
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<usize> = (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp().round() as usize)
        .collect();
    out.dedup();
    out
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |b| format!("{b:e}"))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Writes `rates.csv`, `slopes.csv`, `plot.svg` and `manifest.txt` into `dir`.
pub fn emit_outputs(report: &RateReport, dir: &Path) -> Result<()> {
    if report.t_grid.len() < 4 || report.arms.is_empty() {
        return Err(Error::Domain("report needs at least 4 grid points and one arm".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;

    let mut rates = String::from("T,arm,mean,ci_lo,ci_hi,bound\n");
    for arm in &report.arms {
        for c in &arm.cells {
            let _ = writeln!(rates, "{},{},{:e},{:e},{:e},{}", c.t, arm.name, c.mean, c.ci_lo, c.ci_hi, fmt_opt(c.bound));
        }
    }
    write_file(&dir.join("rates.csv"), &rates)?;

    let mut slopes = String::from("arm,slope,ci_lo,ci_hi,std_err,intercept,n_points,t_min\n");
    for arm in &report.arms {
        let s = &arm.slope;
        let _ = writeln!(
            slopes,
            "{},{:e},{:e},{:e},{:e},{:e},{},{}",
            arm.name, s.slope, s.ci_lo, s.ci_hi, s.std_err, s.intercept, s.n_points, report.t_grid[report.burn_in_index]
        );
    }
    write_file(&dir.join("slopes.csv"), &slopes)?;
    write_file(&dir.join("plot.svg"), &render_svg(report))?;
    write_file(&dir.join("manifest.txt"), &render_manifest(report))?;
    Ok(())
}

fn render_manifest(report: &RateReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "experiment = {}", report.label);
    let _ = writeln!(out, "seed = {}", report.seed);
    let _ = writeln!(
        out,
        "t_grid = [{}]",
        report.t_grid.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", ")
    );
    let _ = writeln!(out, "slope_fit_from_T = {}", report.t_grid[report.burn_in_index]);
    let _ = writeln!(out, "\n[results]");
    for arm in &report.arms {
        let s = &arm.slope;
        let _ = writeln!(out, "{}.slope = {:.6} (95% CI {:.6} .. {:.6})", arm.name, s.slope, s.ci_lo, s.ci_hi);
        if let Some(b) = arm.theory_burn_in {
            let _ = writeln!(out, "{}.theory_burn_in_T = {b:e}", arm.name);
        }
    }
    let _ = writeln!(out, "failed_fits = {}", report.failures.len());
    for f in &report.failures {
        let _ = writeln!(out, "  failure: arm {} T {} rep {}: {}", f.arm, f.t, f.rep, f.message);
    }
    let _ = writeln!(out, "bound_violations = {}", report.findings.len());
    for f in &report.findings {
        let _ = writeln!(out, "  finding: {f}");
    }
    let _ = writeln!(out, "\n[constants]");
    for (arm, c) in &report.audit {
        let _ = writeln!(out, "{arm}.{} = {:e}    # {}", c.name, c.value, c.formula);
    }
    if !report.config_echo.is_empty() {
        let _ = writeln!(out, "\n# effective configuration\n{}", report.config_echo);
    }
    out
}

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Log-log plot of mean risk with CI bands; overlays are dashed and clipped
/// to the plotting area.
fn render_svg(report: &RateReport) -> String {
    let (w, h) = (720.0, 480.0);
    let (left, right, top, bottom) = (80.0, 170.0, 30.0, 60.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let positive = |v: f64| v.is_finite() && v > 0.0;
    let ys: Vec<f64> = report
        .arms
        .iter()
        .flat_map(|a| a.cells.iter().flat_map(|c| [c.mean, c.ci_lo, c.ci_hi]))
        .filter(|v| positive(*v))
        .collect();
    let ymin = ys.iter().copied().fold(f64::INFINITY, f64::min).log10().floor();
    let ymax = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max).log10().ceil();
    let (ymin, ymax) = if ymin.is_finite() && ymax > ymin { (ymin, ymax) } else { (-1.0, 0.0) };
    let xmin = (report.t_grid[0] as f64).log10();
    let xmax = (*report.t_grid.last().expect("non-empty grid") as f64).log10();
    let sx = |t: f64| left + (t.log10() - xmin) / (xmax - xmin) * pw;
    let sy = |v: f64| top + (ymax - v.log10()) / (ymax - ymin) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<defs><clipPath id="area"><rect x="{left}" y="{top}" width="{pw}" height="{ph}"/></clipPath></defs>"#
    );
    let _ = writeln!(
        s,
        r##"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
    );
    for e in (ymin as i32)..=(ymax as i32) {
        let y = sy(10f64.powi(e));
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{e}</text>"##,
            left + pw,
            left - 6.0,
            y + 4.0
        );
    }
    for &t in &report.t_grid {
        let x = sx(t as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{t}</text>"##,
            top + ph,
            top + ph + 5.0,
            top + ph + 20.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">T (log scale)</text>"#,
        left + pw / 2.0,
        h - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">excess risk (log scale)</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );
    let _ = writeln!(s, r#"<g clip-path="url(#area)">"#);
    for (ai, arm) in report.arms.iter().enumerate() {
        let color = PALETTE[ai % PALETTE.len()];
        let valid: Vec<&CellStats> = arm.cells.iter().filter(|c| positive(c.mean)).collect();
        let band: Vec<String> = valid
            .iter()
            .map(|c| format!("{:.2},{:.2}", sx(c.t as f64), sy(c.ci_hi.max(1e-300))))
            .chain(valid.iter().rev().map(|c| {
                let lo = if positive(c.ci_lo) { c.ci_lo } else { 10f64.powf(ymin) };
                format!("{:.2},{:.2}", sx(c.t as f64), sy(lo))
            }))
            .collect();
        let _ = writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, band.join(" "));
        let line: Vec<String> = valid.iter().map(|c| format!("{:.2},{:.2}", sx(c.t as f64), sy(c.mean))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
        for c in &valid {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                sx(c.t as f64),
                sy(c.mean)
            );
        }
        let bounds: Vec<String> = arm
            .cells
            .iter()
            .filter_map(|c| c.bound.filter(|b| positive(*b)).map(|b| format!("{:.2},{:.2}", sx(c.t as f64), sy(b))))
            .collect();
        if !bounds.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-dasharray="6 4"/>"#,
                bounds.join(" ")
            );
        }
    }
    let _ = writeln!(s, "</g>");
    for (ai, arm) in report.arms.iter().enumerate() {
        let color = PALETTE[ai % PALETTE.len()];
        let y = top + 20.0 + 40.0 * ai as f64;
        let x = left + pw + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text><text x="{:.2}" y="{:.2}">slope {:.3}</text>"#,
            x + 20.0,
            x + 26.0,
            y + 4.0,
            arm.name,
            x + 26.0,
            y + 20.0,
            arm.slope.slope
        );
    }
    let _ = writeln!(s, "</svg>");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn slope_fit_exact_power_laws() {
        let pts: Vec<(f64, f64)> = [10.0, 100.0, 1000.0, 1e4].iter().map(|&t| (t, 1.0 / t)).collect();
        let f = slope_fit(&pts).unwrap();
        assert_relative_eq!(f.slope, -1.0, epsilon = 1e-12);
        assert!(f.std_err < 1e-12);
        let pts: Vec<(f64, f64)> = [10.0_f64, 20.0, 40.0].iter().map(|&t| (t, 7.3 * t.powf(-0.8))).collect();
        assert_relative_eq!(slope_fit(&pts).unwrap().slope, -0.8, epsilon = 1e-12);
        assert!(slope_fit(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
        assert!(slope_fit(&[(1.0, 1.0), (2.0, 1.0)]).is_err());
    }

    #[test]
    fn sweep_config_validation() {
        let mut cfg = SweepConfig {
            t_grid: vec![10, 20, 40, 80],
            reps: 5,
            seed: 0,
            eval_len: 10,
            eval_trajectories: 2,
            burn_in_fraction: 0.25,
        };
        assert!(cfg.validate().is_ok());
        cfg.t_grid = vec![100];
        assert!(cfg.validate().is_err());
        cfg.t_grid = vec![10, 20, 20, 80];
        assert!(cfg.validate().is_err());
        cfg.t_grid = vec![10, 20, 40, 80];
        cfg.reps = 4;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(300, 100_000, 8);
        assert_eq!(g[0], 300);
        assert_eq!(*g.last().unwrap(), 100_000);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn unicycle_truth_has_no_lateral_velocity() {
        let model = Unicycle::default();
        let (value, se) = nonslip_penalty_mc(&model, &UnicycleTruth(model.clone()), 500, 3).unwrap();
        assert!(value.abs() < 1e-28 && se < 1e-28);
        let xi = model.features(&[0.2, -0.3, 0.7], &[0.5, -0.2]);
        let (s, u) = model.decode(&xi);
        assert_relative_eq!(s[2], 0.7, epsilon = 1e-15);
        assert_relative_eq!(u[1], -0.2, epsilon = 1e-15);
    }

    #[test]
    fn rollout_stays_in_box() {
        let model = Unicycle::default();
        let mut rng = seeding::stream(5, &[0]);
        let s = model.rollout(2000, &mut rng, false);
        assert!(s.inputs.iter().all(|v| v.abs() <= 1.0 + 1e-12));
        assert_eq!(s.targets.len(), 6000);
    }
}
