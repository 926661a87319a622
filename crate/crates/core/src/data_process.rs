//! Trajectory generation for `X_{t+1} = f*(X_t) + W_t`, exact dependence
//! matrices of small finite-state chains, and Monte Carlo probes of the
//! persistence and small-ball conditions.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::fourier_space::Cube;
use crate::linalg::spectral_norm;
use crate::quadrature::TensorGrid;
use crate::seeding;

/// One trajectory: inputs `X_t`, targets `Y_t`, and optionally the noise
/// `W_t = Y_t - f*(X_t)` that produced them. Arrays are row-major.
#[derive(Debug, Clone)]
pub struct Trajectory {
    input_dim: usize,
    output_dim: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
    noise: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn new(input_dim: usize, output_dim: usize, inputs: Vec<f64>, targets: Vec<f64>, noise: Option<Vec<f64>>) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::Dimension("trajectory dimensions must be positive".into()));
        }
        let len = inputs.len() / input_dim;
        if !inputs.len().is_multiple_of(input_dim) || targets.len() != len * output_dim {
            return Err(Error::Dimension("inputs and targets have inconsistent lengths".into()));
        }
        if noise.as_ref().is_some_and(|w| w.len() != targets.len()) {
            return Err(Error::Dimension("noise and targets have different lengths".into()));
        }
        if inputs.iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::Domain("trajectory contains non-finite values".into()));
        }
        Ok(Self {
            input_dim,
            output_dim,
            inputs,
            targets,
            noise,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.input_dim
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> std::slice::ChunksExact<'_, f64> {
        self.inputs.chunks_exact(self.input_dim)
    }

    pub fn targets(&self) -> std::slice::ChunksExact<'_, f64> {
        self.targets.chunks_exact(self.output_dim)
    }

    pub fn input(&self, t: usize) -> &[f64] {
        &self.inputs[t * self.input_dim..(t + 1) * self.input_dim]
    }

    pub fn target(&self, t: usize) -> &[f64] {
        &self.targets[t * self.output_dim..(t + 1) * self.output_dim]
    }

    pub fn raw_inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn raw_targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn noise(&self) -> Option<&[f64]> {
        self.noise.as_deref()
    }
}

/// A collection of trajectories sharing input and output dimensions.
#[derive(Debug, Clone)]
pub struct TrajectoryDataset {
    input_dim: usize,
    output_dim: usize,
    trajectories: Vec<Trajectory>,
}

impl TrajectoryDataset {
    pub fn new(trajectories: Vec<Trajectory>) -> Result<Self> {
        let first = trajectories
            .first()
            .ok_or_else(|| Error::Domain("dataset needs at least one trajectory".into()))?;
        let (input_dim, output_dim) = (first.input_dim, first.output_dim);
        if trajectories.iter().any(|t| t.input_dim != input_dim || t.output_dim != output_dim) {
            return Err(Error::Dimension("trajectories disagree on dimensions".into()));
        }
        Ok(Self {
            input_dim,
            output_dim,
            trajectories,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    /// Total number of samples over all trajectories.
    pub fn total_len(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    pub fn inputs(&self) -> impl Iterator<Item = &[f64]> {
        self.trajectories.iter().flat_map(|t| t.inputs())
    }

    pub fn targets(&self) -> impl Iterator<Item = &[f64]> {
        self.trajectories.iter().flat_map(|t| t.targets())
    }

    /// Concatenated noise, if every trajectory recorded it.
    pub fn noise(&self) -> Option<Vec<f64>> {
        let mut out = Vec::new();
        for t in &self.trajectories {
            out.extend_from_slice(t.noise()?);
        }
        Some(out)
    }
}

/// Law of `X_0`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialLaw {
    Dirac(Vec<f64>),
    UniformCube,
}

/// Autonomous system `X_{t+1} = f*(X_t) + W_t` on a cube, with Gaussian
/// noise of standard deviation `noise_std` per coordinate, truncated to a
/// symmetric interval that keeps the next state inside the cube.
#[derive(Clone)]
pub struct DynSystem {
    fstar: Arc<dyn VectorField>,
    cube: Cube,
    noise_std: f64,
    init: InitialLaw,
}

impl std::fmt::Debug for DynSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DynSystem")
            .field("cube", &self.cube)
            .field("noise_std", &self.noise_std)
            .field("init", &self.init)
            .finish_non_exhaustive()
    }
}

/// Truncation radius in units of the noise standard deviation.
pub const TRUNCATION_SIGMAS: f64 = 4.0;

impl DynSystem {
    /// Validates shapes, the initial law, and that `f*` maps a dense grid of
    /// the cube into the interior with margin at least the nominal
    /// truncation radius `4 * noise_std`.
    pub fn new(fstar: Arc<dyn VectorField>, cube: Cube, noise_std: f64, init: InitialLaw) -> Result<Self> {
        let d = cube.dim();
        if fstar.in_dim() != d || fstar.out_dim() != d {
            return Err(Error::Dimension(format!(
                "dynamics must map R^{d} to R^{d}, got R^{} -> R^{}",
                fstar.in_dim(),
                fstar.out_dim()
            )));
        }
        if !(noise_std.is_finite() && noise_std >= 0.0) {
            return Err(Error::Domain(format!("noise standard deviation must be >= 0, got {noise_std}")));
        }
        if let InitialLaw::Dirac(x0) = &init {
            if !cube.contains(x0) {
                return Err(Error::Domain(format!("initial state {x0:?} lies outside the cube")));
            }
        }
        let nodes = match d {
            1 => 201,
            2 => 41,
            3 => 15,
            _ => 5,
        };
        let grid = TensorGrid::cube(d, cube.half_width(), nodes)?;
        let margin = TRUNCATION_SIGMAS * noise_std;
        let mut y = vec![0.0; d];
        let corners = [-cube.half_width(), cube.half_width()];
        let corner_points = (0..(1usize << d.min(16))).map(|mask| (0..d).map(|j| corners[(mask >> j) & 1]).collect::<Vec<f64>>());
        for x in grid.iter().map(|(x, _)| x.to_vec()).chain(corner_points) {
            fstar.eval_into(&x, &mut y);
            let dist = cube.boundary_distance(&y);
            if !(dist > 0.0 && dist >= margin) {
                return Err(Error::Domain(format!(
                    "f* maps {x:?} to {y:?}, which is within {margin} of the cube boundary"
                )));
            }
        }
        Ok(Self {
            fstar,
            cube,
            noise_std,
            init,
        })
    }

    pub fn fstar(&self) -> &Arc<dyn VectorField> {
        &self.fstar
    }

    pub fn cube(&self) -> &Cube {
        &self.cube
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn init(&self) -> &InitialLaw {
        &self.init
    }

    fn initial_state(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match &self.init {
            InitialLaw::Dirac(x) => x.clone(),
            InitialLaw::UniformCube => {
                let l = self.cube.half_width();
                (0..self.cube.dim()).map(|_| rng.random_range(-l..=l)).collect()
            }
        }
    }

    /// One trajectory of length `len` from its own stream.
    pub fn trajectory(&self, len: usize, rng: &mut ChaCha8Rng) -> Trajectory {
        let d = self.cube.dim();
        let mut inputs = Vec::with_capacity(len * d);
        let mut targets = Vec::with_capacity(len * d);
        let mut noise = Vec::with_capacity(len * d);
        let mut x = self.initial_state(rng);
        let mut mean = vec![0.0; d];
        for _ in 0..len {
            self.fstar.eval_into(&x, &mut mean);
            let radius = (TRUNCATION_SIGMAS * self.noise_std).min(self.cube.boundary_distance(&mean).max(0.0));
            inputs.extend_from_slice(&x);
            for m in mean.iter_mut() {
                let w = truncated_normal(rng, self.noise_std, radius);
                noise.push(w);
                *m += w;
            }
            targets.extend_from_slice(&mean);
            std::mem::swap(&mut x, &mut mean);
        }
        Trajectory {
            input_dim: d,
            output_dim: d,
            inputs,
            targets,
            noise: Some(noise),
        }
    }
}

/// Centered normal with standard deviation `sd`, conditioned on
/// `|w| <= radius`. Uses normal proposals when the window is wide and
/// uniform proposals with Gaussian acceptance when it is narrow; both are
/// exact.
pub fn truncated_normal(rng: &mut ChaCha8Rng, sd: f64, radius: f64) -> f64 {
    if sd == 0.0 || radius <= 0.0 {
        return 0.0;
    }
    if radius >= 0.5 * sd {
        let normal = Normal::new(0.0, sd).expect("positive standard deviation");
        loop {
            let w: f64 = normal.sample(rng);
            if w.abs() <= radius {
                return w;
            }
        }
    }
    loop {
        let w = rng.random_range(-radius..=radius);
        let accept = (-0.5 * (w / sd).powi(2)).exp();
        if rng.random::<f64>() < accept {
            return w;
        }
    }
}

/// Simulates `n_traj` independent trajectories of length `len`. Trajectory
/// `j` draws from the stream derived from `(seed, j)`.
pub fn simulate(sys: &DynSystem, len: usize, n_traj: usize, seed: u64) -> Result<TrajectoryDataset> {
    if len == 0 || n_traj == 0 {
        return Err(Error::Domain("trajectory length and count must be positive".into()));
    }
    let trajectories: Vec<Trajectory> = (0..n_traj)
        .into_par_iter()
        .map(|j| {
            let mut rng = seeding::stream(seed, &[j as u64]);
            sys.trajectory(len, &mut rng)
        })
        .collect();
    TrajectoryDataset::new(trajectories)
}

/// Finite-state Markov chain given by a row-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteChain {
    n_states: usize,
    transition: Vec<f64>,
    initial: Vec<f64>,
}

impl FiniteChain {
    /// `transition` is row-major `n x n`; `initial` is the law of `X_0`.
    pub fn new(n_states: usize, transition: Vec<f64>, initial: Vec<f64>) -> Result<Self> {
        if n_states == 0 || transition.len() != n_states * n_states || initial.len() != n_states {
            return Err(Error::Dimension("chain arrays do not match the state count".into()));
        }
        let stochastic = |row: &[f64]| row.iter().all(|p| (0.0..=1.0).contains(p)) && (row.iter().sum::<f64>() - 1.0).abs() <= 1e-12;
        if !transition.chunks_exact(n_states).all(stochastic) || !stochastic(&initial) {
            return Err(Error::Domain("transition rows and initial law must be probability vectors".into()));
        }
        Ok(Self {
            n_states,
            transition,
            initial,
        })
    }

    /// Chain started from the uniform law.
    pub fn with_uniform_start(n_states: usize, transition: Vec<f64>) -> Result<Self> {
        Self::new(n_states, transition, vec![1.0 / n_states as f64; n_states])
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    fn p(&self, from: usize, to: usize) -> f64 {
        self.transition[from * self.n_states + to]
    }
}

#[derive(Debug, Clone)]
pub struct DependenceMatrix {
    /// Lower-triangular with unit diagonal; entry `(s, e)` for `s > e`
    /// measures how far conditioning on the prefix `X_0..X_e` moves the law
    /// of the suffix `X_s..X_{T-1}`.
    pub gamma: DMatrix<f64>,
    pub norm2: f64,
}

/// Largest number of sample paths enumerated by [`dependence_matrix_finite`].
pub const MAX_ENUMERATED_PATHS: f64 = 1e6;

/// Total-variation values below this are treated as exact zeros; they only
/// arise from rounding when prefix and suffix are independent.
const TV_ZERO: f64 = 1e-14;

/// Exact dependence matrix of the first `horizon` states of `chain`.
///
/// Entry `(s, e)`, `s > e`, is `sqrt(2 * sup_A TV(P(suffix | A), P(suffix)))`
/// where `A` ranges over prefix events of positive probability. Total
/// variation is convex in its first argument, so the supremum over events is
/// attained at single prefix paths, which are enumerated exhaustively.
pub fn dependence_matrix_finite(chain: &FiniteChain, horizon: usize) -> Result<DependenceMatrix> {
    if horizon == 0 {
        return Err(Error::Domain("horizon must be positive".into()));
    }
    let n = chain.n_states;
    let paths = (n as f64).powi(horizon as i32);
    if paths > MAX_ENUMERATED_PATHS {
        return Err(Error::Infeasible(format!(
            "{n}^{horizon} = {paths:e} paths exceeds the enumeration guard of {MAX_ENUMERATED_PATHS:e}"
        )));
    }
    let mut probs = chain.initial.clone();
    for _ in 1..horizon {
        let mut next = Vec::with_capacity(probs.len() * n);
        for (idx, &p) in probs.iter().enumerate() {
            let last = idx % n;
            next.extend((0..n).map(|s| p * chain.p(last, s)));
        }
        probs = next;
    }
    let mut gamma = DMatrix::identity(horizon, horizon);
    for e in 0..horizon {
        let prefix_div = n.pow((horizon - e - 1) as u32);
        let n_prefix = n.pow((e + 1) as u32);
        for s in (e + 1)..horizon {
            let n_suffix = n.pow((horizon - s) as u32);
            let mut joint = vec![0.0; n_prefix * n_suffix];
            for (idx, &p) in probs.iter().enumerate() {
                joint[(idx / prefix_div) * n_suffix + idx % n_suffix] += p;
            }
            let mut suffix = vec![0.0; n_suffix];
            let mut prefix = vec![0.0; n_prefix];
            for a in 0..n_prefix {
                for b in 0..n_suffix {
                    let v = joint[a * n_suffix + b];
                    prefix[a] += v;
                    suffix[b] += v;
                }
            }
            let worst = (0..n_prefix)
                .filter(|&a| prefix[a] > 0.0)
                .map(|a| {
                    0.5 * (0..n_suffix)
                        .map(|b| (joint[a * n_suffix + b] / prefix[a] - suffix[b]).abs())
                        .sum::<f64>()
                })
                .fold(0.0f64, f64::max);
            let tv = if worst < TV_ZERO { 0.0 } else { worst.min(1.0) };
            gamma[(s, e)] = (2.0 * tv).sqrt();
        }
    }
    let off_diagonal_zero = (0..horizon).all(|i| (0..i).all(|j| gamma[(i, j)] == 0.0));
    let norm2 = if off_diagonal_zero { 1.0 } else { spectral_norm(&gamma) };
    Ok(DependenceMatrix { gamma, norm2 })
}

/// Where probe inputs come from.
#[derive(Debug, Clone)]
pub enum InputSampler {
    /// States along trajectories of a system.
    Trajectories(DynSystem),
    /// Independent uniform draws on a cube.
    UniformIid(Cube),
}

impl InputSampler {
    fn dim(&self) -> usize {
        match self {
            InputSampler::Trajectories(s) => s.cube().dim(),
            InputSampler::UniformIid(c) => c.dim(),
        }
    }

    fn draw(&self, len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            InputSampler::Trajectories(sys) => sys.trajectory(len, rng).inputs,
            InputSampler::UniformIid(cube) => {
                let l = cube.half_width();
                (0..len * cube.dim()).map(|_| rng.random_range(-l..=l)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceRow {
    pub xi: f64,
    /// Monte Carlo estimate of `E exp(-xi sum_t |f(X_t)|^2)`.
    pub lhs: f64,
    pub lhs_std_err: f64,
    /// `exp(-xi sum_t E|f|^2 + xi^2 S / 2 sum_t E|f|^4)` with moments
    /// estimated from the same samples.
    pub rhs: f64,
    /// `lhs <= rhs + 3 * lhs_std_err`.
    pub satisfied: bool,
}

#[derive(Debug, Clone)]
pub struct PersistenceReport {
    pub s_candidate: f64,
    pub rows: Vec<PersistenceRow>,
}

/// Monte Carlo check of the persistence inequality for one function.
pub fn persistence_probe(
    f: &dyn VectorField,
    sampler: &InputSampler,
    len: usize,
    n_mc: usize,
    s_candidate: f64,
    xi_grid: &[f64],
    seed: u64,
) -> Result<PersistenceReport> {
    if f.in_dim() != sampler.dim() {
        return Err(Error::Dimension("probe function and sampler dimensions differ".into()));
    }
    if len == 0 || n_mc < 2 {
        return Err(Error::Domain("need a positive horizon and at least two Monte Carlo draws".into()));
    }
    if xi_grid.iter().any(|&x| !(x >= 0.0)) || !(s_candidate >= 0.0) {
        return Err(Error::Domain("xi values and S must be non-negative".into()));
    }
    let draws: Vec<Vec<f64>> = (0..n_mc)
        .into_par_iter()
        .map(|r| {
            let mut rng = seeding::stream(seed, &[r as u64]);
            let xs = sampler.draw(len, &mut rng);
            let mut y = vec![0.0; f.out_dim()];
            xs.chunks_exact(sampler.dim())
                .map(|x| {
                    f.eval_into(x, &mut y);
                    y.iter().map(|v| v * v).sum::<f64>()
                })
                .collect()
        })
        .collect();
    let nf = n_mc as f64;
    let sum_m1: f64 = draws.iter().flatten().sum::<f64>() / nf;
    let sum_m2: f64 = draws.iter().flatten().map(|g| g * g).sum::<f64>() / nf;
    let totals: Vec<f64> = draws.iter().map(|d| d.iter().sum()).collect();
    let rows = xi_grid
        .iter()
        .map(|&xi| {
            let vals: Vec<f64> = totals.iter().map(|z| (-xi * z).exp()).collect();
            let (mean, se) = mean_and_se(&vals);
            let rhs = (-xi * sum_m1 + 0.5 * xi * xi * s_candidate * sum_m2).exp();
            PersistenceRow {
                xi,
                lhs: mean,
                lhs_std_err: se,
                rhs,
                satisfied: mean <= rhs + 3.0 * se,
            }
        })
        .collect();
    Ok(PersistenceReport {
        s_candidate,
        rows,
    })
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmallBallRow {
    pub u: f64,
    /// Fraction of draws with `(1/T) sum_t |(f-h)(X_t)| >= u |f-h|_{L2}`.
    pub frequency: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// `(1 - u^2)^2 / C`.
    pub bound: f64,
    /// The 95% Wilson interval reaches the bound.
    pub satisfied: bool,
}

#[derive(Debug, Clone)]
pub struct SmallBallReport {
    pub l2_norm: f64,
    pub rows: Vec<SmallBallRow>,
}

/// Relative tolerance in the small-ball event, so that constant differences,
/// for which the event holds with equality, are not lost to rounding.
const SMALL_BALL_REL_TOL: f64 = 1e-12;

/// Monte Carlo check of the small-ball condition for `f - h`.
#[allow(clippy::too_many_arguments)]
pub fn small_ball_probe(
    f: &dyn VectorField,
    h: &dyn VectorField,
    sampler: &InputSampler,
    len: usize,
    n_mc: usize,
    u_grid: &[f64],
    hyper_constant: f64,
    seed: u64,
) -> Result<SmallBallReport> {
    if f.in_dim() != sampler.dim() || h.in_dim() != sampler.dim() || f.out_dim() != h.out_dim() {
        return Err(Error::Dimension("probe functions and sampler dimensions differ".into()));
    }
    if len == 0 || n_mc == 0 {
        return Err(Error::Domain("need a positive horizon and Monte Carlo count".into()));
    }
    if u_grid.iter().any(|u| !(0.0..=1.0).contains(u)) || !(hyper_constant > 0.0) {
        return Err(Error::Domain("u must lie in [0, 1] and the constant must be positive".into()));
    }
    let per_draw: Vec<(f64, f64)> = (0..n_mc)
        .into_par_iter()
        .map(|r| {
            let mut rng = seeding::stream(seed, &[r as u64]);
            let xs = sampler.draw(len, &mut rng);
            let (mut a, mut b) = (vec![0.0; f.out_dim()], vec![0.0; f.out_dim()]);
            let (mut abs_sum, mut sq_sum) = (0.0, 0.0);
            for x in xs.chunks_exact(sampler.dim()) {
                let sq = crate::field::diff_sq_norm(f, h, x, &mut a, &mut b);
                abs_sum += sq.sqrt();
                sq_sum += sq;
            }
            (abs_sum / len as f64, sq_sum / len as f64)
        })
        .collect();
    let l2_norm = (per_draw.iter().map(|p| p.1).sum::<f64>() / n_mc as f64).sqrt();
    if l2_norm == 0.0 {
        return Err(Error::Domain("f and h coincide on every sample; the small-ball ratio is undefined".into()));
    }
    let rows = u_grid
        .iter()
        .map(|&u| {
            let threshold = u * l2_norm * (1.0 - SMALL_BALL_REL_TOL);
            let hits = per_draw.iter().filter(|p| p.0 >= threshold).count();
            let (lo, hi) = wilson_interval(hits, n_mc);
            let bound = (1.0 - u * u).powi(2) / hyper_constant;
            SmallBallRow {
                u,
                frequency: hits as f64 / n_mc as f64,
                ci_lo: lo,
                ci_hi: hi,
                bound,
                satisfied: hi >= bound,
            }
        })
        .collect();
    Ok(SmallBallReport { l2_norm, rows })
}

/// 95% Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * ((p * (1.0 - p) + z * z / (4.0 * n)) / n).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}
