//! Regularized least squares in a truncated Fourier span, and the
//! quantities used to analyse it: excess risk on fresh trajectories and
//! the martingale offset complexity of the span or of a finite cover.
//!
//! The estimator minimizes
//!
//! ```text
//! (1/T) sum_t |Y_t - f(X_t)|^2 + ridge * sum_i z_i^T W z_i + physics * P(z)
//! ```
//!
//! with `W = diag(l^(2s/d))` (the Sobolev weights) and `P` either the
//! operator regularizer `sum_i z_i^T Q_i z_i` or a general quadratic form
//! coupling all outputs. The normal equations are solved by Cholesky.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::data_process::{simulate, DynSystem, TrajectoryDataset};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::fourier_space::{FourierBasis, FourierCoeffs};
use crate::linalg::{checked_cholesky, pivot_condition, psd_pinv};
use crate::pde_operator::{operator_gram, LinearDiffOp, RegularizerMeasure};

/// Physics-informed penalty added to the least-squares objective.
#[derive(Debug, Clone)]
pub enum PhysicsPenalty {
    None,
    /// `R(f) = |D f|^2` under a measure.
    Operator {
        op: LinearDiffOp,
        measure: RegularizerMeasure,
    },
    /// Quadratic form on the stacked coefficients `(z_1, ..., z_p)`, of size
    /// `(p m) x (p m)`. Used for constraints that mix outputs.
    Coupled(DMatrix<f64>),
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub basis: Arc<FourierBasis>,
    /// Sobolev order `s` of the ridge weights.
    pub sobolev_order: f64,
    /// Weight of the Sobolev ridge.
    pub ridge: f64,
    /// Weight of the physics penalty.
    pub physics_weight: f64,
    pub penalty: PhysicsPenalty,
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) || !(self.physics_weight >= 0.0 && self.physics_weight.is_finite()) {
            return Err(Error::Domain("penalty weights must be finite and non-negative".into()));
        }
        if !(self.sobolev_order > 0.0) {
            return Err(Error::Domain("Sobolev order must be positive".into()));
        }
        Ok(())
    }
}

/// Quadratic penalty matrices assembled once for a configuration.
#[derive(Debug, Clone)]
enum PenaltyMatrices {
    None,
    PerOutput(Vec<DMatrix<f64>>),
    Coupled(DMatrix<f64>),
}

/// An estimator with its penalty matrices precomputed, reusable across
/// datasets.
#[derive(Debug, Clone)]
pub struct PreparedEstimator {
    config: FitConfig,
    out_dim: usize,
    sobolev_weights: DVector<f64>,
    penalty: PenaltyMatrices,
}

/// Sufficient statistics `Phi^T Phi`, `Phi^T Y`, `sum |Y|^2` of a dataset.
#[derive(Debug, Clone)]
pub struct DesignMoments {
    pub gram: DMatrix<f64>,
    pub cross: DMatrix<f64>,
    pub target_sq: f64,
    pub count: usize,
}

const ROW_BLOCK: usize = 2048;

impl DesignMoments {
    /// Accumulates the moments in fixed row blocks, so memory stays bounded
    /// and the summation order is deterministic.
    pub fn from_rows<'a>(
        basis: &FourierBasis,
        inputs: impl Iterator<Item = &'a [f64]>,
        targets: impl Iterator<Item = &'a [f64]>,
        out_dim: usize,
    ) -> Self {
        let m = basis.size();
        let mut gram = DMatrix::zeros(m, m);
        let mut cross = DMatrix::zeros(m, out_dim);
        let mut target_sq = 0.0;
        let mut count = 0;
        let mut phi_block = DMatrix::zeros(ROW_BLOCK, m);
        let mut y_block = DMatrix::zeros(ROW_BLOCK, out_dim);
        let mut buf = vec![0.0; m];
        let mut fill = 0;
        let flush = |phi: &DMatrix<f64>, y: &DMatrix<f64>, rows: usize, gram: &mut DMatrix<f64>, cross: &mut DMatrix<f64>| {
            let p = phi.rows(0, rows);
            let yy = y.rows(0, rows);
            gram.gemm_tr(1.0, &p, &p, 1.0);
            cross.gemm_tr(1.0, &p, &yy, 1.0);
        };
        for (x, y) in inputs.zip(targets) {
            basis.eval_into(x, &mut buf);
            for (c, v) in buf.iter().enumerate() {
                phi_block[(fill, c)] = *v;
            }
            for (c, v) in y.iter().enumerate() {
                y_block[(fill, c)] = *v;
                target_sq += v * v;
            }
            fill += 1;
            count += 1;
            if fill == ROW_BLOCK {
                flush(&phi_block, &y_block, fill, &mut gram, &mut cross);
                fill = 0;
            }
        }
        if fill > 0 {
            flush(&phi_block, &y_block, fill, &mut gram, &mut cross);
        }
        Self {
            gram,
            cross,
            target_sq,
            count,
        }
    }

    pub fn from_dataset(basis: &FourierBasis, data: &TrajectoryDataset) -> Self {
        Self::from_rows(basis, data.inputs(), data.targets(), data.output_dim())
    }

    /// `(1/n) sum_t |Y_t - z^T phi(X_t)|^2` for coefficients `z` (`p x m`).
    /// With the targets set to `f*(X_t)` on fresh inputs this is the excess
    /// risk of `z` on those inputs.
    pub fn mean_sq_error(&self, z: &DMatrix<f64>) -> f64 {
        let quad = (z * &self.gram).component_mul(z).sum();
        let lin = z.transpose().component_mul(&self.cross).sum();
        ((self.target_sq - 2.0 * lin + quad) / self.count as f64).max(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub coeffs: FourierCoeffs,
    /// Value of the penalized objective at the solution.
    pub objective: f64,
    /// Mean squared training residual `(1/T) sum_t |Y_t - f(X_t)|^2`.
    pub train_mse: f64,
    /// Largest pivot-ratio condition estimate over the solved systems.
    pub condition_estimate: f64,
    /// Diagonal jitter added to reach a stable factorization (0 if none).
    pub jitter: f64,
    /// Norm of the objective gradient at the solution.
    pub gradient_norm: f64,
}

/// Relative pivot threshold below which a system counts as singular.
const SINGULAR_PIVOT: f64 = 1e-15;

impl PreparedEstimator {
    pub fn new(config: FitConfig, out_dim: usize) -> Result<Self> {
        config.validate()?;
        let basis = &config.basis;
        let m = basis.size();
        let sobolev_weights = DVector::from_iterator(m, (0..m).map(|j| basis.sobolev_weight(j, config.sobolev_order)));
        let penalty = match &config.penalty {
            PhysicsPenalty::None => PenaltyMatrices::None,
            PhysicsPenalty::Operator { op, measure } => {
                if op.out_dim() != out_dim {
                    return Err(Error::Dimension(format!(
                        "operator has {} outputs, data has {out_dim}",
                        op.out_dim()
                    )));
                }
                PenaltyMatrices::PerOutput(operator_gram(op, basis, measure)?)
            }
            PhysicsPenalty::Coupled(q) => {
                if q.nrows() != out_dim * m || q.ncols() != out_dim * m {
                    return Err(Error::Dimension(format!(
                        "coupled penalty is {}x{}, expected {n}x{n}",
                        q.nrows(),
                        q.ncols(),
                        n = out_dim * m
                    )));
                }
                PenaltyMatrices::Coupled(q.clone())
            }
        };
        Ok(Self {
            config,
            out_dim,
            sobolev_weights,
            penalty,
        })
    }

    pub fn config(&self) -> &FitConfig {
        &self.config
    }

    /// The same estimator with new penalty weights; the assembled penalty
    /// matrices are reused.
    pub fn with_weights(&self, ridge: f64, physics_weight: f64) -> Result<Self> {
        let mut next = self.clone();
        next.config.ridge = ridge;
        next.config.physics_weight = physics_weight;
        next.config.validate()?;
        Ok(next)
    }

    pub fn fit(&self, data: &TrajectoryDataset) -> Result<FitResult> {
        if data.input_dim() != self.config.basis.dim() || data.output_dim() != self.out_dim {
            return Err(Error::Dimension("dataset does not match the estimator dimensions".into()));
        }
        self.fit_moments(&DesignMoments::from_dataset(&self.config.basis, data))
    }

    /// Value of the physics penalty at coefficients `z` (`p x m`).
    pub fn penalty_value(&self, z: &DMatrix<f64>) -> f64 {
        match &self.penalty {
            PenaltyMatrices::None => 0.0,
            PenaltyMatrices::PerOutput(qs) => qs
                .iter()
                .enumerate()
                .map(|(i, q)| {
                    let zi = z.row(i).transpose();
                    (zi.transpose() * q * &zi)[(0, 0)]
                })
                .sum(),
            PenaltyMatrices::Coupled(q) => {
                let v = stack(z);
                (v.transpose() * q * &v)[(0, 0)]
            }
        }
    }

    fn sobolev_value(&self, z: &DMatrix<f64>) -> f64 {
        z.row_iter()
            .map(|r| r.iter().zip(self.sobolev_weights.iter()).map(|(a, w)| a * a * w).sum::<f64>())
            .sum()
    }

    pub fn fit_moments(&self, mom: &DesignMoments) -> Result<FitResult> {
        let m = self.config.basis.size();
        let p = self.out_dim;
        if mom.count == 0 {
            return Err(Error::Domain("cannot fit on an empty dataset".into()));
        }
        let t = mom.count as f64;
        let (ridge, phys) = (self.config.ridge, self.config.physics_weight);
        let unpenalized = ridge == 0.0 && (phys == 0.0 || matches!(self.penalty, PenaltyMatrices::None));
        if unpenalized && m > mom.count {
            return Err(Error::Identifiability(format!(
                "{m} coefficients per output but only {} samples and no penalty",
                mom.count
            )));
        }
        let base = &mom.gram / t + DMatrix::from_diagonal(&(&self.sobolev_weights * ridge));
        let rhs = &mom.cross / t;
        let mut z = DMatrix::zeros(p, m);
        let mut condition: f64 = 1.0;
        let mut jitter_used: f64 = 0.0;
        let mut gradient_sq = 0.0;
        let systems: Vec<(DMatrix<f64>, DMatrix<f64>, Vec<usize>)> = match &self.penalty {
            PenaltyMatrices::Coupled(q) => {
                let mut a = DMatrix::zeros(p * m, p * m);
                for i in 0..p {
                    a.view_mut((i * m, i * m), (m, m)).copy_from(&base);
                }
                a += q * phys;
                let b = DMatrix::from_column_slice(p * m, 1, stack(&rhs.transpose()).as_slice());
                vec![(a, b, (0..p).collect())]
            }
            PenaltyMatrices::PerOutput(qs) => (0..p)
                .map(|i| (&base + &qs[i] * phys, rhs.columns(i, 1).into_owned(), vec![i]))
                .collect(),
            PenaltyMatrices::None => vec![(base.clone(), rhs.clone(), (0..p).collect())],
        };
        for (a, b, outputs) in systems {
            let (chol, jitter) = factor(&a, unpenalized)?;
            condition = condition.max(pivot_condition(&chol));
            jitter_used = jitter_used.max(jitter);
            let sol = chol.solve(&b);
            let residual = &a * &sol - &b;
            gradient_sq += 4.0 * residual.norm_squared();
            if sol.ncols() == 1 && outputs.len() > 1 {
                for (k, &i) in outputs.iter().enumerate() {
                    z.row_mut(i).copy_from(&sol.rows(k * m, m).transpose());
                }
            } else if sol.ncols() == 1 {
                z.row_mut(outputs[0]).copy_from(&sol.transpose());
            } else {
                for &i in &outputs {
                    z.row_mut(i).copy_from(&sol.column(i).transpose());
                }
            }
        }
        let train_mse = mom.mean_sq_error(&z);
        let objective = train_mse + ridge * self.sobolev_value(&z) + phys * self.penalty_value(&z);
        Ok(FitResult {
            coeffs: FourierCoeffs::new(Arc::clone(&self.config.basis), z)?,
            objective,
            train_mse,
            condition_estimate: condition,
            jitter: jitter_used,
            gradient_norm: gradient_sq.sqrt(),
        })
    }
}

fn stack(z: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(z.len(), z.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()))
}

/// Cholesky with a single diagonal jitter of `1e-12 * trace / n` when the
/// plain factorization is unstable. Unpenalized systems are never
/// jittered; their failure means the design does not identify the fit.
fn factor(a: &DMatrix<f64>, unpenalized: bool) -> Result<(nalgebra::Cholesky<f64, nalgebra::Dyn>, f64)> {
    if let Some(c) = checked_cholesky(a, SINGULAR_PIVOT) {
        return Ok((c, 0.0));
    }
    if unpenalized {
        return Err(Error::Identifiability(
            "design Gram matrix is singular and both penalties are zero".into(),
        ));
    }
    let n = a.nrows() as f64;
    let jitter = 1e-12 * a.trace() / n;
    let mut aj = a.clone();
    for i in 0..a.nrows() {
        aj[(i, i)] += jitter;
    }
    checked_cholesky(&aj, SINGULAR_PIVOT)
        .map(|c| (c, jitter))
        .ok_or_else(|| Error::Numerical("normal equations stay singular after jitter".into()))
}

/// Convenience wrapper around [`PreparedEstimator`].
pub fn fit_erm(data: &TrajectoryDataset, config: &FitConfig) -> Result<FitResult> {
    PreparedEstimator::new(config.clone(), data.output_dim())?.fit(data)
}

/// Mean and standard error of a risk estimate over independent trajectories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskEstimate {
    pub mean: f64,
    pub std_err: f64,
}

/// `E (1/T) sum_t |fhat(X_t) - f*(X_t)|^2` over fresh trajectories of `sys`,
/// estimated from `n_traj` trajectories of length `len`.
pub fn excess_risk(
    fhat: &dyn VectorField,
    fstar: &dyn VectorField,
    sys: &DynSystem,
    len: usize,
    n_traj: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    if n_traj < 2 {
        return Err(Error::Domain("need at least two evaluation trajectories".into()));
    }
    let data = simulate(sys, len, n_traj, seed)?;
    let (mut a, mut b) = (vec![0.0; fhat.out_dim()], vec![0.0; fhat.out_dim()]);
    let per: Vec<f64> = data
        .trajectories()
        .iter()
        .map(|tr| tr.inputs().map(|x| crate::field::diff_sq_norm(fhat, fstar, x, &mut a, &mut b)).sum::<f64>() / tr.len() as f64)
        .collect();
    let n = per.len() as f64;
    let mean = per.iter().sum::<f64>() / n;
    let var = per.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(RiskEstimate {
        mean,
        std_err: (var / n).sqrt(),
    })
}

/// Martingale offset complexity of a linear span:
/// `sup_z (1/T) sum_t [4 <W_t, Phi_t z> - |Phi_t z|^2] = (4/T) sum_i a_i^T G^+ a_i`
/// with `a_i = Phi^T W_i` and `G = Phi^T Phi`.
pub fn empirical_moc_linear(phi: &DMatrix<f64>, noise: &DMatrix<f64>) -> Result<f64> {
    if phi.nrows() != noise.nrows() || phi.nrows() == 0 {
        return Err(Error::Dimension("design and noise must have the same positive number of rows".into()));
    }
    let t = phi.nrows() as f64;
    let gram = phi.transpose() * phi;
    let pinv = psd_pinv(&gram, 1e-12);
    let a = phi.transpose() * noise;
    let value: f64 = (0..noise.ncols())
        .map(|i| {
            let ai = a.column(i);
            (ai.transpose() * &pinv * ai)[(0, 0)]
        })
        .sum();
    Ok(4.0 * value / t)
}

/// Martingale offset complexity of a finite cover, floored at zero (the
/// zero function is always admissible).
pub fn empirical_moc_cover(cover: &[FourierCoeffs], inputs: &[f64], noise: &DMatrix<f64>) -> Result<f64> {
    let first = cover.first().ok_or_else(|| Error::Domain("cover must be non-empty".into()))?;
    let d = first.basis().dim();
    let p = first.coeffs().nrows();
    if inputs.len() != noise.nrows() * d || noise.ncols() != p {
        return Err(Error::Dimension("inputs, noise and cover disagree on shapes".into()));
    }
    let t = noise.nrows() as f64;
    let mut y = vec![0.0; p];
    let best = cover
        .iter()
        .map(|f| {
            inputs
                .chunks_exact(d)
                .enumerate()
                .map(|(r, x)| {
                    f.eval_into(x, &mut y);
                    y.iter()
                        .enumerate()
                        .map(|(i, v)| 4.0 * noise[(r, i)] * v - v * v)
                        .sum::<f64>()
                })
                .sum::<f64>()
                / t
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(best.max(0.0))
}

/// Both sides of the basic inequality
/// `(1/T) sum |fhat - f*|^2 <= MOC(span) + 2 physics R(f*) + 2 ridge |f*|_s^2`
/// for one dataset whose noise was recorded. The last term vanishes
/// without the Sobolev ridge.
#[derive(Debug, Clone, Copy)]
pub struct BasicInequality {
    pub empirical_excess: f64,
    pub moc: f64,
    pub penalty_term: f64,
    pub holds: bool,
}

pub fn basic_inequality(
    estimator: &PreparedEstimator,
    fit: &FitResult,
    fstar: &FourierCoeffs,
    data: &TrajectoryDataset,
) -> Result<BasicInequality> {
    let basis = &estimator.config.basis;
    if fstar.basis().size() != basis.size() || fstar.cube() != basis.cube() {
        return Err(Error::Dimension("f* must lie in the estimator span".into()));
    }
    let noise_flat = data
        .noise()
        .ok_or_else(|| Error::Domain("dataset does not carry its noise".into()))?;
    let inputs: Vec<f64> = data.inputs().flatten().copied().collect();
    let phi = basis.design_matrix(&inputs);
    let p = data.output_dim();
    let noise = DMatrix::from_row_slice(noise_flat.len() / p, p, &noise_flat);
    let moc = empirical_moc_linear(&phi, &noise)?;
    let diff = fit.coeffs.combine(1.0, fstar, -1.0)?;
    let values = &phi * diff.coeffs().transpose();
    let empirical_excess = values.norm_squared() / phi.nrows() as f64;
    let cfg = &estimator.config;
    let penalty_term = 2.0 * cfg.physics_weight * estimator.penalty_value(fstar.coeffs())
        + 2.0 * cfg.ridge * estimator.sobolev_value(fstar.coeffs());
    let slack = 1e-9 * (1.0 + moc.abs() + penalty_term.abs());
    Ok(BasicInequality {
        empirical_excess,
        moc,
        penalty_term,
        holds: empirical_excess <= moc + penalty_term + slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier_space::Cube;
    use approx::assert_relative_eq;

    #[test]
    fn moc_single_basis_function_closed_form() {
        let phi = DMatrix::from_column_slice(4, 1, &[1.0, 0.5, -0.2, 0.8]);
        let w = DMatrix::from_column_slice(4, 1, &[0.3, -0.1, 0.4, 0.2]);
        let num: f64 = phi.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
        let den: f64 = phi.iter().map(|a| a * a).sum();
        let want = 4.0 / 4.0 * num * num / den;
        assert_relative_eq!(empirical_moc_linear(&phi, &w).unwrap(), want, epsilon = 1e-14);
        assert_eq!(empirical_moc_linear(&phi, &DMatrix::zeros(4, 1)).unwrap(), 0.0);
    }

    #[test]
    fn cover_of_zero_is_zero() {
        let basis = Arc::new(FourierBasis::new(Cube::new(1, 1.0).unwrap(), 3).unwrap());
        let cover = vec![FourierCoeffs::zeros(basis, 1)];
        let w = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
        assert_eq!(empirical_moc_cover(&cover, &[0.1, 0.2], &w).unwrap(), 0.0);
    }

    #[test]
    fn identifiability_guard_fires() {
        let basis = Arc::new(FourierBasis::new(Cube::new(1, 1.0).unwrap(), 9).unwrap());
        let cfg = FitConfig {
            basis,
            sobolev_order: 2.0,
            ridge: 0.0,
            physics_weight: 0.0,
            penalty: PhysicsPenalty::None,
        };
        let traj = crate::data_process::Trajectory::new(1, 1, vec![0.1, 0.2, 0.3], vec![0.0, 0.1, 0.2], None).unwrap();
        let data = TrajectoryDataset::new(vec![traj]).unwrap();
        assert!(matches!(fit_erm(&data, &cfg), Err(Error::Identifiability(_))));
    }
}
