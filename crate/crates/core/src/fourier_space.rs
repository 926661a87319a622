//! Truncated real trigonometric expansions on a cube.
//!
//! Functions live on `[-L, L]^d` and are expanded in the real Fourier basis
//! of period `4L`, so every member is periodic on the doubled ("medium")
//! cube `[-2L, 2L]^d`. Integer frequencies `k` are ordered by shells of
//! constant sup-norm. Within a shell the frequency pairs `{k, -k}` are
//! listed lexicographically by their representative (the member whose first
//! nonzero entry is positive). Each pair occupies two consecutive indices:
//! first the cosine, reported as `+k`, then the sine, reported as `-k`.
//! Index 1 is the constant function.
//!
//! Basis members are unscaled (`sup |e_l| = 1`). Orthogonality holds on the
//! medium cube, where the constant has squared norm `(4L)^d` and every other
//! member `(4L)^d / 2`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::data_process::TrajectoryDataset;
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::quadrature::TensorGrid;

/// Symmetric cube `[-half_width, half_width]^dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cube {
    dim: usize,
    half_width: f64,
}

impl Cube {
    pub fn new(dim: usize, half_width: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("cube dimension must be positive".into()));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::Domain(format!("cube half-width must be positive, got {half_width}")));
        }
        Ok(Self { dim, half_width })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim && x.iter().all(|v| v.abs() <= self.half_width)
    }

    /// Lebesgue measure of the cube, `(2L)^d`.
    pub fn volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dim as i32)
    }

    /// Distance from `x` to the cube boundary (negative outside).
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        x.iter()
            .map(|v| self.half_width - v.abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Angular frequency unit `pi / (2L)` of the period-`4L` basis.
    pub fn frequency_unit(&self) -> f64 {
        PI / (2.0 * self.half_width)
    }
}

/// Signed integer frequency vector. The sign of the first nonzero entry
/// selects the cosine (`+`) or sine (`-`) member of a pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frequency(pub Vec<i64>);

impl Frequency {
    pub fn sup_norm(&self) -> i64 {
        self.0.iter().map(|k| k.abs()).max().unwrap_or(0)
    }

    fn leading_sign(&self) -> i64 {
        self.0.iter().find(|&&k| k != 0).map_or(0, |k| k.signum())
    }
}

/// Whether a basis member is a cosine or a sine of `pi <k, x> / (2L)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Cos,
    Sin,
}

fn ipow(base: u128, exp: usize) -> u128 {
    (0..exp).fold(1u128, |acc, _| acc.saturating_mul(base))
}

/// Number of frequency pairs with sup-norm exactly `n` in `dim` dimensions.
fn pairs_in_shell(dim: usize, n: u128) -> u128 {
    if dim == 0 || n == 0 {
        return 0;
    }
    (ipow(2 * n + 1, dim) - ipow(2 * n - 1, dim)) / 2
}

/// Completions of a partially fixed representative. `started` means a
/// positive leading entry has already been placed; `hit` means some fixed
/// entry already reaches the shell radius.
fn completions(remaining: usize, n: u128, started: bool, hit: bool) -> u128 {
    if !started {
        return pairs_in_shell(remaining, n);
    }
    if hit {
        ipow(2 * n + 1, remaining)
    } else {
        ipow(2 * n + 1, remaining) - ipow(2 * n - 1, remaining)
    }
}

/// Children counts when placing value `v` at the next position.
fn branch_count(v: i64, n: i64, remaining: usize, started: bool, hit: bool) -> u128 {
    let nn = n as u128;
    if !started {
        match v.signum() {
            -1 => 0,
            0 => completions(remaining, nn, false, false),
            _ => completions(remaining, nn, true, v == n),
        }
    } else {
        completions(remaining, nn, true, hit || v.abs() == n)
    }
}

fn unrank_representative(mut rank: u128, n: i64, dim: usize) -> Vec<i64> {
    let mut k = Vec::with_capacity(dim);
    let (mut started, mut hit) = (false, false);
    for pos in 0..dim {
        let remaining = dim - pos - 1;
        for v in -n..=n {
            let c = branch_count(v, n, remaining, started, hit);
            if rank < c {
                k.push(v);
                started |= v > 0;
                hit |= v.abs() == n;
                break;
            }
            rank -= c;
        }
    }
    k
}

fn rank_representative(k: &[i64], n: i64) -> u128 {
    let dim = k.len();
    let (mut started, mut hit) = (false, false);
    let mut rank = 0u128;
    for (pos, &kv) in k.iter().enumerate() {
        let remaining = dim - pos - 1;
        for v in -n..kv {
            rank += branch_count(v, n, remaining, started, hit);
        }
        started |= kv > 0;
        hit |= kv.abs() == n;
    }
    rank
}

/// Maps a 1-based basis index to its signed frequency.
///
/// ```
/// use sobolev_erm::fourier_space::{frequency_index, Frequency};
/// assert_eq!(frequency_index(2, 1).unwrap(), Frequency(vec![1]));
/// assert_eq!(frequency_index(3, 1).unwrap(), Frequency(vec![-1]));
/// ```
pub fn frequency_index(index: usize, dim: usize) -> Result<Frequency> {
    if index == 0 {
        return Err(Error::Domain("basis indices start at 1".into()));
    }
    if dim == 0 {
        return Err(Error::Domain("dimension must be positive".into()));
    }
    if index == 1 {
        return Ok(Frequency(vec![0; dim]));
    }
    let l = index as u128;
    let mut n: u128 = 1;
    while ipow(2 * n + 1, dim) < l {
        n += 1;
    }
    let offset = l - 1 - ipow(2 * n - 1, dim);
    let rep = unrank_representative(offset / 2, n as i64, dim);
    Ok(if offset.is_multiple_of(2) {
        Frequency(rep)
    } else {
        Frequency(rep.into_iter().map(|v| -v).collect())
    })
}

/// Inverse of [`frequency_index`].
pub fn index_of(k: &Frequency) -> Result<usize> {
    let dim = k.0.len();
    if dim == 0 {
        return Err(Error::Domain("frequency must have positive dimension".into()));
    }
    let n = k.sup_norm();
    if n == 0 {
        return Ok(1);
    }
    let (rep, sine): (Vec<i64>, bool) = if k.leading_sign() > 0 {
        (k.0.clone(), false)
    } else {
        (k.0.iter().map(|v| -v).collect(), true)
    };
    let rank = rank_representative(&rep, n);
    let idx = ipow(2 * n as u128 - 1, dim) + 1 + 2 * rank + u128::from(sine);
    usize::try_from(idx).map_err(|_| Error::Domain("frequency index overflows usize".into()))
}

/// Evaluates basis member `index` at `x`, which must lie in `[-L, L]^d`.
pub fn basis_eval(index: usize, x: &[f64], half_width: f64) -> Result<f64> {
    let cube = Cube::new(x.len(), half_width)?;
    if !cube.contains(x) {
        return Err(Error::Domain(format!("point {x:?} lies outside [-{half_width}, {half_width}]^d")));
    }
    let k = frequency_index(index, x.len())?;
    let (rep, phase) = split_sign(&k);
    let theta = cube.frequency_unit() * dot_i(&rep, x);
    Ok(match phase {
        Phase::Cos => theta.cos(),
        Phase::Sin => theta.sin(),
    })
}

fn split_sign(k: &Frequency) -> (Vec<i64>, Phase) {
    if k.leading_sign() >= 0 {
        (k.0.clone(), Phase::Cos)
    } else {
        (k.0.iter().map(|v| -v).collect(), Phase::Sin)
    }
}

fn dot_i(k: &[i64], x: &[f64]) -> f64 {
    k.iter().zip(x).map(|(&a, &b)| a as f64 * b).sum()
}

/// One basis member: a representative frequency and a phase.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMember {
    pub representative: Vec<i64>,
    pub phase: Phase,
}

impl BasisMember {
    pub fn is_constant(&self) -> bool {
        self.representative.iter().all(|&k| k == 0)
    }
}

/// The first `size` members of the basis on a given cube.
#[derive(Debug, Clone)]
pub struct FourierBasis {
    cube: Cube,
    members: Vec<BasisMember>,
    /// Distinct representatives scaled by the frequency unit, flattened.
    pair_freqs: Vec<f64>,
    /// For every member, the index of its representative in `pair_freqs`.
    pair_of: Vec<usize>,
}

impl FourierBasis {
    pub fn new(cube: Cube, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Domain("basis size must be at least 1".into()));
        }
        let dim = cube.dim();
        let unit = cube.frequency_unit();
        let mut members = Vec::with_capacity(size);
        let mut pair_freqs = Vec::new();
        let mut pair_of = Vec::with_capacity(size);
        for index in 1..=size {
            let (rep, phase) = split_sign(&frequency_index(index, dim)?);
            if phase == Phase::Cos {
                pair_freqs.extend(rep.iter().map(|&k| k as f64 * unit));
            }
            pair_of.push(pair_freqs.len() / dim - 1);
            members.push(BasisMember {
                representative: rep,
                phase,
            });
        }
        Ok(Self {
            cube,
            members,
            pair_freqs,
            pair_of,
        })
    }

    pub fn cube(&self) -> &Cube {
        &self.cube
    }

    pub fn dim(&self) -> usize {
        self.cube.dim()
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> &[BasisMember] {
        &self.members
    }

    /// Smallest basis size that contains every member of this basis together
    /// with its cosine/sine partner.
    pub fn closed_size(&self) -> usize {
        match self.members.last() {
            Some(m) if m.phase == Phase::Cos && !m.is_constant() => self.size() + 1,
            _ => self.size(),
        }
    }

    /// Evaluates every member at `x` without a domain check (the expansion
    /// is periodic, so any real point is meaningful).
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let dim = self.dim();
        let mut last_pair = usize::MAX;
        let (mut c, mut s) = (1.0, 0.0);
        for (j, slot) in out.iter_mut().enumerate().take(self.size()) {
            let p = self.pair_of[j];
            if p != last_pair {
                let freq = &self.pair_freqs[p * dim..(p + 1) * dim];
                let theta: f64 = freq.iter().zip(x).map(|(a, b)| a * b).sum();
                (s, c) = theta.sin_cos();
                last_pair = p;
            }
            *slot = match self.members[j].phase {
                Phase::Cos => c,
                Phase::Sin => s,
            };
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.size()];
        self.eval_into(x, &mut out);
        out
    }

    /// Design matrix with one row per point (points are `dim`-strided).
    pub fn design_matrix(&self, points: &[f64]) -> DMatrix<f64> {
        let dim = self.dim();
        let rows = points.len() / dim;
        let mut phi = DMatrix::zeros(rows, self.size());
        let mut buf = vec![0.0; self.size()];
        for (r, x) in points.chunks_exact(dim).enumerate() {
            self.eval_into(x, &mut buf);
            for (c, v) in buf.iter().enumerate() {
                phi[(r, c)] = *v;
            }
        }
        phi
    }

    /// Squared medium-cube norm of member `j` (0-based).
    pub fn lebesgue_weight(&self, j: usize) -> f64 {
        lebesgue_weight(&self.cube, self.members[j].is_constant())
    }

    /// Sobolev weight `l^(2s/d)` of member `j` (0-based, so `l = j + 1`).
    pub fn sobolev_weight(&self, j: usize, order: f64) -> f64 {
        ((j + 1) as f64).powf(2.0 * order / self.dim() as f64)
    }

    /// Value of `d^alpha e_j` at `x`.
    pub fn derivative(&self, j: usize, alpha: &[u32], x: &[f64]) -> f64 {
        let member = &self.members[j];
        let (scale, phase, sign) = derivative_rule(&self.cube, member, alpha);
        if scale == 0.0 {
            return 0.0;
        }
        let theta = self.cube.frequency_unit() * dot_i(&member.representative, x);
        let v = match phase {
            Phase::Cos => theta.cos(),
            Phase::Sin => theta.sin(),
        };
        sign * scale * v
    }
}

fn lebesgue_weight(cube: &Cube, constant: bool) -> f64 {
    let vol = (4.0 * cube.half_width()).powi(cube.dim() as i32);
    if constant {
        vol
    } else {
        0.5 * vol
    }
}

/// Differentiating `cos`/`sin` of `w <k,x>` by `alpha` yields
/// `sign * scale * (cos|sin)(w <k,x>)`; returns `(scale, phase, sign)`.
pub(crate) fn derivative_rule(cube: &Cube, member: &BasisMember, alpha: &[u32]) -> (f64, Phase, f64) {
    let order: u32 = alpha.iter().sum();
    let mut scale = cube.frequency_unit().powi(order as i32);
    for (&k, &a) in member.representative.iter().zip(alpha) {
        scale *= (k as f64).powi(a as i32);
    }
    let (phase, sign) = match (member.phase, order % 4) {
        (p, 0) => (p, 1.0),
        (Phase::Cos, 1) => (Phase::Sin, -1.0),
        (Phase::Cos, 2) => (Phase::Cos, -1.0),
        (Phase::Cos, _) => (Phase::Sin, 1.0),
        (Phase::Sin, 1) => (Phase::Cos, 1.0),
        (Phase::Sin, 2) => (Phase::Sin, -1.0),
        (Phase::Sin, _) => (Phase::Cos, -1.0),
    };
    (scale, phase, sign)
}

/// Coefficients of an `R^d -> R^p` map in a shared basis; row `i` holds the
/// expansion of output component `i`.
#[derive(Debug, Clone)]
pub struct FourierCoeffs {
    basis: Arc<FourierBasis>,
    coeffs: DMatrix<f64>,
}

impl FourierCoeffs {
    pub fn new(basis: Arc<FourierBasis>, coeffs: DMatrix<f64>) -> Result<Self> {
        if coeffs.ncols() != basis.size() {
            return Err(Error::Dimension(format!(
                "coefficient matrix has {} columns, basis has {} members",
                coeffs.ncols(),
                basis.size()
            )));
        }
        if coeffs.nrows() == 0 {
            return Err(Error::Dimension("output dimension must be positive".into()));
        }
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("coefficients must be finite".into()));
        }
        Ok(Self { basis, coeffs })
    }

    pub fn zeros(basis: Arc<FourierBasis>, out_dim: usize) -> Self {
        let m = basis.size();
        Self {
            basis,
            coeffs: DMatrix::zeros(out_dim, m),
        }
    }

    pub fn basis(&self) -> &Arc<FourierBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    pub fn size(&self) -> usize {
        self.basis.size()
    }

    pub fn cube(&self) -> &Cube {
        self.basis.cube()
    }

    /// Returns `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.coeffs.shape() != other.coeffs.shape() || self.cube() != other.cube() {
            return Err(Error::Dimension("expansions live in different spaces".into()));
        }
        Ok(Self {
            basis: Arc::clone(&self.basis),
            coeffs: &self.coeffs * a + &other.coeffs * b,
        })
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            basis: Arc::clone(&self.basis),
            coeffs: &self.coeffs * a,
        }
    }

    /// `sum_i sum_l z_il^2 l^(2s/d)`. Logs a warning when `s < 2d`, where the
    /// class no longer embeds into bounded continuous functions.
    pub fn sobolev_norm_sq(&self, order: f64) -> Result<f64> {
        if !(order.is_finite() && order > 0.0) {
            return Err(Error::Domain(format!("Sobolev order must be positive, got {order}")));
        }
        let dim = self.basis.dim() as f64;
        if order < 2.0 * dim {
            log::warn!("Sobolev order {order} is below 2d = {}", 2.0 * dim);
        }
        Ok((0..self.size())
            .map(|j| {
                let w = self.basis.sobolev_weight(j, order);
                self.coeffs.column(j).iter().map(|z| z * z * w).sum::<f64>()
            })
            .sum())
    }

    /// Squared `L^2` norm over the medium cube, by Parseval.
    pub fn l2_norm_sq_lebesgue(&self) -> f64 {
        (0..self.size())
            .map(|j| self.basis.lebesgue_weight(j) * self.coeffs.column(j).norm_squared())
            .sum()
    }

    /// Coefficient vector of output `i`.
    pub fn output(&self, i: usize) -> DVector<f64> {
        self.coeffs.row(i).transpose()
    }
}

impl VectorField for FourierCoeffs {
    fn in_dim(&self) -> usize {
        self.basis.dim()
    }

    fn out_dim(&self) -> usize {
        self.coeffs.nrows()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let phi = self.basis.eval(x);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.coeffs.row(i).iter().zip(&phi).map(|(z, p)| z * p).sum();
        }
    }
}

/// Trajectory-averaged squared distance between two fields:
/// the mean over trajectories of `(1/T) sum_t |f(X_t) - g(X_t)|^2`.
pub fn l2_norm_sq_trajectory(
    f: &dyn VectorField,
    g: &dyn VectorField,
    data: &TrajectoryDataset,
) -> Result<f64> {
    if f.out_dim() != g.out_dim() || f.in_dim() != data.input_dim() || g.in_dim() != data.input_dim() {
        return Err(Error::Dimension("fields and dataset disagree on dimensions".into()));
    }
    if data.trajectories().is_empty() {
        return Err(Error::Domain("dataset has no trajectories".into()));
    }
    let mut a = vec![0.0; f.out_dim()];
    let mut b = vec![0.0; f.out_dim()];
    let mut total = 0.0;
    for traj in data.trajectories() {
        let n = traj.len();
        if n == 0 {
            return Err(Error::Domain("empty trajectory".into()));
        }
        let s: f64 = traj
            .inputs()
            .map(|x| crate::field::diff_sq_norm(f, g, x, &mut a, &mut b))
            .sum();
        total += s / n as f64;
    }
    Ok(total / data.trajectories().len() as f64)
}

/// Quadrature rule used by projections and operator Gram matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureSpec {
    /// `ceil(4 m^(1/d))` Gauss–Legendre nodes per axis.
    Default,
    NodesPerAxis(usize),
}

impl QuadratureSpec {
    pub fn nodes_per_axis(&self, size: usize, dim: usize) -> usize {
        match *self {
            QuadratureSpec::Default => default_nodes_per_axis(size, dim),
            QuadratureSpec::NodesPerAxis(n) => n,
        }
    }
}

pub fn default_nodes_per_axis(size: usize, dim: usize) -> usize {
    (4.0 * (size as f64).powf(1.0 / dim as f64)).ceil() as usize
}

/// Least-squares projection of `target` onto the first `size` members, with
/// respect to tensor Gauss–Legendre quadrature over the input cube.
pub fn project_function(
    target: &dyn VectorField,
    size: usize,
    cube: Cube,
    quadrature: QuadratureSpec,
) -> Result<FourierCoeffs> {
    if target.in_dim() != cube.dim() {
        return Err(Error::Dimension(format!(
            "target takes {} inputs, cube has dimension {}",
            target.in_dim(),
            cube.dim()
        )));
    }
    let basis = Arc::new(FourierBasis::new(cube, size)?);
    let nodes = quadrature.nodes_per_axis(size, cube.dim());
    let total_nodes = (nodes as f64).powi(cube.dim() as i32);
    if total_nodes < size as f64 {
        return Err(Error::Numerical(format!(
            "{nodes} nodes per axis cannot resolve {size} basis members (singular quadrature Gram)"
        )));
    }
    let grid = TensorGrid::cube(cube.dim(), cube.half_width(), nodes)?;
    let m = basis.size();
    let p = target.out_dim();
    let mut phi = DMatrix::zeros(grid.len(), m);
    let mut rhs_rows = DMatrix::zeros(grid.len(), p);
    let mut buf = vec![0.0; m];
    let mut tbuf = vec![0.0; p];
    for (r, (x, w)) in grid.iter().enumerate() {
        let sw = w.sqrt();
        basis.eval_into(x, &mut buf);
        target.eval_into(x, &mut tbuf);
        if tbuf.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("target is not finite at {x:?}")));
        }
        for c in 0..m {
            phi[(r, c)] = sw * buf[c];
        }
        for c in 0..p {
            rhs_rows[(r, c)] = sw * tbuf[c];
        }
    }
    let gram = phi.transpose() * &phi;
    let rhs = phi.transpose() * rhs_rows;
    let chol = crate::linalg::checked_cholesky(&gram, 1e-13).ok_or_else(|| {
        Error::Numerical("quadrature Gram matrix is singular; increase the node count".into())
    })?;
    let z = chol.solve(&rhs);
    FourierCoeffs::new(basis, z.transpose())
}
