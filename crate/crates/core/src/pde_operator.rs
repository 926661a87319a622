//! Linear differential operators acting componentwise on truncated
//! expansions, and the quadratic regularizer `R(f) = |D f|^2` they induce.
//!
//! Output `i` of `D f` is `sum_alpha p_{i,alpha}(x) d^alpha f_i(x)`. With
//! constant coefficients the operator maps the basis to itself, which gives
//! closed forms for both `D f` and `R`; variable coefficients go through
//! quadrature.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fourier_space::{derivative_rule, Cube, FourierBasis, FourierCoeffs, Phase, QuadratureSpec};
use crate::quadrature::TensorGrid;

/// Shared scalar field on the input space.
pub type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Coefficient multiplying one partial derivative.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    Expression(Expr),
    Function(PointFn),
}

impl Coefficient {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Expression(e) => e.eval(x),
            Coefficient::Function(f) => f(x),
        }
    }

    /// The value when the coefficient does not depend on `x`.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Coefficient::Constant(c) => Some(*c),
            Coefficient::Expression(e) if e.is_constant() => Some(e.eval(&[])),
            _ => None,
        }
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Expression(e) => write!(f, "Expression({e:?})"),
            Coefficient::Function(_) => write!(f, "Function(..)"),
        }
    }
}

/// One term `coeff * d^alpha` contributing to output `output`.
#[derive(Debug, Clone)]
pub struct OperatorTerm {
    pub output: usize,
    pub alpha: Vec<u32>,
    pub coeff: Coefficient,
}

#[derive(Debug, Clone)]
pub struct LinearDiffOp {
    in_dim: usize,
    out_dim: usize,
    order: u32,
    terms: Vec<OperatorTerm>,
}

impl LinearDiffOp {
    /// Validates multi-index lengths, output indices and orders. Terms of top
    /// order are not required here; [`ellipticity_check`] reports their
    /// absence.
    pub fn new(in_dim: usize, out_dim: usize, order: u32, terms: Vec<OperatorTerm>) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Dimension("operator dimensions must be positive".into()));
        }
        for t in &terms {
            if t.alpha.len() != in_dim {
                return Err(Error::Dimension(format!(
                    "multi-index {:?} has length {}, expected {in_dim}",
                    t.alpha,
                    t.alpha.len()
                )));
            }
            if t.output >= out_dim {
                return Err(Error::Dimension(format!("term targets output {} of {out_dim}", t.output)));
            }
            let deg: u32 = t.alpha.iter().sum();
            if deg > order {
                return Err(Error::Domain(format!("term of order {deg} exceeds operator order {order}")));
            }
        }
        Ok(Self {
            in_dim,
            out_dim,
            order,
            terms,
        })
    }

    pub fn identity(in_dim: usize, out_dim: usize) -> Self {
        let terms = (0..out_dim)
            .map(|i| OperatorTerm {
                output: i,
                alpha: vec![0; in_dim],
                coeff: Coefficient::Constant(1.0),
            })
            .collect();
        Self {
            in_dim,
            out_dim,
            order: 0,
            terms,
        }
    }

    /// `sum_j d^2/dx_j^2` on every output.
    pub fn laplacian(in_dim: usize, out_dim: usize) -> Self {
        let mut terms = Vec::new();
        for i in 0..out_dim {
            for j in 0..in_dim {
                let mut alpha = vec![0; in_dim];
                alpha[j] = 2;
                terms.push(OperatorTerm {
                    output: i,
                    alpha,
                    coeff: Coefficient::Constant(1.0),
                });
            }
        }
        Self {
            in_dim,
            out_dim,
            order: 2,
            terms,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn terms(&self) -> &[OperatorTerm] {
        &self.terms
    }

    pub fn has_constant_coefficients(&self) -> bool {
        self.terms.iter().all(|t| t.coeff.as_constant().is_some())
    }

    fn terms_for(&self, output: usize) -> impl Iterator<Item = &OperatorTerm> {
        self.terms.iter().filter(move |t| t.output == output)
    }

    fn check_field(&self, f: &FourierCoeffs) -> Result<()> {
        if f.basis().dim() != self.in_dim || f.coeffs().nrows() != self.out_dim {
            return Err(Error::Dimension(format!(
                "operator maps R^{} -> R^{}, expansion is R^{} -> R^{}",
                self.in_dim,
                self.out_dim,
                f.basis().dim(),
                f.coeffs().nrows()
            )));
        }
        Ok(())
    }

    /// Value of `[D f]_i(x)` for a single output.
    fn apply_at(&self, output: usize, basis: &FourierBasis, z: &[f64], x: &[f64]) -> f64 {
        self.terms_for(output)
            .map(|t| {
                let c = t.coeff.eval(x);
                if c == 0.0 {
                    return 0.0;
                }
                let d: f64 = z
                    .iter()
                    .enumerate()
                    .filter(|(_, zj)| **zj != 0.0)
                    .map(|(j, zj)| zj * basis.derivative(j, &t.alpha, x))
                    .sum();
                c * d
            })
            .sum()
    }

    /// Coefficient-space matrix of `d^alpha` from `basis` into the basis of
    /// size `out_size` on the same cube.
    fn derivative_matrix(basis: &FourierBasis, out_size: usize, alpha: &[u32]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(out_size, basis.size());
        for (j, member) in basis.members().iter().enumerate() {
            let (scale, phase, sign) = derivative_rule(basis.cube(), member, alpha);
            if scale == 0.0 {
                continue;
            }
            let target = match (member.phase, phase) {
                (a, b) if a == b => j,
                (Phase::Cos, Phase::Sin) => j + 1,
                _ => j - 1,
            };
            m[(target, j)] = sign * scale;
        }
        m
    }

    /// Per-output coefficient matrices of a constant-coefficient operator,
    /// mapping size `m` expansions into the closed basis of size `m'`.
    fn coefficient_matrices(&self, basis: &FourierBasis) -> Result<Vec<DMatrix<f64>>> {
        let out_size = basis.closed_size();
        (0..self.out_dim)
            .map(|i| {
                let mut acc = DMatrix::zeros(out_size, basis.size());
                for t in self.terms_for(i) {
                    let c = t.coeff.as_constant().ok_or_else(|| {
                        Error::Unsupported("closed-form path needs constant coefficients".into())
                    })?;
                    acc += Self::derivative_matrix(basis, out_size, &t.alpha) * c;
                }
                Ok(acc)
            })
            .collect()
    }
}

/// Applies a constant-coefficient operator in coefficient space. The result
/// lives in the smallest basis that also holds the sine partner of a
/// trailing unpaired cosine, so odd-order derivatives stay exact.
pub fn apply_operator(op: &LinearDiffOp, f: &FourierCoeffs) -> Result<FourierCoeffs> {
    op.check_field(f)?;
    if !op.has_constant_coefficients() {
        return Err(Error::Unsupported(
            "variable-coefficient operators have no closed-form coefficient image; use a quadrature regularizer".into(),
        ));
    }
    let basis = f.basis();
    let mats = op.coefficient_matrices(basis)?;
    let out_basis = if basis.closed_size() == basis.size() {
        Arc::clone(basis)
    } else {
        Arc::new(FourierBasis::new(*basis.cube(), basis.closed_size())?)
    };
    let mut out = DMatrix::zeros(op.out_dim, out_basis.size());
    for (i, m) in mats.iter().enumerate() {
        let zi = f.output(i);
        out.row_mut(i).copy_from(&(m * zi).transpose());
    }
    FourierCoeffs::new(out_basis, out)
}

/// Measure under which `R(f) = |D f|^2` is integrated.
#[derive(Clone)]
pub enum RegularizerMeasure {
    /// Lebesgue measure on the medium cube `[-2L, 2L]^d`. Constant
    /// coefficients use Parseval; variable ones use tensor quadrature.
    MediumCube { quadrature: QuadratureSpec },
    /// Tensor quadrature over the box `[lo, hi]` with an optional density.
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
        quadrature: QuadratureSpec,
        weight: Option<PointFn>,
    },
}

impl fmt::Debug for RegularizerMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegularizerMeasure::MediumCube { quadrature } => {
                f.debug_struct("MediumCube").field("quadrature", quadrature).finish()
            }
            RegularizerMeasure::Box { lo, hi, quadrature, weight } => f
                .debug_struct("Box")
                .field("lo", lo)
                .field("hi", hi)
                .field("quadrature", quadrature)
                .field("weighted", &weight.is_some())
                .finish(),
        }
    }
}

impl Default for RegularizerMeasure {
    fn default() -> Self {
        RegularizerMeasure::MediumCube {
            quadrature: QuadratureSpec::Default,
        }
    }
}

impl RegularizerMeasure {
    /// Quadrature over the input cube `[-L, L]^d` itself.
    pub fn input_cube(cube: &Cube, quadrature: QuadratureSpec) -> Self {
        RegularizerMeasure::Box {
            lo: vec![-cube.half_width(); cube.dim()],
            hi: vec![cube.half_width(); cube.dim()],
            quadrature,
            weight: None,
        }
    }

    /// Tensor grid with weights already multiplied by the density.
    fn grid(&self, basis: &FourierBasis) -> Result<(TensorGrid, Vec<f64>)> {
        let dim = basis.dim();
        let size = basis.closed_size();
        let (grid, weight) = match self {
            RegularizerMeasure::MediumCube { quadrature } => {
                let n = quadrature.nodes_per_axis(size, dim);
                (TensorGrid::cube(dim, 2.0 * basis.cube().half_width(), n)?, None)
            }
            RegularizerMeasure::Box {
                lo,
                hi,
                quadrature,
                weight,
            } => {
                if lo.len() != dim {
                    return Err(Error::Dimension("regularizer box has the wrong dimension".into()));
                }
                let n = quadrature.nodes_per_axis(size, dim);
                (TensorGrid::new(lo, hi, n)?, weight.clone())
            }
        };
        if grid.len() < basis.size() {
            return Err(Error::Numerical(format!(
                "{} quadrature nodes cannot resolve {} basis members",
                grid.len(),
                basis.size()
            )));
        }
        let weights = match weight {
            None => grid.weights().to_vec(),
            Some(w) => grid.iter().map(|(x, q)| q * w(x)).collect(),
        };
        Ok((grid, weights))
    }
}

/// `R(f) = sum_i |[D f]_i|^2` under `measure`.
pub fn regularizer_value(op: &LinearDiffOp, f: &FourierCoeffs, measure: &RegularizerMeasure) -> Result<f64> {
    op.check_field(f)?;
    if let RegularizerMeasure::MediumCube { .. } = measure {
        if op.has_constant_coefficients() {
            return Ok(apply_operator(op, f)?.l2_norm_sq_lebesgue());
        }
    }
    let basis = f.basis();
    let (grid, weights) = measure.grid(basis)?;
    let rows: Vec<Vec<f64>> = (0..op.out_dim).map(|i| f.output(i).iter().copied().collect()).collect();
    let terms: Vec<f64> = grid
        .iter()
        .zip(&weights)
        .map(|((x, _), w)| {
            let v: f64 = rows
                .iter()
                .enumerate()
                .map(|(i, z)| op.apply_at(i, basis, z, x).powi(2))
                .sum();
            w * v
        })
        .collect();
    Ok(crate::quadrature::pairwise_sum(&terms))
}

/// Per-output Gram matrices `Q_i` with `z_i^T Q_i z_i = |[D f]_i|^2`.
pub fn operator_gram(op: &LinearDiffOp, basis: &FourierBasis, measure: &RegularizerMeasure) -> Result<Vec<DMatrix<f64>>> {
    if basis.dim() != op.in_dim {
        return Err(Error::Dimension("basis and operator dimensions differ".into()));
    }
    if let RegularizerMeasure::MediumCube { .. } = measure {
        if op.has_constant_coefficients() {
            let out_size = basis.closed_size();
            let norms = nalgebra::DVector::from_iterator(
                out_size,
                (0..out_size).map(|j| {
                    let unit = (4.0 * basis.cube().half_width()).powi(basis.dim() as i32);
                    if j == 0 {
                        unit
                    } else {
                        0.5 * unit
                    }
                }),
            );
            return Ok(op
                .coefficient_matrices(basis)?
                .into_iter()
                .map(|m| {
                    let weighted = DMatrix::from_diagonal(&norms) * &m;
                    m.transpose() * weighted
                })
                .collect());
        }
    }
    let (grid, weights) = measure.grid(basis)?;
    let m = basis.size();
    (0..op.out_dim)
        .map(|i| {
            let mut rows = DMatrix::zeros(grid.len(), m);
            for (r, ((x, _), w)) in grid.iter().zip(&weights).enumerate() {
                let sw = w.max(0.0).sqrt();
                for t in op.terms_for(i) {
                    let c = t.coeff.eval(x);
                    if c == 0.0 {
                        continue;
                    }
                    for j in 0..m {
                        rows[(r, j)] += sw * c * basis.derivative(j, &t.alpha, x);
                    }
                }
            }
            Ok(rows.transpose() * &rows)
        })
        .collect()
}

/// Outcome of sampling the principal symbol.
#[derive(Debug, Clone)]
pub struct EllipticityReport {
    pub elliptic: bool,
    /// Smallest `|sum_{|alpha| = s} p_alpha(x) xi^alpha|` over the samples
    /// and all outputs.
    pub min_abs_symbol: f64,
    pub worst_direction: Vec<f64>,
    pub worst_point: Vec<f64>,
}

const ELLIPTICITY_TOL: f64 = 1e-9;

/// Samples the principal symbol on unit directions (every normalized vector
/// of `{-1,0,1}^d` plus `n_directions` random ones) and, for variable
/// coefficients, on points of `cube`.
pub fn ellipticity_check(op: &LinearDiffOp, cube: &Cube, n_directions: usize, seed: u64) -> Result<EllipticityReport> {
    if cube.dim() != op.in_dim {
        return Err(Error::Dimension("cube and operator dimensions differ".into()));
    }
    let d = op.in_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut directions: Vec<Vec<f64>> = Vec::new();
    for code in 1..3usize.pow(d as u32) {
        let mut c = code;
        let v: Vec<f64> = (0..d)
            .map(|_| {
                let digit = (c % 3) as f64 - 1.0;
                c /= 3;
                digit
            })
            .collect();
        directions.push(normalize(v));
    }
    for _ in 0..n_directions {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        directions.push(normalize(v));
    }
    let points: Vec<Vec<f64>> = if op.has_constant_coefficients() {
        vec![vec![0.0; d]]
    } else {
        let grid = TensorGrid::cube(d, cube.half_width(), 5)?;
        let mut pts: Vec<Vec<f64>> = grid.iter().map(|(x, _)| x.to_vec()).collect();
        pts.extend((0..n_directions).map(|_| {
            (0..d)
                .map(|_| cube.half_width() * (2.0 * rand::Rng::random::<f64>(&mut rng) - 1.0))
                .collect()
        }));
        pts
    };
    let mut report = EllipticityReport {
        elliptic: true,
        min_abs_symbol: f64::INFINITY,
        worst_direction: directions[0].clone(),
        worst_point: points[0].clone(),
    };
    for i in 0..op.out_dim {
        let top: Vec<&OperatorTerm> = op
            .terms_for(i)
            .filter(|t| t.alpha.iter().sum::<u32>() == op.order)
            .collect();
        for x in &points {
            let coeffs: Vec<f64> = top.iter().map(|t| t.coeff.eval(x)).collect();
            for xi in &directions {
                let symbol: f64 = top
                    .iter()
                    .zip(&coeffs)
                    .map(|(t, c)| c * t.alpha.iter().zip(xi).map(|(&a, v)| v.powi(a as i32)).product::<f64>())
                    .sum();
                if symbol.abs() < report.min_abs_symbol {
                    report.min_abs_symbol = symbol.abs();
                    report.worst_direction = xi.clone();
                    report.worst_point = x.clone();
                }
            }
        }
    }
    report.elliptic = report.min_abs_symbol > ELLIPTICITY_TOL;
    Ok(report)
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / n).collect()
}

/// Gaps of the 2-proper regularizer properties for one `(f, h, a)` triple.
/// Every gap is `lhs - rhs` and should be non-positive up to `slack`.
#[derive(Debug, Clone)]
pub struct ProperProbe {
    pub subadditivity_gap: f64,
    pub homogeneity_gap: f64,
    pub symmetry_gap: f64,
    pub zero_value: f64,
    pub slack: f64,
    pub passed: bool,
}

/// Relative slack applied to each comparison, scaled by the magnitude of
/// the values involved.
pub const PROPER_SLACK: f64 = 1e-10;

/// Checks `R(f+h) <= 2(R(f)+R(h))`, `R(a f) <= a^2 R(f)`, `R(-f) = R(f)`
/// and `R(0) = 0`.
pub fn proper_regularizer_probe(
    op: &LinearDiffOp,
    f: &FourierCoeffs,
    h: &FourierCoeffs,
    a: f64,
    measure: &RegularizerMeasure,
) -> Result<ProperProbe> {
    let r = |g: &FourierCoeffs| regularizer_value(op, g, measure);
    let rf = r(f)?;
    let rh = r(h)?;
    let rsum = r(&f.combine(1.0, h, 1.0)?)?;
    let rscaled = r(&f.scaled(a))?;
    let rneg = r(&f.scaled(-1.0))?;
    let rzero = r(&f.scaled(0.0))?;
    let scale = 1.0 + rf.abs() + rh.abs() + rsum.abs() + a * a * rf.abs();
    let slack = PROPER_SLACK * scale;
    let subadditivity_gap = rsum - 2.0 * (rf + rh);
    let homogeneity_gap = rscaled - a * a * rf;
    let symmetry_gap = (rneg - rf).abs();
    let passed = subadditivity_gap <= slack && homogeneity_gap <= slack && symmetry_gap <= slack && rzero.abs() <= slack;
    Ok(ProperProbe {
        subadditivity_gap,
        homogeneity_gap,
        symmetry_gap,
        zero_value: rzero,
        slack,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn basis1(m: usize) -> Arc<FourierBasis> {
        Arc::new(FourierBasis::new(Cube::new(1, 1.0).unwrap(), m).unwrap())
    }

    fn second_derivative() -> LinearDiffOp {
        LinearDiffOp::new(
            1,
            1,
            2,
            vec![OperatorTerm {
                output: 0,
                alpha: vec![2],
                coeff: Coefficient::Constant(1.0),
            }],
        )
        .unwrap()
    }

    #[test]
    fn second_derivative_of_first_cosine() {
        let b = basis1(3);
        let f = FourierCoeffs::new(b, DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 0.0])).unwrap();
        let g = apply_operator(&second_derivative(), &f).unwrap();
        let w = PI / 2.0;
        assert_relative_eq!(g.coeffs()[(0, 1)], -w * w, epsilon = 1e-15);
        assert_eq!(g.coeffs()[(0, 0)], 0.0);
        assert_eq!(g.coeffs()[(0, 2)], 0.0);
    }

    #[test]
    fn odd_derivative_of_trailing_cosine_extends_basis() {
        let b = basis1(2);
        let f = FourierCoeffs::new(b, DMatrix::from_row_slice(1, 2, &[0.0, 1.0])).unwrap();
        let d1 = LinearDiffOp::new(
            1,
            1,
            1,
            vec![OperatorTerm {
                output: 0,
                alpha: vec![1],
                coeff: Coefficient::Constant(1.0),
            }],
        )
        .unwrap();
        let g = apply_operator(&d1, &f).unwrap();
        assert_eq!(g.size(), 3);
        assert_relative_eq!(g.coeffs()[(0, 2)], -PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn identity_regularizer_is_lebesgue_norm() {
        let b = basis1(5);
        let f = FourierCoeffs::new(b, DMatrix::from_row_slice(1, 5, &[0.3, -1.0, 0.5, 2.0, 0.1])).unwrap();
        let r = regularizer_value(&LinearDiffOp::identity(1, 1), &f, &RegularizerMeasure::default()).unwrap();
        assert_relative_eq!(r, f.l2_norm_sq_lebesgue(), epsilon = 1e-14);
    }

    #[test]
    fn variable_coefficient_apply_is_unsupported() {
        let op = LinearDiffOp::new(
            1,
            1,
            1,
            vec![OperatorTerm {
                output: 0,
                alpha: vec![1],
                coeff: Coefficient::Expression(Expr::parse("1 + x^2", 1).unwrap()),
            }],
        )
        .unwrap();
        let f = FourierCoeffs::zeros(basis1(3), 1);
        assert!(matches!(apply_operator(&op, &f), Err(Error::Unsupported(_))));
    }

    #[test]
    fn ellipticity_examples() {
        let cube2 = Cube::new(2, 1.0).unwrap();
        let lap = LinearDiffOp::laplacian(2, 1);
        assert!(ellipticity_check(&lap, &cube2, 64, 1).unwrap().elliptic);
        let mixed = LinearDiffOp::new(
            2,
            1,
            2,
            vec![OperatorTerm {
                output: 0,
                alpha: vec![1, 1],
                coeff: Coefficient::Constant(1.0),
            }],
        )
        .unwrap();
        assert!(!ellipticity_check(&mixed, &cube2, 64, 1).unwrap().elliptic);
        let first = LinearDiffOp::new(
            1,
            1,
            2,
            vec![OperatorTerm {
                output: 0,
                alpha: vec![1],
                coeff: Coefficient::Constant(1.0),
            }],
        )
        .unwrap();
        let rep = ellipticity_check(&first, &Cube::new(1, 1.0).unwrap(), 8, 1).unwrap();
        assert!(!rep.elliptic);
        assert_eq!(rep.min_abs_symbol, 0.0);
    }

    #[test]
    fn gram_reproduces_regularizer() {
        let b = basis1(6);
        let z = [0.2, -0.4, 0.7, 0.1, -0.3, 0.9];
        let f = FourierCoeffs::new(b.clone(), DMatrix::from_row_slice(1, 6, &z)).unwrap();
        let op = second_derivative();
        for measure in [
            RegularizerMeasure::default(),
            RegularizerMeasure::input_cube(b.cube(), QuadratureSpec::NodesPerAxis(40)),
        ] {
            let q = &operator_gram(&op, &b, &measure).unwrap()[0];
            let zv = nalgebra::DVector::from_column_slice(&z);
            let quad = (zv.transpose() * q * &zv)[(0, 0)];
            let direct = regularizer_value(&op, &f, &measure).unwrap();
            assert_relative_eq!(quad, direct, max_relative = 1e-10);
        }
    }

    #[test]
    fn insufficient_nodes_is_an_error() {
        let b = basis1(9);
        let m = RegularizerMeasure::input_cube(b.cube(), QuadratureSpec::NodesPerAxis(4));
        assert!(operator_gram(&second_derivative(), &b, &m).is_err());
    }
}
