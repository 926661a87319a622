//! Gauss–Legendre rules and their tensor products over axis-aligned boxes.

use crate::error::{Error, Result};

/// One-dimensional Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes an `n`-point rule by Newton iteration on the Legendre
    /// polynomial, seeded with the Tricomi asymptotic root estimate.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("Gauss-Legendre rule needs at least one node".into()));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let step = p / d;
                x -= step;
                if step.abs() <= 1e-16 * x.abs().max(1.0) {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self { nodes, weights })
    }

    /// Integrates `f` over `[lo, hi]`.
    pub fn integrate(&self, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tensor-product Gauss–Legendre grid over a box, stored as flat point and
/// weight arrays. Weights include the box Jacobian, so they sum to the box
/// volume.
#[derive(Debug, Clone)]
pub struct TensorGrid {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl TensorGrid {
    pub fn new(lo: &[f64], hi: &[f64], nodes_per_axis: usize) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Dimension(format!(
                "box corners have lengths {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
            return Err(Error::Domain("box must satisfy lo < hi on every axis".into()));
        }
        let dim = lo.len();
        let total = nodes_per_axis
            .checked_pow(dim as u32)
            .filter(|&t| t <= 50_000_000)
            .ok_or_else(|| {
                Error::Infeasible(format!(
                    "{nodes_per_axis}^{dim} quadrature nodes exceed the memory guard"
                ))
            })?;
        let rule = GaussLegendre::new(nodes_per_axis)?;
        let mut points = Vec::with_capacity(total * dim);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            let mut w = 1.0;
            for (axis, &i) in idx.iter().enumerate() {
                let half = 0.5 * (hi[axis] - lo[axis]);
                let mid = 0.5 * (hi[axis] + lo[axis]);
                points.push(mid + half * rule.nodes[i]);
                w *= half * rule.weights[i];
            }
            weights.push(w);
            for slot in idx.iter_mut().rev() {
                *slot += 1;
                if *slot < nodes_per_axis {
                    break;
                }
                *slot = 0;
            }
        }
        Ok(Self {
            dim,
            points,
            weights,
        })
    }

    /// Symmetric cube `[-half_width, half_width]^dim`.
    pub fn cube(dim: usize, half_width: f64, nodes_per_axis: usize) -> Result<Self> {
        Self::new(&vec![-half_width; dim], &vec![half_width; dim], nodes_per_axis)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.points
            .chunks_exact(self.dim)
            .zip(self.weights.iter().copied())
    }

    /// Weighted sum of `f` over the grid, reduced pairwise so the result does
    /// not depend on how the work is split.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let terms: Vec<f64> = self.iter().map(|(x, w)| w * f(x)).collect();
        pairwise_sum(&terms)
    }
}

/// Pairwise (tree) summation. Deterministic for a fixed input order and
/// more accurate than a left fold on long arrays.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn integrates_polynomials_exactly_up_to_degree_2n_minus_1() {
        for n in 1..12 {
            let rule = GaussLegendre::new(n).unwrap();
            for deg in 0..(2 * n) {
                let got = rule.integrate(-1.0, 1.0, |x| x.powi(deg as i32));
                let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert_relative_eq!(got, want, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn weights_sum_to_interval_length_for_large_rules() {
        let rule = GaussLegendre::new(400).unwrap();
        let s: f64 = rule.weights.iter().sum();
        assert_relative_eq!(s, 2.0, epsilon = 1e-12);
        assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn tensor_grid_volume_and_separable_integral() {
        let g = TensorGrid::new(&[0.0, -1.0], &[2.0, 3.0], 6).unwrap();
        assert_eq!(g.len(), 36);
        assert_relative_eq!(g.integrate(|_| 1.0), 8.0, epsilon = 1e-13);
        // integral of x*y^2 over [0,2]x[-1,3] = 2 * (27+1)/3
        assert_relative_eq!(g.integrate(|p| p[0] * p[1] * p[1]), 2.0 * 28.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_degenerate_boxes() {
        assert!(TensorGrid::new(&[0.0], &[0.0], 3).is_err());
        assert!(TensorGrid::new(&[0.0], &[1.0, 2.0], 3).is_err());
        assert!(GaussLegendre::new(0).is_err());
    }
}
