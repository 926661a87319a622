//! Vector fields `R^n -> R^p` evaluated pointwise.

use std::fmt;
use std::sync::Arc;

/// A map from `in_dim` inputs to `out_dim` outputs.
///
/// Both truncated Fourier expansions and closed-form reference dynamics
/// implement this, so data generation and risk evaluation can use either.
pub trait VectorField: Send + Sync {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    /// Writes `f(x)` into `out`, which has length `out_dim()`.
    fn eval_into(&self, x: &[f64], out: &mut [f64]);

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.out_dim()];
        self.eval_into(x, &mut out);
        out
    }
}

type FieldFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A vector field backed by a closure.
#[derive(Clone)]
pub struct FnField {
    in_dim: usize,
    out_dim: usize,
    f: Arc<FieldFn>,
}

impl FnField {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            in_dim,
            out_dim,
            f: Arc::new(f),
        }
    }

    /// The linear map `x -> gain * x` on `R^dim`.
    pub fn scaled_identity(dim: usize, gain: f64) -> Self {
        Self::new(dim, dim, move |x, out| {
            for (o, xi) in out.iter_mut().zip(x) {
                *o = gain * xi;
            }
        })
    }
}

impl fmt::Debug for FnField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnField")
            .field("in_dim", &self.in_dim)
            .field("out_dim", &self.out_dim)
            .finish_non_exhaustive()
    }
}

impl VectorField for FnField {
    fn in_dim(&self) -> usize {
        self.in_dim
    }
    fn out_dim(&self) -> usize {
        self.out_dim
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

/// Pointwise difference `a - b` of two fields with matching shapes.
pub(crate) fn diff_sq_norm(a: &dyn VectorField, b: &dyn VectorField, x: &[f64], buf: &mut [f64], buf2: &mut [f64]) -> f64 {
    a.eval_into(x, buf);
    b.eval_into(x, buf2);
    buf.iter().zip(buf2.iter()).map(|(p, q)| (p - q) * (p - q)).sum()
}
