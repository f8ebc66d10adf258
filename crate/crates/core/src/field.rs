//! Scalar fields exposing partial derivatives.

use std::sync::Arc;

use crate::error::{FnmError, Result};

/// A function `R^d → R` that can report `∂^α u(x)`.
pub trait Field: Send + Sync {
    fn dim(&self) -> usize;

    fn partial(&self, x: &[f64], alpha: &[usize]) -> Result<f64>;

    fn value(&self, x: &[f64]) -> Result<f64> {
        let zero = [0usize; 3];
        self.partial(x, &zero[..self.dim()])
    }
}

impl<T: Field + ?Sized> Field for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn partial(&self, x: &[f64], alpha: &[usize]) -> Result<f64> {
        (**self).partial(x, alpha)
    }
}

impl<T: Field + ?Sized> Field for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn partial(&self, x: &[f64], alpha: &[usize]) -> Result<f64> {
        (**self).partial(x, alpha)
    }
}

/// `u - v`
pub struct Difference<A, B>(pub A, pub B);

impl<A: Field, B: Field> Field for Difference<A, B> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn partial(&self, x: &[f64], alpha: &[usize]) -> Result<f64> {
        Ok(self.0.partial(x, alpha)? - self.1.partial(x, alpha)?)
    }
}

/// `Σ c_i u_i`
pub struct Combination<F> {
    pub terms: Vec<(f64, F)>,
}

impl<F: Field> Field for Combination<F> {
    fn dim(&self) -> usize {
        self.terms.first().map(|(_, f)| f.dim()).unwrap_or(1)
    }
    fn partial(&self, x: &[f64], alpha: &[usize]) -> Result<f64> {
        self.terms
            .iter()
            .try_fold(0.0, |acc, (c, f)| Ok(acc + c * f.partial(x, alpha)?))
    }
}

type PartialFn = dyn Fn(&[f64], &[usize]) -> Option<f64> + Send + Sync;

/// A field backed by a closure; `None` means the derivative is unavailable.
#[derive(Clone)]
pub struct FnField {
    dim: usize,
    f: Arc<PartialFn>,
}

impl FnField {
    pub fn new(dim: usize, f: impl Fn(&[f64], &[usize]) -> Option<f64> + Send + Sync + 'static) -> Self {
        FnField { dim, f: Arc::new(f) }
    }
}

impl Field for FnField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn partial(&self, x: &[f64], alpha: &[usize]) -> Result<f64> {
        (self.f)(x, alpha).ok_or_else(|| FnmError::invalid(format!("derivative {alpha:?} unavailable")))
    }
}

/// The zero function.
pub struct Zero(pub usize);

impl Field for Zero {
    fn dim(&self) -> usize {
        self.0
    }
    fn partial(&self, _x: &[f64], _alpha: &[usize]) -> Result<f64> {
        Ok(0.0)
    }
}
