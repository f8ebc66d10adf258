//! Scalar activations: ReLU^k, cardinal B-splines `b^k` and cosine.
//!
//! At knots (integer arguments of `b^k`, `t = 0` for ReLU^k) derivatives of
//! the highest admissible order take one-sided values: `b^0` is the indicator
//! of `[0, 1)` and the `k`-th derivative of `t_+^k` is `k!` times the
//! indicator of `t > 0`.

use num_complex::Complex64;

use crate::error::{FnmError, Result};
use crate::multiindex::{binomial, falling};

/// Largest supported polynomial degree.
pub const MAX_DEGREE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    /// `t_+^k`
    ReluPow(usize),
    /// Cardinal B-spline of degree `k`, supported on `[0, k+1]`.
    BSpline(usize),
    Cosine,
}

impl Activation {
    pub fn relu_pow(k: usize) -> Result<Self> {
        check_degree(k)?;
        Ok(Activation::ReluPow(k))
    }

    pub fn bspline(k: usize) -> Result<Self> {
        check_degree(k)?;
        Ok(Activation::BSpline(k))
    }

    pub fn degree(&self) -> Option<usize> {
        match self {
            Activation::ReluPow(k) | Activation::BSpline(k) => Some(*k),
            Activation::Cosine => None,
        }
    }

    /// Highest derivative order available pointwise.
    pub fn max_derivative(&self) -> usize {
        match self {
            Activation::ReluPow(k) | Activation::BSpline(k) => *k,
            Activation::Cosine => usize::MAX,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Activation::ReluPow(_) => "relu_pow",
            Activation::BSpline(_) => "bspline",
            Activation::Cosine => "cosine",
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.deriv_or_zero(t, 0)
    }

    /// `σ^{(j)}(t)`; errors when `j` exceeds the pointwise order.
    pub fn deriv(&self, t: f64, j: usize) -> Result<f64> {
        match self {
            Activation::ReluPow(k) => relu_pow_deriv(t, *k, j),
            Activation::BSpline(k) => bspline_eval(*k, t, j),
            Activation::Cosine => Ok(cos_deriv(t, j)),
        }
    }

    /// Like [`Activation::deriv`] but returns the almost-everywhere value `0`
    /// beyond the pointwise order (used by subgradient training).
    pub fn deriv_or_zero(&self, t: f64, j: usize) -> f64 {
        match self {
            Activation::ReluPow(k) if j > *k => 0.0,
            Activation::BSpline(k) if j > *k => 0.0,
            _ => self.deriv(t, j).unwrap_or(0.0),
        }
    }
}

fn check_degree(k: usize) -> Result<()> {
    if k > MAX_DEGREE {
        return Err(FnmError::invalid(format!("degree {k} exceeds cap {MAX_DEGREE}")));
    }
    Ok(())
}

fn cos_deriv(t: f64, j: usize) -> f64 {
    match j % 4 {
        0 => t.cos(),
        1 => -t.sin(),
        2 => -t.cos(),
        _ => t.sin(),
    }
}

/// `d^j/dt^j t_+^k = k!/(k-j)! t_+^{k-j}` for `j ≤ k`.
pub fn relu_pow_deriv(t: f64, k: usize, j: usize) -> Result<f64> {
    if j > k {
        return Err(FnmError::invalid(format!(
            "derivative order {j} exceeds ReLU^{k} pointwise order"
        )));
    }
    if t <= 0.0 {
        return Ok(0.0);
    }
    Ok(falling(k, j) * t.powi((k - j) as i32))
}

/// `b^k` and its derivatives. Values use the two-term recurrence; the `j`-th
/// derivative is the `j`-th backward difference of `b^{k-j}`.
pub fn bspline_eval(k: usize, x: f64, j: usize) -> Result<f64> {
    if j > k {
        return Err(FnmError::invalid(format!(
            "derivative order {j} exceeds B-spline degree {k}"
        )));
    }
    let base = k - j;
    let mut acc = 0.0;
    for i in 0..=j {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binomial(j, i) * bspline_value(base, x - i as f64);
    }
    Ok(acc)
}

fn bspline_value(k: usize, x: f64) -> f64 {
    if !(0.0..(k + 1) as f64).contains(&x) {
        return 0.0;
    }
    // vals[i] = b^j(x - i)
    let mut vals: Vec<f64> = (0..=k)
        .map(|i| {
            let y = x - i as f64;
            if (0.0..1.0).contains(&y) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    for deg in 1..=k {
        let jf = deg as f64;
        for i in 0..=(k - deg) {
            let y = x - i as f64;
            vals[i] = y / jf * vals[i] + (jf + 1.0 - y) / jf * vals[i + 1];
        }
    }
    vals[0]
}

/// `w_i = Π_{j≠i} 1/(i-j)` for `i = 0..=k+1`.
pub fn bspline_relu_weights(k: usize) -> Vec<f64> {
    (0..=k + 1)
        .map(|i| {
            (0..=k + 1)
                .filter(|&j| j != i)
                .map(|j| 1.0 / (i as f64 - j as f64))
                .product()
        })
        .collect()
}

/// `(coefficient, shift)` pairs with `b^k(x) = Σ c_i (i - x)_+^k`, i.e.
/// `c_i = (k+1) w_i`.
pub fn bspline_to_relu(k: usize) -> Result<Vec<(f64, f64)>> {
    if k == 0 {
        return Err(FnmError::invalid("ReLU^k expansion needs k ≥ 1"));
    }
    check_degree(k)?;
    Ok(bspline_relu_weights(k)
        .into_iter()
        .enumerate()
        .map(|(i, w)| ((k + 1) as f64 * w, i as f64))
        .collect())
}

/// `∫ b^k(x) e^{-iax} dx = ((1 - e^{-ia})/(ia))^{k+1}`, equal to 1 at `a = 0`.
pub fn bspline_fourier(k: usize, a: f64) -> Complex64 {
    let half = 0.5 * a;
    let sinc = if half.abs() < 1e-4 {
        let h2 = half * half;
        1.0 - h2 / 6.0 + h2 * h2 / 120.0
    } else {
        half.sin() / half
    };
    let p = (k + 1) as i32;
    Complex64::from_polar(sinc.powi(p), -half * p as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_pow_examples() {
        assert_eq!(relu_pow_deriv(2.0, 3, 1).unwrap(), 12.0);
        for k in 0..=4 {
            for j in 0..=k {
                assert_eq!(relu_pow_deriv(-1.0, k, j).unwrap(), 0.0);
            }
        }
        assert_eq!(relu_pow_deriv(1.0, 2, 2).unwrap(), 2.0);
        assert!(matches!(relu_pow_deriv(1.0, 2, 3), Err(FnmError::InvalidArgument(_))));
    }

    #[test]
    fn bspline_examples() {
        assert_eq!(bspline_eval(0, 0.5, 0).unwrap(), 1.0);
        assert_eq!(bspline_eval(1, 1.0, 0).unwrap(), 1.0);
        assert_eq!(bspline_eval(3, -0.1, 0).unwrap(), 0.0);
        assert!(bspline_eval(2, 0.5, 3).is_err());
    }

    #[test]
    fn hat_matches_numerical_convolution() {
        // b^1 = b^0 * b^0, midpoint rule over the unit indicator
        let n = 20000;
        for &x in &[0.25, 1.0, 1.7] {
            let conv: f64 = (0..n)
                .map(|i| {
                    let t = (i as f64 + 0.5) / n as f64;
                    bspline_eval(0, x - t, 0).unwrap() / n as f64
                })
                .sum();
            assert!((conv - bspline_eval(1, x, 0).unwrap()).abs() < 1e-3);
        }
    }

    #[test]
    fn relu_expansion_k1() {
        let w = bspline_relu_weights(1);
        assert_eq!(w, vec![0.5, -1.0, 0.5]);
        let pairs = bspline_to_relu(1).unwrap();
        let at = |x: f64| pairs.iter().map(|(c, s)| c * (s - x).max(0.0)).sum::<f64>();
        assert!((at(1.0) - 1.0).abs() < 1e-15);
        assert!((at(0.5) - 0.5).abs() < 1e-15);
        for k in 1..=5 {
            let p = bspline_to_relu(k).unwrap();
            let x = (k + 2) as f64;
            let s: f64 = p.iter().map(|(c, sh)| c * (sh - x).max(0.0).powi(k as i32)).sum();
            assert_eq!(s, 0.0);
        }
    }

    #[test]
    fn fourier_special_values() {
        for k in 0..5 {
            let v = bspline_fourier(k, std::f64::consts::PI);
            let modulus = (2.0 / std::f64::consts::PI).powi(k as i32 + 1);
            assert!((v.norm() - modulus).abs() < 1e-14);
            let expect = Complex64::from_polar(modulus, -std::f64::consts::PI * (k + 1) as f64 / 2.0);
            assert!((v - expect).norm() < 1e-14);
            assert!((bspline_fourier(k, 1e-12) - 1.0).norm() < 1e-11);
            assert_eq!(bspline_fourier(k, 0.0), Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn cosine_derivatives_cycle() {
        let a = Activation::Cosine;
        assert_eq!(a.eval(0.0), 1.0);
        assert!((a.deriv(0.3, 5).unwrap() + 0.3f64.sin()).abs() < 1e-15);
    }
}
