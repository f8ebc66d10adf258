use nalgebra::{DMatrix, DVector};

use super::{ShallowNet, TailTerm};
use crate::activations::Activation;
use crate::error::{FnmError, Result};
use crate::multiindex::{factorial, multi_factorial, monomial, order, up_to_order, MultiIndex};
use crate::quadrature::Domain;

const HALTON_BASES: [u32; 3] = [2, 3, 5];
const MAX_RETRIES: usize = 8;

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base as u64) as f64 * inv;
        i /= base as u64;
        inv /= b;
    }
    out
}

/// Point `i` of the Halton sequence mapped to `[-1, 1]^d`.
fn halton_direction(i: u64, d: usize) -> Vec<f64> {
    (0..d).map(|j| 2.0 * radical_inverse(i, HALTON_BASES[j]) - 1.0).collect()
}

/// A ReLU^k net (no tail) equal to `x^α` on `domain`.
///
/// Units are `(w_i·x + B)_+^k` with `B` beyond the reach of `w_i·x` on the
/// domain, so each is a polynomial there; the outer weights solve the
/// moment system against the monomial basis of degree `≤ k`.
pub fn poly_reproduce(k: usize, alpha: &[usize], domain: &Domain) -> Result<ShallowNet> {
    let d = domain.dim();
    if alpha.len() != d {
        return Err(FnmError::invalid("multi-index dimension does not match domain"));
    }
    if order(alpha) > k {
        return Err(FnmError::invalid(format!("|α| = {} exceeds degree {k}", order(alpha))));
    }
    reproduce_polynomial(k, &[(alpha.to_vec(), 1.0)], domain)
}

/// A ReLU^k net (no tail) equal to `Σ c_α x^α` on `domain`.
pub fn reproduce_polynomial(k: usize, coeffs: &[(MultiIndex, f64)], domain: &Domain) -> Result<ShallowNet> {
    let activation = Activation::relu_pow(k)?;
    let d = domain.dim();
    if coeffs.iter().any(|(a, _)| a.len() != d || order(a) > k) {
        return Err(FnmError::invalid("polynomial term outside P_k"));
    }
    let basis = up_to_order(d, k);
    let m = basis.len();
    let rhs = DVector::from_iterator(
        m,
        basis
            .iter()
            .map(|b| coeffs.iter().filter(|(a, _)| a == b).map(|(_, c)| c).sum::<f64>()),
    );
    // |w_i| ≤ √d, so w_i·x + B ≥ B - √d·T > 0 on the domain
    let reach = domain.radius() * (d as f64).sqrt();
    let shift = reach + 1.0;
    let kf = factorial(k);
    for attempt in 0..MAX_RETRIES {
        let offset = 1 + (attempt * m) as u64;
        let dirs: Vec<Vec<f64>> = (0..m as u64).map(|i| halton_direction(offset + i, d)).collect();
        let mat = DMatrix::from_fn(m, m, |r, c| {
            let beta = &basis[r];
            let nb = order(beta);
            kf / (multi_factorial(beta) * factorial(k - nb)) * monomial(&dirs[c], beta) * shift.powi((k - nb) as i32)
        });
        let Some(sol) = mat.clone().lu().solve(&rhs) else {
            continue;
        };
        let resid = (&mat * &sol - &rhs).amax();
        let scale = rhs.amax().max(1.0);
        if !sol.iter().all(|v| v.is_finite()) || resid > 1e-9 * scale {
            continue;
        }
        let net = ShallowNet::new(activation, d, sol.iter().copied().collect(), dirs, vec![shift; m], vec![])?;
        return Ok(net);
    }
    Err(FnmError::numeric(format!(
        "polynomial reproduction for degree {k} in {d}D failed after {MAX_RETRIES} direction sets"
    )))
}

/// The piecewise-linear interpolant of `(knots, values)` as
/// `v_0 + s_0 (x - x_0) + Σ_j (s_j - s_{j-1}) (x - x_j)_+`.
pub fn fem1d_to_relu(knots: &[f64], values: &[f64]) -> Result<ShallowNet> {
    if knots.len() < 2 {
        return Err(FnmError::invalid("need at least two knots"));
    }
    if knots.len() != values.len() {
        return Err(FnmError::invalid("knots and values differ in length"));
    }
    if knots.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(FnmError::invalid("knots must be strictly increasing"));
    }
    let slopes: Vec<f64> = knots
        .windows(2)
        .zip(values.windows(2))
        .map(|(x, v)| (v[1] - v[0]) / (x[1] - x[0]))
        .collect();
    let s0 = slopes[0];
    let tail = vec![
        TailTerm { alpha: vec![0], coeff: values[0] - s0 * knots[0] },
        TailTerm { alpha: vec![1], coeff: s0 },
    ];
    let interior = &knots[1..knots.len() - 1];
    let outer: Vec<f64> = slopes.windows(2).map(|s| s[1] - s[0]).collect();
    let inner = vec![vec![1.0]; interior.len()];
    let bias = interior.iter().map(|x| -x).collect();
    ShallowNet::new(Activation::relu_pow(1)?, 1, outer, inner, bias, tail)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sup_err(net: &ShallowNet, f: impl Fn(&[f64]) -> f64, domain: &Domain, n: usize) -> f64 {
        let d = domain.dim();
        let total = n.pow(d as u32);
        let mut worst: f64 = 0.0;
        for idx in 0..total {
            let mut rem = idx;
            let x: Vec<f64> = (0..d)
                .map(|j| {
                    let i = rem % n;
                    rem /= n;
                    domain.lower()[j] + (domain.upper()[j] - domain.lower()[j]) * i as f64 / (n - 1) as f64
                })
                .collect();
            worst = worst.max((net.eval(&x) - f(&x)).abs());
        }
        worst
    }

    #[test]
    fn monomials_reproduced() {
        let sq = Domain::unit(2).unwrap();
        let net = poly_reproduce(3, &[2, 1], &sq).unwrap();
        // dim P_3 in two variables is 10
        assert!(net.units() <= 20);
        assert!(sup_err(&net, |x| x[0] * x[0] * x[1], &sq, 60) < 1e-8);
        let line = Domain::symmetric(1).unwrap();
        let net = poly_reproduce(1, &[1], &line).unwrap();
        assert!(sup_err(&net, |x| x[0], &line, 200) < 1e-12);
        let net = poly_reproduce(2, &[2], &line).unwrap();
        assert!(sup_err(&net, |x| x[0] * x[0], &line, 200) < 1e-12);
    }

    #[test]
    fn affine_data_has_no_kinks() {
        let knots = [0.0, 0.2, 0.5, 0.9, 1.0];
        let vals: Vec<f64> = knots.iter().map(|x| 3.0 * x - 1.0).collect();
        let net = fem1d_to_relu(&knots, &vals).unwrap();
        assert!(net.outer().iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn hat_function() {
        let knots = [0.0, 0.5, 1.0];
        let net = fem1d_to_relu(&knots, &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(net.outer(), &[-4.0]);
        for i in 0..=1000 {
            let x = i as f64 / 1000.0;
            let hat = 1.0 - (2.0 * x - 1.0).abs();
            assert!((net.eval(&[x]) - hat).abs() < 1e-12);
        }
        assert!(fem1d_to_relu(&[0.0, 0.0, 1.0], &[0.0, 1.0, 0.0]).is_err());
    }
}
