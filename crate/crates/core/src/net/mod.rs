//! Finite neuron functions: shallow networks `tail(x) + Σ a_i σ(w_i·x + b_i)`
//! and deep compositions `θ^ℓ ∘ σ ∘ ⋯ ∘ σ ∘ θ^0`.

mod construct;
mod io;

pub use construct::{fem1d_to_relu, poly_reproduce, reproduce_polynomial};
pub use io::{read_net, write_net};

use crate::activations::Activation;
use crate::error::{FnmError, Result};
use crate::field::Field;
use crate::multiindex::{monomial, monomial_partial, order, MultiIndex};

/// Polynomial term `c · x^α`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailTerm {
    pub alpha: MultiIndex,
    pub coeff: f64,
}

/// A one-hidden-layer network with an optional polynomial tail. Immutable:
/// the `with_*` methods return modified copies.
#[derive(Debug, Clone, PartialEq)]
pub struct ShallowNet {
    activation: Activation,
    dim: usize,
    outer: Vec<f64>,
    /// Row-major `N × d`.
    inner: Vec<f64>,
    bias: Vec<f64>,
    tail: Vec<TailTerm>,
}

impl ShallowNet {
    pub fn new(
        activation: Activation,
        dim: usize,
        outer: Vec<f64>,
        inner: Vec<Vec<f64>>,
        bias: Vec<f64>,
        tail: Vec<TailTerm>,
    ) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(FnmError::invalid(format!("input dimension {dim} not in 1..=3")));
        }
        let n = outer.len();
        if inner.len() != n || bias.len() != n {
            return Err(FnmError::invalid(format!(
                "unit count mismatch: outer {n}, inner {}, bias {}",
                inner.len(),
                bias.len()
            )));
        }
        if let Some(row) = inner.iter().find(|r| r.len() != dim) {
            return Err(FnmError::invalid(format!("inner weight row has length {} ≠ {dim}", row.len())));
        }
        let inner = inner.into_iter().flatten().collect();
        Self::from_flat(activation, dim, outer, inner, bias, tail)
    }

    pub(crate) fn from_flat(
        activation: Activation,
        dim: usize,
        outer: Vec<f64>,
        inner: Vec<f64>,
        bias: Vec<f64>,
        tail: Vec<TailTerm>,
    ) -> Result<Self> {
        for t in &tail {
            if t.alpha.len() != dim {
                return Err(FnmError::invalid("tail multi-index has wrong dimension"));
            }
            if let Some(k) = activation.degree() {
                if order(&t.alpha) > k {
                    return Err(FnmError::invalid(format!(
                        "tail term of degree {} exceeds activation degree {k}",
                        order(&t.alpha)
                    )));
                }
            }
        }
        Ok(ShallowNet {
            activation,
            dim,
            outer,
            inner,
            bias,
            tail,
        })
    }

    /// The zero network with no units.
    pub fn empty(activation: Activation, dim: usize) -> Result<Self> {
        Self::from_flat(activation, dim, vec![], vec![], vec![], vec![])
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn units(&self) -> usize {
        self.outer.len()
    }

    pub fn outer(&self) -> &[f64] {
        &self.outer
    }

    pub fn inner(&self, i: usize) -> &[f64] {
        &self.inner[i * self.dim..(i + 1) * self.dim]
    }

    pub fn inner_flat(&self) -> &[f64] {
        &self.inner
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn tail(&self) -> &[TailTerm] {
        &self.tail
    }

    pub fn with_outer(&self, outer: Vec<f64>) -> Result<Self> {
        if outer.len() != self.units() {
            return Err(FnmError::invalid("outer weight count mismatch"));
        }
        Ok(ShallowNet { outer, ..self.clone() })
    }

    pub fn with_tail(&self, tail: Vec<TailTerm>) -> Result<Self> {
        Self::from_flat(
            self.activation,
            self.dim,
            self.outer.clone(),
            self.inner.clone(),
            self.bias.clone(),
            tail,
        )
    }

    pub fn with_inner_bias(&self, inner: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if inner.len() != self.inner.len() || bias.len() != self.bias.len() {
            return Err(FnmError::invalid("inner/bias shape mismatch"));
        }
        Ok(ShallowNet {
            inner,
            bias,
            ..self.clone()
        })
    }

    /// Pre-activation `w_i·x + b_i`.
    #[inline]
    pub fn preactivation(&self, i: usize, x: &[f64]) -> f64 {
        self.inner(i).iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + self.bias[i]
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v: f64 = self.tail.iter().map(|t| t.coeff * monomial(x, &t.alpha)).sum();
        for i in 0..self.units() {
            v += self.outer[i] * self.activation.eval(self.preactivation(i, x));
        }
        v
    }

    /// `∂^α` of the network; errors when the activation cannot supply the
    /// required derivative order pointwise.
    pub fn partial(&self, x: &[f64], alpha: &[usize]) -> Result<f64> {
        let n = order(alpha);
        if n > self.activation.max_derivative() {
            return Err(FnmError::invalid(format!(
                "derivative order {n} unsupported by {:?}",
                self.activation
            )));
        }
        Ok(self.partial_or_zero(x, alpha))
    }

    /// As [`ShallowNet::partial`], using the almost-everywhere value `0` for
    /// orders beyond the activation's pointwise order.
    pub fn partial_or_zero(&self, x: &[f64], alpha: &[usize]) -> f64 {
        let n = order(alpha);
        let mut v: f64 = self
            .tail
            .iter()
            .map(|t| t.coeff * monomial_partial(x, &t.alpha, alpha))
            .sum();
        for i in 0..self.units() {
            let wa = monomial(self.inner(i), alpha);
            if wa == 0.0 {
                continue;
            }
            v += self.outer[i] * self.activation.deriv_or_zero(self.preactivation(i, x), n) * wa;
        }
        v
    }

    /// `∂^α φ_i(x)` for the `i`-th unit `φ_i = σ(w_i·x + b_i)`.
    pub fn unit_partial(&self, i: usize, x: &[f64], alpha: &[usize]) -> f64 {
        let wa = monomial(self.inner(i), alpha);
        if wa == 0.0 {
            return 0.0;
        }
        self.activation.deriv_or_zero(self.preactivation(i, x), order(alpha)) * wa
    }

    /// Hidden-grid breakpoints `-b_i / w_i` of a one-dimensional network;
    /// for B-spline units also the interior knots.
    pub fn breakpoints_1d(&self) -> Vec<f64> {
        if self.dim != 1 {
            return Vec::new();
        }
        let knots = match self.activation {
            Activation::ReluPow(_) => 1,
            Activation::BSpline(k) => k + 2,
            Activation::Cosine => 0,
        };
        let mut out = Vec::new();
        for i in 0..self.units() {
            let w = self.inner[i];
            if w == 0.0 {
                continue;
            }
            for j in 0..knots {
                out.push((j as f64 - self.bias[i]) / w);
            }
        }
        out
    }
}

impl Field for ShallowNet {
    fn dim(&self) -> usize {
        self.dim
    }
    fn partial(&self, x: &[f64], alpha: &[usize]) -> Result<f64> {
        ShallowNet::partial(self, x, alpha)
    }
}

/// Affine map `x ↦ W x + b`, `W` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineLayer {
    pub weights: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
}

impl AffineLayer {
    pub fn input_width(&self) -> usize {
        self.weights.first().map(|r| r.len()).unwrap_or(0)
    }

    pub fn output_width(&self) -> usize {
        self.weights.len()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.offset)
            .map(|(row, b)| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b)
            .collect()
    }
}

/// `θ^ℓ ∘ σ ∘ θ^{ℓ-1} ∘ ⋯ ∘ σ ∘ θ^0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepNet {
    layers: Vec<AffineLayer>,
    activation: Activation,
}

impl DeepNet {
    pub fn new(layers: Vec<AffineLayer>, activation: Activation) -> Result<Self> {
        if layers.len() < 2 {
            return Err(FnmError::invalid("a deep net needs at least two affine maps"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.offset.len() != l.output_width() || l.weights.iter().any(|r| r.len() != l.input_width()) {
                return Err(FnmError::invalid(format!("layer {i} is not rectangular")));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_width() != pair[1].input_width() {
                return Err(FnmError::invalid(format!(
                    "width mismatch between layers {i} and {}: {} vs {}",
                    i + 1,
                    pair[0].output_width(),
                    pair[1].input_width()
                )));
            }
        }
        if layers.last().unwrap().output_width() != 1 {
            return Err(FnmError::invalid("last layer must have output width 1"));
        }
        Ok(DeepNet { layers, activation })
    }

    /// The single-hidden-layer embedding of a tail-free shallow network.
    pub fn from_shallow(net: &ShallowNet) -> Result<Self> {
        if !net.tail().is_empty() {
            return Err(FnmError::invalid("polynomial tails have no single-layer embedding"));
        }
        let first = AffineLayer {
            weights: (0..net.units()).map(|i| net.inner(i).to_vec()).collect(),
            offset: net.bias().to_vec(),
        };
        let second = AffineLayer {
            weights: vec![net.outer().to_vec()],
            offset: vec![0.0],
        };
        DeepNet::new(vec![first, second], net.activation())
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input_width()
    }

    pub fn hidden_layers(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_width() {
            return Err(FnmError::invalid("input width mismatch"));
        }
        let mut h = self.layers[0].apply(x);
        for layer in &self.layers[1..] {
            let act: Vec<f64> = h.iter().map(|&v| self.activation.eval(v)).collect();
            h = layer.apply(&act);
        }
        Ok(h[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn relu(k: usize) -> Activation {
        Activation::relu_pow(k).unwrap()
    }

    #[test]
    fn eval_examples() {
        let net = ShallowNet::new(relu(2), 2, vec![1.0], vec![vec![1.0, 0.0]], vec![0.0], vec![]).unwrap();
        assert_eq!(net.eval(&[3.0, 0.0]), 9.0);
        let empty = ShallowNet::empty(relu(2), 2).unwrap();
        assert_eq!(empty.eval(&[0.3, 0.1]), 0.0);
        let cos = ShallowNet::new(Activation::Cosine, 2, vec![1.0], vec![vec![0.0, 0.0]], vec![0.0], vec![]).unwrap();
        assert_eq!(cos.eval(&[0.7, -2.0]), 1.0);
    }

    #[test]
    fn partial_examples() {
        let net = ShallowNet::new(relu(2), 2, vec![1.0], vec![vec![1.0, 1.0]], vec![0.0], vec![]).unwrap();
        assert_eq!(net.partial(&[1.0, 0.0], &[1, 0]).unwrap(), 2.0);
        assert_eq!(net.partial(&[-1.0, -0.5], &[1, 1]).unwrap(), 0.0);
        assert!(net.partial(&[1.0, 0.0], &[2, 1]).is_err());
        let tail = vec![TailTerm { alpha: vec![2], coeff: 1.0 }];
        let net = ShallowNet::new(relu(2), 1, vec![0.0], vec![vec![1.0]], vec![0.3], tail).unwrap();
        assert_eq!(net.partial(&[0.4], &[2]).unwrap(), 2.0);
        assert_eq!(net.partial(&[-7.0], &[2]).unwrap(), 2.0);
    }

    #[test]
    fn tail_degree_is_capped() {
        let tail = vec![TailTerm { alpha: vec![3], coeff: 1.0 }];
        assert!(ShallowNet::new(relu(2), 1, vec![], vec![], vec![], tail).is_err());
    }

    #[test]
    fn deep_examples() {
        let id = |w: f64| AffineLayer { weights: vec![vec![w]], offset: vec![0.0] };
        let chain = DeepNet::new(vec![id(1.0), id(1.0), id(1.0)], relu(1)).unwrap();
        for x in [-2.0, -0.1, 0.0, 0.4, 3.0] {
            assert_eq!(chain.eval(&[x]).unwrap(), f64::max(x, 0.0));
        }
        let sq = DeepNet::new(vec![id(1.0), id(1.0), id(1.0)], relu(2)).unwrap();
        assert_eq!(sq.eval(&[2.0]).unwrap(), 16.0);
        let bad = DeepNet::new(
            vec![
                AffineLayer { weights: vec![vec![1.0], vec![1.0]], offset: vec![0.0, 0.0] },
                AffineLayer { weights: vec![vec![1.0, 1.0, 1.0]], offset: vec![0.0] },
            ],
            relu(1),
        );
        assert!(matches!(bad, Err(FnmError::InvalidArgument(_))));
    }

    #[test]
    fn deep_embedding_matches_shallow() {
        let net = ShallowNet::new(
            relu(3),
            2,
            vec![0.5, -1.25, 2.0],
            vec![vec![0.3, -0.7], vec![1.0, 0.2], vec![-0.4, -0.9]],
            vec![0.1, -0.2, 0.6],
            vec![],
        )
        .unwrap();
        let deep = DeepNet::from_shallow(&net).unwrap();
        for x in [[0.1, 0.2], [-0.5, 0.9], [1.0, -1.0]] {
            assert_eq!(deep.eval(&x).unwrap(), net.eval(&x));
        }
    }
}
