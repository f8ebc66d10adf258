//! Quadrature assembly of `a(·,·)`, `J`, the boundary-penalized `a_δ`/`J_δ`,
//! Dirichlet traces, energy norms and manufactured data for
//! `Lu = Σ_{|α|=m} (-1)^m ∂^α(a_α ∂^α u) + a_0 u`, `m ≤ 2`.
//!
//! Every discrete quadratic is stored as weighted row functionals
//! `ℓ_j(u) = Σ c ∂^α u(x_j)`, so that `a(u,v) = Σ κ_j ℓ_j(u) ℓ_j(v)`. The
//! optimizer differentiates the same rows, which makes the discrete energy
//! identities exact.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{FnmError, Result};
use crate::field::{Difference, Field};
use crate::multiindex::{directional_expansion, factorial, up_to_order, with_order, MultiIndex};
use crate::quadrature::{
    adaptive_integrate_from, composite_boundary_rule, composite_rule, Domain, QuadratureRule, RuleKind,
};
use crate::target::{atoms, FourierTarget};

pub type PointFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Rows per parallel chunk; fixed so that sums are bit-stable across
/// thread counts.
pub(crate) const CHUNK: usize = 64;

#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    Variable(Arc<PointFn>),
}

impl Coefficient {
    pub fn at(&self, x: &[f64]) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Variable(f) => f(x),
        }
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Variable(_) => write!(f, "Variable"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCondition {
    Neumann,
    DirichletPenalty { delta: f64 },
}

/// Composite Gauss rule shape: `panels` per axis, `q` points per panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadSpec {
    pub panels: usize,
    pub q: usize,
}

impl QuadSpec {
    pub fn default_for(d: usize) -> Self {
        match d {
            1 => QuadSpec { panels: 128, q: 8 },
            2 => QuadSpec { panels: 16, q: 6 },
            _ => QuadSpec { panels: 4, q: 5 },
        }
    }

    /// Twice as many panels per axis.
    pub fn refined(self) -> Self {
        QuadSpec {
            panels: 2 * self.panels,
            q: self.q,
        }
    }
}

/// `κ · Σ c ∂^α(·)(x)`
#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub kappa: f64,
    pub terms: Vec<(MultiIndex, f64)>,
    pub penalty: bool,
}

/// The rows living at one quadrature node, and `W f(x)` for the load.
#[derive(Debug, Clone)]
pub(crate) struct NodeBlock {
    pub x: Vec<f64>,
    pub load: f64,
    pub rows: Vec<Row>,
}

#[derive(Clone)]
pub struct EllipticProblem {
    name: String,
    m: usize,
    domain: Domain,
    coeff_m: Vec<(MultiIndex, Coefficient)>,
    coeff_0: Coefficient,
    rhs: Arc<PointFn>,
    bc: BoundaryCondition,
    quad: QuadSpec,
    interior: QuadratureRule,
    boundary: QuadratureRule,
    blocks: Vec<NodeBlock>,
    alpha0: f64,
    exact: Option<TrigSum>,
}

impl fmt::Debug for EllipticProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EllipticProblem")
            .field("name", &self.name)
            .field("m", &self.m)
            .field("domain", &self.domain)
            .field("bc", &self.bc)
            .field("quad", &self.quad)
            .finish()
    }
}

impl EllipticProblem {
    /// Unit coefficients (`a_α = 1` for every `|α| = m`, `a_0 = 1`) and the
    /// default composite rules.
    pub fn new(
        m: usize,
        domain: Domain,
        bc: BoundaryCondition,
        rhs: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(1..=2).contains(&m) {
            return Err(FnmError::Unsupported(format!("order m = {m}; only m ∈ {{1, 2}}")));
        }
        let d = domain.dim();
        let quad = QuadSpec::default_for(d);
        let coeff_m = with_order(d, m).into_iter().map(|a| (a, Coefficient::Constant(1.0))).collect();
        let mut p = EllipticProblem {
            name: "custom".into(),
            m,
            interior: composite_rule(&domain, quad.panels, quad.q)?,
            boundary: composite_boundary_rule(&domain, quad.panels, quad.q)?,
            domain,
            coeff_m,
            coeff_0: Coefficient::Constant(1.0),
            rhs: Arc::new(rhs),
            bc,
            quad,
            blocks: Vec::new(),
            alpha0: 1.0,
            exact: None,
        };
        p.rebuild()?;
        Ok(p)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_coefficients(mut self, coeff_m: Vec<(MultiIndex, Coefficient)>, coeff_0: Coefficient) -> Result<Self> {
        let d = self.domain.dim();
        if coeff_m.is_empty() || coeff_m.iter().any(|(a, _)| a.len() != d || a.iter().sum::<usize>() != self.m) {
            return Err(FnmError::invalid(format!("leading coefficients must be indexed by |α| = {}", self.m)));
        }
        self.coeff_m = coeff_m;
        self.coeff_0 = coeff_0;
        self.rebuild()?;
        Ok(self)
    }

    pub fn with_rhs(mut self, rhs: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Result<Self> {
        self.rhs = Arc::new(rhs);
        self.rebuild()?;
        Ok(self)
    }

    pub fn with_quadrature(mut self, quad: QuadSpec) -> Result<Self> {
        self.interior = composite_rule(&self.domain, quad.panels, quad.q)?;
        self.boundary = composite_boundary_rule(&self.domain, quad.panels, quad.q)?;
        self.quad = quad;
        self.rebuild()?;
        Ok(self)
    }

    pub fn with_rules(mut self, interior: QuadratureRule, boundary: QuadratureRule) -> Result<Self> {
        if interior.kind != RuleKind::Interior || boundary.kind != RuleKind::Boundary {
            return Err(FnmError::invalid("expected an interior and a boundary rule"));
        }
        let d = self.domain.dim();
        if interior.dim != d || boundary.dim != d {
            return Err(FnmError::invalid("rule dimension does not match the domain"));
        }
        self.interior = interior;
        self.boundary = boundary;
        self.rebuild()?;
        Ok(self)
    }

    pub fn with_bc(mut self, bc: BoundaryCondition) -> Result<Self> {
        self.bc = bc;
        self.rebuild()?;
        Ok(self)
    }

    pub fn with_delta(self, delta: f64) -> Result<Self> {
        self.with_bc(BoundaryCondition::DirichletPenalty { delta })
    }

    pub fn with_exact(mut self, exact: TrigSum) -> Self {
        self.exact = Some(exact);
        self
    }

    fn rebuild(&mut self) -> Result<()> {
        if let BoundaryCondition::DirichletPenalty { delta } = self.bc {
            if !(delta > 0.0 && delta.is_finite()) {
                return Err(FnmError::invalid(format!("penalty parameter δ = {delta} must be positive")));
            }
        }
        let d = self.domain.dim();
        let zero = vec![0usize; d];
        let mut alpha0 = f64::INFINITY;
        let mut blocks = Vec::with_capacity(self.interior.len() + self.boundary.len());
        for (x, &w) in self.interior.nodes.iter().zip(&self.interior.weights) {
            let mut rows = Vec::with_capacity(self.coeff_m.len() + 1);
            for (alpha, c) in &self.coeff_m {
                let a = c.at(x);
                alpha0 = alpha0.min(a);
                rows.push(Row {
                    kappa: w * a,
                    terms: vec![(alpha.clone(), 1.0)],
                    penalty: false,
                });
            }
            let a = self.coeff_0.at(x);
            alpha0 = alpha0.min(a);
            rows.push(Row {
                kappa: w * a,
                terms: vec![(zero.clone(), 1.0)],
                penalty: false,
            });
            let f = (self.rhs)(x);
            if !f.is_finite() {
                return Err(FnmError::numeric_at("right-hand side is not finite", x));
            }
            blocks.push(NodeBlock {
                x: x.clone(),
                load: w * f,
                rows,
            });
        }
        if !(alpha0 > 0.0) {
            return Err(FnmError::invalid(format!(
                "coefficients must be positive at every quadrature node (min {alpha0})"
            )));
        }
        if let BoundaryCondition::DirichletPenalty { delta } = self.bc {
            for ((x, &w), nu) in self.boundary.nodes.iter().zip(&self.boundary.weights).zip(&self.boundary.normals) {
                let rows = (0..self.m)
                    .map(|k| Row {
                        kappa: w / delta,
                        terms: directional_expansion(nu, k),
                        penalty: true,
                    })
                    .collect();
                blocks.push(NodeBlock {
                    x: x.clone(),
                    load: 0.0,
                    rows,
                });
            }
        }
        self.alpha0 = alpha0;
        self.blocks = blocks;
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn delta(&self) -> Option<f64> {
        match self.bc {
            BoundaryCondition::DirichletPenalty { delta } => Some(delta),
            BoundaryCondition::Neumann => None,
        }
    }

    pub fn quad(&self) -> QuadSpec {
        self.quad
    }

    pub fn interior_rule(&self) -> &QuadratureRule {
        &self.interior
    }

    pub fn boundary_rule(&self) -> &QuadratureRule {
        &self.boundary
    }

    /// Smallest coefficient value over the interior nodes.
    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn rhs(&self, x: &[f64]) -> f64 {
        (self.rhs)(x)
    }

    pub fn exact(&self) -> Option<&TrigSum> {
        self.exact.as_ref()
    }

    pub fn coeff_m(&self) -> &[(MultiIndex, Coefficient)] {
        &self.coeff_m
    }

    pub fn coeff_0(&self) -> &Coefficient {
        &self.coeff_0
    }

    pub fn is_penalized(&self) -> bool {
        matches!(self.bc, BoundaryCondition::DirichletPenalty { .. })
    }

    /// Highest derivative order appearing in any row.
    pub fn max_order(&self) -> usize {
        self.m
    }

    pub(crate) fn blocks(&self) -> &[NodeBlock] {
        &self.blocks
    }

    /// Rule twice as fine as the assembly rule, for error measurement.
    pub fn reference_rule(&self) -> Result<QuadratureRule> {
        let r = self.quad.refined();
        composite_rule(&self.domain, r.panels, r.q)
    }
}

/// `δ = N^{-1/2-1/d}`
pub fn default_delta(n: usize, d: usize) -> f64 {
    (n.max(1) as f64).powf(-0.5 - 1.0 / d as f64)
}

pub(crate) fn row_value(u: &dyn Field, x: &[f64], terms: &[(MultiIndex, f64)]) -> Result<f64> {
    terms.iter().try_fold(0.0, |acc, (alpha, c)| Ok(acc + c * u.partial(x, alpha)?))
}

/// `Σ_j κ_j ℓ_j(u) ℓ_j(v)` over the selected rows, in chunk order.
fn quadratic(u: &dyn Field, v: &dyn Field, prob: &EllipticProblem, penalty: bool) -> Result<f64> {
    let parts: Vec<Result<f64>> = prob
        .blocks()
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = 0.0;
            for b in chunk {
                for row in b.rows.iter().filter(|r| penalty || !r.penalty) {
                    let lu = row_value(u, &b.x, &row.terms)?;
                    let lv = row_value(v, &b.x, &row.terms)?;
                    acc += row.kappa * lu * lv;
                }
            }
            Ok(acc)
        })
        .collect();
    sum_checked(parts)
}

fn sum_checked(parts: Vec<Result<f64>>) -> Result<f64> {
    let mut acc = 0.0;
    for p in parts {
        acc += p?;
    }
    if !acc.is_finite() {
        return Err(FnmError::numeric(format!("assembled value is {acc}")));
    }
    Ok(acc)
}

/// `Σ_{|α|=m} ∫ a_α ∂^α u ∂^α v + ∫ a_0 u v`
pub fn assemble_a(u: &dyn Field, v: &dyn Field, prob: &EllipticProblem) -> Result<f64> {
    quadratic(u, v, prob, false)
}

/// `a(u, v) + δ^{-1} Σ_{k<m} ∫_∂Ω B^k u B^k v`
pub fn assemble_a_delta(u: &dyn Field, v: &dyn Field, prob: &EllipticProblem) -> Result<f64> {
    require_penalty(prob)?;
    quadratic(u, v, prob, true)
}

fn require_penalty(prob: &EllipticProblem) -> Result<()> {
    if !prob.is_penalized() {
        return Err(FnmError::invalid("problem has no boundary penalty"));
    }
    Ok(())
}

/// `∫ f v`
pub fn load(v: &dyn Field, prob: &EllipticProblem) -> Result<f64> {
    let parts: Vec<Result<f64>> = prob
        .blocks()
        .par_chunks(CHUNK)
        .map(|chunk| {
            chunk
                .iter()
                .filter(|b| b.load != 0.0)
                .try_fold(0.0, |acc, b| Ok(acc + b.load * v.value(&b.x)?))
        })
        .collect();
    sum_checked(parts)
}

/// `J(v) = ½ a(v,v) - ∫ f v`
pub fn energy_j(v: &dyn Field, prob: &EllipticProblem) -> Result<f64> {
    Ok(0.5 * assemble_a(v, v, prob)? - load(v, prob)?)
}

/// `J_δ(v) = ½ a_δ(v,v) - ∫ f v`
pub fn energy_j_delta(v: &dyn Field, prob: &EllipticProblem) -> Result<f64> {
    Ok(0.5 * assemble_a_delta(v, v, prob)? - load(v, prob)?)
}

/// The functional the problem's boundary condition calls for: `J` for
/// Neumann, `J_δ` for the penalized Dirichlet problem.
pub fn objective(v: &dyn Field, prob: &EllipticProblem) -> Result<f64> {
    if prob.is_penalized() {
        energy_j_delta(v, prob)
    } else {
        energy_j(v, prob)
    }
}

/// `∂^k v/∂ν^k` at every boundary node.
pub fn trace_bd(v: &dyn Field, prob: &EllipticProblem, k: usize) -> Result<Vec<f64>> {
    if k >= prob.m() {
        return Err(FnmError::invalid(format!("trace order {k} must be below m = {}", prob.m())));
    }
    let rule = prob.boundary_rule();
    rule.nodes
        .par_iter()
        .zip(&rule.normals)
        .map(|(x, nu)| row_value(v, x, &directional_expansion(nu, k)))
        .collect()
}

/// `Σ_{k<m} ‖B^k v‖_{L²(∂Ω)}`
pub fn boundary_residual(v: &dyn Field, prob: &EllipticProblem) -> Result<f64> {
    let w = &prob.boundary_rule().weights;
    let mut total = 0.0;
    for k in 0..prob.m() {
        let t = trace_bd(v, prob, k)?;
        total += t.iter().zip(w).map(|(t, w)| w * t * t).sum::<f64>().sqrt();
    }
    Ok(total)
}

/// `√a(v - u, v - u)`, or `√a_δ(v - u, v - u)` when `penalized`.
pub fn energy_norm_error(v: &dyn Field, target: &dyn Field, prob: &EllipticProblem, penalized: bool) -> Result<f64> {
    let e = Difference(v, target);
    let sq = if penalized {
        assemble_a_delta(&e, &e, prob)?
    } else {
        assemble_a(&e, &e, prob)?
    };
    Ok(sq.max(0.0).sqrt())
}

/// `(‖v - u‖_{L²}, ‖v - u‖_{H^m})` under `rule`.
pub fn sobolev_errors(v: &dyn Field, u: &dyn Field, rule: &QuadratureRule, m: usize) -> Result<(f64, f64)> {
    let alphas = up_to_order(rule.dim, m);
    let per_node: Vec<Result<(f64, f64)>> = rule
        .nodes
        .par_iter()
        .zip(&rule.weights)
        .map(|(x, &w)| {
            let mut l2 = 0.0;
            let mut hm = 0.0;
            for a in &alphas {
                let e = v.partial(x, a)? - u.partial(x, a)?;
                if a.iter().all(|&ai| ai == 0) {
                    l2 = w * e * e;
                }
                hm += w * e * e;
            }
            Ok((l2, hm))
        })
        .collect();
    let (mut l2, mut hm) = (0.0, 0.0);
    for p in per_node {
        let (a, b) = p?;
        l2 += a;
        hm += b;
    }
    Ok((l2.sqrt(), hm.sqrt()))
}

/// `f = Σ_{|α|=m} (-1)^m a_α ∂^{2α} u + a_0 u` for constant coefficients.
pub fn manufactured_rhs(u: Arc<dyn Field>, prob: &EllipticProblem) -> Result<Arc<PointFn>> {
    let m = prob.m();
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    let mut terms = Vec::new();
    for (alpha, c) in prob.coeff_m() {
        match c {
            Coefficient::Constant(a) => terms.push((alpha.iter().map(|v| 2 * v).collect::<MultiIndex>(), sign * a)),
            Coefficient::Variable(_) => {
                return Err(FnmError::Unsupported("manufactured data for variable coefficients".into()))
            }
        }
    }
    match prob.coeff_0() {
        Coefficient::Constant(a0) => terms.push((vec![0; prob.dim()], *a0)),
        Coefficient::Variable(_) => {
            return Err(FnmError::Unsupported("manufactured data for variable coefficients".into()))
        }
    }
    let probe = prob.domain().center();
    row_value(u.as_ref(), &probe, &terms)?;
    Ok(Arc::new(move |x: &[f64]| row_value(u.as_ref(), x, &terms).unwrap_or(f64::NAN)))
}

/// Residual of the integral Taylor identity
/// `e^{iω·x} = Σ_{j≤k} (iω·x)^j/j! + (i^{k+1}/k!) ‖ω‖^{k+1} ∫_0^T [(ω̄·x - t)_+^k e^{i‖ω‖t}
/// + (-1)^{k-1} (-ω̄·x - t)_+^k e^{-i‖ω‖t}] dt`.
pub fn taylor_identity_residual(k: usize, omega: &[f64], x: &[f64], radius: f64) -> f64 {
    let r = omega.iter().map(|v| v * v).sum::<f64>().sqrt();
    let dot: f64 = omega.iter().zip(x).map(|(a, b)| a * b).sum();
    let lhs = Complex64::from_polar(1.0, dot);
    let poly: Complex64 = (0..=k)
        .map(|j| Complex64::new(0.0, dot).powu(j as u32) / factorial(j))
        .sum();
    if r == 0.0 {
        return (lhs - poly).norm();
    }
    let z = dot / r;
    // only one of the two truncated powers is nonzero, on [0, |z|] ∩ [0, T]
    let (shift, dir, sign) = if z >= 0.0 {
        (z, 1.0, 1.0)
    } else {
        (-z, -1.0, if k % 2 == 1 { 1.0 } else { -1.0 })
    };
    let upper = shift.min(radius);
    let kf = k as i32;
    let integral = if upper > 0.0 {
        let panels = ((r * upper / PI).ceil() as usize).max(1);
        let re = adaptive_from_panels(|t| (shift - t).powi(kf) * (dir * r * t).cos(), upper, panels);
        let im = adaptive_from_panels(|t| (shift - t).powi(kf) * (dir * r * t).sin(), upper, panels);
        sign * Complex64::new(re, im)
    } else {
        Complex64::new(0.0, 0.0)
    };
    let rem = Complex64::i().powu(k as u32 + 1) * r.powi(kf + 1) / factorial(k) * integral;
    (lhs - poly - rem).norm()
}

fn adaptive_from_panels(f: impl Fn(f64) -> f64, upper: f64, panels: usize) -> f64 {
    adaptive_integrate_from(f, 0.0, upper, panels, 0.0, 1e-15, 4000).0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trig {
    Cos,
    Sin,
}

/// `c · Π_j trig_j(k_j x_j)`
#[derive(Debug, Clone, PartialEq)]
pub struct TrigTerm {
    pub coeff: f64,
    pub freq: Vec<f64>,
    pub kind: Vec<Trig>,
}

/// Finite sums of separable trigonometric products: closed-form derivatives
/// of every order, used as manufactured solutions.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigSum {
    dim: usize,
    terms: Vec<TrigTerm>,
}

impl TrigSum {
    pub fn new(dim: usize, terms: Vec<TrigTerm>) -> Result<Self> {
        if terms.iter().any(|t| t.freq.len() != dim || t.kind.len() != dim) {
            return Err(FnmError::invalid("trigonometric term has wrong dimension"));
        }
        Ok(TrigSum { dim, terms })
    }

    /// `c · Π_j cos(k_j x_j)`
    pub fn cos_product(coeff: f64, freq: Vec<f64>) -> Self {
        let dim = freq.len();
        TrigSum {
            dim,
            terms: vec![TrigTerm {
                coeff,
                kind: vec![Trig::Cos; dim],
                freq,
            }],
        }
    }

    /// `c · Π_j sin(k_j x_j)`
    pub fn sin_product(coeff: f64, freq: Vec<f64>) -> Self {
        let dim = freq.len();
        TrigSum {
            dim,
            terms: vec![TrigTerm {
                coeff,
                kind: vec![Trig::Sin; dim],
                freq,
            }],
        }
    }

    pub fn terms(&self) -> &[TrigTerm] {
        &self.terms
    }

    /// Point spectrum: `u(x) = Σ_p c_p e^{iω_p·x}`.
    pub fn spectrum(&self) -> Vec<(Complex64, Vec<f64>)> {
        let mut out = Vec::new();
        for t in &self.terms {
            for signs in 0..(1usize << self.dim) {
                let mut c = Complex64::new(t.coeff, 0.0);
                let mut w = Vec::with_capacity(self.dim);
                for j in 0..self.dim {
                    let s = if signs >> j & 1 == 0 { 1.0 } else { -1.0 };
                    c *= match t.kind[j] {
                        Trig::Cos => Complex64::new(0.5, 0.0),
                        Trig::Sin => Complex64::new(0.0, -0.5 * s),
                    };
                    w.push(s * t.freq[j]);
                }
                out.push((c, w));
            }
        }
        out
    }

    /// Spectral surrogate about `center`: `x ↦ u(center + x) e^{-ε²‖x‖²/2}`,
    /// whose spectrum replaces each point mass by a Gaussian of width `ε`.
    pub fn surrogate_target(&self, center: &[f64], radius: f64, width: f64) -> Result<FourierTarget> {
        let pts = self
            .spectrum()
            .into_iter()
            .map(|(c, w)| {
                let dot: f64 = w.iter().zip(center).map(|(a, b)| a * b).sum();
                (c * Complex64::from_polar(1.0, dot), w)
            })
            .collect();
        atoms(self.dim, pts, width, radius)
    }

    pub fn max_freq(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.freq.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

fn trig_deriv(kind: Trig, k: f64, x: f64, n: usize) -> f64 {
    let shift = 0.5 * PI * n as f64;
    let base = match kind {
        Trig::Cos => (k * x + shift).cos(),
        Trig::Sin => (k * x + shift).sin(),
    };
    k.powi(n as i32) * base
}

impl Field for TrigSum {
    fn dim(&self) -> usize {
        self.dim
    }
    fn partial(&self, x: &[f64], alpha: &[usize]) -> Result<f64> {
        if x.len() != self.dim || alpha.len() != self.dim {
            return Err(FnmError::invalid("point or multi-index has wrong dimension"));
        }
        Ok(self
            .terms
            .iter()
            .map(|t| {
                t.coeff
                    * (0..self.dim)
                        .map(|j| trig_deriv(t.kind[j], t.freq[j], x[j], alpha[j]))
                        .product::<f64>()
            })
            .sum())
    }
}

/// Catalog entries with a description of the manufactured solution.
pub fn problem_catalog() -> Vec<(&'static str, &'static str)> {
    vec![
        ("poisson1d_neumann", "-u'' + u = f on (0,1), u = cos(πx)"),
        ("poisson2d_neumann", "-Δu + u = f on (0,1)², u = cos(πx)cos(πy)"),
        ("poisson1d_penalty", "-u'' + u = f on (0,1), u = sin(πx), penalized u = 0"),
        ("poisson2d_penalty", "-Δu + u = f on (0,1)², u = sin(πx)sin(πy), penalized u = 0"),
        ("biharmonic1d_neumann", "u'''' + u = f on (0,1), u = cos(πx) - cos(3πx)/9 (u'' = u''' = 0 on the boundary)"),
        ("biharmonic1d_penalty", "u'''' + u = f on (0,1), u = sin²(πx), penalized u = u' = 0"),
        ("biharmonic2d_penalty", "Σ_{|α|=2} ∂^{2α}u + u = f on (0,1)², u = sin²(πx)sin²(πy), penalized"),
    ]
}

/// `sin²(πx) = ½ - ½ cos(2πx)` as a product over axes.
fn sin_squared(d: usize) -> TrigSum {
    let mut terms = vec![TrigTerm {
        coeff: 1.0,
        freq: vec![],
        kind: vec![],
    }];
    for _ in 0..d {
        terms = terms
            .into_iter()
            .flat_map(|t| {
                [(0.5, 0.0), (-0.5, 2.0 * PI)].map(|(c, k)| {
                    let mut t = t.clone();
                    t.coeff *= c;
                    t.freq.push(k);
                    t.kind.push(Trig::Cos);
                    t
                })
            })
            .collect();
    }
    TrigSum { dim: d, terms }
}

/// `cos(πx) - cos(3πx)/9`, whose second and third derivatives vanish at 0
/// and 1 (the natural conditions of the `m = 2` energy).
fn biharmonic_natural() -> TrigSum {
    let term = |coeff: f64, k: f64| TrigTerm {
        coeff,
        freq: vec![k],
        kind: vec![Trig::Cos],
    };
    TrigSum {
        dim: 1,
        terms: vec![term(1.0, PI), term(-1.0 / 9.0, 3.0 * PI)],
    }
}

/// A catalog problem with its manufactured solution and right-hand side.
/// Penalized problems use `delta` (default `1e-3`).
pub fn build_problem(name: &str, quad: Option<QuadSpec>, delta: Option<f64>) -> Result<EllipticProblem> {
    let (m, d, exact, penalized) = match name {
        "poisson1d_neumann" => (1, 1, TrigSum::cos_product(1.0, vec![PI]), false),
        "poisson2d_neumann" => (1, 2, TrigSum::cos_product(1.0, vec![PI, PI]), false),
        "poisson1d_penalty" => (1, 1, TrigSum::sin_product(1.0, vec![PI]), true),
        "poisson2d_penalty" => (1, 2, TrigSum::sin_product(1.0, vec![PI, PI]), true),
        "biharmonic1d_neumann" => (2, 1, biharmonic_natural(), false),
        "biharmonic1d_penalty" => (2, 1, sin_squared(1), true),
        "biharmonic2d_penalty" => (2, 2, sin_squared(2), true),
        _ => return Err(FnmError::Config(format!("unknown problem '{name}'"))),
    };
    let bc = if penalized {
        BoundaryCondition::DirichletPenalty {
            delta: delta.unwrap_or(1e-3),
        }
    } else {
        BoundaryCondition::Neumann
    };
    let domain = Domain::unit(d)?;
    let mut prob = EllipticProblem::new(m, domain, bc, |_| 0.0)?.with_name(name);
    if let Some(q) = quad {
        prob = prob.with_quadrature(q)?;
    }
    let f = manufactured_rhs(Arc::new(exact.clone()), &prob)?;
    Ok(prob.with_rhs(move |x| f(x))?.with_exact(exact))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::Activation;
    use crate::field::FnField;
    use crate::net::ShallowNet;
    use crate::quadrature::adaptive_integrate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poly1d(c: Vec<f64>) -> FnField {
        // Σ c_j x^j with derivatives
        FnField::new(1, move |x, a| {
            let n = a[0];
            Some(
                c.iter()
                    .enumerate()
                    .filter(|(j, _)| *j >= n)
                    .map(|(j, cj)| cj * crate::multiindex::falling(j, n) * x[0].powi((j - n) as i32))
                    .sum(),
            )
        })
    }

    fn unit_problem(m: usize, d: usize) -> EllipticProblem {
        EllipticProblem::new(m, Domain::unit(d).unwrap(), BoundaryCondition::Neumann, |_| 0.0).unwrap()
    }

    fn random_net(rng: &mut ChaCha8Rng, d: usize, k: usize, n: usize) -> ShallowNet {
        let inner = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        ShallowNet::new(
            Activation::relu_pow(k).unwrap(),
            d,
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            inner,
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn bilinear_form_examples() {
        let x = poly1d(vec![0.0, 1.0]);
        assert!((assemble_a(&x, &x, &unit_problem(1, 1)).unwrap() - 4.0 / 3.0).abs() < 1e-13);
        let x2 = poly1d(vec![0.0, 0.0, 1.0]);
        assert!((assemble_a(&x2, &x2, &unit_problem(2, 1)).unwrap() - 21.0 / 5.0).abs() < 1e-13);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = unit_problem(1, 2);
        let (u, v) = (random_net(&mut rng, 2, 3, 5), random_net(&mut rng, 2, 3, 5));
        let (uv, vu) = (assemble_a(&u, &v, &p).unwrap(), assemble_a(&v, &u, &p).unwrap());
        assert!((uv - vu).abs() < 1e-12);
        let lin = crate::field::Combination {
            terms: vec![(2.0, &u), (-1.0, &v)],
        };
        let direct = assemble_a(&lin, &u, &p).unwrap();
        assert!((direct - (2.0 * assemble_a(&u, &u, &p).unwrap() - vu)).abs() < 1e-11);
    }

    #[test]
    fn insufficient_derivatives_propagate() {
        let net = ShallowNet::new(Activation::relu_pow(1).unwrap(), 1, vec![1.0], vec![vec![1.0]], vec![0.0], vec![])
            .unwrap();
        assert!(matches!(
            assemble_a(&net, &net, &unit_problem(2, 1)),
            Err(FnmError::InvalidArgument(_))
        ));
    }

    #[test]
    fn energy_examples() {
        let p = unit_problem(1, 1);
        assert_eq!(energy_j(&crate::field::Zero(1), &p).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = random_net(&mut rng, 1, 3, 4);
        let half = 0.5 * assemble_a(&v, &v, &p).unwrap();
        assert!((energy_j(&v, &p).unwrap() - half).abs() < 1e-13);

        // J(cos πx) = ½(π²+1)/2 - (π²+1)/2 = -(π²+1)/4
        let prob = build_problem("poisson1d_neumann", None, None).unwrap();
        let u = prob.exact().unwrap().clone();
        let expect = -(PI * PI + 1.0) / 4.0;
        assert!((energy_j(&u, &prob).unwrap() - expect).abs() < 1e-12);
        // cross-check the closed form with an independent adaptive rule
        let (fu, _) = adaptive_integrate(|x| (PI * PI + 1.0) * (PI * x).cos().powi(2), 0.0, 1.0, 0.0, 1e-14, 1000);
        assert!((fu / 2.0 - (PI * PI + 1.0) / 4.0).abs() < 1e-13);
    }

    #[test]
    fn traces() {
        let p = unit_problem(1, 1).with_delta(1.0).unwrap();
        assert_eq!(trace_bd(&poly1d(vec![0.0, 1.0]), &p, 0).unwrap(), vec![0.0, 1.0]);
        assert!(trace_bd(&poly1d(vec![0.0, 1.0]), &p, 1).is_err());
        let p2 = unit_problem(2, 1).with_delta(1.0).unwrap();
        let t = trace_bd(&poly1d(vec![0.0, 0.0, 1.0]), &p2, 1).unwrap();
        assert!((t[1] - 2.0).abs() < 1e-15 && t[0] == 0.0);
        let p3 = unit_problem(2, 2).with_delta(1.0).unwrap();
        let c = FnField::new(2, |_, a| Some(if a.iter().sum::<usize>() == 0 { 3.0 } else { 0.0 }));
        assert!(trace_bd(&c, &p3, 1).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn penalized_energy() {
        let one = poly1d(vec![1.0]);
        let p = unit_problem(1, 1).with_delta(1.0).unwrap();
        assert!((energy_j_delta(&one, &p).unwrap() - 1.5).abs() < 1e-14);
        assert!(energy_j_delta(&one, &unit_problem(1, 1)).is_err());
        // x(1-x) vanishes on the boundary
        let b = poly1d(vec![0.0, 1.0, -1.0]);
        assert!((energy_j_delta(&b, &p).unwrap() - energy_j(&b, &p).unwrap()).abs() < 1e-15);
        let mut last = f64::INFINITY;
        for delta in [1e-2, 1e-1, 1.0, 1e1, 1e3] {
            let j = energy_j_delta(&one, &p.clone().with_delta(delta).unwrap()).unwrap();
            assert!(j < last);
            last = j;
        }
        assert!((last - energy_j(&one, &p).unwrap()).abs() < 2e-3);
    }

    #[test]
    fn energy_norm_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p1 = unit_problem(1, 2);
        let p2 = unit_problem(2, 2);
        let rule = p1.interior_rule().clone();
        for _ in 0..5 {
            let (u, v, w) = (random_net(&mut rng, 2, 3, 4), random_net(&mut rng, 2, 3, 4), random_net(&mut rng, 2, 3, 4));
            assert!(energy_norm_error(&u, &u, &p1, false).unwrap() < 1e-12);
            let uv = energy_norm_error(&u, &v, &p1, false).unwrap();
            let vw = energy_norm_error(&v, &w, &p1, false).unwrap();
            let uw = energy_norm_error(&u, &w, &p1, false).unwrap();
            assert!(uw <= uv + vw + 1e-12);
            // m = 1: a(e, e) is exactly the H¹ norm
            let (_, h1) = sobolev_errors(&u, &v, &rule, 1).unwrap();
            assert!(uv * uv >= p1.alpha0() * h1 * h1 * (1.0 - 1e-12));
            // m = 2: a(e, e) = |e|²_2 + ‖e‖²_0
            let e = Difference(&u, &v);
            let semi: f64 = with_order(2, 2)
                .iter()
                .chain(std::iter::once(&vec![0, 0]))
                .map(|a| {
                    rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * e.partial(x, a).unwrap().powi(2)).sum::<f64>()
                })
                .sum();
            let e2 = energy_norm_error(&u, &v, &p2, false).unwrap();
            assert!(e2 * e2 >= p2.alpha0() * semi * (1.0 - 1e-12));
        }
    }

    #[test]
    fn manufactured_data() {
        let u = Arc::new(TrigSum::cos_product(1.0, vec![PI]));
        for (m, factor) in [(1, PI * PI + 1.0), (2, PI.powi(4) + 1.0)] {
            let f = manufactured_rhs(u.clone(), &unit_problem(m, 1)).unwrap();
            for x in [0.1, 0.5, 0.77] {
                assert!((f(&[x]) - factor * (PI * x).cos()).abs() < 1e-11);
            }
        }
        let c = Arc::new(FnField::new(1, |_, a| Some(if a[0] == 0 { 2.5 } else { 0.0 })));
        let p = unit_problem(1, 1)
            .with_coefficients(vec![(vec![1], Coefficient::Constant(2.0))], Coefficient::Constant(3.0))
            .unwrap();
        assert_eq!(manufactured_rhs(c.clone(), &p).unwrap()(&[0.3]), 7.5);
        let var = unit_problem(1, 1)
            .with_coefficients(
                vec![(vec![1], Coefficient::Variable(Arc::new(|x: &[f64]| 1.0 + x[0])))],
                Coefficient::Constant(1.0),
            )
            .unwrap();
        assert!(matches!(manufactured_rhs(c, &var), Err(FnmError::Unsupported(_))));
    }

    #[test]
    fn coefficient_positivity_is_enforced() {
        let bad = unit_problem(1, 1).with_coefficients(
            vec![(vec![1], Coefficient::Variable(Arc::new(|x: &[f64]| x[0] - 0.5)))],
            Coefficient::Constant(1.0),
        );
        assert!(bad.is_err());
        assert!(unit_problem(1, 1).with_delta(0.0).is_err());
    }

    #[test]
    fn trig_sums() {
        let s = sin_squared(2);
        for x in [[0.2, 0.7], [0.5, 0.1]] {
            let v = (PI * x[0]).sin().powi(2) * (PI * x[1]).sin().powi(2);
            assert!((s.value(&x).unwrap() - v).abs() < 1e-14);
        }
        let u = TrigSum::new(
            2,
            vec![TrigTerm {
                coeff: 1.5,
                freq: vec![2.0, 3.0],
                kind: vec![Trig::Sin, Trig::Cos],
            }],
        )
        .unwrap();
        let x = [0.3, -0.4];
        let from_spectrum: Complex64 = u
            .spectrum()
            .iter()
            .map(|(c, w)| c * Complex64::from_polar(1.0, w[0] * x[0] + w[1] * x[1]))
            .sum();
        assert!((from_spectrum.re - u.value(&x).unwrap()).abs() < 1e-14 && from_spectrum.im.abs() < 1e-14);
        // surrogate about c evaluates u(c + y) e^{-ε²|y|²/2}
        let c = [0.5, 0.5];
        let t = u.surrogate_target(&c, 1.0, 0.1).unwrap();
        let y = [0.2, -0.1];
        let expect = u.value(&[0.7, 0.4]).unwrap() * (-0.5 * 0.01 * 0.05f64).exp();
        assert!((t.eval(&y) - expect).abs() < 1e-12);
    }

    #[test]
    fn taylor_identity() {
        assert!(taylor_identity_residual(3, &[2.0], &[0.0], 1.0) < 1e-15);
        assert!(taylor_identity_residual(0, &[1.0], &[0.5], 1.0) < 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let d = rng.random_range(1..=3);
            let k = rng.random_range(0..=4);
            let omega: Vec<f64> = (0..d).map(|_| rng.random_range(-11.0..11.0)).collect();
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-0.57..0.57)).collect();
            assert!(taylor_identity_residual(k, &omega, &x, 1.0) < 1e-8);
        }
    }

    #[test]
    fn catalog_builds() {
        for (name, _) in problem_catalog() {
            let p = build_problem(name, Some(QuadSpec { panels: 4, q: 4 }), None).unwrap();
            let u = p.exact().unwrap();
            assert!(p.rhs(&p.domain().center()).is_finite());
            assert_eq!(u.dim(), p.dim());
        }
        assert!(build_problem("nope", None, None).is_err());
        assert!((default_delta(16, 1) - 16f64.powf(-1.5)).abs() < 1e-15);
    }
}
