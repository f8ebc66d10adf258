//! Gradients of the discrete energy, the convex outer-weight solve, and
//! first-order trainers (backtracking gradient descent, Adam, hybrid).

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::activations::Activation;
use crate::energy::{EllipticProblem, NodeBlock, CHUNK};
use crate::error::{FnmError, Result};
use crate::field::Field;
use crate::multiindex::{binomial, monomial, monomial_partial, order, up_to_order, MultiIndex};
use crate::net::{ShallowNet, TailTerm};
use crate::quadrature::QuadratureRule;
use crate::sampling::{stream_rng, ConstructionKind, PreparedConstruction};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
const ARMIJO: f64 = 1e-4;
const STAGNATION_WINDOW: usize = 50;
const STAGNATION_TOL: f64 = 1e-14;

/// Parameter groups held fixed during training.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Freeze {
    pub outer: bool,
    pub inner: bool,
    pub bias: bool,
    pub tail: bool,
}

impl Freeze {
    pub fn features() -> Self {
        Freeze {
            outer: false,
            inner: true,
            bias: true,
            tail: true,
        }
    }

    pub fn parse(names: &[String]) -> Result<Self> {
        let mut f = Freeze::default();
        for n in names {
            match n.as_str() {
                "outer" => f.outer = true,
                "inner" => f.inner = true,
                "bias" => f.bias = true,
                "tail" => f.tail = true,
                _ => return Err(FnmError::Config(format!("unknown parameter group '{n}'"))),
            }
        }
        Ok(f)
    }
}

/// `∂J/∂θ` split by parameter group; frozen groups are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub outer: Vec<f64>,
    /// Row-major `N × d`.
    pub inner: Vec<f64>,
    pub bias: Vec<f64>,
    pub tail: Vec<f64>,
}

impl Gradient {
    fn from_flat(flat: &[f64], n: usize, d: usize) -> Self {
        Gradient {
            outer: flat[..n].to_vec(),
            inner: flat[n..n + n * d].to_vec(),
            bias: flat[n + n * d..2 * n + n * d].to_vec(),
            tail: flat[2 * n + n * d..].to_vec(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.outer.clone();
        v.extend(&self.inner);
        v.extend(&self.bias);
        v.extend(&self.tail);
        v
    }

    pub fn norm(&self) -> f64 {
        self.flat().iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

fn params(net: &ShallowNet) -> Vec<f64> {
    let mut v = net.outer().to_vec();
    v.extend(net.inner_flat());
    v.extend(net.bias());
    v.extend(net.tail().iter().map(|t| t.coeff));
    v
}

fn with_params(net: &ShallowNet, p: &[f64]) -> Result<ShallowNet> {
    let (n, d) = (net.units(), net.dim());
    let tail = net
        .tail()
        .iter()
        .zip(&p[2 * n + n * d..])
        .map(|(t, c)| TailTerm {
            alpha: t.alpha.clone(),
            coeff: *c,
        })
        .collect();
    net.with_outer(p[..n].to_vec())?
        .with_inner_bias(p[n..n + n * d].to_vec(), p[n + n * d..2 * n + n * d].to_vec())?
        .with_tail(tail)
}

fn mask(net: &ShallowNet, freeze: Freeze) -> Vec<bool> {
    let (n, d, t) = (net.units(), net.dim(), net.tail().len());
    let mut m = vec![!freeze.outer; n];
    m.extend(vec![!freeze.inner; n * d]);
    m.extend(vec![!freeze.bias; n]);
    m.extend(vec![!freeze.tail; t]);
    m
}

/// Gradient options: which groups to differentiate and whether `k = m`
/// (one-sided derivatives at hidden breakpoints) is allowed.
#[derive(Debug, Clone, Copy, Default)]
pub struct GradOptions {
    pub freeze: Freeze,
    pub subgradient: bool,
}

fn check_degree(net: &ShallowNet, prob: &EllipticProblem, opts: GradOptions) -> Result<()> {
    let m = prob.m();
    if net.dim() != prob.dim() {
        return Err(FnmError::invalid("network and problem dimensions differ"));
    }
    if let Some(k) = net.activation().degree() {
        if k < m {
            return Err(FnmError::invalid(format!("activation degree {k} below problem order {m}")));
        }
        let features_free = !(opts.freeze.inner && opts.freeze.bias);
        if k == m && features_free && !opts.subgradient {
            return Err(FnmError::invalid(format!(
                "degree k = m = {m}: inner gradients need σ^({}) which is a jump; enable subgradient mode",
                m + 1
            )));
        }
    }
    Ok(())
}

/// Per-row feature values `Σ c σ^{(|α|)}(z_i) w_i^α` and their derivatives.
struct RowEval {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    tail: Vec<f64>,
}

fn eval_row(net: &ShallowNet, x: &[f64], sig: &[Vec<f64>], terms: &[(MultiIndex, f64)], grads: bool) -> RowEval {
    let (n, d) = (net.units(), net.dim());
    let mut a = vec![0.0; n];
    let mut b = if grads { vec![0.0; n] } else { Vec::new() };
    let mut c = if grads { vec![0.0; n * d] } else { Vec::new() };
    for (alpha, coef) in terms {
        let ord = order(alpha);
        for i in 0..n {
            let w = net.inner(i);
            let wa = monomial(w, alpha);
            a[i] += coef * sig[i][ord] * wa;
            if grads {
                b[i] += coef * sig[i][ord + 1] * wa;
                for l in 0..d {
                    if alpha[l] > 0 {
                        let mut e = vec![0; d];
                        e[l] = 1;
                        c[i * d + l] += coef * sig[i][ord] * monomial_partial(w, alpha, &e);
                    }
                }
            }
        }
    }
    let tail = net
        .tail()
        .iter()
        .map(|t| terms.iter().map(|(alpha, coef)| coef * monomial_partial(x, &t.alpha, alpha)).sum())
        .collect();
    RowEval { a, b, c, tail }
}

fn activation_table(net: &ShallowNet, x: &[f64], top: usize) -> Vec<Vec<f64>> {
    let act = net.activation();
    (0..net.units())
        .map(|i| {
            let z = net.preactivation(i, x);
            (0..=top).map(|j| act.deriv_or_zero(z, j)).collect()
        })
        .collect()
}

/// Adds `coef · ∇ℓ` for one row into `g`.
fn scatter(net: &ShallowNet, x: &[f64], r: &RowEval, coef: f64, g: &mut [f64]) {
    let (n, d) = (net.units(), net.dim());
    let a = net.outer();
    for i in 0..n {
        g[i] += coef * r.a[i];
        g[n + n * d + i] += coef * a[i] * r.b[i];
        for l in 0..d {
            g[n + i * d + l] += coef * a[i] * (r.b[i] * x[l] + r.c[i * d + l]);
        }
    }
    for (t, v) in r.tail.iter().enumerate() {
        g[2 * n + n * d + t] += coef * v;
    }
}

fn block_terms(net: &ShallowNet, blk: &NodeBlock, top: usize, grads: bool, g: &mut [f64]) -> f64 {
    let sig = activation_table(net, &blk.x, top);
    let value = |r: &RowEval| {
        r.a.iter().zip(net.outer()).map(|(f, a)| f * a).sum::<f64>()
            + r.tail.iter().zip(net.tail()).map(|(f, t)| f * t.coeff).sum::<f64>()
    };
    let mut j = 0.0;
    for row in &blk.rows {
        let r = eval_row(net, &blk.x, &sig, &row.terms, grads);
        let l = value(&r);
        j += 0.5 * row.kappa * l * l;
        if grads {
            scatter(net, &blk.x, &r, row.kappa * l, g);
        }
    }
    if blk.load != 0.0 {
        let zero = [(vec![0; net.dim()], 1.0)];
        let r = eval_row(net, &blk.x, &sig, &zero, grads);
        j -= blk.load * value(&r);
        if grads {
            scatter(net, &blk.x, &r, -blk.load, g);
        }
    }
    j
}

/// Discrete objective (`J`, or `J_δ` for penalized problems) and, when
/// `grads`, its full parameter gradient, summed in fixed chunk order.
fn objective_and_flat_grad(net: &ShallowNet, prob: &EllipticProblem, grads: bool) -> Result<(f64, Vec<f64>)> {
    let p = params(net).len();
    let top = prob.m() + 1;
    let parts: Vec<(f64, Vec<f64>)> = prob
        .blocks()
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = if grads { vec![0.0; p] } else { Vec::new() };
            let j = chunk.iter().map(|blk| block_terms(net, blk, top, grads, &mut g)).sum::<f64>();
            (j, g)
        })
        .collect();
    let mut j = 0.0;
    let mut g = vec![0.0; if grads { p } else { 0 }];
    for (pj, pg) in parts {
        j += pj;
        for (a, b) in g.iter_mut().zip(pg) {
            *a += b;
        }
    }
    if !j.is_finite() {
        return Err(FnmError::numeric(format!("objective is {j}")));
    }
    Ok((j, g))
}

/// The discrete objective the problem's boundary condition calls for.
pub fn net_objective(net: &ShallowNet, prob: &EllipticProblem) -> Result<f64> {
    check_degree(net, prob, GradOptions { freeze: Freeze { inner: true, bias: true, ..Freeze::default() }, subgradient: false })?;
    Ok(objective_and_flat_grad(net, prob, false)?.0)
}

/// Objective and gradient with frozen groups zeroed.
pub fn energy_and_gradient(net: &ShallowNet, prob: &EllipticProblem, opts: GradOptions) -> Result<(f64, Gradient)> {
    check_degree(net, prob, opts)?;
    let (j, mut g) = objective_and_flat_grad(net, prob, true)?;
    for (gi, free) in g.iter_mut().zip(mask(net, opts.freeze)) {
        if !free {
            *gi = 0.0;
        }
    }
    Ok((j, Gradient::from_flat(&g, net.units(), net.dim())))
}

/// Exact gradient of the discrete `J` (or `J_δ`) with respect to every
/// parameter.
pub fn grad_energy(net: &ShallowNet, prob: &EllipticProblem) -> Result<Gradient> {
    Ok(energy_and_gradient(net, prob, GradOptions::default())?.1)
}

/// Feature rows `ℓ_j(φ_p)` for units then tail monomials.
fn feature_row(net: &ShallowNet, x: &[f64], sig: &[Vec<f64>], terms: &[(MultiIndex, f64)]) -> Vec<f64> {
    let r = eval_row(net, x, sig, terms, false);
    let mut v = r.a;
    v.extend(r.tail);
    v
}

fn gram_system(net: &ShallowNet, prob: &EllipticProblem) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let p = net.units() + net.tail().len();
    let top = prob.m();
    let parts: Vec<(Vec<f64>, Vec<f64>)> = prob
        .blocks()
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = vec![0.0; p * p];
            let mut rhs = vec![0.0; p];
            for blk in chunk {
                let sig = activation_table(net, &blk.x, top);
                for row in &blk.rows {
                    let phi = feature_row(net, &blk.x, &sig, &row.terms);
                    for a in 0..p {
                        let s = row.kappa * phi[a];
                        for b in a..p {
                            g[a * p + b] += s * phi[b];
                        }
                    }
                }
                if blk.load != 0.0 {
                    let phi = feature_row(net, &blk.x, &sig, &[(vec![0; net.dim()], 1.0)]);
                    for a in 0..p {
                        rhs[a] += blk.load * phi[a];
                    }
                }
            }
            (g, rhs)
        })
        .collect();
    let mut g = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    for (pg, pr) in parts {
        for a in 0..p {
            for b in a..p {
                g[(a, b)] += pg[a * p + b];
            }
            rhs[a] += pr[a];
        }
    }
    for a in 0..p {
        for b in 0..a {
            g[(a, b)] = g[(b, a)];
        }
    }
    if g.iter().any(|v| !v.is_finite()) || rhs.iter().any(|v| !v.is_finite()) {
        return Err(FnmError::numeric("Gram assembly produced a non-finite entry"));
    }
    Ok((g, rhs))
}

/// Symmetric positive-definite solve with a ridge `1e-12·tr(G)/P` when the
/// factorization fails or is numerically singular.
pub fn spd_solve(g: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let p = g.nrows();
    if p == 0 {
        return Ok(DVector::zeros(0));
    }
    let well_conditioned = |c: &nalgebra::Cholesky<f64, nalgebra::Dyn>| {
        let d: Vec<f64> = c.l_dirty().diagonal().iter().map(|v| v * v).collect();
        let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        lo > 1e-15 * hi
    };
    if let Some(c) = g.clone().cholesky() {
        if well_conditioned(&c) {
            return Ok(refine(g, rhs, c.solve(rhs), |r| c.solve(r)));
        }
    }
    let ridge = 1e-12 * g.trace() / p as f64;
    let mut gr = g.clone();
    for i in 0..p {
        gr[(i, i)] += ridge;
    }
    let c = gr
        .cholesky()
        .ok_or_else(|| FnmError::numeric("Gram matrix not positive definite after ridge"))?;
    Ok(refine(g, rhs, c.solve(rhs), |r| c.solve(r)))
}

/// A few steps of iterative refinement against the unregularized `g`, kept
/// only while the residual shrinks.
fn refine(
    g: &DMatrix<f64>,
    rhs: &DVector<f64>,
    mut x: DVector<f64>,
    solve: impl Fn(&DVector<f64>) -> DVector<f64>,
) -> DVector<f64> {
    let mut r = rhs - g * &x;
    for _ in 0..3 {
        let cand = &x + solve(&r);
        let rc = rhs - g * &cand;
        if !(rc.norm() < r.norm()) {
            break;
        }
        x = cand;
        r = rc;
    }
    x
}

/// The minimizer of the problem's objective over the span of the net's
/// frozen units and tail monomials: new outer weights and tail coefficients.
pub fn solve_outer_ls(net: &ShallowNet, prob: &EllipticProblem) -> Result<ShallowNet> {
    check_degree(net, prob, GradOptions { freeze: Freeze::features(), subgradient: true })?;
    let (g, rhs) = gram_system(net, prob)?;
    let c = spd_solve(&g, &rhs)?;
    set_linear(net, c.as_slice())
}

/// Gram matrix `a(φ_p, φ_q)` (plus penalty rows when penalized) of the
/// net's units and tail monomials.
pub fn feature_gram(net: &ShallowNet, prob: &EllipticProblem) -> Result<DMatrix<f64>> {
    check_degree(net, prob, GradOptions { freeze: Freeze::features(), subgradient: true })?;
    Ok(gram_system(net, prob)?.0)
}

fn set_linear(net: &ShallowNet, c: &[f64]) -> Result<ShallowNet> {
    let n = net.units();
    let tail = net
        .tail()
        .iter()
        .zip(&c[n..])
        .map(|(t, v)| TailTerm {
            alpha: t.alpha.clone(),
            coeff: *v,
        })
        .collect();
    net.with_outer(c[..n].to_vec())?.with_tail(tail)
}

/// `L²` projection of `target` onto the span of the net's units and tail
/// monomials under `rule`.
pub fn l2_project(net: &ShallowNet, target: &dyn Field, rule: &QuadratureRule) -> Result<ShallowNet> {
    let p = net.units() + net.tail().len();
    let zero = [(vec![0; net.dim()], 1.0)];
    let rows: Vec<Result<(Vec<f64>, f64)>> = rule
        .nodes
        .par_iter()
        .map(|x| {
            let sig = activation_table(net, x, 0);
            Ok((feature_row(net, x, &sig, &zero), target.value(x)?))
        })
        .collect();
    let mut g = DMatrix::zeros(p, p);
    let mut rhs = DVector::zeros(p);
    for (row, w) in rows.into_iter().zip(&rule.weights) {
        let (phi, u) = row?;
        for a in 0..p {
            rhs[a] += w * phi[a] * u;
            for b in a..p {
                g[(a, b)] += w * phi[a] * phi[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            g[(a, b)] = g[(b, a)];
        }
    }
    let c = spd_solve(&g, &rhs)?;
    set_linear(net, c.as_slice())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    GdBacktracking,
    Adam,
    /// Alternates `inner_steps` backtracking steps on the features with an
    /// exact outer solve.
    Hybrid { inner_steps: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// `w` uniform on the unit sphere, `b` uniform in `[-T, T]`, `a = 0`.
    RandomSphere { radius: f64 },
    /// Units from a sampling construction applied to a spectral surrogate of
    /// the manufactured solution: `relu_taylor`, `spline_stratified` or
    /// `mc_cos`.
    FromSampler { construction: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub method: Method,
    pub max_iters: usize,
    pub step: f64,
    pub grad_tol: f64,
    pub seed: u64,
    pub init: Init,
    pub freeze: Freeze,
    pub subgradient: bool,
    /// Project inner weights back to the unit ball after each step.
    pub reproject: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            method: Method::Hybrid { inner_steps: 5 },
            max_iters: 200,
            step: 1.0,
            grad_tol: 1e-10,
            seed: 0,
            init: Init::RandomSphere { radius: 1.0 },
            freeze: Freeze::default(),
            subgradient: false,
            reproject: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(FnmError::Config("step size must be positive".into()));
        }
        if !(self.grad_tol > 0.0) {
            return Err(FnmError::Config("gradient tolerance must be positive".into()));
        }
        if let Method::Hybrid { inner_steps: 0 } = self.method {
            return Err(FnmError::Config("hybrid training needs at least one inner step".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    IterationCap,
    Stagnation,
    LineSearchFailed,
}

impl Termination {
    pub fn name(&self) -> &'static str {
        match self {
            Termination::GradientTolerance => "gradient_tolerance",
            Termination::IterationCap => "iteration_cap",
            Termination::Stagnation => "stagnation",
            Termination::LineSearchFailed => "line_search_failed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub j_values: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub wall_ms: Vec<f64>,
    pub net: ShallowNet,
    pub termination: Termination,
    /// `(β₁, β₂, ε)` when Adam was used.
    pub adam: Option<(f64, f64, f64)>,
    /// Set when `k = m` one-sided derivatives were used.
    pub subgradient: bool,
}

impl TrainReport {
    pub fn final_j(&self) -> f64 {
        *self.j_values.last().unwrap_or(&f64::NAN)
    }

    /// Deterministic text form (timings excluded).
    pub fn to_text(&self) -> String {
        let mut s = format!("termination {}\n", self.termination.name());
        for (j, g) in self.j_values.iter().zip(&self.grad_norms) {
            s.push_str(&format!("{} {}\n", crate::hexfloat::format(*j), crate::hexfloat::format(*g)));
        }
        s.push_str(&crate::net::write_net(&self.net));
        s
    }
}

fn project_ball(net: &ShallowNet) -> Result<ShallowNet> {
    let d = net.dim();
    let mut inner = net.inner_flat().to_vec();
    for w in inner.chunks_mut(d) {
        let r = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r > 1.0 {
            w.iter_mut().for_each(|v| *v /= r);
        }
    }
    net.with_inner_bias(inner, net.bias().to_vec())
}

struct Trainer<'a> {
    prob: &'a EllipticProblem,
    cfg: &'a TrainConfig,
    opts: GradOptions,
    start: Instant,
    report_j: Vec<f64>,
    report_g: Vec<f64>,
    wall: Vec<f64>,
}

impl Trainer<'_> {
    fn record(&mut self, j: f64, g: f64) -> Result<()> {
        if !j.is_finite() {
            return Err(FnmError::numeric(format!(
                "objective became {j} at iteration {} (last finite value {:?})",
                self.report_j.len(),
                self.report_j.last()
            )));
        }
        self.report_j.push(j);
        self.report_g.push(g);
        self.wall.push(self.start.elapsed().as_secs_f64() * 1e3);
        Ok(())
    }

    fn stagnated(&self) -> bool {
        let n = self.report_j.len();
        if n <= STAGNATION_WINDOW {
            return false;
        }
        let (old, new) = (self.report_j[n - 1 - STAGNATION_WINDOW], self.report_j[n - 1]);
        (old - new).abs() <= STAGNATION_TOL * old.abs().max(1e-300)
    }

    fn eval(&self, net: &ShallowNet) -> Result<(f64, Gradient)> {
        energy_and_gradient(net, self.prob, self.opts)
    }

    /// One Armijo backtracking step from `net` with objective `j` and
    /// gradient `g`; `None` when no decrease is found.
    fn backtrack(&self, net: &ShallowNet, j: f64, g: &Gradient, step: &mut f64) -> Result<Option<(ShallowNet, f64)>> {
        let p = params(net);
        let gf = g.flat();
        let g2: f64 = gf.iter().map(|v| v * v).sum();
        let mut t = *step;
        for _ in 0..60 {
            let trial: Vec<f64> = p.iter().zip(&gf).map(|(a, b)| a - t * b).collect();
            let mut cand = with_params(net, &trial)?;
            if self.cfg.reproject {
                cand = project_ball(&cand)?;
            }
            match objective_and_flat_grad(&cand, self.prob, false) {
                Ok((jc, _)) if jc <= j - ARMIJO * t * g2 => {
                    *step = (2.0 * t).min(1e6);
                    return Ok(Some((cand, jc)));
                }
                _ => t *= 0.5,
            }
        }
        Ok(None)
    }
}

/// Random features for `prob`: unit-sphere directions, biases in
/// `[-T, T]` with `T = max ‖x‖` over the domain, zero outer weights.
pub fn random_sphere_net(activation: Activation, prob: &EllipticProblem, n: usize, radius: f64, seed: u64) -> Result<ShallowNet> {
    sphere_net(activation, prob.dim(), n, radius, seed)
}

fn sphere_net(activation: Activation, d: usize, n: usize, radius: f64, seed: u64) -> Result<ShallowNet> {
    let mut rng = stream_rng(seed, 0);
    let mut inner = Vec::with_capacity(n * d);
    for _ in 0..n {
        loop {
            let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let r = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r > 1e-3 && r <= 1.0 {
                inner.extend(w.iter().map(|v| v / r));
                break;
            }
        }
    }
    let bias = (0..n).map(|_| rng.random_range(-radius..=radius)).collect();
    ShallowNet::from_flat(activation, d, vec![0.0; n], inner, bias, vec![])
}

/// Rewrites a net built in coordinates `y = x - c` as a net in `x`.
pub fn recenter(net: &ShallowNet, c: &[f64]) -> Result<ShallowNet> {
    let d = net.dim();
    let bias: Vec<f64> = (0..net.units())
        .map(|i| net.bias()[i] - net.inner(i).iter().zip(c).map(|(w, ci)| w * ci).sum::<f64>())
        .collect();
    // (x - c)^α = Σ_{β ≤ α} C(α, β) x^β (-c)^{α-β}
    let mut tail: Vec<TailTerm> = Vec::new();
    for t in net.tail() {
        for beta in up_to_order(d, order(&t.alpha)) {
            if beta.iter().zip(&t.alpha).any(|(b, a)| b > a) {
                continue;
            }
            let mut coef = t.coeff;
            for j in 0..d {
                coef *= binomial(t.alpha[j], beta[j]) * (-c[j]).powi((t.alpha[j] - beta[j]) as i32);
            }
            match tail.iter_mut().find(|s| s.alpha == beta) {
                Some(s) => s.coeff += coef,
                None => tail.push(TailTerm { alpha: beta, coeff: coef }),
            }
        }
    }
    net.with_inner_bias(net.inner_flat().to_vec(), bias)?.with_tail(tail)
}

/// Initial network with at most `n` units per `init`.
pub fn initialize(activation: Activation, prob: &EllipticProblem, n: usize, init: &Init, seed: u64) -> Result<ShallowNet> {
    Initializer::new(activation, prob, n, init)?.net(seed)
}

/// The seed-independent part of [`initialize`], reusable across seeds.
pub struct Initializer {
    activation: Activation,
    dim: usize,
    n: usize,
    source: Source,
}

enum Source {
    Sphere { radius: f64 },
    Sampler { plan: Box<PreparedConstruction>, center: Vec<f64> },
}

impl Initializer {
    pub fn new(activation: Activation, prob: &EllipticProblem, n: usize, init: &Init) -> Result<Self> {
        let source = match init {
            Init::RandomSphere { radius } => Source::Sphere { radius: *radius },
            Init::FromSampler { construction } => {
                let exact = prob
                    .exact()
                    .ok_or_else(|| FnmError::invalid("sampler initialization needs a manufactured solution"))?;
                let center = prob.domain().center();
                let radius = prob.domain().radius_about(&center);
                let target = exact.surrogate_target(&center, radius, 0.5)?;
                let kind = match (construction.as_str(), activation) {
                    ("relu_taylor", Activation::ReluPow(k)) => ConstructionKind::ReluTaylor { k, stratified: true },
                    ("spline_stratified", Activation::BSpline(k)) => ConstructionKind::SplineStratified { k },
                    ("mc_cos", Activation::Cosine) => ConstructionKind::McCos { m: prob.m() },
                    _ => {
                        return Err(FnmError::Config(format!(
                            "construction '{construction}' does not match activation {}",
                            activation.name()
                        )))
                    }
                };
                // stratified counts round up per cell: take the largest
                // request whose draws fit in n units
                let plan = PreparedConstruction::new(&target, kind, n)?;
                let plan = if plan.units()? <= n {
                    plan
                } else {
                    let (mut lo, mut hi) = (1, n);
                    let mut best = PreparedConstruction::new(&target, kind, 1)?;
                    while hi - lo > 1 {
                        let mid = (lo + hi) / 2;
                        let p = PreparedConstruction::new(&target, kind, mid)?;
                        if p.units()? <= n {
                            lo = mid;
                            best = p;
                        } else {
                            hi = mid;
                        }
                    }
                    best
                };
                Source::Sampler { plan: Box::new(plan), center }
            }
        };
        Ok(Initializer {
            activation,
            dim: prob.dim(),
            n,
            source,
        })
    }

    pub fn net(&self, seed: u64) -> Result<ShallowNet> {
        match &self.source {
            Source::Sphere { radius } => sphere_net(self.activation, self.dim, self.n, *radius, seed),
            Source::Sampler { plan, center } => recenter(&plan.draw(seed)?.net, center),
        }
    }
}

/// Trains `net` on `prob` per `cfg`.
pub fn train(net: &ShallowNet, prob: &EllipticProblem, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let opts = GradOptions {
        freeze: cfg.freeze,
        subgradient: cfg.subgradient,
    };
    check_degree(net, prob, opts)?;
    let mut tr = Trainer {
        prob,
        cfg,
        opts,
        start: Instant::now(),
        report_j: Vec::new(),
        report_g: Vec::new(),
        wall: Vec::new(),
    };
    let mut net = if cfg.reproject { project_ball(net)? } else { net.clone() };
    let mut adam_state: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut step = cfg.step;
    let (mut j, mut g) = tr.eval(&net)?;
    tr.record(j, g.norm())?;
    let mut termination = Termination::IterationCap;
    for it in 0..cfg.max_iters {
        if g.norm() < cfg.grad_tol {
            termination = Termination::GradientTolerance;
            break;
        }
        match cfg.method {
            Method::GdBacktracking => match tr.backtrack(&net, j, &g, &mut step)? {
                Some((n2, _)) => net = n2,
                None => {
                    termination = Termination::LineSearchFailed;
                    break;
                }
            },
            Method::Adam => {
                let (m1, m2) = adam_state.get_or_insert_with(|| (vec![0.0; g.flat().len()], vec![0.0; g.flat().len()]));
                let t = (it + 1) as i32;
                let mut p = params(&net);
                let mask = mask(&net, cfg.freeze);
                for (i, gi) in g.flat().iter().enumerate() {
                    if !mask[i] {
                        continue;
                    }
                    m1[i] = ADAM_BETA1 * m1[i] + (1.0 - ADAM_BETA1) * gi;
                    m2[i] = ADAM_BETA2 * m2[i] + (1.0 - ADAM_BETA2) * gi * gi;
                    let mh = m1[i] / (1.0 - ADAM_BETA1.powi(t));
                    let vh = m2[i] / (1.0 - ADAM_BETA2.powi(t));
                    p[i] -= cfg.step * mh / (vh.sqrt() + ADAM_EPS);
                }
                net = with_params(&net, &p)?;
                if cfg.reproject {
                    net = project_ball(&net)?;
                }
            }
            Method::Hybrid { inner_steps } => {
                if !cfg.freeze.outer {
                    let solved = solve_outer_ls(&net, prob)?;
                    if objective_and_flat_grad(&solved, prob, false)?.0 <= j {
                        net = solved;
                    }
                }
                let feature_opts = GradOptions {
                    freeze: Freeze {
                        outer: true,
                        tail: true,
                        ..cfg.freeze
                    },
                    subgradient: cfg.subgradient,
                };
                if !(feature_opts.freeze.inner && feature_opts.freeze.bias) {
                    let inner_tr = Trainer { opts: feature_opts, ..tr.clone_shallow() };
                    let (mut jf, mut gf) = inner_tr.eval(&net)?;
                    for _ in 0..inner_steps {
                        match inner_tr.backtrack(&net, jf, &gf, &mut step)? {
                            Some((n2, _)) => {
                                net = n2;
                                (jf, gf) = inner_tr.eval(&net)?;
                            }
                            None => break,
                        }
                    }
                }
            }
        }
        (j, g) = tr.eval(&net)?;
        tr.record(j, g.norm())?;
        if tr.stagnated() {
            termination = Termination::Stagnation;
            break;
        }
    }
    Ok(TrainReport {
        j_values: tr.report_j,
        grad_norms: tr.report_g,
        wall_ms: tr.wall,
        net,
        termination,
        adam: matches!(cfg.method, Method::Adam).then_some((ADAM_BETA1, ADAM_BETA2, ADAM_EPS)),
        subgradient: cfg.subgradient,
    })
}

impl<'a> Trainer<'a> {
    fn clone_shallow(&self) -> Trainer<'a> {
        Trainer {
            prob: self.prob,
            cfg: self.cfg,
            opts: self.opts,
            start: self.start,
            report_j: Vec::new(),
            report_g: Vec::new(),
            wall: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{assemble_a, build_problem, energy_j, load, BoundaryCondition, QuadSpec};
    use crate::quadrature::Domain;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_net(rng: &mut ChaCha8Rng, d: usize, k: usize, n: usize, tail: bool) -> ShallowNet {
        let inner = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let tail = if tail {
            up_to_order(d, 1)
                .into_iter()
                .map(|alpha| TailTerm {
                    alpha,
                    coeff: rng.random_range(-1.0..1.0),
                })
                .collect()
        } else {
            vec![]
        };
        ShallowNet::new(
            Activation::relu_pow(k).unwrap(),
            d,
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            inner,
            (0..n).map(|_| rng.random_range(-0.5..0.5)).collect(),
            tail,
        )
        .unwrap()
    }

    fn small(name: &str) -> EllipticProblem {
        build_problem(name, Some(QuadSpec { panels: 32, q: 6 }), Some(0.1)).unwrap()
    }

    #[test]
    fn zero_net_zero_rhs_has_zero_gradient() {
        let p = EllipticProblem::new(1, Domain::unit(1).unwrap(), BoundaryCondition::Neumann, |_| 0.0).unwrap();
        let net = ShallowNet::new(Activation::relu_pow(2).unwrap(), 1, vec![0.0; 3], vec![vec![1.0]; 3], vec![0.1, 0.2, 0.3], vec![])
            .unwrap();
        assert!(grad_energy(&net, &p).unwrap().norm() == 0.0);
    }

    #[test]
    fn objective_matches_generic_assembly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for name in ["poisson2d_neumann", "biharmonic1d_penalty"] {
            let p = small(name);
            let net = random_net(&mut rng, p.dim(), 3, 5, true);
            let generic = crate::energy::objective(&net, &p).unwrap();
            assert!((net_objective(&net, &p).unwrap() - generic).abs() < 1e-12 * (1.0 + generic.abs()));
        }
    }

    #[test]
    fn outer_gradient_is_a_minus_load() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = small("poisson1d_neumann");
        let net = random_net(&mut rng, 1, 3, 4, false);
        let g = grad_energy(&net, &p).unwrap();
        for i in 0..net.units() {
            let mut e = vec![0.0; 4];
            e[i] = 1.0;
            let phi = net.with_outer(e).unwrap();
            let direct = assemble_a(&phi, &net, &p).unwrap() - load(&phi, &p).unwrap();
            assert!((g.outer[i] - direct).abs() < 1e-12 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (name, k) in [("poisson2d_neumann", 2), ("biharmonic1d_penalty", 4)] {
            let p = small(name);
            let net = random_net(&mut rng, p.dim(), k, 3, true);
            let g = grad_energy(&net, &p).unwrap().flat();
            let base = params(&net);
            let h = 1e-5;
            for i in 0..base.len() {
                let mut up = base.clone();
                let mut dn = base.clone();
                up[i] += h;
                dn[i] -= h;
                let fd = (net_objective(&with_params(&net, &up).unwrap(), &p).unwrap()
                    - net_objective(&with_params(&net, &dn).unwrap(), &p).unwrap())
                    / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-6 * (1.0 + g[i].abs()), "{name} param {i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn degree_equal_to_order_needs_subgradient_mode() {
        let p = small("poisson1d_neumann");
        let net = random_net(&mut ChaCha8Rng::seed_from_u64(4), 1, 1, 3, false);
        assert!(grad_energy(&net, &p).is_err());
        let opts = GradOptions {
            freeze: Freeze::default(),
            subgradient: true,
        };
        assert!(energy_and_gradient(&net, &p, opts).is_ok());
        assert!(solve_outer_ls(&net, &p).is_ok());
    }

    #[test]
    fn single_feature_normal_equation() {
        let p = small("poisson1d_neumann");
        let phi = ShallowNet::new(Activation::relu_pow(2).unwrap(), 1, vec![1.0], vec![vec![1.0]], vec![-0.2], vec![]).unwrap();
        let solved = solve_outer_ls(&phi, &p).unwrap();
        let expect = load(&phi, &p).unwrap() / assemble_a(&phi, &phi, &p).unwrap();
        assert!((solved.outer()[0] - expect).abs() < 1e-12 * expect.abs().max(1.0));
    }

    #[test]
    fn gram_is_positive_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = small("poisson2d_neumann");
        // positive biases keep every unit active near the origin
        let net = random_net(&mut rng, 2, 3, 8, false);
        let bias = net.bias().iter().map(|b| b.abs() + 0.1).collect();
        let net = net.with_inner_bias(net.inner_flat().to_vec(), bias).unwrap();
        let g = feature_gram(&net, &p).unwrap();
        assert!(g.symmetric_eigenvalues().min() > 0.0);
    }

    #[test]
    fn outer_only_descent_reaches_the_least_squares_energy() {
        let p = small("poisson1d_neumann");
        let net = ShallowNet::new(
            Activation::relu_pow(2).unwrap(),
            1,
            vec![0.0; 3],
            vec![vec![1.0], vec![-1.0], vec![1.0]],
            vec![0.0, 1.0, -0.5],
            vec![],
        )
        .unwrap();
        let ls = energy_j(&solve_outer_ls(&net, &p).unwrap(), &p).unwrap();
        let cfg = TrainConfig {
            method: Method::GdBacktracking,
            max_iters: 20000,
            freeze: Freeze::features(),
            grad_tol: 1e-12,
            ..TrainConfig::default()
        };
        let rep = train(&net, &p, &cfg).unwrap();
        assert!((rep.final_j() - ls).abs() < 1e-9, "{} vs {ls}", rep.final_j());
        assert!(rep.j_values.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn hybrid_training_is_monotone_and_deterministic() {
        let p = small("poisson1d_neumann");
        let net = random_sphere_net(Activation::relu_pow(3).unwrap(), &p, 8, 1.0, 7).unwrap();
        let cfg = TrainConfig {
            max_iters: 15,
            ..TrainConfig::default()
        };
        let a = train(&net, &p, &cfg).unwrap();
        let b = train(&net, &p, &cfg).unwrap();
        assert!(a.j_values.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn recentering_preserves_the_function() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let net = random_net(&mut rng, 2, 2, 3, true);
        let net = net
            .with_tail(vec![TailTerm { alpha: vec![2, 0], coeff: 0.7 }, TailTerm { alpha: vec![1, 1], coeff: -0.3 }])
            .unwrap();
        let c = [0.5, 0.25];
        let moved = recenter(&net, &c).unwrap();
        for x in [[0.1, 0.9], [0.7, 0.3]] {
            let y = [x[0] - c[0], x[1] - c[1]];
            assert!((moved.eval(&x) - net.eval(&y)).abs() < 1e-13);
        }
    }

    #[test]
    fn sampler_initialization_builds_requested_units() {
        let p = small("poisson1d_neumann");
        let init = Init::FromSampler {
            construction: "relu_taylor".into(),
        };
        let net = initialize(Activation::relu_pow(3).unwrap(), &p, 16, &init, 1).unwrap();
        assert!(net.units() <= 16 && net.units() >= 8);
        assert!(initialize(Activation::Cosine, &p, 16, &init, 1).is_err());
    }
}
