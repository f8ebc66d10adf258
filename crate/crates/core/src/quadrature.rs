//! Axis-aligned box domains and Gauss-Legendre quadrature rules.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{FnmError, Result};

/// An axis-aligned box `(lower_1, upper_1) × ... × (lower_d, upper_d)`, `d ≤ 3`.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = lower.len();
        if !(1..=3).contains(&d) || upper.len() != d {
            return Err(FnmError::invalid(format!(
                "domain dimension must be 1..=3 with matching bounds, got {} / {}",
                lower.len(),
                upper.len()
            )));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return Err(FnmError::invalid("domain requires finite lower[i] < upper[i]"));
        }
        Ok(Domain { lower, upper })
    }

    /// `(0,1)^d`
    pub fn unit(d: usize) -> Result<Self> {
        Domain::new(vec![0.0; d], vec![1.0; d])
    }

    /// `(-1,1)^d`
    pub fn symmetric(d: usize) -> Result<Self> {
        Domain::new(vec![-1.0; d], vec![1.0; d])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    pub fn surface_area(&self) -> f64 {
        let d = self.dim();
        if d == 1 {
            return 2.0;
        }
        (0..d)
            .map(|skip| {
                2.0 * (0..d)
                    .filter(|&i| i != skip)
                    .map(|i| self.upper[i] - self.lower[i])
                    .product::<f64>()
            })
            .sum()
    }

    /// `T = max_{x ∈ Ω̄} ‖x‖`, attained at a corner.
    pub fn radius(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| l.abs().max(u.abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    /// `max_{x ∈ Ω̄} ‖x - c‖`
    pub fn radius_about(&self, c: &[f64]) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .zip(c)
            .map(|((l, u), ci)| (l - ci).abs().max((u - ci).abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(xi, (l, u))| *xi >= *l && *xi <= *u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    Interior,
    Boundary,
}

/// Nodes, positive weights and (for boundary rules) outward unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub dim: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub kind: RuleKind,
    pub normals: Vec<Vec<f64>>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Concatenates two rules of the same kind and dimension.
    pub fn merged(mut self, other: QuadratureRule) -> Result<QuadratureRule> {
        if self.kind != other.kind || self.dim != other.dim {
            return Err(FnmError::invalid("cannot merge rules of different kind or dimension"));
        }
        self.nodes.extend(other.nodes);
        self.weights.extend(other.weights);
        self.normals.extend(other.normals);
        Ok(self)
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, `1 ≤ n ≤ 64`.
///
/// Nodes are found by Newton iteration on `P_n` from the Chebyshev-like guess
/// `cos(π(i - 1/4)/(n + 1/2))`, and returned in increasing order.
pub fn gauss_legendre_1d(n: usize) -> Result<QuadratureRule> {
    if !(1..=64).contains(&n) {
        return Err(FnmError::invalid(format!("Gauss-Legendre order must be in 1..=64, got {n}")));
    }
    let (x, w) = gauss_legendre_raw(n);
    Ok(QuadratureRule {
        dim: 1,
        nodes: x.into_iter().map(|xi| vec![xi]).collect(),
        weights: w,
        kind: RuleKind::Interior,
        normals: Vec::new(),
    })
}

pub(crate) fn gauss_legendre_raw(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Tensor product of per-axis rules given as `(nodes, weights)` lists.
fn tensor_of(axes: &[(Vec<f64>, Vec<f64>)]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut nodes = vec![Vec::new()];
    let mut weights = vec![1.0];
    for (ax_nodes, ax_weights) in axes {
        let mut nn = Vec::with_capacity(nodes.len() * ax_nodes.len());
        let mut nw = Vec::with_capacity(nodes.len() * ax_nodes.len());
        for (p, w) in nodes.iter().zip(&weights) {
            for (x, wx) in ax_nodes.iter().zip(ax_weights) {
                let mut q = p.clone();
                q.push(*x);
                nn.push(q);
                nw.push(w * wx);
            }
        }
        nodes = nn;
        weights = nw;
    }
    (nodes, weights)
}

/// Composite Gauss rule on `[a, b]` with the given panel breakpoints
/// (interior points, any order) and `q` points per panel.
fn composite_axis(a: f64, b: f64, breaks: &[f64], q: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre_raw(q);
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&t| t > a && t < b).collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * (b - a));
    let mut nodes = Vec::with_capacity((pts.len() - 1) * q);
    let mut weights = Vec::with_capacity((pts.len() - 1) * q);
    for win in pts.windows(2) {
        let (lo, hi) = (win[0], win[1]);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (x, w) in gx.iter().zip(&gw) {
            nodes.push(mid + half * x);
            weights.push(half * w);
        }
    }
    (nodes, weights)
}

fn uniform_breaks(a: f64, b: f64, panels: usize) -> Vec<f64> {
    (1..panels).map(|i| a + (b - a) * i as f64 / panels as f64).collect()
}

/// `q^d` tensor Gauss nodes affinely mapped onto the domain.
pub fn tensor_rule(domain: &Domain, q: usize) -> Result<QuadratureRule> {
    composite_rule(domain, 1, q)
}

/// Tensor rule built from `panels` equal panels per axis with `q` Gauss
/// points each.
pub fn composite_rule(domain: &Domain, panels: usize, q: usize) -> Result<QuadratureRule> {
    check_q(q)?;
    if panels == 0 {
        return Err(FnmError::invalid("panel count must be positive"));
    }
    let axes: Vec<_> = (0..domain.dim())
        .map(|i| {
            let (a, b) = (domain.lower[i], domain.upper[i]);
            composite_axis(a, b, &uniform_breaks(a, b, panels), q)
        })
        .collect();
    let (nodes, weights) = tensor_of(&axes);
    Ok(QuadratureRule {
        dim: domain.dim(),
        nodes,
        weights,
        kind: RuleKind::Interior,
        normals: Vec::new(),
    })
}

/// One-dimensional composite rule whose panels are split at `breakpoints`
/// (e.g. the hidden grid of a network) and additionally at `panels` uniform
/// points; integrands that are smooth between breakpoints are integrated to
/// Gauss accuracy.
pub fn breakpoint_rule_1d(domain: &Domain, breakpoints: &[f64], panels: usize, q: usize) -> Result<QuadratureRule> {
    check_q(q)?;
    if domain.dim() != 1 {
        return Err(FnmError::invalid("breakpoint rule is one-dimensional"));
    }
    let (a, b) = (domain.lower[0], domain.upper[0]);
    let mut breaks = uniform_breaks(a, b, panels.max(1));
    breaks.extend_from_slice(breakpoints);
    let (x, w) = composite_axis(a, b, &breaks, q);
    Ok(QuadratureRule {
        dim: 1,
        nodes: x.into_iter().map(|t| vec![t]).collect(),
        weights: w,
        kind: RuleKind::Interior,
        normals: Vec::new(),
    })
}

fn check_q(q: usize) -> Result<()> {
    if !(1..=64).contains(&q) {
        return Err(FnmError::invalid(format!("per-axis point count must be in 1..=64, got {q}")));
    }
    Ok(())
}

/// Boundary rule: a `(d-1)`-dimensional tensor Gauss rule on each of the
/// `2d` faces with the face's constant outward normal. For `d = 1` the two
/// endpoints with unit weight.
pub fn boundary_rule(domain: &Domain, q: usize) -> Result<QuadratureRule> {
    composite_boundary_rule(domain, 1, q)
}

pub fn composite_boundary_rule(domain: &Domain, panels: usize, q: usize) -> Result<QuadratureRule> {
    check_q(q)?;
    let d = domain.dim();
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut normals = Vec::new();
    for axis in 0..d {
        let others: Vec<_> = (0..d)
            .filter(|&i| i != axis)
            .map(|i| {
                let (a, b) = (domain.lower[i], domain.upper[i]);
                composite_axis(a, b, &uniform_breaks(a, b, panels.max(1)), q)
            })
            .collect();
        let (face_nodes, face_weights) = tensor_of(&others);
        for (side, coord) in [(-1.0, domain.lower[axis]), (1.0, domain.upper[axis])] {
            let mut n = vec![0.0; d];
            n[axis] = side;
            for (p, w) in face_nodes.iter().zip(&face_weights) {
                let mut x = Vec::with_capacity(d);
                let mut it = p.iter();
                for i in 0..d {
                    x.push(if i == axis { coord } else { *it.next().unwrap() });
                }
                nodes.push(x);
                weights.push(*w);
                normals.push(n.clone());
            }
        }
    }
    Ok(QuadratureRule {
        dim: d,
        nodes,
        weights,
        kind: RuleKind::Boundary,
        normals,
    })
}

/// Seeded Monte Carlo interior rule: uniform nodes, equal weights `|Ω|/n`.
pub fn monte_carlo_rule(domain: &Domain, n: usize, seed: u64) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(FnmError::invalid("Monte Carlo rule needs at least one node"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = domain.volume() / n as f64;
    let nodes = (0..n)
        .map(|_| {
            domain
                .lower
                .iter()
                .zip(&domain.upper)
                .map(|(l, u)| rng.random_range(*l..*u))
                .collect()
        })
        .collect();
    Ok(QuadratureRule {
        dim: domain.dim(),
        nodes,
        weights: vec![w; n],
        kind: RuleKind::Interior,
        normals: Vec::new(),
    })
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_KRONROD: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_GAUSS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = GK_KRONROD[7] * fc;
    let mut gauss = GK_GAUSS[3] * fc;
    for i in 0..7 {
        let v = f(c - h * GK_NODES[i]) + f(c + h * GK_NODES[i]);
        kron += GK_KRONROD[i] * v;
        if i % 2 == 1 {
            gauss += GK_GAUSS[i / 2] * v;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Globally adaptive Gauss-Kronrod (7/15) integration of `f` over `[a, b]`:
/// the panel with the largest error estimate is bisected until the summed
/// estimate drops below `max(abs_tol, rel_tol·|I|)` or `max_panels` is hit.
/// Returns the integral and the final error estimate.
pub fn adaptive_integrate(
    f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> (f64, f64) {
    adaptive_integrate_from(f, a, b, 1, abs_tol, rel_tol, max_panels)
}

/// As [`adaptive_integrate`], starting from `initial` equal panels so that
/// features narrower than `(b-a)/initial` are not missed.
pub fn adaptive_integrate_from(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    initial: usize,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    let initial = initial.max(1);
    let h = (b - a) / initial as f64;
    let mut panels: Vec<(f64, f64, f64, f64)> = (0..initial)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == initial { b } else { lo + h };
            let (v, e) = gk15(&mut f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();
    let max_panels = max_panels.max(initial + 2);
    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) || panels.len() >= max_panels || !err.is_finite() {
            return (total, err);
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, p)| if p.3 > best.1 { (i, p.3) } else { best });
        let (lo, hi, _, _) = panels.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
}

/// `Σ w_i f(x_i)`. Node values may be computed in parallel; the sum is
/// always taken in node order.
pub fn integrate<F>(f: F, rule: &QuadratureRule) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let values: Vec<f64> = rule.nodes.par_iter().map(|x| f(x)).collect();
    let mut acc = 0.0;
    for ((v, w), x) in values.iter().zip(&rule.weights).zip(&rule.nodes) {
        if !v.is_finite() {
            return Err(FnmError::numeric_at(format!("integrand is {v}"), x));
        }
        acc += w * v;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_order_rules() {
        let r = gauss_legendre_1d(1).unwrap();
        assert_eq!(r.nodes, vec![vec![0.0]]);
        assert_eq!(r.weights, vec![2.0]);
        let r = gauss_legendre_1d(2).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert!((r.nodes[0][0] + s).abs() < 1e-15 && (r.nodes[1][0] - s).abs() < 1e-15);
        assert!((r.weights[0] - 1.0).abs() < 1e-15 && (r.weights[1] - 1.0).abs() < 1e-15);
        let r = gauss_legendre_1d(3).unwrap();
        assert!(integrate(|x| x[0].powi(5), &r).unwrap().abs() < 1e-15);
    }

    #[test]
    fn order_out_of_range() {
        assert!(matches!(gauss_legendre_1d(0), Err(FnmError::InvalidArgument(_))));
        assert!(matches!(gauss_legendre_1d(65), Err(FnmError::InvalidArgument(_))));
    }

    #[test]
    fn high_order_exactness() {
        for n in [7usize, 20, 33, 64] {
            let r = gauss_legendre_1d(n).unwrap();
            assert!((r.weight_sum() - 2.0).abs() < 1e-13, "n={n}");
            let deg = 2 * n - 2;
            let exact = 2.0 / (deg as f64 + 1.0);
            let got = integrate(|x| x[0].powi(deg as i32), &r).unwrap();
            assert!((got - exact).abs() < 1e-13, "n={n} got {got}");
        }
    }

    #[test]
    fn tensor_rule_examples() {
        let sq = Domain::unit(2).unwrap();
        let r = tensor_rule(&sq, 2).unwrap();
        assert_eq!(r.len(), 4);
        assert!((r.weight_sum() - 1.0).abs() < 1e-15);
        assert!((integrate(|x| x[0] * x[1], &r).unwrap() - 0.25).abs() < 1e-15);
        let iv = Domain::new(vec![0.0], vec![2.0]).unwrap();
        let r = tensor_rule(&iv, 1).unwrap();
        assert_eq!(r.nodes, vec![vec![1.0]]);
        assert_eq!(r.weights, vec![2.0]);
        let r = tensor_rule(&Domain::unit(1).unwrap(), 2).unwrap();
        assert!((integrate(|x| x[0] * x[0], &r).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn boundary_rule_examples() {
        let r = boundary_rule(&Domain::unit(1).unwrap(), 5).unwrap();
        assert_eq!(r.nodes, vec![vec![0.0], vec![1.0]]);
        assert_eq!(r.weights, vec![1.0, 1.0]);
        assert_eq!(r.normals, vec![vec![-1.0], vec![1.0]]);
        let r = boundary_rule(&Domain::unit(2).unwrap(), 1).unwrap();
        assert_eq!(r.len(), 4);
        assert!((r.weight_sum() - 4.0).abs() < 1e-15);
        let r = boundary_rule(&Domain::unit(3).unwrap(), 2).unwrap();
        assert!((r.weight_sum() - 6.0).abs() < 1e-14);
        let c = 2.5;
        let r = boundary_rule(&Domain::unit(2).unwrap(), 3).unwrap();
        assert!((integrate(|_| c, &r).unwrap() - 4.0 * c).abs() < 1e-14);
    }

    #[test]
    fn boundary_nodes_on_faces_with_outward_normals() {
        let dom = Domain::new(vec![-1.0, 0.0, 2.0], vec![1.0, 0.5, 3.0]).unwrap();
        let r = composite_boundary_rule(&dom, 2, 3).unwrap();
        assert!((r.weight_sum() - dom.surface_area()).abs() < 1e-12 * dom.surface_area());
        for (x, n) in r.nodes.iter().zip(&r.normals) {
            let axis = n.iter().position(|v| *v != 0.0).unwrap();
            assert_eq!(n.iter().filter(|v| **v != 0.0).count(), 1);
            let expect = if n[axis] < 0.0 { dom.lower()[axis] } else { dom.upper()[axis] };
            assert_eq!(x[axis], expect);
            assert!(dom.contains(x));
        }
    }

    #[test]
    fn non_finite_integrand_reports_node() {
        let r = tensor_rule(&Domain::unit(1).unwrap(), 1).unwrap();
        match integrate(|_| f64::NAN, &r) {
            Err(FnmError::Numeric { node: Some(n), .. }) => assert_eq!(n, vec![0.5]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn breakpoint_rule_integrates_kinks_exactly() {
        let dom = Domain::unit(1).unwrap();
        let r = breakpoint_rule_1d(&dom, &[0.3], 1, 3).unwrap();
        let got = integrate(|x| (x[0] - 0.3).max(0.0).powi(2), &r).unwrap();
        assert!((got - 0.7f64.powi(3) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn monte_carlo_rule_measure() {
        let dom = Domain::unit(3).unwrap();
        let r = monte_carlo_rule(&dom, 100, 7).unwrap();
        assert!((r.weight_sum() - 1.0).abs() < 1e-12);
        assert!(r.nodes.iter().all(|x| dom.contains(x)));
        assert_eq!(r, monte_carlo_rule(&dom, 100, 7).unwrap());
    }
    #[test]
    fn adaptive_handles_kinks() {
        let (v, _) = adaptive_integrate(|x: f64| (x - 0.3).abs(), 0.0, 1.0, 1e-14, 0.0, 500);
        assert!((v - (0.045 + 0.245)).abs() < 1e-13);
        let (v, _) = adaptive_integrate(|x: f64| x.cos(), 0.0, 10.0, 1e-15, 0.0, 200);
        assert!((v - 10f64.sin()).abs() < 1e-13);
    }
}
