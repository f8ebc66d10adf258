use std::f64::consts::PI;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::polar::{cell_mass, direction_layout, envelope, sample_cell, DirRegion, Envelope, Kernel, PolarCell};
use super::{stream_rng, truncated_moment, Cell, StratifiedPartition};
use crate::activations::Activation;
use crate::error::{FnmError, Result};
use crate::field::Field;
use crate::multiindex::{factorial, multi_factorial, up_to_order};
use crate::net::{ShallowNet, TailTerm};
use crate::target::FourierTarget;

/// A sampled approximant with the quantities its error bounds depend on.
#[derive(Debug, Clone)]
pub struct Construction {
    pub net: ShallowNet,
    /// `ν = ∫_G ρ` (for the cosine construction `‖ρ_m‖_{L¹}`).
    pub nu: f64,
    /// Number of strata (1 for plain Monte Carlo).
    pub cells: usize,
    /// Largest stratum diameter in the metric of the sampled parameters.
    pub max_cell_diameter: f64,
}

/// `u_N = (‖ρ_m‖/N) Σ cos(ω_i·x + β(ω_i)) / (1+‖ω_i‖)^m` with `ω_i` drawn
/// from `λ ∝ (1+‖ω‖)^m |û|` on the truncated frequency region.
pub fn mc_cos_construct(target: &FourierTarget, m: usize, n: usize, seed: u64) -> Result<Construction> {
    if n == 0 {
        return Err(FnmError::invalid("unit count must be positive"));
    }
    let mf = m as f64;
    let norm = truncated_moment(target, |r| (1.0 + r).powf(mf))?;
    if !(norm > 0.0) {
        return Err(FnmError::invalid("target spectrum has zero mass"));
    }
    let d = target.dim();
    let r_out = target.outer_freq_radius();
    let mut rng = stream_rng(seed, 0);
    let weight = |w: &[f64]| {
        let r = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        (1.0 + r).powf(mf) * target.amplitude(w)
    };
    let draw: Box<dyn Fn(&mut ChaCha8Rng) -> Vec<f64>> = match target.sampler() {
        // proposal |û|, acceptance ((1+r)/(1+R))^m
        Some(s) => Box::new(move |rng: &mut ChaCha8Rng| loop {
            let w = s(rng);
            let r = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if rng.random::<f64>() < ((1.0 + r) / (1.0 + r_out)).powf(mf) {
                break w;
            }
        }),
        None => {
            let env = grid_sup(d, r_out, &weight) * 1.25;
            if !(env > 0.0) {
                return Err(FnmError::invalid("target spectrum has zero mass"));
            }
            Box::new(move |rng: &mut ChaCha8Rng| loop {
                let w: Vec<f64> = (0..d).map(|_| rng.random_range(-r_out..=r_out)).collect();
                if rng.random::<f64>() * env < weight(&w) {
                    break w;
                }
            })
        }
    };
    let mut outer = Vec::with_capacity(n);
    let mut inner = Vec::with_capacity(n * d);
    let mut bias = Vec::with_capacity(n);
    for _ in 0..n {
        let w = draw(&mut rng);
        let r = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        outer.push(norm / (n as f64 * (1.0 + r).powf(mf)));
        bias.push(target.phase(&w));
        inner.extend(w);
    }
    let net = ShallowNet::from_flat(Activation::Cosine, d, outer, inner, bias, vec![])?;
    Ok(Construction {
        net,
        nu: norm,
        cells: 1,
        max_cell_diameter: 2.0 * r_out,
    })
}

fn grid_sup(d: usize, r: f64, f: &dyn Fn(&[f64]) -> f64) -> f64 {
    let per_axis: usize = match d {
        1 => 4001,
        2 => 301,
        _ => 61,
    };
    let mut sup: f64 = 0.0;
    let total = per_axis.pow(d as u32);
    let mut w = vec![0.0; d];
    for idx in 0..total {
        let mut rem = idx;
        for wi in w.iter_mut() {
            *wi = -r + 2.0 * r * (rem % per_axis) as f64 / (per_axis - 1) as f64;
            rem /= per_axis;
        }
        sup = sup.max(f(&w));
    }
    sup
}

/// Remainder kernel of the Taylor expansion for one sign `z`:
/// `ρ = |û| r^{k+1} |cos(z r t + β + π(k+1)/2 + π[z<0, k even])|`.
struct ReluKernel {
    target: FourierTarget,
    k: usize,
    z: f64,
}

impl Kernel for ReluKernel {
    fn weight(&self, omega: &[f64], r: f64) -> f64 {
        self.target.amplitude(omega) * r.powi(self.k as i32 + 1)
    }
    fn kappa(&self, r: f64) -> f64 {
        self.z * r
    }
    fn scale(&self) -> f64 {
        self.target.feature_scale()
    }
    fn psi(&self, omega: &[f64]) -> f64 {
        let flip = if self.z < 0.0 && self.k % 2 == 0 { PI } else { 0.0 };
        self.target.phase(omega) + 0.5 * PI * (self.k + 1) as f64 + flip
    }
}

/// Shell kernel of the B-spline representation with fixed `a`:
/// `ρ = (a/2)^{k+1} |û| |cos(β - a b + π(k+1)/2)|`.
struct SplineKernel {
    target: FourierTarget,
    k: usize,
    a: f64,
}

impl Kernel for SplineKernel {
    fn weight(&self, omega: &[f64], _r: f64) -> f64 {
        (0.5 * self.a).powi(self.k as i32 + 1) * self.target.amplitude(omega)
    }
    fn kappa(&self, _r: f64) -> f64 {
        -self.a
    }
    fn psi(&self, omega: &[f64]) -> f64 {
        self.target.phase(omega) + 0.5 * PI * (self.k + 1) as f64
    }
    fn scale(&self) -> f64 {
        self.target.feature_scale()
    }
}

/// A laid-out set of polar cells with masses and envelopes; independent of
/// the seed, so sweeps over seeds can share it.
struct Plan<K: Kernel + Send + 'static> {
    dim: usize,
    kernels: Arc<Vec<K>>,
    cells: Vec<(PolarCell, Arc<Envelope>, f64, f64)>,
}

impl<K: Kernel + Send + 'static> Plan<K> {
    fn new(dim: usize, kernels: Vec<K>, layout: Vec<(PolarCell, f64)>) -> Self {
        let kernels = Arc::new(kernels);
        let cells = layout
            .into_par_iter()
            .map(|(cell, diam)| {
                let kern = &kernels[cell.branch];
                let env = envelope(kern, &cell, dim);
                let mass = cell_mass(kern, &cell, dim, &env);
                (cell, Arc::new(env), mass, diam)
            })
            .collect();
        Plan { dim, kernels, cells }
    }

    fn total(&self) -> f64 {
        self.cells.iter().map(|c| c.2).sum()
    }

    /// Stratified partition whose draws are `[ω̄…, r, u, σ]`.
    fn partition(&self) -> Result<StratifiedPartition> {
        let dim = self.dim;
        let cells = self
            .cells
            .iter()
            .map(|(cell, env, mass, diam)| {
                let kernels = Arc::clone(&self.kernels);
                let cell = cell.clone();
                let env = Arc::clone(env);
                Cell::new(*mass, *diam, move |rng: &mut ChaCha8Rng| {
                    let (dir, r, u) = sample_cell(&kernels[cell.branch], &cell, dim, &env, rng)?;
                    let mut theta = dir;
                    theta.extend([r, u, cell.sign, cell.branch as f64]);
                    Ok(theta)
                })
            })
            .collect();
        StratifiedPartition::new(cells)
    }

    /// `(mass share, θ)` pairs: stratified (`n_i` per cell, weight
    /// `mass_i/n_i`) or plain Monte Carlo (`n` draws, weight `ν/n`).
    fn draw(&self, n: usize, seed: u64, stratified: bool) -> Result<Drawn> {
        let part = self.partition()?;
        if part.is_empty() {
            return Ok((vec![], 0, 0.0));
        }
        let diam = part.cells().iter().map(|c| c.diameter()).fold(0.0, f64::max);
        if stratified {
            let counts = part.counts(n);
            let draws = part.draw(n, seed)?;
            let mut out = Vec::new();
            for (i, cell_draws) in draws.into_iter().enumerate() {
                let share = part.cells()[i].mass() / counts[i] as f64;
                out.extend(cell_draws.into_iter().map(|t| (share, t)));
            }
            Ok((out, part.len(), diam))
        } else {
            let masses: Vec<f64> = part.cells().iter().map(|c| c.mass()).collect();
            let pick = WeightedIndex::new(&masses).map_err(|e| FnmError::numeric(e.to_string()))?;
            let mut rng = stream_rng(seed, u64::MAX);
            let share = part.total_mass() / n as f64;
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                let i = pick.sample(&mut rng);
                out.push((share, part.cells()[i].sample(&mut rng)?));
            }
            Ok((out, 1, diam))
        }
    }
}

/// Taylor polynomial `Σ_{|α|≤k} ∂^α u(0) x^α / α!`.
fn taylor_tail(target: &FourierTarget, k: usize) -> Result<Vec<TailTerm>> {
    let d = target.dim();
    let origin = vec![0.0; d];
    let mut tail = Vec::new();
    for alpha in up_to_order(d, k) {
        let c = target.partial(&origin, &alpha)? / multi_factorial(&alpha);
        if c != 0.0 {
            tail.push(TailTerm { alpha, coeff: c });
        }
    }
    Ok(tail)
}

fn relu_plan(target: &FourierTarget, k: usize, n: usize, stratified: bool) -> Plan<ReluKernel> {
    let d = target.dim();
    let t_max = target.radius();
    let r_out = target.outer_freq_radius();
    // cells: directions × t-intervals × z × sign, at most n of them
    let (dirs, n_t) = if !stratified {
        (direction_layout(d, 2), 1)
    } else {
        match d {
            1 => (direction_layout(1, 0), (n / 8).max(1)),
            2 => {
                let q = ((n as f64 / 8.0).sqrt().floor() as usize).max(1);
                (direction_layout(2, 2 * q), q)
            }
            _ => {
                let p = ((n as f64 / 8.0).cbrt().floor() as usize).max(1);
                (direction_layout(3, p), p)
            }
        }
    };
    let kernels = [1.0, -1.0]
        .into_iter()
        .map(|z| ReluKernel {
            target: target.clone(),
            k,
            z,
        })
        .collect();
    let mut layout = Vec::new();
    for branch in 0..2 {
        for dir in &dirs {
            for j in 0..n_t {
                let u0 = t_max * j as f64 / n_t as f64;
                let u1 = t_max * (j + 1) as f64 / n_t as f64;
                let diam = t_max * dir.diameter() + (u1 - u0);
                for sign in [1.0, -1.0] {
                    let cell = PolarCell {
                        dir: dir.clone(),
                        r0: 0.0,
                        r1: r_out,
                        u0,
                        u1,
                        sign,
                        branch,
                    };
                    layout.push((cell, diam));
                }
            }
        }
    }
    Plan::new(d, kernels, layout)
}

/// Taylor tail plus `(1/k!) Σ mass_i/n_i σ (z ω̄·x − t)_+^k` with
/// `(z, ω̄, t)` drawn from the remainder density, stratified or plainly.
pub fn relu_taylor_construct(
    target: &FourierTarget,
    k: usize,
    n: usize,
    seed: u64,
    stratified: bool,
) -> Result<Construction> {
    PreparedConstruction::new(target, ConstructionKind::ReluTaylor { k, stratified }, n)?.draw(seed)
}

fn relu_from_draws(d: usize, k: usize, tail: Vec<TailTerm>, nu: f64, drawn: Drawn) -> Result<Construction> {
    let (draws, cells, diam) = drawn;
    let kf = factorial(k);
    let mut outer = Vec::with_capacity(draws.len());
    let mut inner = Vec::with_capacity(draws.len() * d);
    let mut bias = Vec::with_capacity(draws.len());
    for (share, theta) in draws {
        let z = if theta[d + 3] == 0.0 { 1.0 } else { -1.0 };
        inner.extend(theta[..d].iter().map(|v| z * v));
        bias.push(-theta[d + 1]);
        outer.push(share * theta[d + 2] / kf);
    }
    let net = ShallowNet::from_flat(Activation::relu_pow(k)?, d, outer, inner, bias, tail)?;
    Ok(Construction { net, nu, cells, max_cell_diameter: diam })
}

type Drawn = (Vec<(f64, Vec<f64>)>, usize, f64);

/// Which sampling construction to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstructionKind {
    /// Cosine units, plain Monte Carlo, error measured in `H^m`.
    McCos { m: usize },
    ReluTaylor { k: usize, stratified: bool },
    SplineStratified { k: usize },
}

enum Prepared {
    Cos { m: usize },
    Relu { plan: Plan<ReluKernel>, tail: Vec<TailTerm>, k: usize, stratified: bool },
    Spline { plan: Plan<SplineKernel>, k: usize },
    Fixed(Construction),
}

/// The seed-independent part of a construction (cell layout, masses and
/// envelopes) for a fixed budget `n`; [`PreparedConstruction::draw`] then
/// samples one approximant per seed.
pub struct PreparedConstruction {
    target: FourierTarget,
    n: usize,
    prepared: Prepared,
}

impl PreparedConstruction {
    pub fn new(target: &FourierTarget, kind: ConstructionKind, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(FnmError::invalid("sample budget must be positive"));
        }
        let d = target.dim();
        let empty = target.outer_freq_radius() == 0.0;
        let prepared = match kind {
            ConstructionKind::McCos { m } => Prepared::Cos { m },
            ConstructionKind::ReluTaylor { k, stratified } => {
                let activation = Activation::relu_pow(k)?;
                let tail = taylor_tail(target, k)?;
                if empty {
                    let net = ShallowNet::from_flat(activation, d, vec![], vec![], vec![], tail)?;
                    Prepared::Fixed(Construction { net, nu: 0.0, cells: 0, max_cell_diameter: 0.0 })
                } else {
                    Prepared::Relu { plan: relu_plan(target, k, n, stratified), tail, k, stratified }
                }
            }
            ConstructionKind::SplineStratified { k } => {
                let activation = Activation::bspline(k)?;
                if empty {
                    let net = ShallowNet::empty(activation, d)?;
                    Prepared::Fixed(Construction { net, nu: 0.0, cells: 0, max_cell_diameter: 0.0 })
                } else {
                    Prepared::Spline { plan: spline_plan(target, k, n)?, k }
                }
            }
        };
        Ok(PreparedConstruction { target: target.clone(), n, prepared })
    }

    /// `ν`, the total mass of the sampled density.
    pub fn nu(&self) -> Result<f64> {
        match &self.prepared {
            Prepared::Cos { m } => {
                let mf = *m as f64;
                truncated_moment(&self.target, |r| (1.0 + r).powf(mf))
            }
            Prepared::Relu { plan, .. } => Ok(plan.total()),
            Prepared::Spline { plan, .. } => Ok(plan.total()),
            Prepared::Fixed(c) => Ok(c.nu),
        }
    }

    /// Units every draw produces (stratified counts round up per cell).
    pub fn units(&self) -> Result<usize> {
        Ok(match &self.prepared {
            Prepared::Cos { .. } => self.n,
            Prepared::Relu { plan, stratified: false, .. } => if plan.cells.is_empty() { 0 } else { self.n },
            Prepared::Relu { plan, .. } => plan.partition()?.counts(self.n).iter().sum(),
            Prepared::Spline { plan, .. } => plan.partition()?.counts(self.n).iter().sum(),
            Prepared::Fixed(c) => c.net.units(),
        })
    }

    pub fn draw(&self, seed: u64) -> Result<Construction> {
        let d = self.target.dim();
        match &self.prepared {
            Prepared::Cos { m } => mc_cos_construct(&self.target, *m, self.n, seed),
            Prepared::Relu { plan, tail, k, stratified } => {
                relu_from_draws(d, *k, tail.clone(), plan.total(), plan.draw(self.n, seed, *stratified)?)
            }
            Prepared::Spline { plan, k } => spline_from_draws(d, *k, plan.total(), plan.draw(self.n, seed, true)?),
            Prepared::Fixed(c) => Ok(c.clone()),
        }
    }
}

fn shell_scale(j: usize) -> f64 {
    4.0 * PI * j as f64 + PI
}

struct SplineLayout {
    /// `(shell index j ≥ 1, ‖ω̄‖ range)` per ring.
    rings: Vec<(usize, f64, f64)>,
    n_b: usize,
}

fn spline_layout(d: usize, r_out: f64, t_max: f64, b_len: f64, h: f64) -> (SplineLayout, usize) {
    let shells = (r_out / (4.0 * PI)).ceil().max(1.0) as usize;
    let mut rings = Vec::new();
    for j in 1..=shells {
        let a = shell_scale(j);
        let lo = 4.0 * PI * (j - 1) as f64 / a;
        let hi = (4.0 * PI * j as f64).min(r_out) / a;
        let l = (((hi - lo) * t_max / h).ceil() as usize).max(1);
        for i in 0..l {
            rings.push((j, lo + (hi - lo) * i as f64 / l as f64, lo + (hi - lo) * (i + 1) as f64 / l as f64));
        }
    }
    let n_b = ((b_len / h).ceil() as usize).max(1);
    let count: usize = rings
        .iter()
        .map(|&(_, _, rho1)| ring_directions(d, rho1, t_max, h).len())
        .sum::<usize>()
        * n_b
        * 2;
    (SplineLayout { rings, n_b }, count)
}

fn ring_directions(d: usize, rho1: f64, t_max: f64, h: f64) -> Vec<DirRegion> {
    match d {
        1 => direction_layout(1, 0),
        2 => direction_layout(2, ((2.0 * PI * rho1 * t_max / h).ceil() as usize).max(1)),
        _ => direction_layout(3, ((PI * rho1 * t_max / h).ceil() as usize).max(1)),
    }
}

fn spline_plan(target: &FourierTarget, k: usize, n: usize) -> Result<Plan<SplineKernel>> {
    let d = target.dim();
    let t_max = target.radius();
    let r_out = target.outer_freq_radius();
    let (b_lo, b_hi) = (-t_max, t_max + (k + 1) as f64);
    let b_len = b_hi - b_lo;
    // smallest cell size h whose layout fits the budget
    let (_, min_count) = spline_layout(d, r_out, t_max, b_len, 1e12);
    if min_count > n {
        return Err(FnmError::invalid(format!(
            "budget {n} is below the minimum cell count {min_count}"
        )));
    }
    let (mut lo, mut hi) = (1e-9_f64, 1e12_f64);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if spline_layout(d, r_out, t_max, b_len, mid).1 <= n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (layout, _) = spline_layout(d, r_out, t_max, b_len, hi);
    let shells = layout.rings.iter().map(|r| r.0).max().unwrap_or(1);
    let kernels = (1..=shells)
        .map(|j| SplineKernel {
            target: target.clone(),
            k,
            a: shell_scale(j),
        })
        .collect();
    let mut cells = Vec::new();
    for &(j, rho0, rho1) in &layout.rings {
        let a = shell_scale(j);
        for dir in ring_directions(d, rho1, t_max, hi) {
            for ib in 0..layout.n_b {
                let u0 = b_lo + b_len * ib as f64 / layout.n_b as f64;
                let u1 = b_lo + b_len * (ib + 1) as f64 / layout.n_b as f64;
                let diam = t_max * ((rho1 - rho0) + rho1 * dir.diameter()) + (u1 - u0);
                for sign in [1.0, -1.0] {
                    let cell = PolarCell {
                        dir: dir.clone(),
                        r0: a * rho0,
                        r1: a * rho1,
                        u0,
                        u1,
                        sign,
                        branch: j - 1,
                    };
                    cells.push((cell, diam));
                }
            }
        }
    }
    Ok(Plan::new(d, kernels, cells))
}

/// `Σ mass_i/n_i σ b^k(ω̄·x + b)` with `(ω̄, b)` drawn per stratum of the
/// B-spline integral representation `u = ∫∫ b^k(ω̄·x+b) (a/2)^{k+1} |û| cos θ̃`.
pub fn stratified_spline_construct(target: &FourierTarget, k: usize, n: usize, seed: u64) -> Result<Construction> {
    PreparedConstruction::new(target, ConstructionKind::SplineStratified { k }, n)?.draw(seed)
}

fn spline_from_draws(d: usize, k: usize, nu: f64, drawn: Drawn) -> Result<Construction> {
    let (draws, cells, diam) = drawn;
    let mut outer = Vec::with_capacity(draws.len());
    let mut inner = Vec::with_capacity(draws.len() * d);
    let mut bias = Vec::with_capacity(draws.len());
    for (share, theta) in draws {
        let a = shell_scale(theta[d + 3] as usize + 1);
        let r = theta[d];
        inner.extend(theta[..d].iter().map(|v| v * r / a));
        bias.push(theta[d + 1]);
        outer.push(share * theta[d + 2]);
    }
    let net = ShallowNet::from_flat(Activation::bspline(k)?, d, outer, inner, bias, vec![])?;
    Ok(Construction { net, nu, cells, max_cell_diameter: diam })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::barron_norm;
    use crate::target::{atom, gaussian};

    fn l2_error_1d(net: &ShallowNet, t: &FourierTarget) -> f64 {
        let m = 2000;
        let s: f64 = (0..m)
            .map(|i| {
                let x = -1.0 + 2.0 * (i as f64 + 0.5) / m as f64;
                (net.eval(&[x]) - t.eval(&[x])).powi(2)
            })
            .sum();
        (s * 2.0 / m as f64).sqrt()
    }

    #[test]
    fn polynomial_target_is_its_tail() {
        let t = FourierTarget::polynomial(1, vec![(vec![2], 3.0), (vec![0], -1.0)], 1.0).unwrap();
        let c = relu_taylor_construct(&t, 2, 64, 1, true).unwrap();
        assert_eq!(c.net.units(), 0);
        assert!(l2_error_1d(&c.net, &t) < 1e-14);
    }

    #[test]
    fn narrow_atom_is_reproduced_by_cosines() {
        // cos(5x) up to e^{-ε²x²/2} and the bump width
        let t = atom(1, vec![5.0], 1e-4, 1.0).unwrap();
        for n in [1, 7, 50] {
            let c = mc_cos_construct(&t, 0, n, 3).unwrap();
            assert!(l2_error_1d(&c.net, &t) < 1e-3);
        }
    }

    #[test]
    fn cosine_net_bounded_by_norm() {
        let t = gaussian(1, 0.8, vec![0.3], 1.0, 1.0).unwrap();
        let c = mc_cos_construct(&t, 1, 100, 5).unwrap();
        let sup: f64 = (0..500).map(|i| c.net.eval(&[-1.0 + i as f64 / 250.0]).abs()).fold(0.0, f64::max);
        assert!(sup <= c.nu + 1e-12);
    }

    #[test]
    fn relu_remainder_mass_bounded_by_barron_norm() {
        let t = gaussian(1, 1.0, vec![0.0], 1.0, 1.0).unwrap();
        let c = relu_taylor_construct(&t, 2, 256, 2, true).unwrap();
        assert!(c.nu <= barron_norm(&t, 3.0).unwrap() + 1e-9);
        assert!(c.net.units() >= 256 && c.net.units() <= 512);
        let sum: f64 = c.net.outer().iter().map(|a| a.abs()).sum();
        assert!(sum <= c.nu / 2.0 + 1e-9);
    }

    #[test]
    fn spline_units_obey_bounds() {
        let t = gaussian(1, 0.75, vec![0.0], 1.0, 1.0).unwrap();
        let k = 2;
        let c = stratified_spline_construct(&t, k, 200, 4).unwrap();
        assert!(c.net.units() >= 200 && c.net.units() <= 400);
        for i in 0..c.net.units() {
            assert!(c.net.inner(i)[0].abs() <= 1.0);
            assert!(c.net.bias()[i].abs() <= 1.0 + (k + 1) as f64);
        }
        let zero = FourierTarget::polynomial(1, vec![], 1.0).unwrap();
        assert_eq!(stratified_spline_construct(&zero, 2, 50, 0).unwrap().net.units(), 0);
    }

    #[test]
    fn constructions_converge() {
        let t = gaussian(1, 1.0, vec![0.1], 1.0, 1.0).unwrap();
        let e_small = l2_error_1d(&relu_taylor_construct(&t, 2, 64, 0, true).unwrap().net, &t);
        let e_big = l2_error_1d(&relu_taylor_construct(&t, 2, 1024, 0, true).unwrap().net, &t);
        assert!(e_big < e_small / 10.0, "{e_small} -> {e_big}");
        let t = gaussian(1, 0.75, vec![0.1], 1.0, 1.0).unwrap();
        let e_small = l2_error_1d(&stratified_spline_construct(&t, 2, 64, 0).unwrap().net, &t);
        let e_big = l2_error_1d(&stratified_spline_construct(&t, 2, 1024, 0).unwrap().net, &t);
        assert!(e_big < e_small / 4.0, "{e_small} -> {e_big}");
    }
}
