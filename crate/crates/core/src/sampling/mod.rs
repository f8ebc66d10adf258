//! Barron norms, stratified Monte Carlo and the three sampling constructions
//! of finite neuron approximants (cosine, B-spline, ReLU^k with Taylor tail).

mod construct;
pub(crate) mod polar;

pub use construct::{
    mc_cos_construct, relu_taylor_construct, stratified_spline_construct, Construction, ConstructionKind,
    PreparedConstruction,
};

use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{FnmError, Result};
use crate::quadrature::{adaptive_integrate_from, gauss_legendre_raw};
use crate::target::{FourierTarget, Support};

/// Cells whose share of the total mass is below this are dropped.
pub const NEGLIGIBLE_MASS: f64 = 1e-15;

/// A counter-based generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `∫_{trunc} (1+‖ω‖)^s |û(ω)| dω + tail_bound(s)`: an upper estimate of the
/// Barron norm of the target's canonical extension.
pub fn barron_norm(target: &FourierTarget, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(FnmError::invalid("Barron order must be nonnegative"));
    }
    let core = truncated_moment(target, |r| (1.0 + r).powf(s))?;
    let v = core + target.tail_bound(s);
    if !v.is_finite() {
        return Err(FnmError::numeric(format!("Barron integral of order {s} diverged")));
    }
    Ok(v)
}

/// `∫_{trunc} φ(‖ω‖) |û(ω)| dω`.
pub(crate) fn truncated_moment(target: &FourierTarget, phi: impl Fn(f64) -> f64 + Sync) -> Result<f64> {
    let d = target.dim();
    let big_r = target.freq_radius();
    if big_r == 0.0 {
        return Ok(0.0);
    }
    let amp = |w: &[f64]| {
        let r = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        phi(r) * target.amplitude(w)
    };
    let v = match (target.support(), d) {
        (_, 1) => {
            let f = |x: f64| amp(&[x]);
            let initial = initial_panels(big_r, target.feature_scale(), 100_000);
            adaptive_integrate_from(f, -big_r, 0.0, initial, 0.0, 1e-13, 4 * initial + 4000).0
                + adaptive_integrate_from(f, 0.0, big_r, initial, 0.0, 1e-13, 4 * initial + 4000).0
        }
        (Support::Ball, _) => ball_integral(d, big_r, target.feature_scale(), &amp),
        (Support::Cube, _) => cube_integral(d, big_r, &amp),
    };
    if !v.is_finite() {
        return Err(FnmError::numeric("spectral integral is not finite"));
    }
    Ok(v)
}

fn composite(a: f64, b: f64, panels: usize, q: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre_raw(q);
    let h = (b - a) / panels as f64;
    (0..panels)
        .flat_map(|p| {
            let lo = a + p as f64 * h;
            x.iter()
                .zip(&w)
                .map(move |(xi, wi)| (lo + 0.5 * h * (xi + 1.0), 0.5 * h * wi))
                .collect::<Vec<_>>()
        })
        .collect()
}

fn initial_panels(len: f64, scale: f64, cap: usize) -> usize {
    if !(scale > 0.0) {
        return 1;
    }
    ((2.0 * len / scale).ceil() as usize).clamp(1, cap)
}

fn ball_integral(d: usize, big_r: f64, scale: f64, f: &(dyn Fn(&[f64]) -> f64 + Sync)) -> f64 {
    let radial_panels = initial_panels(big_r, scale, 512).max(64);
    let angular_panels = initial_panels(2.0 * PI * big_r, scale, 512).max(32);
    let dirs: Vec<(Vec<f64>, f64)> = if d == 2 {
        composite(0.0, 2.0 * PI, angular_panels, 16)
            .into_iter()
            .map(|(p, w)| (vec![p.cos(), p.sin()], w))
            .collect()
    } else {
        let mus = composite(-1.0, 1.0, 16, 16);
        let phis = composite(0.0, 2.0 * PI, angular_panels.min(64), 16);
        mus.iter()
            .flat_map(|&(mu, wm)| {
                let rho = (1.0 - mu * mu).sqrt();
                phis.iter()
                    .map(move |&(p, wp)| (vec![rho * p.cos(), rho * p.sin(), mu], wm * wp))
            })
            .collect()
    };
    let radial = composite(0.0, big_r, radial_panels, 16);
    let parts: Vec<f64> = dirs
        .par_iter()
        .map(|(dir, wd)| {
            let mut acc = 0.0;
            let mut w = vec![0.0; d];
            for &(r, wr) in &radial {
                for (wi, di) in w.iter_mut().zip(dir) {
                    *wi = di * r;
                }
                acc += wr * r.powi(d as i32 - 1) * f(&w);
            }
            wd * acc
        })
        .collect();
    parts.iter().sum()
}

fn cube_integral(d: usize, big_r: f64, f: &(dyn Fn(&[f64]) -> f64 + Sync)) -> f64 {
    let panels = if d == 2 { 64 } else { 16 };
    let axis = composite(-big_r, big_r, panels, 16);
    let n = axis.len();
    let parts: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (x0, w0) = axis[i];
            let mut acc = 0.0;
            if d == 2 {
                for &(x1, w1) in &axis {
                    acc += w1 * f(&[x0, x1]);
                }
            } else {
                for &(x1, w1) in &axis {
                    for &(x2, w2) in &axis {
                        acc += w1 * w2 * f(&[x0, x1, x2]);
                    }
                }
            }
            w0 * acc
        })
        .collect();
    parts.iter().sum()
}

pub type CellSampler = dyn Fn(&mut ChaCha8Rng) -> Result<Vec<f64>> + Send + Sync;

/// One subdomain `G_i` of a stratified partition.
#[derive(Clone)]
pub struct Cell {
    mass: f64,
    diameter: f64,
    sampler: Arc<CellSampler>,
}

impl Cell {
    /// `mass` is the unnormalised `∫_{G_i} ρ`; the sampler draws from `ρ|_{G_i}`.
    pub fn new(
        mass: f64,
        diameter: f64,
        sampler: impl Fn(&mut ChaCha8Rng) -> Result<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        Cell {
            mass,
            diameter,
            sampler: Arc::new(sampler),
        }
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        (self.sampler)(rng)
    }
}

/// A disjoint decomposition `G = ∪ G_i` with masses `λ(G_i)`.
#[derive(Clone)]
pub struct StratifiedPartition {
    cells: Vec<Cell>,
    total: f64,
}

impl StratifiedPartition {
    pub fn new(cells: Vec<Cell>) -> Result<Self> {
        if cells.iter().any(|c| !(c.mass >= 0.0) || !c.mass.is_finite()) {
            return Err(FnmError::invalid("cell masses must be finite and nonnegative"));
        }
        let total: f64 = cells.iter().map(|c| c.mass).sum();
        let cells = cells
            .into_iter()
            .filter(|c| c.mass > NEGLIGIBLE_MASS * total)
            .collect();
        Ok(StratifiedPartition { cells, total })
    }

    /// `ν = ∫_G ρ`
    pub fn total_mass(&self) -> f64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// `λ(G_i)` normalised by the total mass.
    pub fn relative_mass(&self, i: usize) -> f64 {
        self.cells[i].mass / self.total
    }

    /// `n_i = ⌈λ(G_i) n⌉`
    pub fn counts(&self, n: usize) -> Vec<usize> {
        (0..self.len())
            // the factor guards against `λn` landing a rounding error above an integer
            .map(|i| ((self.relative_mass(i) * n as f64 * (1.0 - 1e-12)).ceil() as usize).max(1))
            .collect()
    }

    /// Draws `n_i` samples in each cell; cell `i` uses stream `i` of `seed`.
    pub fn draw(&self, n: usize, seed: u64) -> Result<Vec<Vec<Vec<f64>>>> {
        let counts = self.counts(n);
        self.cells
            .par_iter()
            .zip(counts.par_iter())
            .enumerate()
            .map(|(i, (cell, &ni))| {
                let mut rng = stream_rng(seed, i as u64);
                (0..ni).map(|_| cell.sample(&mut rng)).collect()
            })
            .collect()
    }
}

/// `Σ_i λ(G_i) (1/n_i) Σ_j g(θ_ij)` with `λ` normalised to sum to one.
pub fn stratified_mean(
    g: impl Fn(&[f64]) -> f64 + Sync,
    partition: &StratifiedPartition,
    n: usize,
    seed: u64,
) -> Result<f64> {
    if partition.is_empty() {
        return Err(FnmError::invalid("partition has no cells"));
    }
    if n == 0 {
        return Err(FnmError::invalid("sample budget must be positive"));
    }
    let draws = partition.draw(n, seed)?;
    let mut acc = 0.0;
    for (i, cell_draws) in draws.iter().enumerate() {
        let mean = cell_draws.iter().map(|t| g(t)).sum::<f64>() / cell_draws.len() as f64;
        acc += partition.relative_mass(i) * mean;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::target::{gaussian, FourierTarget};
    use rand::Rng;

    fn half_box() -> FourierTarget {
        FourierTarget::new("box", 1, |_| 0.5, |_| 0.0, |_, _| None, 1.0, 1.0, Support::Cube).unwrap()
    }

    #[test]
    fn barron_examples() {
        assert!((barron_norm(&half_box(), 0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((barron_norm(&half_box(), 1.0).unwrap() - 1.5).abs() < 1e-12);
        let g = FourierTarget::new(
            "g",
            1,
            |w| (-0.5 * w[0] * w[0]).exp(),
            |_| 0.0,
            |_, _| None,
            1.0,
            12.0,
            Support::Ball,
        )
        .unwrap();
        // oracle: ∫ e^{-ω²/2} over the real line
        assert!((barron_norm(&g, 0.0).unwrap() - (2.0 * PI).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn barron_2d_gaussian_polar_vs_closed_form() {
        // u = exp(-|x|²/2): û = (2π)^{-1} e^{-|ω|²/2}, ∫|û| = u(0) = 1
        let t = gaussian(2, 1.0, vec![0.0, 0.0], 1.0, 1.0).unwrap();
        assert!((barron_norm(&t, 0.0).unwrap() - 1.0).abs() < 1e-10);
        // ∫ (1+r)|û| = 1 + ∫_0^∞ r² e^{-r²/2} dr = 1 + √(π/2)
        assert!((barron_norm(&t, 1.0).unwrap() - (1.0 + (PI / 2.0).sqrt())).abs() < 1e-9);
    }

    fn uniform_cells(m: usize) -> StratifiedPartition {
        let cells = (0..m)
            .map(|i| {
                let lo = i as f64 / m as f64;
                let hi = (i + 1) as f64 / m as f64;
                Cell::new(1.0 / m as f64, hi - lo, move |rng: &mut ChaCha8Rng| Ok(vec![rng.random_range(lo..hi)]))
            })
            .collect();
        StratifiedPartition::new(cells).unwrap()
    }

    #[test]
    fn constant_integrand_is_exact() {
        let p = uniform_cells(7);
        for seed in 0..5 {
            assert!((stratified_mean(|_| 2.5, &p, 30, seed).unwrap() - 2.5).abs() < 1e-14);
        }
    }

    #[test]
    fn single_cell_is_plain_monte_carlo() {
        let p = uniform_cells(1);
        let est = stratified_mean(|t| t[0] * t[0], &p, 50, 9).unwrap();
        let mut rng = stream_rng(9, 0);
        let plain: f64 = (0..50).map(|_| rng.random_range(0.0..1.0f64).powi(2)).sum::<f64>() / 50.0;
        assert!((est - plain).abs() < 1e-15);
    }

    #[test]
    fn mean_squared_error_obeys_oscillation_bound() {
        // g(θ) = θ on [0,1] with M = n cells: osc = 1/n, MSE ≤ osc²/n
        let n = 16;
        let p = uniform_cells(n);
        let trials = 1000;
        let mse: f64 = (0..trials)
            .map(|s| (stratified_mean(|t| t[0], &p, n, s).unwrap() - 0.5).powi(2))
            .sum::<f64>()
            / trials as f64;
        let bound = (1.0 / n as f64).powi(2) / n as f64;
        assert!(mse <= 1.2 * bound, "{mse} vs {bound}");
        let counts = p.counts(n);
        let total: usize = counts.iter().sum();
        assert!((n..=2 * n).contains(&total));
    }
}
