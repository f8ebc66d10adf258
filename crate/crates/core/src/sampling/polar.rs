//! Cells in (direction, radius, phase-linear variable, sign) coordinates.
//!
//! The constructions integrate densities of the form
//! `W(ω) · max(0, σ cos(κ(‖ω‖) u + ψ(ω)))` over `ω` (polar coordinates) and a
//! scalar `u` on which the phase depends linearly. The `u`-integral is done
//! in closed form, the radial one adaptively.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{FnmError, Result};
use crate::quadrature::{adaptive_integrate_from, gauss_legendre_raw};

const MAX_REJECTIONS: usize = 10_000_000;
const ENVELOPE_SAFETY: f64 = 1.25;

/// The phase structure of one branch of an integral representation.
pub(crate) trait Kernel: Sync {
    /// `W(ω) ≥ 0`, excluding the polar Jacobian `r^{d-1}`.
    fn weight(&self, omega: &[f64], r: f64) -> f64;
    fn kappa(&self, r: f64) -> f64;
    fn psi(&self, omega: &[f64]) -> f64;
    /// Narrowest radial feature of `W`.
    fn scale(&self) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum DirRegion {
    /// `ω̄ = ±1` in one dimension.
    Sign(f64),
    /// Arc `φ ∈ [φ0, φ1]` of the unit circle.
    Arc(f64, f64),
    /// `cos θ ∈ [μ0, μ1]`, `φ ∈ [φ0, φ1]` on the unit sphere.
    Patch(f64, f64, f64, f64),
}

impl DirRegion {
    pub fn measure(&self) -> f64 {
        match *self {
            DirRegion::Sign(_) => 1.0,
            DirRegion::Arc(a, b) => b - a,
            DirRegion::Patch(m0, m1, p0, p1) => (m1 - m0) * (p1 - p0),
        }
    }

    /// Geodesic-ish diameter of the region on the sphere.
    pub fn diameter(&self) -> f64 {
        match *self {
            DirRegion::Sign(_) => 0.0,
            DirRegion::Arc(a, b) => b - a,
            DirRegion::Patch(m0, m1, p0, p1) => {
                let dtheta = m0.clamp(-1.0, 1.0).acos() - m1.clamp(-1.0, 1.0).acos();
                (dtheta * dtheta + (p1 - p0) * (p1 - p0)).sqrt()
            }
        }
    }

    fn point(&self, s: f64, t: f64) -> Vec<f64> {
        match *self {
            DirRegion::Sign(v) => vec![v],
            DirRegion::Arc(a, b) => {
                let phi = a + s * (b - a);
                vec![phi.cos(), phi.sin()]
            }
            DirRegion::Patch(m0, m1, p0, p1) => {
                let mu = m0 + s * (m1 - m0);
                let phi = p0 + t * (p1 - p0);
                let rho = (1.0 - mu * mu).max(0.0).sqrt();
                vec![rho * phi.cos(), rho * phi.sin(), mu]
            }
        }
    }

    /// Quadrature over the region in its natural measure: `(direction, weight)`.
    fn rule(&self) -> Vec<(Vec<f64>, f64)> {
        match self {
            DirRegion::Sign(_) => vec![(self.point(0.0, 0.0), 1.0)],
            DirRegion::Arc(..) => {
                let (x, w) = gauss_legendre_raw(8);
                let m = self.measure();
                x.iter()
                    .zip(&w)
                    .map(|(xi, wi)| (self.point(0.5 * (xi + 1.0), 0.0), 0.5 * wi * m))
                    .collect()
            }
            DirRegion::Patch(..) => {
                let (x, w) = gauss_legendre_raw(4);
                let m = self.measure();
                let mut out = Vec::with_capacity(16);
                for (xi, wi) in x.iter().zip(&w) {
                    for (xj, wj) in x.iter().zip(&w) {
                        out.push((self.point(0.5 * (xi + 1.0), 0.5 * (xj + 1.0)), 0.25 * wi * wj * m));
                    }
                }
                out
            }
        }
    }

    fn grid(&self, n: usize) -> Vec<Vec<f64>> {
        match self {
            DirRegion::Sign(_) => vec![self.point(0.0, 0.0)],
            DirRegion::Arc(..) => (0..=n).map(|i| self.point(i as f64 / n as f64, 0.0)).collect(),
            DirRegion::Patch(..) => (0..=n)
                .flat_map(|i| (0..=n).map(move |j| (i, j)))
                .map(|(i, j)| self.point(i as f64 / n as f64, j as f64 / n as f64))
                .collect(),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            DirRegion::Sign(_) => self.point(0.0, 0.0),
            _ => {
                let s = rng.random::<f64>();
                let t = rng.random::<f64>();
                self.point(s, t)
            }
        }
    }
}

/// `k` equal arcs of the circle or `k × 2k` equal-area patches of the sphere;
/// the two signs in one dimension.
pub(crate) fn direction_layout(d: usize, k: usize) -> Vec<DirRegion> {
    let k = k.max(1);
    match d {
        1 => vec![DirRegion::Sign(1.0), DirRegion::Sign(-1.0)],
        2 => (0..k)
            .map(|i| DirRegion::Arc(2.0 * PI * i as f64 / k as f64, 2.0 * PI * (i + 1) as f64 / k as f64))
            .collect(),
        _ => {
            let mut out = Vec::with_capacity(2 * k * k);
            for i in 0..k {
                let m0 = -1.0 + 2.0 * i as f64 / k as f64;
                let m1 = -1.0 + 2.0 * (i + 1) as f64 / k as f64;
                for j in 0..2 * k {
                    let p0 = PI * j as f64 / k as f64;
                    let p1 = PI * (j + 1) as f64 / k as f64;
                    out.push(DirRegion::Patch(m0, m1, p0, p1));
                }
            }
            out
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PolarCell {
    pub dir: DirRegion,
    pub r0: f64,
    pub r1: f64,
    pub u0: f64,
    pub u1: f64,
    pub sign: f64,
    /// Index of the kernel this cell belongs to.
    pub branch: usize,
}

/// Antiderivative of `max(0, cos v)` normalised to vanish at `v = -π/2`.
fn pos_cos_antiderivative(v: f64) -> f64 {
    let shifted = v + 0.5 * PI;
    let n = (shifted / (2.0 * PI)).floor();
    let rem = shifted - 2.0 * PI * n;
    2.0 * n + if rem <= PI { 1.0 - rem.cos() } else { 2.0 }
}

/// `∫_{u0}^{u1} max(0, σ cos(κu + ψ)) du`.
pub(crate) fn signed_cos_part(kappa: f64, psi: f64, u0: f64, u1: f64, sign: f64) -> f64 {
    let len = u1 - u0;
    if (kappa * len).abs() < 1e-6 {
        let um = 0.5 * (u0 + u1);
        return len * (sign * (kappa * um + psi).cos()).max(0.0);
    }
    let v0 = kappa * u0 + psi;
    let v1 = kappa * u1 + psi;
    // shift both ends by the same number of periods to keep magnitudes small
    let base = 2.0 * PI * ((v0.min(v1) + 0.5 * PI) / (2.0 * PI)).floor();
    let (v0, v1) = (v0 - base, v1 - base);
    let pos = (pos_cos_antiderivative(v1) - pos_cos_antiderivative(v0)) / kappa;
    if sign > 0.0 {
        pos
    } else {
        (pos - (v1.sin() - v0.sin()) / kappa).max(0.0)
    }
}

fn jacobian(d: usize, r: f64) -> f64 {
    r.powi(d as i32 - 1)
}

/// Radial marginal `W(ω) r^{d-1} ∫ max(0, σ cos(κu + ψ)) du` at `ω = r·dir`.
fn radial_density<K: Kernel>(kernel: &K, cell: &PolarCell, d: usize, dir: &[f64], r: f64) -> f64 {
    let omega: Vec<f64> = dir.iter().map(|v| v * r).collect();
    let wt = kernel.weight(&omega, r);
    if wt == 0.0 {
        return 0.0;
    }
    wt * jacobian(d, r) * signed_cos_part(kernel.kappa(r), kernel.psi(&omega), cell.u0, cell.u1, cell.sign)
}

/// Piecewise-constant majorant of the radial marginal over the cell's
/// directions, from bin end- and midpoints with a safety factor.
#[derive(Debug, Clone)]
pub(crate) struct Envelope {
    r0: f64,
    width: f64,
    bins: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Envelope {
    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

fn bin_count(cell: &PolarCell, scale: f64) -> usize {
    let len = cell.r1 - cell.r0;
    if !(scale > 0.0) {
        return 256;
    }
    ((4.0 * len / scale).ceil() as usize).clamp(256, 8192)
}

pub(crate) fn envelope<K: Kernel>(kernel: &K, cell: &PolarCell, d: usize) -> Envelope {
    let nb = bin_count(cell, kernel.scale());
    let width = (cell.r1 - cell.r0) / nb as f64;
    let dirs = cell.dir.grid(4);
    let node = |i: usize| {
        let r = cell.r0 + 0.5 * width * i as f64;
        dirs.iter()
            .map(|dir| radial_density(kernel, cell, d, dir, r))
            .fold(0.0, f64::max)
    };
    let vals: Vec<f64> = (0..=2 * nb).map(node).collect();
    let bins: Vec<f64> = (0..nb)
        .map(|b| ENVELOPE_SAFETY * vals[2 * b].max(vals[2 * b + 1]).max(vals[2 * b + 2]))
        .collect();
    let mut acc = 0.0;
    let cumulative = bins
        .iter()
        .map(|v| {
            acc += v * width;
            acc
        })
        .collect();
    Envelope {
        r0: cell.r0,
        width,
        bins,
        cumulative,
    }
}

/// `∫_cell W(ω) max(0, σ cos(κu + ψ)) dω du`.
pub(crate) fn cell_mass<K: Kernel>(kernel: &K, cell: &PolarCell, d: usize, env: &Envelope) -> f64 {
    let scale = env.total() * cell.dir.measure();
    if scale == 0.0 {
        return 0.0;
    }
    let initial = if kernel.scale() > 0.0 {
        (((cell.r1 - cell.r0) / kernel.scale()).ceil() as usize).clamp(1, 512)
    } else {
        1
    };
    let mut total = 0.0;
    for (dir, w) in cell.dir.rule() {
        let f = |r: f64| radial_density(kernel, cell, d, &dir, r);
        let (v, _) = adaptive_integrate_from(f, cell.r0, cell.r1, initial, 1e-14 * scale, 1e-12, 8000);
        total += w * v;
    }
    total
}

/// Inverse CDF of `max(0, σ cos(κu + ψ))` on `[u0, u1]` by bisection.
fn sample_phase_variable(kappa: f64, psi: f64, cell: &PolarCell, rng: &mut ChaCha8Rng) -> f64 {
    let total = signed_cos_part(kappa, psi, cell.u0, cell.u1, cell.sign);
    if !(total > 0.0) {
        return cell.u0 + (cell.u1 - cell.u0) * rng.random::<f64>();
    }
    let goal = total * rng.random::<f64>();
    let (mut lo, mut hi) = (cell.u0, cell.u1);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if signed_cos_part(kappa, psi, cell.u0, mid, cell.sign) < goal {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// One draw `(ω̄, ‖ω‖, u)` from the cell's normalised density: rejection in
/// `(ω̄, r)` against the binned envelope, then `u` exactly given `ω`.
pub(crate) fn sample_cell<K: Kernel>(
    kernel: &K,
    cell: &PolarCell,
    d: usize,
    env: &Envelope,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, f64, f64)> {
    let total = env.total();
    if !(total > 0.0) {
        return Err(FnmError::invalid("cannot sample from an empty cell"));
    }
    for _ in 0..MAX_REJECTIONS {
        let goal = total * rng.random::<f64>();
        let b = env.cumulative.partition_point(|&c| c <= goal).min(env.bins.len() - 1);
        let dir = cell.dir.sample(rng);
        let r = env.r0 + env.width * (b as f64 + rng.random::<f64>());
        if rng.random::<f64>() * env.bins[b] < radial_density(kernel, cell, d, &dir, r) {
            let omega: Vec<f64> = dir.iter().map(|v| v * r).collect();
            let u = sample_phase_variable(kernel.kappa(r), kernel.psi(&omega), cell, rng);
            return Ok((dir, r, u));
        }
    }
    Err(FnmError::numeric("rejection sampler made no progress in a cell"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive_integrate;

    #[test]
    fn positive_part_matches_quadrature() {
        for &(kappa, psi, u0, u1) in &[
            (3.0, 0.4, 0.0, 1.0),
            (-7.5, 2.0, 0.1, 0.35),
            (40.0, -1.0, 0.0, 1.0),
            (1e-9, 0.3, 0.0, 1.0),
            (0.5, 10.0, -4.0, 4.0),
        ] {
            for sign in [1.0, -1.0] {
                let f = |u: f64| (sign * f64::cos(kappa * u + psi)).max(0.0);
                let (oracle, _) = adaptive_integrate(f, u0, u1, 1e-15, 0.0, 20000);
                let got = signed_cos_part(kappa, psi, u0, u1, sign);
                assert!((got - oracle).abs() < 1e-11, "{kappa} {psi} {sign}: {got} vs {oracle}");
            }
        }
    }

    #[test]
    fn layouts_tile_the_sphere() {
        let total: f64 = direction_layout(2, 7).iter().map(|r| r.measure()).sum();
        assert!((total - 2.0 * PI).abs() < 1e-12);
        let total: f64 = direction_layout(3, 3).iter().map(|r| r.measure()).sum();
        assert!((total - 4.0 * PI).abs() < 1e-12);
    }
}
