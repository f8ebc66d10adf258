//! Functions described by their spectrum: `u(x) = ∫ |û(ω)| cos(ω·x + β(ω)) dω`
//! with `û(ω) = (2π)^{-d} ∫ u(x) e^{-iω·x} dx` and `β = arg û`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::error::{FnmError, Result};
use crate::field::Field;
use crate::multiindex::{binomial, monomial_partial, MultiIndex};
use crate::quadrature::gauss_legendre_raw;

pub type SpectralFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
pub type DerivFn = dyn Fn(&[f64], &[usize]) -> Option<f64> + Send + Sync;
pub type SamplerFn = dyn Fn(&mut ChaCha8Rng) -> Vec<f64> + Send + Sync;
pub type TailFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Shape of the truncated frequency region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    /// `‖ω‖ ≤ R`
    Ball,
    /// `‖ω‖_∞ ≤ R`
    Cube,
}

#[derive(Clone)]
pub struct FourierTarget {
    name: String,
    dim: usize,
    amplitude: Arc<SpectralFn>,
    phase: Arc<SpectralFn>,
    derivs: Arc<DerivFn>,
    radius: f64,
    freq_radius: f64,
    support: Support,
    tail_bound: Arc<TailFn>,
    sampler: Option<Arc<SamplerFn>>,
    feature_scale: f64,
}

impl fmt::Debug for FourierTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierTarget")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("T", &self.radius)
            .field("R", &self.freq_radius)
            .field("support", &self.support)
            .finish()
    }
}

impl FourierTarget {
    /// A target from closures. `radius` is `T = max ‖x‖` over the domain of
    /// interest, `freq_radius` the truncation radius `R`. The tail bound
    /// defaults to zero (spectrum supported inside the truncated region).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        amplitude: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        phase: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        derivs: impl Fn(&[f64], &[usize]) -> Option<f64> + Send + Sync + 'static,
        radius: f64,
        freq_radius: f64,
        support: Support,
    ) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(FnmError::invalid(format!("dimension {dim} not in 1..=3")));
        }
        if !(radius > 0.0 && radius.is_finite()) || !(freq_radius >= 0.0 && freq_radius.is_finite()) {
            return Err(FnmError::invalid("radii must be positive and finite"));
        }
        Ok(FourierTarget {
            name: name.into(),
            dim,
            amplitude: Arc::new(amplitude),
            phase: Arc::new(phase),
            derivs: Arc::new(derivs),
            radius,
            freq_radius,
            support,
            tail_bound: Arc::new(|_| 0.0),
            sampler: None,
            feature_scale: freq_radius / 8.0,
        })
    }

    /// Declares `∫_{outside} (1+‖ω‖)^s |û| dω ≤ bound(s)`.
    pub fn with_tail_bound(mut self, bound: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.tail_bound = Arc::new(bound);
        self
    }

    /// Exact sampler of the density `∝ |û|` restricted to the truncated region.
    pub fn with_sampler(mut self, sampler: impl Fn(&mut ChaCha8Rng) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.sampler = Some(Arc::new(sampler));
        self
    }

    /// Width of the narrowest spectral feature; spectral quadratures start
    /// from panels no wider than this.
    pub fn with_feature_scale(mut self, scale: f64) -> Self {
        self.feature_scale = scale;
        self
    }

    /// A polynomial `Σ c_α x^α`; its spectrum is treated as zero.
    pub fn polynomial(dim: usize, terms: Vec<(MultiIndex, f64)>, radius: f64) -> Result<Self> {
        if terms.iter().any(|(a, _)| a.len() != dim) {
            return Err(FnmError::invalid("polynomial term has wrong dimension"));
        }
        Self::new(
            "polynomial",
            dim,
            |_| 0.0,
            |_| 0.0,
            move |x, alpha| Some(terms.iter().map(|(a, c)| c * monomial_partial(x, a, alpha)).sum()),
            radius,
            0.0,
            Support::Ball,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `T`
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `R`
    pub fn freq_radius(&self) -> f64 {
        self.freq_radius
    }

    pub fn feature_scale(&self) -> f64 {
        self.feature_scale
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn amplitude(&self, omega: &[f64]) -> f64 {
        if !self.in_support(omega) {
            return 0.0;
        }
        (self.amplitude)(omega)
    }

    pub fn phase(&self, omega: &[f64]) -> f64 {
        (self.phase)(omega)
    }

    pub fn tail_bound(&self, s: f64) -> f64 {
        (self.tail_bound)(s)
    }

    pub fn sampler(&self) -> Option<&Arc<SamplerFn>> {
        self.sampler.as_ref()
    }

    pub fn in_support(&self, omega: &[f64]) -> bool {
        match self.support {
            Support::Ball => omega.iter().map(|w| w * w).sum::<f64>() <= self.freq_radius * self.freq_radius,
            Support::Cube => omega.iter().all(|w| w.abs() <= self.freq_radius),
        }
    }

    /// Radius of the smallest ball containing the truncated region.
    pub fn outer_freq_radius(&self) -> f64 {
        match self.support {
            Support::Ball => self.freq_radius,
            Support::Cube => self.freq_radius * (self.dim as f64).sqrt(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let zero = [0usize; 3];
        (self.derivs)(x, &zero[..self.dim]).unwrap_or(f64::NAN)
    }

    /// Same target with a different `T`.
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(FnmError::invalid("radius must be positive"));
        }
        Ok(FourierTarget { radius, ..self.clone() })
    }
}

impl Field for FourierTarget {
    fn dim(&self) -> usize {
        self.dim
    }
    fn partial(&self, x: &[f64], alpha: &[usize]) -> Result<f64> {
        (self.derivs)(x, alpha).ok_or_else(|| {
            FnmError::invalid(format!("target '{}' has no derivative {alpha:?}", self.name))
        })
    }
}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_phase(x: f64) -> f64 {
    x - 2.0 * PI * ((x + PI) / (2.0 * PI)).floor()
}

fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    }
}

/// `∫_a^b f` by composite 16-point Gauss-Legendre on `panels` panels.
pub(crate) fn gl_integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let (x, w) = gauss_legendre_raw(16);
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            acc += 0.5 * h * wi * f(lo + 0.5 * h * (xi + 1.0));
        }
    }
    acc
}

/// `|S^{d-1}| ∫_{r0}^∞ (1 + shift + r)^s r^{d-1} A(r) dr` for a radial
/// amplitude profile decaying at least like a Gaussian or exponential with
/// length scale `scale`.
fn radial_tail(d: usize, profile: impl Fn(f64) -> f64, r0: f64, shift: f64, s: f64, scale: f64) -> f64 {
    let r0 = r0.max(0.0);
    let len = 80.0 * scale;
    let v = gl_integrate(
        |r| (1.0 + shift + r).powf(s) * r.powi(d as i32 - 1) * profile(r),
        r0,
        r0 + len,
        64,
    );
    sphere_area(d) * v
}

fn hermite(n: usize, z: f64) -> f64 {
    let (mut a, mut b) = (1.0, z);
    if n == 0 {
        return a;
    }
    for j in 1..n {
        let c = z * b - j as f64 * a;
        a = b;
        b = c;
    }
    b
}

/// `d^n/dy^n exp(-y²/(2σ²))`
fn gauss_deriv(y: f64, sigma: f64, n: usize) -> f64 {
    let z = y / sigma;
    (-1.0 / sigma).powi(n as i32) * hermite(n, z) * (-0.5 * z * z).exp()
}

/// `u(x) = scale Π_j exp(-(x_j - c_j)²/(2σ²))`, a Gaussian spectrum.
pub fn gaussian(dim: usize, sigma: f64, center: Vec<f64>, scale: f64, radius: f64) -> Result<FourierTarget> {
    if !(sigma > 0.0) || center.len() != dim {
        return Err(FnmError::invalid("gaussian needs sigma > 0 and a center of length d"));
    }
    let amp0 = scale.abs() * (2.0 * PI).powi(-(dim as i32)) * (2.0 * PI * sigma * sigma).powf(dim as f64 / 2.0);
    let flip = if scale < 0.0 { PI } else { 0.0 };
    let freq_radius = 9.0 / sigma;
    let c_phase = center.clone();
    let c_eval = center;
    let s2 = sigma * sigma;
    let profile = move |r: f64| amp0 * (-0.5 * s2 * r * r).exp();
    let t = FourierTarget::new(
        format!("gaussian(sigma={sigma})"),
        dim,
        move |w| amp0 * (-0.5 * s2 * w.iter().map(|v| v * v).sum::<f64>()).exp(),
        move |w| wrap_phase(flip - w.iter().zip(&c_phase).map(|(a, b)| a * b).sum::<f64>()),
        move |x, alpha| {
            if alpha.len() != x.len() {
                return None;
            }
            let p: f64 = x
                .iter()
                .zip(&c_eval)
                .zip(alpha)
                .map(|((xi, ci), &n)| gauss_deriv(xi - ci, sigma, n))
                .product();
            Some(scale * p)
        },
        radius,
        freq_radius,
        Support::Ball,
    )?;
    Ok(t
        .with_feature_scale(1.0 / sigma)
        .with_tail_bound(move |s| radial_tail(dim, profile, freq_radius, 0.0, s, 1.0 / sigma))
        .with_sampler(move |rng| loop {
            let w: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal) / sigma).collect();
            if w.iter().map(|v| v * v).sum::<f64>() <= freq_radius * freq_radius {
                break w;
            }
        }))
}

/// `d^n/dy^n sin(Ry)/(Ry) = (1/R) ∫_0^R ω^n Re[i^n e^{iωy}] dω`
fn sinc_deriv(y: f64, r: f64, n: usize) -> f64 {
    if n == 0 && (r * y).abs() > 1e-3 {
        return (r * y).sin() / (r * y);
    }
    let panels = ((r * y.abs()) / PI).ceil() as usize + 1;
    let i_n = Complex64::i().powu(n as u32);
    gl_integrate(
        |w| w.powi(n as i32) * (i_n * Complex64::from_polar(1.0, w * y)).re,
        0.0,
        r,
        panels,
    ) / r
}

/// `u(x) = scale Π_j sin(R(x_j - c_j))/(R(x_j - c_j))`: constant amplitude
/// `scale/(2R)^d` on the cube `[-R, R]^d`.
pub fn boxspec(dim: usize, freq_radius: f64, center: Vec<f64>, scale: f64, radius: f64) -> Result<FourierTarget> {
    if !(freq_radius > 0.0) || center.len() != dim {
        return Err(FnmError::invalid("boxspec needs radius > 0 and a center of length d"));
    }
    let amp = scale.abs() / (2.0 * freq_radius).powi(dim as i32);
    let flip = if scale < 0.0 { PI } else { 0.0 };
    let c_phase = center.clone();
    let c_eval = center;
    let t = FourierTarget::new(
        format!("boxspec(radius={freq_radius})"),
        dim,
        move |_| amp,
        move |w| wrap_phase(flip - w.iter().zip(&c_phase).map(|(a, b)| a * b).sum::<f64>()),
        move |x, alpha| {
            if alpha.len() != x.len() {
                return None;
            }
            let p: f64 = x
                .iter()
                .zip(&c_eval)
                .zip(alpha)
                .map(|((xi, ci), &n)| sinc_deriv(xi - ci, freq_radius, n))
                .product();
            Some(scale * p)
        },
        radius,
        freq_radius,
        Support::Cube,
    )?;
    Ok(t.with_sampler(move |rng| (0..dim).map(|_| rng.random_range(-freq_radius..=freq_radius)).collect()))
}

/// `u(x) = cos(ω_0·x) exp(-ε²‖x‖²/2)`: two Gaussian bumps of width `ε`
/// centred at `±ω_0`.
pub fn atom(dim: usize, omega0: Vec<f64>, width: f64, radius: f64) -> Result<FourierTarget> {
    if !(width > 0.0) || omega0.len() != dim {
        return Err(FnmError::invalid("atom needs width > 0 and omega0 of length d"));
    }
    let eps = width;
    let sigma = 1.0 / eps;
    let amp0 = 0.5 * (2.0 * PI).powi(-(dim as i32)) * (2.0 * PI * sigma * sigma).powf(dim as f64 / 2.0);
    let norm0 = omega0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let freq_radius = norm0 + 9.0 * eps;
    let w_amp = omega0.clone();
    let w_eval = omega0.clone();
    let w_samp = omega0;
    let bump = move |w: &[f64], sign: f64| {
        let d2: f64 = w.iter().zip(&w_amp).map(|(a, b)| (a - sign * b).powi(2)).sum();
        amp0 * (-0.5 * d2 / (eps * eps)).exp()
    };
    let profile = move |r: f64| amp0 * (-0.5 * r * r / (eps * eps)).exp();
    let t = FourierTarget::new(
        format!("atom(omega0={norm0}, width={width})"),
        dim,
        move |w| bump(w, 1.0) + bump(w, -1.0),
        |_| 0.0,
        move |x, alpha| {
            if alpha.len() != x.len() {
                return None;
            }
            // Re Π_j ∂^{n_j}[e^{i a_j x_j} g(x_j)], g Gaussian with σ = 1/ε
            let mut acc = Complex64::new(1.0, 0.0);
            for ((&xi, &a), &n) in x.iter().zip(&w_eval).zip(alpha) {
                let mut f = Complex64::new(0.0, 0.0);
                for j in 0..=n {
                    f += binomial(n, j) * Complex64::new(0.0, a).powu((n - j) as u32) * gauss_deriv(xi, sigma, j);
                }
                acc *= f * Complex64::from_polar(1.0, a * xi);
            }
            Some(acc.re)
        },
        radius,
        freq_radius,
        Support::Ball,
    )?;
    Ok(t
        .with_feature_scale(eps)
        .with_tail_bound(move |s| radial_tail(dim, profile, 9.0 * eps, norm0, s, eps))
        .with_sampler(move |rng| loop {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let w: Vec<f64> = w_samp
                .iter()
                .map(|c| sign * c + eps * rng.sample::<f64, _>(StandardNormal))
                .collect();
            if w.iter().map(|v| v * v).sum::<f64>() <= freq_radius * freq_radius {
                break w;
            }
        }))
}

/// `d^n/dy^n 1/(1+y²) = Re[n! i^n (1 - iy)^{-n-1}]`
fn cauchy_deriv(y: f64, n: usize) -> f64 {
    let fact: f64 = (1..=n).map(|v| v as f64).product();
    (fact * Complex64::i().powu(n as u32) * Complex64::new(1.0, -y).powi(-(n as i32) - 1)).re
}

/// `u(x) = Π_j 1/(1 + (x_j/γ)²)` with spectrum `Π_j (γ/2) e^{-γ|ω_j|}`.
pub fn cauchy(dim: usize, gamma: f64, radius: f64) -> Result<FourierTarget> {
    if !(gamma > 0.0) {
        return Err(FnmError::invalid("cauchy needs gamma > 0"));
    }
    let freq_radius = 40.0 / gamma;
    let t = FourierTarget::new(
        format!("cauchy(gamma={gamma})"),
        dim,
        move |w| w.iter().map(|v| 0.5 * gamma * (-gamma * v.abs()).exp()).product(),
        |_| 0.0,
        move |x, alpha| {
            if alpha.len() != x.len() {
                return None;
            }
            Some(
                x.iter()
                    .zip(alpha)
                    .map(|(xi, &n)| cauchy_deriv(xi / gamma, n) / gamma.powi(n as i32))
                    .product(),
            )
        },
        radius,
        freq_radius,
        Support::Cube,
    )?;
    let one_dim = move |s: f64, lo: f64| {
        2.0 * gl_integrate(|v| (1.0 + v).powf(s) * 0.5 * gamma * (-gamma * v).exp(), lo, lo + 80.0 / gamma, 64)
    };
    let exp = Exp::new(gamma).map_err(|e| FnmError::invalid(e.to_string()))?;
    Ok(t
        .with_feature_scale(1.0 / gamma)
        .with_tail_bound(move |s| {
            // (1+‖ω‖)^s ≤ Π_j (1+|ω_j|)^s and the complement of the cube is
            // covered by the d slabs {|ω_j| > R}
            dim as f64 * one_dim(s, freq_radius) * one_dim(s, 0.0).powi(dim as i32 - 1)
        })
        .with_sampler(move |rng| {
            (0..dim)
                .map(|_| loop {
                    let v: f64 = exp.sample(rng);
                    if v <= freq_radius {
                        break if rng.random::<bool>() { v } else { -v };
                    }
                })
                .collect()
        }))
}

/// `u(x) = Re Σ_p c_p e^{iω_p·x} exp(-ε²‖x‖²/2)`: Gaussian bumps of width
/// `ε` at `±ω_p`. The sampler proposes from `Σ|c_p| G(ω ∓ ω_p)` and accepts
/// with ratio `|û| / proposal`, so it is exact even where bumps overlap.
pub fn atoms(dim: usize, points: Vec<(Complex64, Vec<f64>)>, width: f64, radius: f64) -> Result<FourierTarget> {
    if !(width > 0.0) || points.is_empty() || points.iter().any(|(_, w)| w.len() != dim) {
        return Err(FnmError::invalid("atoms need width > 0 and frequencies of length d"));
    }
    let eps = width;
    let sigma = 1.0 / eps;
    let g0 = (2.0 * PI).powi(-(dim as i32)) * (2.0 * PI * sigma * sigma).powf(dim as f64 / 2.0);
    // Hermitian-symmetric weights: ½c at ω, ½c̄ at -ω
    let sym: Arc<Vec<(Complex64, Vec<f64>)>> = Arc::new(
        points
            .iter()
            .flat_map(|(c, w)| {
                [
                    (0.5 * c, w.clone()),
                    (0.5 * c.conj(), w.iter().map(|v| -v).collect::<Vec<f64>>()),
                ]
            })
            .filter(|(c, _)| c.norm() > 0.0)
            .collect(),
    );
    if sym.is_empty() {
        return Err(FnmError::invalid("atoms need a nonzero weight"));
    }
    let max_norm = sym
        .iter()
        .map(|(_, w)| w.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let total_weight: f64 = sym.iter().map(|(c, _)| c.norm()).sum();
    let freq_radius = max_norm + 9.0 * eps;
    let bump = move |w: &[f64], p: &[f64]| {
        let d2: f64 = w.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum();
        g0 * (-0.5 * d2 / (eps * eps)).exp()
    };
    let spectrum = {
        let sym = Arc::clone(&sym);
        move |w: &[f64]| sym.iter().map(|(c, p)| c * bump(w, p)).sum::<Complex64>()
    };
    let proposal = {
        let sym = Arc::clone(&sym);
        move |w: &[f64]| sym.iter().map(|(c, p)| c.norm() * bump(w, p)).sum::<f64>()
    };
    let amp = spectrum.clone();
    let phase = spectrum.clone();
    let eval = Arc::clone(&sym);
    let samp = Arc::clone(&sym);
    let profile = move |r: f64| total_weight * g0 * (-0.5 * r * r / (eps * eps)).exp();
    let t = FourierTarget::new(
        format!("atoms(count={}, width={width})", points.len()),
        dim,
        move |w| amp(w).norm(),
        move |w| wrap_phase(phase(w).arg()),
        move |x, alpha| {
            if alpha.len() != x.len() {
                return None;
            }
            let mut total = Complex64::new(0.0, 0.0);
            for (c, p) in eval.iter() {
                let mut acc = *c;
                for ((&xi, &a), &n) in x.iter().zip(p).zip(alpha) {
                    let mut f = Complex64::new(0.0, 0.0);
                    for j in 0..=n {
                        f += binomial(n, j) * Complex64::new(0.0, a).powu((n - j) as u32) * gauss_deriv(xi, sigma, j);
                    }
                    acc *= f * Complex64::from_polar(1.0, a * xi);
                }
                total += acc;
            }
            Some(total.re)
        },
        radius,
        freq_radius,
        Support::Ball,
    )?;
    let weights: Vec<f64> = samp.iter().map(|(c, _)| c.norm()).collect();
    let pick = rand::distr::weighted::WeightedIndex::new(&weights)
        .map_err(|e| FnmError::invalid(format!("atom weights: {e}")))?;
    Ok(t
        .with_feature_scale(eps)
        .with_tail_bound(move |s| radial_tail(dim, profile, 9.0 * eps, max_norm, s, eps))
        .with_sampler(move |rng| loop {
            let p = &samp[pick.sample(rng)].1;
            let w: Vec<f64> = p.iter().map(|c| c + eps * rng.sample::<f64, _>(StandardNormal)).collect();
            if w.iter().map(|v| v * v).sum::<f64>() > freq_radius * freq_radius {
                continue;
            }
            let q = proposal(&w);
            if q > 0.0 && rng.random::<f64>() * q < spectrum(&w).norm() {
                break w;
            }
        }))
}

/// Catalog entry names with a short description.
pub fn catalog() -> Vec<(&'static str, &'static str)> {
    vec![
        ("gaussian(sigma=1, center=0, scale=1)", "scale·exp(-|x-c|²/(2σ²)), Gaussian spectrum"),
        ("boxspec(radius=4, center=0, scale=1)", "scale·Π sin(R y_j)/(R y_j), flat spectrum on [-R,R]^d"),
        ("atom(omega0=4, width=0.25)", "cos(ω0·x)·exp(-ε²|x|²/2), spectrum concentrated at ±ω0 e_1"),
        ("cauchy(gamma=1)", "Π 1/(1+(x_j/γ)²), exponential spectrum"),
    ]
}

/// Parses `name(arg, key=value, …)` into numeric arguments.
pub(crate) fn parse_call(spec: &str) -> Result<(String, Vec<(Option<String>, f64)>)> {
    let spec = spec.trim();
    let (name, rest) = match spec.split_once('(') {
        Some((n, r)) => {
            let r = r
                .trim_end()
                .strip_suffix(')')
                .ok_or_else(|| FnmError::Config(format!("unbalanced parentheses in '{spec}'")))?;
            (n.trim(), r)
        }
        None => (spec, ""),
    };
    let mut args = Vec::new();
    for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, val) = match part.split_once('=') {
            Some((k, v)) => (Some(k.trim().to_string()), v.trim()),
            None => (None, part),
        };
        let v: f64 = val
            .parse()
            .map_err(|_| FnmError::Config(format!("argument '{val}' of '{name}' is not a number")))?;
        args.push((key, v));
    }
    Ok((name.to_string(), args))
}

/// Binds positional and keyword arguments to `names`, filling defaults.
pub(crate) fn bind_args(call: &str, args: &[(Option<String>, f64)], names: &[(&str, f64)]) -> Result<Vec<f64>> {
    let mut out: Vec<Option<f64>> = vec![None; names.len()];
    for (i, (key, v)) in args.iter().enumerate() {
        let slot = match key {
            Some(k) => names
                .iter()
                .position(|(n, _)| n == k)
                .ok_or_else(|| FnmError::Config(format!("unknown argument '{k}' for '{call}'")))?,
            None if i < names.len() => i,
            None => return Err(FnmError::Config(format!("too many arguments for '{call}'"))),
        };
        if out[slot].replace(*v).is_some() {
            return Err(FnmError::Config(format!("argument '{}' given twice", names[slot].0)));
        }
    }
    Ok(out.iter().zip(names).map(|(v, (_, d))| v.unwrap_or(*d)).collect())
}

/// Builds a catalog target, e.g. `gaussian(sigma=0.8)`, for dimension `dim`
/// on a domain of radius `radius`.
pub fn parse_target(spec: &str, dim: usize, radius: f64) -> Result<FourierTarget> {
    let (name, args) = parse_call(spec)?;
    match name.as_str() {
        "gaussian" => {
            let v = bind_args(&name, &args, &[("sigma", 1.0), ("center", 0.0), ("scale", 1.0)])?;
            gaussian(dim, v[0], vec![v[1]; dim], v[2], radius)
        }
        "boxspec" => {
            let v = bind_args(&name, &args, &[("radius", 4.0), ("center", 0.0), ("scale", 1.0)])?;
            boxspec(dim, v[0], vec![v[1]; dim], v[2], radius)
        }
        "atom" => {
            let v = bind_args(&name, &args, &[("omega0", 4.0), ("width", 0.25)])?;
            let mut w0 = vec![0.0; dim];
            w0[0] = v[0];
            atom(dim, w0, v[1], radius)
        }
        "cauchy" => {
            let v = bind_args(&name, &args, &[("gamma", 1.0)])?;
            cauchy(dim, v[0], radius)
        }
        _ => Err(FnmError::Config(format!("unknown target '{name}'"))),
    }
}
