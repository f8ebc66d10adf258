//! Fast self-checks of the library's structural invariants, run by
//! `fnm check` and the `invariant_suite` study kind.

use rand::Rng;

use crate::activations::{bspline_eval, bspline_to_relu, relu_pow_deriv, Activation};
use crate::energy::{assemble_a, build_problem, default_delta, taylor_identity_residual, QuadSpec};
use crate::error::Result;
use crate::field::Difference;
use crate::multiindex::{monomial, up_to_order};
use crate::net::poly_reproduce;
use crate::optimizer::{grad_energy, net_objective, random_sphere_net, solve_outer_ls};
use crate::quadrature::{composite_rule, gauss_legendre_1d, Domain};
use crate::sampling::{stratified_spline_construct, stream_rng};
use crate::study::rate_fit;
use crate::target::gaussian;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn() -> Result<(bool, String)>;

const CHECKS: &[(&str, Check)] = &[
    ("bspline_partition_of_unity", partition_of_unity),
    ("bspline_relu_expansion", spline_relu_expansion),
    ("gauss_legendre_exactness", gauss_exactness),
    ("taylor_identity", taylor_identity),
    ("polynomial_reproduction", polynomial_reproduction),
    ("energy_gradient", energy_gradient),
    ("frozen_feature_energy_identity", energy_identity),
    ("spline_unit_bounds", spline_unit_bounds),
    ("rate_fit_power_law", rate_fit_power_law),
    ("penalty_default_scaling", penalty_scaling),
];

/// Runs every check; errors count as failures.
pub fn run_all() -> Vec<CheckResult> {
    CHECKS
        .iter()
        .map(|(name, f)| match f() {
            Ok((passed, detail)) => CheckResult { name, passed, detail },
            Err(e) => CheckResult {
                name,
                passed: false,
                detail: format!("error: {e}"),
            },
        })
        .collect()
}

fn verdict(worst: f64, tol: f64) -> (bool, String) {
    (worst < tol, format!("max residual {worst:.3e} (tolerance {tol:.0e})"))
}

fn partition_of_unity() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for k in 0..=5 {
        for i in 0..1000 {
            let x = -3.0 + 6.0 * i as f64 / 999.0;
            let s: f64 = (-8..=8).map(|j| bspline_eval(k, x - j as f64, 0)).sum::<Result<f64>>()?;
            worst = worst.max((s - 1.0).abs());
        }
    }
    Ok(verdict(worst, 1e-12))
}

fn spline_relu_expansion() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for k in 1..=5 {
        let terms = bspline_to_relu(k)?;
        for i in 0..=200 {
            let x = -1.0 + (k as f64 + 3.0) * i as f64 / 200.0;
            let relu: f64 = terms
                .iter()
                .map(|&(c, s)| relu_pow_deriv(s - x, k, 0).map(|v| c * v))
                .sum::<Result<f64>>()?;
            worst = worst.max((relu - bspline_eval(k, x, 0)?).abs());
        }
    }
    Ok(verdict(worst, 1e-9))
}

fn gauss_exactness() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for n in [1, 4, 9, 20] {
        let rule = gauss_legendre_1d(n)?;
        for p in 0..2 * n {
            let q: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x[0].powi(p as i32)).sum();
            let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
            worst = worst.max((q - exact).abs());
        }
    }
    Ok(verdict(worst, 1e-13))
}

fn taylor_identity() -> Result<(bool, String)> {
    let mut rng = stream_rng(11, 0);
    let mut worst: f64 = 0.0;
    for case in 0..12 {
        let k = case % 4 + 1;
        let omega = [rng.random_range(-8.0..8.0)];
        let x = [rng.random_range(-1.0..1.0)];
        worst = worst.max(taylor_identity_residual(k, &omega, &x, 1.0));
    }
    Ok(verdict(worst, 1e-8))
}

fn polynomial_reproduction() -> Result<(bool, String)> {
    let domain = Domain::symmetric(2)?;
    let rule = composite_rule(&domain, 3, 3)?;
    let mut worst: f64 = 0.0;
    for alpha in up_to_order(2, 2) {
        let net = poly_reproduce(2, &alpha, &domain)?;
        for x in &rule.nodes {
            worst = worst.max((net.eval(x) - monomial(x, &alpha)).abs());
        }
    }
    Ok(verdict(worst, 1e-8))
}

fn energy_gradient() -> Result<(bool, String)> {
    let prob = build_problem("poisson1d_neumann", Some(QuadSpec { panels: 32, q: 6 }), None)?;
    let net = random_sphere_net(Activation::relu_pow(3)?, &prob, 5, 1.0, 3)?;
    let outer: Vec<f64> = (0..5).map(|i| 0.3 - 0.1 * i as f64).collect();
    let net = net.with_outer(outer.clone())?;
    let g = grad_energy(&net, &prob)?;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..net.units() {
        let mut bp = net.bias().to_vec();
        let mut bm = bp.clone();
        bp[i] += h;
        bm[i] -= h;
        let jp = net_objective(&net.with_inner_bias(net.inner_flat().to_vec(), bp)?, &prob)?;
        let jm = net_objective(&net.with_inner_bias(net.inner_flat().to_vec(), bm)?, &prob)?;
        let fd = (jp - jm) / (2.0 * h);
        worst = worst.max((fd - g.bias[i]).abs() / g.bias[i].abs().max(1e-3));
    }
    Ok(verdict(worst, 1e-6))
}

fn energy_identity() -> Result<(bool, String)> {
    let prob = build_problem("poisson1d_neumann", Some(QuadSpec { panels: 32, q: 6 }), None)?;
    let feats = random_sphere_net(Activation::relu_pow(2)?, &prob, 8, 1.0, 5)?;
    let best = solve_outer_ls(&feats, &prob)?;
    let v = best.with_outer(best.outer().iter().enumerate().map(|(i, a)| a + 0.05 * (i as f64 - 3.5)).collect())?;
    let gap = net_objective(&v, &prob)? - net_objective(&best, &prob)?;
    let e = Difference(&v, &best);
    let half_norm = 0.5 * assemble_a(&e, &e, &prob)?;
    Ok(verdict((gap - half_norm).abs(), 1e-10))
}

fn spline_unit_bounds() -> Result<(bool, String)> {
    let (t, k) = (1.0, 2);
    let target = gaussian(1, 0.6, vec![0.0], 1.0, t)?;
    let c = stratified_spline_construct(&target, k, 40, 9)?;
    let limit = t + k as f64 + 1.0;
    let ok = (0..c.net.units()).all(|i| {
        let w = c.net.inner(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        w <= 1.0 && c.net.bias()[i].abs() <= limit
    });
    Ok((ok, format!("{} units, ‖w‖ ≤ 1 and |b| ≤ {limit}", c.net.units())))
}

fn rate_fit_power_law() -> Result<(bool, String)> {
    let f = rate_fit(&[(10.0, 1.0), (100.0, 0.1), (1000.0, 0.01)])?;
    Ok(verdict((f.slope + 1.0).abs(), 1e-12))
}

fn penalty_scaling() -> Result<(bool, String)> {
    let want = [(16usize, 1usize, 16f64.powf(-1.5)), (64, 2, 64f64.powf(-1.0))];
    let worst = want
        .iter()
        .map(|&(n, d, v)| (default_delta(n, d) - v).abs() / v)
        .fold(0.0, f64::max);
    Ok(verdict(worst, 1e-14))
}
