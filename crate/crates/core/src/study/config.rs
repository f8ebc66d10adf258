//! Study configuration files.

use std::path::Path;

use serde::Deserialize;

use crate::activations::Activation;
use crate::energy::QuadSpec;
use crate::error::{FnmError, Result};
use crate::optimizer::{Freeze, Init, Method, TrainConfig};
use crate::sampling::ConstructionKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    ApproxRate,
    SolveRate,
    DeltaSweep,
    InvariantSuite,
}

impl StudyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StudyKind::ApproxRate => "approx_rate",
            StudyKind::SolveRate => "solve_rate",
            StudyKind::DeltaSweep => "delta_sweep",
            StudyKind::InvariantSuite => "invariant_suite",
        }
    }
}

/// Error column a rate is fitted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    L2,
    Hm,
    Energy,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum DeltaSetting {
    Value(f64),
    /// `"auto"`: `δ = N^{-1/2-1/d}`.
    Named(AutoDelta),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoDelta {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadConfig {
    pub panels: usize,
    pub q: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainTable {
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_inner_steps")]
    pub inner_steps: usize,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    /// `random_sphere` or a construction name.
    #[serde(default = "default_init")]
    pub init: String,
    /// Bias range of `random_sphere`.
    #[serde(default = "default_init_radius")]
    pub init_radius: f64,
    #[serde(default)]
    pub freeze: Vec<String>,
    #[serde(default)]
    pub subgradient: bool,
    #[serde(default)]
    pub reproject: bool,
    /// Independent starts per row; the one with the lowest final `J` is kept.
    #[serde(default = "default_restarts")]
    pub restarts: usize,
}

fn default_restarts() -> usize {
    1
}

fn default_method() -> String {
    "hybrid".into()
}
fn default_inner_steps() -> usize {
    5
}
fn default_max_iters() -> usize {
    200
}
fn default_step() -> f64 {
    1.0
}
fn default_grad_tol() -> f64 {
    1e-10
}
fn default_init() -> String {
    "random_sphere".into()
}
fn default_init_radius() -> f64 {
    1.0
}
fn default_seeds() -> usize {
    1
}

impl Default for TrainTable {
    fn default() -> Self {
        toml::from_str("").expect("empty train table")
    }
}

impl TrainTable {
    /// Training configuration for one row; `seed` overrides nothing else.
    pub fn to_config(&self, seed: u64) -> Result<TrainConfig> {
        let method = match self.method.as_str() {
            "gd_backtracking" => Method::GdBacktracking,
            "adam" => Method::Adam,
            "hybrid" => Method::Hybrid {
                inner_steps: self.inner_steps,
            },
            other => return Err(FnmError::Config(format!("unknown training method '{other}'"))),
        };
        let init = match self.init.as_str() {
            "random_sphere" => Init::RandomSphere {
                radius: self.init_radius,
            },
            "relu_taylor" | "spline_stratified" | "mc_cos" => Init::FromSampler {
                construction: self.init.clone(),
            },
            other => return Err(FnmError::Config(format!("unknown initializer '{other}'"))),
        };
        if self.restarts == 0 {
            return Err(FnmError::Config("restarts must be at least 1".into()));
        }
        let cfg = TrainConfig {
            method,
            max_iters: self.max_iters,
            step: self.step,
            grad_tol: self.grad_tol,
            seed,
            init,
            freeze: Freeze::parse(&self.freeze)?,
            subgradient: self.subgradient,
            reproject: self.reproject,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One study. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub name: String,
    pub kind: StudyKind,
    /// Catalog target, e.g. `gaussian(sigma=0.5)` (approx studies).
    #[serde(default)]
    pub target: Option<String>,
    /// Catalog problem name (solve and sweep studies).
    #[serde(default)]
    pub problem: Option<String>,
    #[serde(default)]
    pub dim: Option<usize>,
    /// `T`; the approximation domain is the cube of half-width `T/√d`.
    #[serde(default)]
    pub radius: Option<f64>,
    /// `mc_cos`, `relu_taylor`, `relu_mc` or `spline_stratified`.
    #[serde(default)]
    pub construction: Option<String>,
    /// `relu_pow`, `bspline` or `cosine` (solve studies).
    #[serde(default)]
    pub activation: Option<String>,
    #[serde(default)]
    pub k: Option<usize>,
    /// Sobolev order of the reported `hm_error`.
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(alias = "N", default)]
    pub n: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub seed_offset: u64,
    #[serde(default)]
    pub quadrature: Option<QuadConfig>,
    #[serde(default)]
    pub delta: Option<DeltaSetting>,
    #[serde(default)]
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub fit: Option<Metric>,
    #[serde(default)]
    pub theory_slope: Option<f64>,
    /// Pass when `|slope - theory_slope| ≤ slope_tolerance`.
    #[serde(default)]
    pub slope_tolerance: Option<f64>,
    /// Pass only when `slope ≤ slope_max`.
    #[serde(default)]
    pub slope_max: Option<f64>,
    /// Write measured wall times; off by default so CSVs are reproducible.
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default)]
    pub output: Option<String>,
    /// Also write a gnuplot script next to the CSV.
    #[serde(default)]
    pub gnuplot: bool,
    #[serde(default)]
    pub train: Option<TrainTable>,
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: StudyConfig = toml::from_str(text).map_err(|e| FnmError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FnmError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FnmError::Config(m));
        if self.name.is_empty() || self.name.contains([',', '"', '\n']) {
            return bad(format!("study name '{}' must be non-empty without commas or quotes", self.name));
        }
        if self.kind == StudyKind::InvariantSuite {
            return Ok(());
        }
        if self.seeds == 0 {
            return bad("seeds must be at least 1".into());
        }
        if self.n.is_empty() || self.n[0] == 0 {
            return bad("N grid must be non-empty and positive".into());
        }
        if self.n.windows(2).any(|w| w[0] >= w[1]) {
            return bad("N grid must be strictly increasing".into());
        }
        if self.rate_fitted() && self.n.len() < 4 {
            return bad("rate fits need at least 4 grid points".into());
        }
        if let Some(q) = self.quadrature {
            if q.panels == 0 || q.q == 0 {
                return bad("quadrature panels and q must be positive".into());
            }
        }
        if let Some(tol) = self.slope_tolerance {
            if !(tol >= 0.0) || self.theory_slope.is_none() {
                return bad("slope_tolerance needs a theory_slope and must be non-negative".into());
            }
        }
        match self.kind {
            StudyKind::ApproxRate => {
                if self.target.is_none() {
                    return bad("approx_rate needs a target".into());
                }
                if self.problem.is_some() || self.train.is_some() {
                    return bad("approx_rate takes no problem or train table".into());
                }
                if !(self.radius() > 0.0) {
                    return bad("radius must be positive".into());
                }
                self.construction_kind()?;
            }
            StudyKind::SolveRate | StudyKind::DeltaSweep => {
                if self.problem.is_none() {
                    return bad(format!("{} needs a problem", self.kind.name()));
                }
                if self.target.is_some() || self.construction.is_some() {
                    return bad(format!("{} takes no target or construction", self.kind.name()));
                }
                self.activation_for(1)?;
                self.train_table().to_config(0)?;
                if self.kind == StudyKind::DeltaSweep {
                    if self.deltas.is_empty() || self.deltas.iter().any(|d| !(*d > 0.0)) {
                        return bad("delta_sweep needs a non-empty list of positive deltas".into());
                    }
                    if self.delta.is_some() {
                        return bad("delta_sweep takes deltas, not delta".into());
                    }
                } else if !self.deltas.is_empty() {
                    return bad("deltas is only valid for delta_sweep".into());
                }
                if let Some(DeltaSetting::Value(d)) = self.delta {
                    if !(d > 0.0) {
                        return bad("delta must be positive".into());
                    }
                }
            }
            StudyKind::InvariantSuite => {}
        }
        Ok(())
    }

    pub fn rate_fitted(&self) -> bool {
        matches!(self.kind, StudyKind::ApproxRate | StudyKind::SolveRate)
    }

    pub fn dim_or_default(&self) -> usize {
        self.dim.unwrap_or(1)
    }

    pub fn radius(&self) -> f64 {
        self.radius.unwrap_or(1.0)
    }

    pub fn error_order(&self) -> usize {
        self.m.unwrap_or(0)
    }

    pub fn quad_spec(&self, d: usize) -> QuadSpec {
        self.quadrature
            .map(|q| QuadSpec { panels: q.panels, q: q.q })
            .unwrap_or_else(|| QuadSpec::default_for(d))
    }

    pub fn train_table(&self) -> TrainTable {
        self.train.clone().unwrap_or_default()
    }

    pub fn construction_kind(&self) -> Result<ConstructionKind> {
        let name = self.construction.as_deref().unwrap_or("relu_taylor");
        let k = || self.k.ok_or_else(|| FnmError::Config(format!("construction '{name}' needs k")));
        Ok(match name {
            "mc_cos" => ConstructionKind::McCos { m: self.error_order() },
            "relu_taylor" => ConstructionKind::ReluTaylor { k: k()?, stratified: true },
            "relu_mc" => ConstructionKind::ReluTaylor { k: k()?, stratified: false },
            "spline_stratified" => ConstructionKind::SplineStratified { k: k()? },
            other => return Err(FnmError::Config(format!("unknown construction '{other}'"))),
        })
    }

    /// Network activation for a problem of order `m` (`k` defaults to `m+1`).
    pub fn activation_for(&self, m: usize) -> Result<Activation> {
        let k = self.k.unwrap_or(m + 1);
        match self.activation.as_deref().unwrap_or("relu_pow") {
            "relu_pow" => Activation::relu_pow(k),
            "bspline" => Activation::bspline(k),
            "cosine" => Ok(Activation::Cosine),
            other => Err(FnmError::Config(format!("unknown activation '{other}'"))),
        }
        .map_err(|e| match e {
            FnmError::Config(_) => e,
            other => FnmError::Config(other.to_string()),
        })
    }

    pub fn fit_metric(&self) -> Metric {
        self.fit.unwrap_or(match self.kind {
            StudyKind::ApproxRate => Metric::Hm,
            _ => Metric::Energy,
        })
    }
}
