//! Convergence studies: sweeps over `(N, seed)`, CSV output and rate fits.

mod config;
mod rate;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::energy::{
    boundary_residual, build_problem, default_delta, energy_norm_error, objective, sobolev_errors, EllipticProblem,
};
use crate::error::{FnmError, Result};
use crate::invariants::{self, CheckResult};
use crate::optimizer::{train, Initializer, TrainReport};
use crate::quadrature::{composite_rule, Domain, QuadratureRule};
use crate::sampling::PreparedConstruction;
use crate::target::{parse_target, FourierTarget};

pub use config::{AutoDelta, DeltaSetting, Metric, QuadConfig, StudyConfig, StudyKind, TrainTable};
pub use rate::{median, rate_fit, RateFit, ERROR_FLOOR};

/// Exact CSV header.
pub const CSV_HEADER: &str = "study,kind,N,seed,l2_error,hm_error,energy_error,J,nu,wall_ms,status";

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "FNM_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub n: usize,
    pub seed: u64,
    /// Penalty parameter of the row, for penalized problems.
    pub delta: Option<f64>,
    pub l2_error: f64,
    pub hm_error: f64,
    pub energy_error: f64,
    pub j: f64,
    pub nu: f64,
    /// `Σ_k ‖B^k u_N‖_{L²(∂Ω)}` for penalized problems.
    pub boundary_residual: f64,
    pub wall_ms: f64,
    /// `ok` or `error:<code>`.
    pub status: String,
}

impl StudyRow {
    fn failed(n: usize, seed: u64, delta: Option<f64>, e: &FnmError) -> Self {
        StudyRow {
            n,
            seed,
            delta,
            l2_error: f64::NAN,
            hm_error: f64::NAN,
            energy_error: f64::NAN,
            j: f64::NAN,
            nu: f64::NAN,
            boundary_residual: f64::NAN,
            wall_ms: 0.0,
            status: format!("error:{}", e.code()),
        }
    }

    pub fn ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn metric(&self, m: Metric) -> f64 {
        match m {
            Metric::L2 => self.l2_error,
            Metric::Hm => self.hm_error,
            Metric::Energy => self.energy_error,
        }
    }
}

/// Median boundary residual per penalty parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepLevel {
    pub delta: f64,
    pub boundary_residual: f64,
    pub energy_error: f64,
}

#[derive(Debug, Clone)]
pub struct StudyReport {
    pub config: StudyConfig,
    /// Sorted by `(δ, N, seed)`.
    pub rows: Vec<StudyRow>,
    /// `(N, median of the fitted metric)` over successful rows.
    pub medians: Vec<(usize, f64)>,
    pub fit: Option<RateFit>,
    pub passed: Option<bool>,
    pub sweep: Vec<SweepLevel>,
    pub checks: Vec<CheckResult>,
}

impl StudyReport {
    pub fn any_row_failed(&self) -> bool {
        self.rows.iter().any(|r| !r.ok())
    }

    pub fn any_check_failed(&self) -> bool {
        self.checks.iter().any(|c| !c.passed)
    }

    /// Whether the boundary residual falls with `δ` (allowing 10% noise).
    pub fn sweep_monotone(&self) -> Option<bool> {
        if self.sweep.len() < 2 {
            return None;
        }
        let mut levels = self.sweep.clone();
        levels.sort_by(|a, b| b.delta.total_cmp(&a.delta));
        Some(levels.windows(2).all(|w| w[1].boundary_residual <= 1.1 * w[0].boundary_residual))
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(CSV_HEADER.split(',')).map_err(csv_err)?;
        for r in &self.rows {
            let study = match r.delta {
                Some(d) if self.config.kind == StudyKind::DeltaSweep => format!("{}@delta={}", self.config.name, num(d)),
                _ => self.config.name.clone(),
            };
            w.write_record([
                study,
                self.config.kind.name().to_string(),
                r.n.to_string(),
                r.seed.to_string(),
                num(r.l2_error),
                num(r.hm_error),
                num(r.energy_error),
                num(r.j),
                num(r.nu),
                format!("{:.3}", r.wall_ms),
                r.status.clone(),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| FnmError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| FnmError::Io(e.to_string()))
    }

    pub fn summary(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let _ = writeln!(s, "study {}", c.name);
        let _ = writeln!(s, "kind {}", c.kind.name());
        if c.kind == StudyKind::InvariantSuite {
            for r in &self.checks {
                let _ = writeln!(s, "{} {} {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            let failed = self.checks.iter().filter(|r| !r.passed).count();
            let _ = writeln!(s, "checks {} failed {}", self.checks.len(), failed);
            return s;
        }
        let total = self.rows.len();
        let failed = self.rows.iter().filter(|r| !r.ok()).count();
        let _ = writeln!(s, "rows {total} failed {failed}");
        let _ = writeln!(s, "metric {}", metric_name(c.fit_metric()));
        for (n, m) in &self.medians {
            let _ = writeln!(s, "median N={n} {}", num(*m));
        }
        if let Some(f) = &self.fit {
            let _ = writeln!(s, "slope {}", num(f.slope));
            let _ = writeln!(s, "slope_stderr {}", num(f.slope_stderr));
            let _ = writeln!(s, "intercept {}", num(f.intercept));
            let _ = writeln!(s, "residual {}", num(f.residual));
            if !f.floored.is_empty() {
                let _ = writeln!(s, "floored_points {:?}", f.floored);
            }
        }
        if let Some(t) = c.theory_slope {
            let _ = writeln!(s, "theory_slope {}", num(t));
        }
        if let Some(t) = c.slope_tolerance {
            let _ = writeln!(s, "slope_tolerance {}", num(t));
        }
        if let Some(t) = c.slope_max {
            let _ = writeln!(s, "slope_max {}", num(t));
        }
        for l in &self.sweep {
            let _ = writeln!(
                s,
                "delta {} boundary_residual {} energy_error {}",
                num(l.delta),
                num(l.boundary_residual),
                num(l.energy_error)
            );
        }
        if let Some(m) = self.sweep_monotone() {
            let _ = writeln!(s, "boundary_monotone {m}");
        }
        if let Some(p) = self.passed {
            let _ = writeln!(s, "result {}", if p { "PASS" } else { "FAIL" });
        }
        s
    }

    /// gnuplot script plotting the fitted metric against `N` on log axes.
    pub fn gnuplot_script(&self, csv_path: &Path) -> String {
        let col = match self.config.fit_metric() {
            Metric::L2 => 5,
            Metric::Hm => 6,
            Metric::Energy => 7,
        };
        format!(
            "set datafile separator ','\nset logscale xy\nset xlabel 'N'\nset ylabel '{}'\nplot '{}' every ::1 using 3:{col} with points title '{}'\n",
            metric_name(self.config.fit_metric()),
            csv_path.display(),
            self.config.name
        )
    }

    /// Writes the CSV to `path`, the summary next to it, and optionally a
    /// gnuplot script; returns the paths written.
    pub fn write(&self, path: &Path) -> Result<Vec<PathBuf>> {
        if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut written = Vec::new();
        if self.config.kind != StudyKind::InvariantSuite {
            std::fs::write(path, self.to_csv()?)?;
            written.push(path.to_path_buf());
        }
        let summary = path.with_extension("summary.txt");
        std::fs::write(&summary, self.summary())?;
        written.push(summary);
        if self.config.gnuplot && self.config.kind != StudyKind::InvariantSuite {
            let gp = path.with_extension("gp");
            std::fs::write(&gp, self.gnuplot_script(path))?;
            written.push(gp);
        }
        Ok(written)
    }
}

fn csv_err(e: csv::Error) -> FnmError {
    FnmError::Io(e.to_string())
}

fn metric_name(m: Metric) -> &'static str {
    match m {
        Metric::L2 => "l2_error",
        Metric::Hm => "hm_error",
        Metric::Energy => "energy_error",
    }
}

/// Shortest round-trip form, so slopes can be recomputed from the CSV exactly.
fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:e}")
    }
}

/// Thread count from `FNM_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(FnmError::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(None),
    }
}

/// Runs `f` on a dedicated pool of `threads` workers (or the global pool).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| FnmError::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// The cube of half-width `T/√d`, which lies inside the ball of radius `T`.
pub fn approximation_domain(d: usize, radius: f64) -> Result<Domain> {
    let h = radius / (d as f64).sqrt();
    Domain::new(vec![-h; d], vec![h; d])
}

/// Executes a study. Row failures are recorded in the rows; only
/// configuration problems are returned as errors.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    config.validate()?;
    let mut report = StudyReport {
        config: config.clone(),
        rows: Vec::new(),
        medians: Vec::new(),
        fit: None,
        passed: None,
        sweep: Vec::new(),
        checks: Vec::new(),
    };
    match config.kind {
        StudyKind::ApproxRate => report.rows = approx_rows(config)?,
        StudyKind::SolveRate | StudyKind::DeltaSweep => report.rows = solve_rows(config)?,
        StudyKind::InvariantSuite => {
            report.checks = invariants::run_all();
            report.passed = Some(!report.any_check_failed());
            return Ok(report);
        }
    }
    if !config.record_timing {
        for r in &mut report.rows {
            r.wall_ms = 0.0;
        }
    }
    let metric = config.fit_metric();
    for &n in &config.n {
        let vals: Vec<f64> = report.rows.iter().filter(|r| r.n == n && r.ok()).map(|r| r.metric(metric)).collect();
        if let Some(m) = median(&vals) {
            report.medians.push((n, m));
        }
    }
    if config.kind == StudyKind::DeltaSweep {
        for &delta in &config.deltas {
            let at: Vec<&StudyRow> = report.rows.iter().filter(|r| r.delta == Some(delta) && r.ok()).collect();
            let br: Vec<f64> = at.iter().map(|r| r.boundary_residual).collect();
            let ee: Vec<f64> = at.iter().map(|r| r.energy_error).collect();
            if let (Some(b), Some(e)) = (median(&br), median(&ee)) {
                report.sweep.push(SweepLevel {
                    delta,
                    boundary_residual: b,
                    energy_error: e,
                });
            }
        }
        report.passed = report.sweep_monotone();
        return Ok(report);
    }
    if report.medians.len() >= 2 {
        let pairs: Vec<(f64, f64)> = report.medians.iter().map(|&(n, e)| (n as f64, e)).collect();
        let fit = rate_fit(&pairs)?;
        let mut verdict = None;
        if let (Some(t), Some(tol)) = (config.theory_slope, config.slope_tolerance) {
            verdict = Some((fit.slope - t).abs() <= tol);
        }
        if let Some(max) = config.slope_max {
            verdict = Some(verdict.unwrap_or(true) && fit.slope <= max);
        }
        report.passed = verdict;
        report.fit = Some(fit);
    }
    Ok(report)
}

fn row_seeds(config: &StudyConfig) -> Vec<u64> {
    (0..config.seeds as u64).map(|s| config.seed_offset + s).collect()
}

fn approx_rows(config: &StudyConfig) -> Result<Vec<StudyRow>> {
    let d = config.dim_or_default();
    let radius = config.radius();
    let spec = config.target.as_deref().unwrap_or_default();
    let target = parse_target(spec, d, radius)?;
    let kind = config.construction_kind()?;
    let domain = approximation_domain(d, radius)?;
    let q = config.quad_spec(d);
    let rule = composite_rule(&domain, q.panels, q.q)?;
    let m = config.error_order();
    let seeds = row_seeds(config);
    // the cell plan depends only on N; seeds share it
    let plans: Vec<(usize, Result<PreparedConstruction>)> = config
        .n
        .par_iter()
        .map(|&n| (n, PreparedConstruction::new(&target, kind, n)))
        .collect();
    let jobs: Vec<(usize, u64)> = plans
        .iter()
        .enumerate()
        .flat_map(|(i, _)| seeds.iter().map(move |&s| (i, s)))
        .collect();
    Ok(jobs
        .par_iter()
        .map(|&(i, seed)| {
            let (n, plan) = &plans[i];
            let start = Instant::now();
            let out = plan
                .as_ref()
                .map_err(Clone::clone)
                .and_then(|p| approx_row(p, &target, &rule, m, *n, seed));
            match out {
                Ok(mut r) => {
                    r.wall_ms = start.elapsed().as_secs_f64() * 1e3;
                    r
                }
                Err(e) => StudyRow::failed(*n, seed, None, &e),
            }
        })
        .collect())
}

fn approx_row(
    plan: &PreparedConstruction,
    target: &FourierTarget,
    rule: &QuadratureRule,
    m: usize,
    n: usize,
    seed: u64,
) -> Result<StudyRow> {
    let c = plan.draw(seed)?;
    let (l2, hm) = sobolev_errors(&c.net, target, rule, m)?;
    if !(l2.is_finite() && hm.is_finite()) {
        return Err(FnmError::numeric("non-finite approximation error"));
    }
    Ok(StudyRow {
        n,
        seed,
        delta: None,
        l2_error: l2,
        hm_error: hm,
        energy_error: f64::NAN,
        j: f64::NAN,
        nu: c.nu,
        boundary_residual: f64::NAN,
        wall_ms: 0.0,
        status: "ok".into(),
    })
}

fn solve_rows(config: &StudyConfig) -> Result<Vec<StudyRow>> {
    let name = config.problem.as_deref().unwrap_or_default();
    let probe = build_problem(name, None, None)?;
    let d = probe.dim();
    if let Some(cd) = config.dim {
        if cd != d {
            return Err(FnmError::Config(format!("problem '{name}' has dimension {d}, config says {cd}")));
        }
    }
    if probe.exact().is_none() {
        return Err(FnmError::Config(format!("problem '{name}' has no manufactured solution")));
    }
    let activation = config.activation_for(probe.m())?;
    let table = config.train_table();
    table.to_config(0)?;
    let quad = config.quad_spec(d);
    let seeds = row_seeds(config);
    let sweep = config.kind == StudyKind::DeltaSweep;
    if sweep && !probe.is_penalized() {
        return Err(FnmError::Config(format!("problem '{name}' has no boundary penalty to sweep")));
    }
    // one assembled problem per (δ, N)
    let mut settings: Vec<(usize, Option<f64>)> = Vec::new();
    let deltas: Vec<Option<f64>> = if sweep {
        config.deltas.iter().map(|&v| Some(v)).collect()
    } else {
        vec![None]
    };
    for &delta in &deltas {
        for &n in &config.n {
            let resolved = match (probe.is_penalized(), delta, config.delta) {
                (false, _, _) => None,
                (true, Some(v), _) => Some(v),
                (true, None, Some(DeltaSetting::Value(v))) => Some(v),
                (true, None, _) => Some(default_delta(n, d)),
            };
            settings.push((n, resolved));
        }
    }
    let problems: Vec<Result<EllipticProblem>> = settings
        .par_iter()
        .map(|&(_, delta)| build_problem(name, Some(quad), delta))
        .collect();
    // initial features depend on N and the seed only, not on δ
    let init = table.to_config(0)?.init;
    let per_n = config.n.len();
    let initializers: Vec<Result<Initializer>> = (0..per_n)
        .into_par_iter()
        .map(|i| {
            let prob = problems[i].as_ref().map_err(Clone::clone)?;
            Initializer::new(activation, prob, config.n[i], &init)
        })
        .collect();
    let jobs: Vec<(usize, u64)> = (0..settings.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    Ok(jobs
        .par_iter()
        .map(|&(i, seed)| {
            let (n, delta) = settings[i];
            let start = Instant::now();
            let out = problems[i].as_ref().map_err(Clone::clone).and_then(|prob| {
                let initializer = initializers[i % per_n].as_ref().map_err(Clone::clone)?;
                solve_row(prob, initializer, &table, config.error_order(), n, seed)
            });
            match out {
                Ok(mut r) => {
                    r.delta = delta;
                    r.wall_ms = start.elapsed().as_secs_f64() * 1e3;
                    r
                }
                Err(e) => StudyRow::failed(n, seed, delta, &e),
            }
        })
        .collect())
}

fn solve_row(
    prob: &EllipticProblem,
    initializer: &Initializer,
    table: &TrainTable,
    m_report: usize,
    n: usize,
    seed: u64,
) -> Result<StudyRow> {
    let mut best: Option<TrainReport> = None;
    for start in 0..table.restarts as u64 {
        // start 0 uses the row seed itself, so one start reproduces a plain run
        let s = seed ^ (start << 32);
        let cfg = table.to_config(s)?;
        let report = train(&initializer.net(s)?, prob, &cfg)?;
        if best.as_ref().is_none_or(|b| report.final_j() < b.final_j()) {
            best = Some(report);
        }
    }
    let report = best.ok_or_else(|| FnmError::invalid("no training start"))?;
    let exact = prob.exact().ok_or_else(|| FnmError::invalid("problem has no exact solution"))?;
    let rule = prob.reference_rule()?;
    let (l2, hm) = sobolev_errors(&report.net, exact, &rule, m_report.max(prob.m()))?;
    let energy = energy_norm_error(&report.net, exact, prob, false)?;
    let boundary = if prob.is_penalized() {
        boundary_residual(&report.net, prob)?
    } else {
        f64::NAN
    };
    let j = objective(&report.net, prob)?;
    Ok(StudyRow {
        n,
        seed,
        delta: None,
        l2_error: l2,
        hm_error: hm,
        energy_error: energy,
        j,
        nu: f64::NAN,
        boundary_residual: boundary,
        wall_ms: 0.0,
        status: "ok".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos_config() -> StudyConfig {
        StudyConfig::from_toml(
            r#"
name = "cos_small"
kind = "approx_rate"
target = "gaussian(sigma=0.7)"
dim = 1
radius = 1.0
construction = "mc_cos"
N = [8, 16, 32, 64]
seeds = 3
quadrature = { panels = 16, q = 6 }
"#,
        )
        .unwrap()
    }

    #[test]
    fn rows_are_sorted_and_complete() {
        let r = run_study(&cos_config()).unwrap();
        assert_eq!(r.rows.len(), 12);
        let keys: Vec<(usize, u64)> = r.rows.iter().map(|r| (r.n, r.seed)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(!r.any_row_failed());
        assert_eq!(r.medians.len(), 4);
        assert!(r.fit.is_some());
    }

    #[test]
    fn csv_header_and_slope_recomputation() {
        let r = run_study(&cos_config()).unwrap();
        let csv = r.to_csv().unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let mut by_n: Vec<(usize, Vec<f64>)> = Vec::new();
        for line in lines {
            let f: Vec<&str> = line.split(',').collect();
            assert_eq!(f.len(), 11);
            assert_eq!(f[9], "0.000");
            let n: usize = f[2].parse().unwrap();
            let e: f64 = f[5].parse().unwrap();
            match by_n.iter_mut().find(|(m, _)| *m == n) {
                Some((_, v)) => v.push(e),
                None => by_n.push((n, vec![e])),
            }
        }
        let pairs: Vec<(f64, f64)> = by_n.iter().map(|(n, v)| (*n as f64, median(v).unwrap())).collect();
        let refit = rate_fit(&pairs).unwrap();
        assert!((refit.slope - r.fit.unwrap().slope).abs() < 1e-12);
    }

    #[test]
    fn thread_count_does_not_change_the_csv() {
        let cfg = cos_config();
        let one = with_threads(Some(1), || run_study(&cfg).unwrap().to_csv().unwrap()).unwrap();
        let four = with_threads(Some(4), || run_study(&cfg).unwrap().to_csv().unwrap()).unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn failing_rows_are_recorded() {
        let mut cfg = cos_config();
        cfg.target = Some("gaussian(sigma=0.7)".into());
        cfg.construction = Some("relu_taylor".into());
        cfg.k = Some(40);
        let r = run_study(&cfg).unwrap();
        assert!(r.any_row_failed());
        assert!(r.rows.iter().all(|row| row.status == "error:invalid_argument"));
        assert!(r.to_csv().unwrap().contains("nan"));
    }

    #[test]
    fn unknown_catalog_entries_are_config_errors() {
        let mut cfg = cos_config();
        cfg.target = Some("lorentz(1)".into());
        assert!(matches!(run_study(&cfg), Err(FnmError::Config(_))));
    }

    #[test]
    fn outputs_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = cos_config();
        cfg.gnuplot = true;
        let r = run_study(&cfg).unwrap();
        let path = dir.path().join("out").join("cos.csv");
        let written = r.write(&path).unwrap();
        assert_eq!(written.len(), 3);
        let summary = std::fs::read_to_string(dir.path().join("out").join("cos.summary.txt")).unwrap();
        assert!(summary.contains("slope "));
    }
}
