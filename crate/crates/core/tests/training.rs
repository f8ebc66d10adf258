use fnm::activations::Activation;
use fnm::energy::{assemble_a_delta, build_problem, energy_norm_error, QuadSpec};
use fnm::field::Difference;
use fnm::optimizer::{initialize, net_objective, random_sphere_net, solve_outer_ls, train, Freeze, Init, Method, TrainConfig};
use fnm::study::{run_study, StudyConfig};

fn quad() -> Option<QuadSpec> {
    Some(QuadSpec { panels: 64, q: 6 })
}

#[test]
fn training_from_the_sampler_never_worsens_the_initializer() {
    let prob = build_problem("poisson1d_neumann", quad(), None).unwrap();
    let exact = prob.exact().unwrap();
    let init = Init::FromSampler { construction: "relu_taylor".into() };
    for seed in 0..2 {
        let net = initialize(Activation::relu_pow(3).unwrap(), &prob, 16, &init, seed).unwrap();
        let cfg = TrainConfig { max_iters: 20, seed, init: init.clone(), ..TrainConfig::default() };
        let report = train(&net, &prob, &cfg).unwrap();
        let before = energy_norm_error(&net, exact, &prob, false).unwrap();
        let after = energy_norm_error(&report.net, exact, &prob, false).unwrap();
        assert!(after <= before * (1.0 + 1e-6), "seed {seed}: {after} > {before}");
        assert!(report.j_values.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn penalized_energy_identity_in_a_frozen_span() {
    let prob = build_problem("poisson1d_penalty", quad(), Some(1e-2)).unwrap();
    let feats = random_sphere_net(Activation::relu_pow(2).unwrap(), &prob, 10, 1.0, 4).unwrap();
    let feats = feats
        .with_inner_bias(feats.inner_flat().to_vec(), feats.bias().iter().map(|b| b.abs() + 0.1).collect())
        .unwrap();
    let best = solve_outer_ls(&feats, &prob).unwrap();
    let v = best
        .with_outer(best.outer().iter().enumerate().map(|(i, a)| a + 0.1 * (i as f64).sin()).collect())
        .unwrap();
    let gap = net_objective(&v, &prob).unwrap() - net_objective(&best, &prob).unwrap();
    let e = Difference(&v, &best);
    let half = 0.5 * assemble_a_delta(&e, &e, &prob).unwrap();
    assert!((gap - half).abs() < 1e-10 * half.max(1.0), "{gap} vs {half}");
}

#[test]
fn subgradient_mode_keeps_backtracking_monotone() {
    let prob = build_problem("poisson1d_neumann", quad(), None).unwrap();
    let net = random_sphere_net(Activation::relu_pow(1).unwrap(), &prob, 8, 1.0, 2).unwrap();
    let net = net.with_outer(vec![0.2; 8]).unwrap();
    let mut cfg = TrainConfig {
        method: Method::GdBacktracking,
        max_iters: 40,
        step: 0.5,
        ..TrainConfig::default()
    };
    assert!(train(&net, &prob, &cfg).is_err());
    cfg.subgradient = true;
    let report = train(&net, &prob, &cfg).unwrap();
    assert!(report.subgradient);
    assert!(report.j_values.windows(2).all(|w| w[1] <= w[0]));
    assert!(report.final_j() < report.j_values[0]);
}

#[test]
fn frozen_features_reach_the_least_squares_energy() {
    let prob = build_problem("biharmonic1d_neumann", quad(), None).unwrap();
    let net = random_sphere_net(Activation::relu_pow(3).unwrap(), &prob, 6, 1.0, 8).unwrap();
    let cfg = TrainConfig {
        freeze: Freeze { inner: true, bias: true, tail: true, outer: false },
        max_iters: 3,
        ..TrainConfig::default()
    };
    let report = train(&net, &prob, &cfg).unwrap();
    let direct = net_objective(&solve_outer_ls(&net, &prob).unwrap(), &prob).unwrap();
    assert!((report.final_j() - direct).abs() < 1e-9);
}

#[test]
fn solve_study_medians_decrease() {
    let cfg = StudyConfig::from_toml(
        r#"
name = "medians"
kind = "solve_rate"
problem = "poisson1d_neumann"
k = 3
m = 1
N = [4, 8, 16, 32]
seeds = 2
fit = "energy"
[train]
max_iters = 60
"#,
    )
    .unwrap();
    let report = run_study(&cfg).unwrap();
    assert!(!report.any_row_failed());
    let med: Vec<f64> = report.medians.iter().map(|m| m.1).collect();
    assert!(med.windows(2).all(|w| w[1] < w[0]), "{med:?}");
    assert!(report.fit.unwrap().slope < 0.0);
}

#[test]
fn restarts_keep_the_lowest_energy_start() {
    let base = r#"
name = "restarts"
kind = "solve_rate"
problem = "poisson1d_neumann"
k = 2
m = 1
N = [4, 6, 8, 10]
fit = "energy"
quadrature = { panels = 32, q = 6 }
[train]
max_iters = 10
"#;
    let one = run_study(&StudyConfig::from_toml(base).unwrap()).unwrap();
    let three = run_study(&StudyConfig::from_toml(&format!("{base}restarts = 3\n")).unwrap()).unwrap();
    for (a, b) in one.rows.iter().zip(&three.rows) {
        assert!(b.j <= a.j + 1e-14, "N={}: {} > {}", a.n, b.j, a.j);
    }
    assert!(StudyConfig::from_toml(&format!("{base}restarts = 0\n")).is_err());
}
