use std::path::Path;
use std::process::{Command, Output};

fn fnm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fnm"))
        .args(args)
        .current_dir(dir)
        .env_remove("FNM_THREADS")
        .output()
        .expect("binary runs")
}

const APPROX: &str = r#"
name = "cli_cos"
kind = "approx_rate"
target = "gaussian(sigma=0.7)"
dim = 1
construction = "mc_cos"
N = [8, 16, 32, 64]
seeds = 2
quadrature = { panels = 16, q = 6 }
output = "results/cli_cos.csv"
gnuplot = true
"#;

#[test]
fn approx_study_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.toml"), APPROX).unwrap();
    let out = fnm(&["approx", "s.toml"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("results/cli_cos.csv")).unwrap();
    assert!(csv.starts_with("study,kind,N,seed,l2_error,hm_error,energy_error,J,nu,wall_ms,status\n"));
    assert_eq!(csv.lines().count(), 9);
    assert!(dir.path().join("results/cli_cos.summary.txt").exists());
    assert!(dir.path().join("results/cli_cos.gp").exists());
    assert!(String::from_utf8_lossy(&out.stdout).contains("slope "));
}

#[test]
fn output_flag_and_thread_variable() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.toml"), APPROX).unwrap();
    let a = fnm(&["approx", "s.toml", "--output", "a.csv"], dir.path());
    assert_eq!(a.status.code(), Some(0));
    let b = Command::new(env!("CARGO_BIN_EXE_fnm"))
        .args(["approx", "s.toml", "--output", "b.csv"])
        .current_dir(dir.path())
        .env("FNM_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(b.status.code(), Some(0));
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    let bad = Command::new(env!("CARGO_BIN_EXE_fnm"))
        .args(["approx", "s.toml"])
        .current_dir(dir.path())
        .env("FNM_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("typo.toml"), format!("{APPROX}\nseedz = 3\n")).unwrap();
    assert_eq!(fnm(&["approx", "typo.toml"], dir.path()).status.code(), Some(2));
    assert_eq!(fnm(&["approx", "missing.toml"], dir.path()).status.code(), Some(2));
    // a solve command given an approximation study
    std::fs::write(dir.path().join("s.toml"), APPROX).unwrap();
    assert_eq!(fnm(&["solve", "s.toml"], dir.path()).status.code(), Some(2));
    let unknown = APPROX.replace("gaussian(sigma=0.7)", "lorentzian(1)");
    std::fs::write(dir.path().join("u.toml"), unknown).unwrap();
    assert_eq!(fnm(&["approx", "u.toml"], dir.path()).status.code(), Some(2));
}

#[test]
fn failed_rows_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = APPROX.replace("construction = \"mc_cos\"", "construction = \"relu_taylor\"\nk = 40");
    std::fs::write(dir.path().join("f.toml"), cfg).unwrap();
    let out = fnm(&["approx", "f.toml"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let csv = std::fs::read_to_string(dir.path().join("results/cli_cos.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",error:invalid_argument")));
}

#[test]
fn solve_and_sweep_commands() {
    let dir = tempfile::tempdir().unwrap();
    let solve = r#"
name = "cli_solve"
kind = "solve_rate"
problem = "poisson1d_neumann"
k = 3
N = [4, 6, 8, 10]
quadrature = { panels = 32, q = 6 }
[train]
max_iters = 5
"#;
    std::fs::write(dir.path().join("solve.toml"), solve).unwrap();
    let out = fnm(&["solve", "solve.toml"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(dir.path().join("cli_solve.csv")).unwrap().lines().count(), 5);

    let sweep = r#"
name = "cli_sweep"
kind = "delta_sweep"
problem = "poisson1d_penalty"
k = 2
N = [8]
deltas = [0.1, 0.01]
quadrature = { panels = 32, q = 6 }
[train]
max_iters = 3
"#;
    std::fs::write(dir.path().join("sweep.toml"), sweep).unwrap();
    let out = fnm(&["sweep", "sweep.toml"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("cli_sweep.csv")).unwrap();
    assert!(csv.contains("cli_sweep@delta=1e-1,delta_sweep,8,0,"));
    assert!(csv.contains("cli_sweep@delta=1e-2,delta_sweep,8,0,"));
}

#[test]
fn check_and_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let out = fnm(&["check"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("PASS bspline_partition_of_unity"));
    assert!(!text.contains("FAIL"));
    let out = fnm(&["show-catalog"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("boxspec") && text.contains("poisson1d_neumann"));
}
