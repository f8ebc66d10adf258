use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fnm::energy::problem_catalog;
use fnm::study::{run_study, threads_from_env, with_threads, StudyConfig, StudyKind, StudyReport};
use fnm::target::catalog;
use fnm::FnmError;

const EXIT_CONFIG: u8 = 2;
const EXIT_ROW_FAILED: u8 = 3;
const EXIT_CHECK_FAILED: u8 = 4;

#[derive(Parser)]
#[command(name = "fnm", version, about = "Shallow-network approximation and energy-minimization studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an `approx_rate` study.
    Approx(StudyArgs),
    /// Run a `solve_rate` study.
    Solve(StudyArgs),
    /// Run a `delta_sweep` study.
    Sweep(StudyArgs),
    /// Run the invariant suite.
    Check {
        /// Optional `invariant_suite` config (for its name and output path).
        config: Option<PathBuf>,
    },
    /// List catalog targets and problems.
    ShowCatalog,
}

#[derive(clap::Args)]
struct StudyArgs {
    /// Study config (TOML).
    config: PathBuf,
    /// CSV path; overrides the config's `output`.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("fnm: {e}");
            ExitCode::from(match e {
                FnmError::Config(_) | FnmError::Parse(_) => EXIT_CONFIG,
                _ => 1,
            })
        }
    }
}

fn run(cli: Cli) -> Result<u8, FnmError> {
    let threads = threads_from_env()?;
    match cli.command {
        Command::Approx(a) => study(&a, StudyKind::ApproxRate, threads),
        Command::Solve(a) => study(&a, StudyKind::SolveRate, threads),
        Command::Sweep(a) => study(&a, StudyKind::DeltaSweep, threads),
        Command::Check { config } => {
            let cfg = match config {
                Some(p) => StudyConfig::load(&p)?,
                None => StudyConfig::from_toml("name = \"check\"\nkind = \"invariant_suite\"\n")?,
            };
            expect_kind(&cfg, StudyKind::InvariantSuite)?;
            let report = with_threads(threads, || run_study(&cfg))??;
            print!("{}", report.summary());
            if let Some(out) = &cfg.output {
                report.write(Path::new(out))?;
            }
            Ok(if report.any_check_failed() { EXIT_CHECK_FAILED } else { 0 })
        }
        Command::ShowCatalog => {
            println!("targets:");
            for (name, desc) in catalog() {
                println!("  {name:40} {desc}");
            }
            println!("problems:");
            for (name, desc) in problem_catalog() {
                println!("  {name:24} {desc}");
            }
            Ok(0)
        }
    }
}

fn expect_kind(cfg: &StudyConfig, kind: StudyKind) -> Result<(), FnmError> {
    if cfg.kind != kind {
        return Err(FnmError::Config(format!(
            "config is a {} study; this command runs {}",
            cfg.kind.name(),
            kind.name()
        )));
    }
    Ok(())
}

fn study(args: &StudyArgs, kind: StudyKind, threads: Option<usize>) -> Result<u8, FnmError> {
    let cfg = StudyConfig::load(&args.config)?;
    expect_kind(&cfg, kind)?;
    let report: StudyReport = with_threads(threads, || run_study(&cfg))??;
    let path = args
        .output
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", cfg.name)));
    for p in report.write(&path)? {
        eprintln!("wrote {}", p.display());
    }
    print!("{}", report.summary());
    Ok(if report.any_row_failed() { EXIT_ROW_FAILED } else { 0 })
}
