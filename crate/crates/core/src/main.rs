use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use teichlab::experiment::{exit_code, load_scene, run_experiment, ExperimentConfig, ExperimentKind};

/// Batch runner for sewing, Schiffer variation and fiber experiments.
///
/// Exit status: 0 all assertions pass, 1 an assertion failed, 2 parse or
/// input failure, 3 solver failure.
#[derive(Parser, Debug)]
#[command(name = "teichlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid resolution N (a power of two).
    #[arg(long, global = true)]
    resolution: Option<usize>,
    /// Solver tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Sew caps onto the scene's bordered sphere.
    Sew,
    /// Schiffer coordinate and its Cauchy-Riemann residual over an ε list.
    SchifferSweep,
    /// Recover riggings through the fiber maps.
    FiberRoundtrip,
    /// Section property and transversality of the product chart.
    SectionCheck,
    /// Refinement study of a Cauchy-Riemann residual.
    Holomorphy,
    /// Schwarz-lemma bounds over a seeded corpus.
    BoundsSuite,
}

impl Command {
    fn kind(self) -> ExperimentKind {
        match self {
            Command::Sew => ExperimentKind::Sew,
            Command::SchifferSweep => ExperimentKind::SchifferSweep,
            Command::FiberRoundtrip => ExperimentKind::FiberRoundtrip,
            Command::SectionCheck => ExperimentKind::SectionCheck,
            Command::Holomorphy => ExperimentKind::Holomorphy,
            Command::BoundsSuite => ExperimentKind::BoundsSuite,
        }
    }
}

fn run(cli: &Cli) -> teichlab::Result<bool> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(j) = cli.jobs {
        cfg.jobs = Some(j);
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.resolution {
        cfg.resolution = n;
        cfg.resolutions = vec![n];
    }
    if let Some(t) = cli.tol {
        cfg.tol = t;
    }
    let kind = cli.command.kind();
    let scene = load_scene(&cfg)?;
    let report = run_experiment(kind, &cfg, &scene)?;
    report.write(&cfg, &cfg.out)?;
    for a in &report.assertions {
        let verdict = if a.passed { "PASS" } else { "FAIL" };
        let rel = serde_json::to_value(a.relation).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        println!("{verdict} {}: {:e} {rel} {:e}", a.name, a.measured, a.threshold);
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("teichlab: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
