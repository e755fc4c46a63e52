//! Experiment runner: wires the library experiments into CLI subcommands
//! with config, seeding, and CSV/report output.
//!
//! Exit codes: 0 = all acceptance checks passed, 2 = some checks failed,
//! 1 = execution error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use twoscale::harness::{
    emit_report, prepare, run_assumption_audit, run_entropy_convergence, run_hydrodynamic_limit,
    run_local_gibbs, run_macro_checks, run_micro_checks, run_tabulate, ExperimentConfig,
    ExperimentReport,
};
use twoscale::potentials::DeltaPsi;

#[derive(Parser)]
#[command(
    name = "twoscale",
    about = "Two-scale laboratory for conservative Ginzburg-Landau spin dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file (key = value sections); defaults are used when
    /// omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for replica parallelism (default: all cores). Results
    /// are bit-identical for any thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Measure the envelope constants and write the ledger.
    Audit,
    /// Tabulate phi and the psi_K family; verify the C^2 trend.
    Tabulate,
    /// Microscale structure checks and the N = 2 grid cross-check.
    Micro,
    /// Macroscopic gradient-flow diagnostics.
    Macro,
    /// Hydrodynamic-limit experiment (H^-1 distances, Theta vs Xi).
    Hydro,
    /// Local Gibbs behavior (moment and entropy channels).
    Gibbs,
    /// Entropy convergence along the ladder (quadratic potential).
    Entropy,
    /// Everything above in sequence.
    All,
}

fn run(cli: &Cli) -> twoscale::Result<usize> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }

    let prepared = prepare(&cfg)?;
    let audit = run_assumption_audit(&cfg, &prepared)?;
    let mut reports: Vec<ExperimentReport> = Vec::new();
    let want = |c: Command| cli.command == c || cli.command == Command::All;

    if want(Command::Tabulate) {
        reports.push(run_tabulate(&cfg, &prepared, &audit)?);
    }
    if want(Command::Micro) {
        reports.push(run_micro_checks(&cfg, &prepared, &audit)?);
    }
    if want(Command::Macro) {
        reports.push(run_macro_checks(&cfg, &prepared, &audit)?);
    }
    if want(Command::Hydro) {
        let (_, rep) = run_hydrodynamic_limit(&cfg, &prepared, &audit)?;
        reports.push(rep);
    }
    if want(Command::Gibbs) {
        let (_, rep) = run_local_gibbs(&cfg, &prepared, &audit)?;
        reports.push(rep);
    }
    if want(Command::Entropy) {
        if matches!(cfg.potential.delta, DeltaPsi::Zero) {
            let (_, rep) = run_entropy_convergence(&cfg, &prepared, &audit)?;
            reports.push(rep);
        } else if cli.command == Command::Entropy {
            return Err(twoscale::Error::Unsupported(
                "the entropy experiment needs the quadratic potential (family = zero)".into(),
            ));
        }
    }

    let (dir, failures) = emit_report(&cfg, &audit, &reports, &cfg.out_dir)?;
    eprintln!(
        "report written to {} ({} checks, {} failed)",
        dir.display(),
        reports.iter().map(|r| r.checks.len()).sum::<usize>(),
        failures
    );
    Ok(failures)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.threads {
        Some(n) => {
            let pool = match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: cannot build thread pool: {}", e);
                    return ExitCode::from(1);
                }
            };
            pool.install(|| run(&cli))
        }
        None => run(&cli),
    };
    match outcome {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(1)
        }
    }
}
