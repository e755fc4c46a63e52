//! Experiment harness: configuration, the assumption audit, the named
//! experiments, and report emission.

pub mod audit;
pub mod config;
pub mod experiments;
pub mod report;

pub use audit::{gamma_constant, prepare, run_assumption_audit, AuditOutcome, Prepared};
pub use config::{ExperimentConfig, LadderEntry, ProfileShape};
pub use experiments::{
    grid_crosscheck, output_times, run_entropy_convergence, run_hydrodynamic_limit,
    run_local_gibbs, run_macro_checks, run_micro_checks, run_tabulate,
};
pub use report::{emit_report, CheckRow, ExperimentReport, Relation};

use crate::error::Result;
use crate::potentials::DeltaPsi;

/// Run every experiment of the `all` pipeline and emit the report tree;
/// returns the number of failed checks.
pub fn run_all(cfg: &ExperimentConfig) -> Result<usize> {
    let prepared = prepare(cfg)?;
    let audit = run_assumption_audit(cfg, &prepared)?;
    let mut reports = Vec::new();
    reports.push(run_tabulate(cfg, &prepared, &audit)?);
    reports.push(run_micro_checks(cfg, &prepared, &audit)?);
    reports.push(run_macro_checks(cfg, &prepared, &audit)?);
    let (_, hydro) = run_hydrodynamic_limit(cfg, &prepared, &audit)?;
    reports.push(hydro);
    let (_, gibbs) = run_local_gibbs(cfg, &prepared, &audit)?;
    reports.push(gibbs);
    if matches!(cfg.potential.delta, DeltaPsi::Zero) {
        let (_, entropy) = run_entropy_convergence(cfg, &prepared, &audit)?;
        reports.push(entropy);
    }
    let (_, failures) = emit_report(cfg, &audit, &reports, &cfg.out_dir)?;
    Ok(failures)
}
