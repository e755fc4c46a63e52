//! Report assembly: per-experiment directories with the config echo, the
//! audited ledger, CSV tables, and a pass/fail summary.

use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;

use super::audit::AuditOutcome;
use super::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Relation::Le => write!(f, "<="),
            Relation::Ge => write!(f, ">="),
        }
    }
}

/// One verified statement of a report.
#[derive(Debug, Clone)]
pub struct CheckRow {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub relation: Relation,
    pub pass: bool,
}

impl CheckRow {
    pub fn le(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self { name: name.into(), lhs, rhs, relation: Relation::Le, pass: lhs <= rhs }
    }

    pub fn ge(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self { name: name.into(), lhs, rhs, relation: Relation::Ge, pass: lhs >= rhs }
    }
}

impl fmt::Display for CheckRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} {} {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.lhs,
            self.relation,
            self.rhs
        )
    }
}

/// One experiment's outcome: named CSV tables plus its checks.
#[derive(Debug, Clone, Default)]
pub struct ExperimentReport {
    pub name: String,
    pub checks: Vec<CheckRow>,
    pub tables: Vec<(String, String)>,
}

impl ExperimentReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), checks: Vec::new(), tables: Vec::new() }
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.pass).count()
    }
}

/// Write the report tree under `out/<name>/`; returns the directory and the
/// number of failed checks. Every artifact cross-references the ledger
/// fingerprint it was produced under.
pub fn emit_report(
    cfg: &ExperimentConfig,
    audit: &AuditOutcome,
    reports: &[ExperimentReport],
    out_root: &Path,
) -> Result<(PathBuf, usize)> {
    audit.guard(cfg)?;
    let dir = out_root.join(&cfg.experiment_name);
    std::fs::create_dir_all(&dir)?;

    std::fs::write(dir.join("config.cfg"), cfg.echo())?;
    let mut ledger = Vec::new();
    audit.write_csv(&mut ledger)?;
    std::fs::write(dir.join("ledger.csv"), ledger)?;

    let mut failures = 0usize;
    let mut summary = String::new();
    summary.push_str(&format!("experiment = {}\n", cfg.experiment_name));
    summary.push_str(&format!("ledger fingerprint = {}\n", audit.fingerprint));
    summary.push_str(&format!("runs = {}\n\n", reports.len()));
    for rep in reports {
        for (fname, content) in &rep.tables {
            std::fs::write(dir.join(fname), content)?;
        }
        summary.push_str(&format!("[{}]\n", rep.name));
        for c in &rep.checks {
            summary.push_str(&format!("{}\n", c));
        }
        failures += rep.failures();
        summary.push('\n');
    }
    let total: usize = reports.iter().map(|r| r.checks.len()).sum();
    summary.push_str(&format!("checks: {} passed, {} failed\n", total - failures, failures));
    let mut f = std::fs::File::create(dir.join("summary.txt"))?;
    f.write_all(summary.as_bytes())?;
    Ok((dir, failures))
}
