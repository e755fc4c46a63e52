//! Experiment configuration: one text file of `key = value` lines under
//! `[section]` headers, arrays as comma lists. Unknown keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::potentials::{DeltaPsi, Potential};

/// One rung of the scale ladder: N sites in M blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LadderEntry {
    pub n_sites: usize,
    pub n_blocks: usize,
}

impl LadderEntry {
    pub fn block_size(&self) -> usize {
        self.n_sites / self.n_blocks
    }
}

/// Initial hydrodynamic profile zeta_0(theta) = mean + amplitude * shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileShape {
    Zero,
    /// sin(2 pi theta)
    Sin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub potential: Potential,
    pub ladder: Vec<LadderEntry>,
    pub mean: f64,
    pub t_horizon: f64,
    pub seed: u64,
    pub replicas: usize,
    pub out_dir: PathBuf,
    pub experiment_name: String,
    /// splitting-integrator step for the ensemble evolution
    pub dt_sde: f64,
    /// number of stored output times along [0, T]
    pub n_outputs: usize,
    pub burn_in_sweeps: usize,
    pub profile_shape: ProfileShape,
    pub profile_amplitude: f64,
    /// tabulation window for phi and psi_K
    pub table_min: f64,
    pub table_max: f64,
    pub table_points: usize,
    /// hydrodynamic solver resolution
    pub hydro_cells: usize,
    /// fallback LSI constant of the conditional measures when the
    /// Bakry-Emery floor is not positive
    pub rho_fallback: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            potential: Potential::cos(0.2),
            ladder: vec![
                LadderEntry { n_sites: 64, n_blocks: 8 },
                LadderEntry { n_sites: 256, n_blocks: 16 },
                LadderEntry { n_sites: 1024, n_blocks: 32 },
            ],
            mean: 0.0,
            t_horizon: 0.5,
            seed: 20240601,
            replicas: 4096,
            out_dir: PathBuf::from("out"),
            experiment_name: "run".into(),
            dt_sde: 5e-4,
            n_outputs: 20,
            burn_in_sweeps: 1000,
            profile_shape: ProfileShape::Sin,
            profile_amplitude: 0.5,
            table_min: -2.5,
            table_max: 2.5,
            table_points: 501,
            hydro_cells: 1024,
            rho_fallback: 0.5,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = line[1..line.len() - 1].trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            cfg.apply(&section, key, value)
                .map_err(|e| Error::Config(format!("line {}: {}", lineno + 1, e)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str) -> std::result::Result<(), String> {
        let parse_f64 = |v: &str| v.parse::<f64>().map_err(|_| format!("bad number '{}'", v));
        let parse_usize = |v: &str| v.parse::<usize>().map_err(|_| format!("bad integer '{}'", v));
        match (section, key) {
            ("potential", "family") => match value {
                "zero" | "quadratic" => self.potential = Potential::quadratic(),
                "cos" => {
                    let amp = match &self.potential.delta {
                        DeltaPsi::Cos { amplitude } => *amplitude,
                        _ => 0.2,
                    };
                    self.potential = Potential::cos(amp);
                }
                other => return Err(format!("unknown potential family '{}'", other)),
            },
            ("potential", "amplitude") => {
                let amp = parse_f64(value)?;
                if matches!(self.potential.delta, DeltaPsi::Cos { .. }) {
                    self.potential = Potential::cos(amp);
                } else if amp != 0.0 {
                    return Err("amplitude given for the zero family".into());
                }
            }
            ("ladder", "entries") => {
                let mut entries = Vec::new();
                for part in value.split(',') {
                    let part = part.trim();
                    let (n, m) = part
                        .split_once(':')
                        .ok_or_else(|| format!("ladder entry '{}' not of the form N:M", part))?;
                    entries.push(LadderEntry {
                        n_sites: parse_usize(n.trim())?,
                        n_blocks: parse_usize(m.trim())?,
                    });
                }
                self.ladder = entries;
            }
            ("run", "mean") => self.mean = parse_f64(value)?,
            ("run", "t_horizon") => self.t_horizon = parse_f64(value)?,
            ("run", "seed") => {
                self.seed = value.parse::<u64>().map_err(|_| format!("bad seed '{}'", value))?
            }
            ("run", "replicas") => self.replicas = parse_usize(value)?,
            ("run", "out") => self.out_dir = PathBuf::from(value),
            ("run", "name") => self.experiment_name = value.to_string(),
            ("run", "dt_sde") => self.dt_sde = parse_f64(value)?,
            ("run", "n_outputs") => self.n_outputs = parse_usize(value)?,
            ("run", "burn_in_sweeps") => self.burn_in_sweeps = parse_usize(value)?,
            ("run", "rho_fallback") => self.rho_fallback = parse_f64(value)?,
            ("profile", "shape") => match value {
                "zero" => self.profile_shape = ProfileShape::Zero,
                "sin" => self.profile_shape = ProfileShape::Sin,
                other => return Err(format!("unknown profile shape '{}'", other)),
            },
            ("profile", "amplitude") => self.profile_amplitude = parse_f64(value)?,
            ("tables", "m_min") => self.table_min = parse_f64(value)?,
            ("tables", "m_max") => self.table_max = parse_f64(value)?,
            ("tables", "n_points") => self.table_points = parse_usize(value)?,
            ("hydro", "cells") => self.hydro_cells = parse_usize(value)?,
            _ => return Err(format!("unknown key '{}' in section '[{}]'", key, section)),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.ladder.is_empty() {
            return Err(Error::Config("empty ladder".into()));
        }
        for e in &self.ladder {
            if e.n_blocks == 0 || e.n_sites % e.n_blocks != 0 {
                return Err(Error::Config(format!(
                    "ladder entry N = {}, M = {}: N mod M != 0",
                    e.n_sites, e.n_blocks
                )));
            }
            if e.n_sites < 3 {
                return Err(Error::Config("ladder entries need N >= 3".into()));
            }
        }
        if !(self.t_horizon > 0.0) {
            return Err(Error::Config("t_horizon must be positive".into()));
        }
        if self.replicas < 1 {
            return Err(Error::Config("need at least one replica".into()));
        }
        if !(self.table_min < self.table_max) || self.table_points < 16 {
            return Err(Error::Config("bad table window".into()));
        }
        Ok(())
    }

    /// zeta_0 evaluated by exact cell averages over `cells` torus cells.
    pub fn profile_cell_averages(&self, cells: usize) -> Vec<f64> {
        let h = 1.0 / cells as f64;
        (0..cells)
            .map(|i| {
                let a = i as f64 * h;
                let b = a + h;
                let shape = match self.profile_shape {
                    ProfileShape::Zero => 0.0,
                    ProfileShape::Sin => {
                        // average of sin(2 pi theta) over [a, b]
                        ((std::f64::consts::TAU * a).cos() - (std::f64::consts::TAU * b).cos())
                            / (std::f64::consts::TAU * h)
                    }
                };
                self.mean + self.profile_amplitude * shape
            })
            .collect()
    }

    /// Canonical text echo (re-parseable, deterministic ordering).
    pub fn echo(&self) -> String {
        let mut s = String::new();
        s.push_str("[potential]\n");
        match &self.potential.delta {
            DeltaPsi::Zero => s.push_str("family = zero\n"),
            DeltaPsi::Cos { amplitude } => {
                s.push_str("family = cos\n");
                s.push_str(&format!("amplitude = {}\n", amplitude));
            }
        }
        s.push_str("\n[ladder]\nentries = ");
        let entries: Vec<String> = self
            .ladder
            .iter()
            .map(|e| format!("{}:{}", e.n_sites, e.n_blocks))
            .collect();
        s.push_str(&entries.join(", "));
        s.push('\n');
        s.push_str("\n[run]\n");
        s.push_str(&format!("mean = {}\n", self.mean));
        s.push_str(&format!("t_horizon = {}\n", self.t_horizon));
        s.push_str(&format!("seed = {}\n", self.seed));
        s.push_str(&format!("replicas = {}\n", self.replicas));
        s.push_str(&format!("out = {}\n", self.out_dir.display()));
        s.push_str(&format!("name = {}\n", self.experiment_name));
        s.push_str(&format!("dt_sde = {}\n", self.dt_sde));
        s.push_str(&format!("n_outputs = {}\n", self.n_outputs));
        s.push_str(&format!("burn_in_sweeps = {}\n", self.burn_in_sweeps));
        s.push_str(&format!("rho_fallback = {}\n", self.rho_fallback));
        s.push_str("\n[profile]\n");
        s.push_str(&format!(
            "shape = {}\n",
            match self.profile_shape {
                ProfileShape::Zero => "zero",
                ProfileShape::Sin => "sin",
            }
        ));
        s.push_str(&format!("amplitude = {}\n", self.profile_amplitude));
        s.push_str("\n[tables]\n");
        s.push_str(&format!("m_min = {}\n", self.table_min));
        s.push_str(&format!("m_max = {}\n", self.table_max));
        s.push_str(&format!("n_points = {}\n", self.table_points));
        s.push_str("\n[hydro]\n");
        s.push_str(&format!("cells = {}\n", self.hydro_cells));
        s
    }

    /// Stable fingerprint of everything that affects results (not the
    /// output path), used to tie reports to the audit ledger they were
    /// produced under.
    pub fn fingerprint(&self) -> String {
        let mut canon = BTreeMap::new();
        canon.insert("potential", self.potential.tag());
        canon.insert(
            "ladder",
            self.ladder
                .iter()
                .map(|e| format!("{}:{}", e.n_sites, e.n_blocks))
                .collect::<Vec<_>>()
                .join(","),
        );
        canon.insert("mean", format!("{}", self.mean));
        canon.insert("t", format!("{}", self.t_horizon));
        canon.insert("seed", format!("{}", self.seed));
        canon.insert("replicas", format!("{}", self.replicas));
        canon.insert("dt_sde", format!("{}", self.dt_sde));
        canon.insert("n_outputs", format!("{}", self.n_outputs));
        canon.insert("burn_in", format!("{}", self.burn_in_sweeps));
        canon.insert(
            "profile",
            format!(
                "{:?}:{}",
                self.profile_shape, self.profile_amplitude
            ),
        );
        canon.insert(
            "tables",
            format!("{}:{}:{}", self.table_min, self.table_max, self.table_points),
        );
        canon.insert("hydro_cells", format!("{}", self.hydro_cells));
        canon.insert("rho_fallback", format!("{}", self.rho_fallback));
        // FNV-1a over the canonical serialization
        let mut hash: u64 = 0xcbf29ce484222325;
        for (k, v) in &canon {
            for b in k.bytes().chain("=".bytes()).chain(v.bytes()).chain(";".bytes()) {
                hash ^= b as u64;
                hash = hash.wrapping_mul(0x100000001b3);
            }
        }
        format!("{:016x}", hash)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_roundtrip() {
        let text = "\
[potential]
family = cos
amplitude = 0.3

[ladder]
entries = 16:4, 64:8   # two rungs

[run]
mean = 0.1
t_horizon = 0.25
seed = 7
replicas = 128
out = /tmp/x
name = demo
[profile]
shape = sin
amplitude = 0.4
[hydro]
cells = 256
";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.potential, Potential::cos(0.3));
        assert_eq!(cfg.ladder.len(), 2);
        assert_eq!(cfg.ladder[1], LadderEntry { n_sites: 64, n_blocks: 8 });
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.hydro_cells, 256);
        // echo reparses to the same config
        let back = ExperimentConfig::parse(&cfg.echo()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.fingerprint(), cfg.fingerprint());
    }

    #[test]
    fn rejects_unknown_key() {
        assert!(ExperimentConfig::parse("[run]\nbogus = 1\n").is_err());
    }

    #[test]
    fn rejects_bad_ladder() {
        assert!(ExperimentConfig::parse("[ladder]\nentries = 10:3\n").is_err());
    }

    #[test]
    fn fingerprint_tracks_physics_not_paths() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.out_dir = PathBuf::from("elsewhere");
        assert_eq!(a.fingerprint(), b.fingerprint());
        let mut c = a.clone();
        c.seed += 1;
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn cell_averages_have_exact_mean() {
        let cfg = ExperimentConfig::default();
        let cells = cfg.profile_cell_averages(64);
        let mean = cells.iter().sum::<f64>() / 64.0;
        assert!((mean - cfg.mean).abs() < 1e-12);
    }
}
