//! Binary ensemble snapshots: one text header line of eight fields
//! (N, m, R, seed, t, dt, potential tag, version) followed by the replica
//! array as little-endian f64.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::MicroEnsemble;

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMeta {
    pub n_sites: usize,
    pub mean: f64,
    pub n_replicas: usize,
    pub seed: u64,
    pub time: f64,
    pub dt: f64,
    pub potential_tag: String,
    pub version: u32,
}

pub fn write_snapshot<T: Scalar>(
    w: &mut impl Write,
    e: &MicroEnsemble<T>,
    dt: T,
    potential_tag: &str,
) -> Result<()> {
    writeln!(
        w,
        "N={} m={} R={} seed={} t={} dt={} potential={} version={}",
        e.n_sites(),
        e.mean().to_f64().unwrap(),
        e.n_replicas(),
        e.rng_seed(),
        e.time().to_f64().unwrap(),
        dt.to_f64().unwrap(),
        potential_tag,
        SNAPSHOT_VERSION
    )?;
    for v in e.replicas_flat() {
        w.write_all(&v.to_f64().unwrap().to_le_bytes())?;
    }
    Ok(())
}

pub fn read_snapshot(r: &mut impl BufRead) -> Result<(MicroEnsemble<f64>, SnapshotMeta)> {
    let mut header = String::new();
    r.read_line(&mut header)?;
    let mut fields = std::collections::HashMap::new();
    for part in header.trim().split_whitespace() {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("malformed snapshot header field '{}'", part)))?;
        fields.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| -> Result<String> {
        fields
            .get(k)
            .cloned()
            .ok_or_else(|| Error::Config(format!("snapshot header missing field '{}'", k)))
    };
    let parse_err = |k: &str| Error::Config(format!("snapshot header field '{}' unparsable", k));
    let meta = SnapshotMeta {
        n_sites: get("N")?.parse().map_err(|_| parse_err("N"))?,
        mean: get("m")?.parse().map_err(|_| parse_err("m"))?,
        n_replicas: get("R")?.parse().map_err(|_| parse_err("R"))?,
        seed: get("seed")?.parse().map_err(|_| parse_err("seed"))?,
        time: get("t")?.parse().map_err(|_| parse_err("t"))?,
        dt: get("dt")?.parse().map_err(|_| parse_err("dt"))?,
        potential_tag: get("potential")?,
        version: get("version")?.parse().map_err(|_| parse_err("version"))?,
    };
    if meta.version != SNAPSHOT_VERSION {
        return Err(Error::Config(format!("unsupported snapshot version {}", meta.version)));
    }
    let count = meta.n_sites * meta.n_replicas;
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    let replicas: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let e = MicroEnsemble::from_replicas(meta.n_sites, meta.mean, replicas, meta.seed)?;
    Ok((e, meta))
}
