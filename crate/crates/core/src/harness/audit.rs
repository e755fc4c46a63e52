//! The assumption audit: measures every constant of the two-scale envelope
//! for each ladder entry and writes the ledger the other experiments must
//! run under.

use std::io::Write;

use crate::coarse_grain::{
    build_macro_operator, center, norm_y_sq, two_scale_lsi_constant, CoarseHamiltonian,
    MacroOperator, MacroProfile, Projection,
};
use crate::error::{Error, Result};
use crate::functionals::ConstantsLedger;
use crate::microscale::{estimate_kappa, sample_equilibrium, KawasakiOperator, SamplerParams};
use crate::potentials::{
    coarse_potential, cramer_transform, DeltaPsi, GridSpec, QuadratureSpec, TabulatedFunction,
};

use super::config::ExperimentConfig;

/// Everything one ladder entry needs, built once and shared by the
/// experiments.
pub struct EntryContext {
    pub n_sites: usize,
    pub n_blocks: usize,
    pub op: KawasakiOperator<f64>,
    pub proj: Projection,
    pub psi_k: TabulatedFunction<f64>,
    pub ham: CoarseHamiltonian<f64>,
    pub abar: MacroOperator<f64>,
    /// initial macroscopic profile (M-cell averages of zeta_0)
    pub eta0: MacroProfile<f64>,
    /// initial microscopic mean vector (N-cell averages of zeta_0)
    pub x0: Vec<f64>,
}

/// Shared tables plus per-entry contexts.
pub struct Prepared {
    pub phi: TabulatedFunction<f64>,
    pub entries: Vec<EntryContext>,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let spec = GridSpec::new(cfg.table_min, cfg.table_max, cfg.table_points)?;
    let phi = cramer_transform(&cfg.potential, &spec, &QuadratureSpec::default())?;
    let mut entries = Vec::with_capacity(cfg.ladder.len());
    for e in &cfg.ladder {
        let k = e.block_size();
        let psi_k = coarse_potential(&cfg.potential, k, &spec)?;
        let ham = match CoarseHamiltonian::new(psi_k.clone(), e.n_sites, e.n_blocks, cfg.mean) {
            Ok(h) => h,
            Err(Error::Precondition(msg)) => {
                // report the smallest block size that certifies convexity
                let mut passing = None;
                for k_try in [1usize, 2, 4, 8, 16, 32, 64, 128] {
                    if let Ok(t) = coarse_potential(&cfg.potential, k_try, &spec) {
                        let (lam, _) = crate::potentials::convexity_bounds(&t);
                        if lam > 0.0 {
                            passing = Some(k_try);
                            break;
                        }
                    }
                }
                return Err(Error::Precondition(format!(
                    "audit failure at K = {}: {}; smallest passing K = {}",
                    k,
                    msg,
                    passing.map_or("none <= 128".to_string(), |v| v.to_string())
                )));
            }
            Err(other) => return Err(other),
        };
        let op = KawasakiOperator::new(e.n_sites)?;
        let proj = Projection::new(e.n_sites, e.n_blocks)?;
        let abar = build_macro_operator(&proj, &op)?;
        let eta0 = MacroProfile::new(
            recentered(cfg.profile_cell_averages(e.n_blocks), cfg.mean),
            cfg.mean,
        )?;
        let x0 = recentered(cfg.profile_cell_averages(e.n_sites), cfg.mean);
        entries.push(EntryContext {
            n_sites: e.n_sites,
            n_blocks: e.n_blocks,
            op,
            proj,
            psi_k,
            ham,
            abar,
            eta0,
            x0,
        });
    }
    Ok(Prepared { phi, entries })
}

fn recentered(mut v: Vec<f64>, mean: f64) -> Vec<f64> {
    let avg = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x = *x - avg + mean;
    }
    v
}

/// Ledger of one ladder entry together with its provenance.
#[derive(Debug, Clone)]
pub struct AuditEntry {
    pub n_sites: usize,
    pub n_blocks: usize,
    pub ledger: ConstantsLedger<f64>,
    pub rho_hat: f64,
    pub rho_is_fallback: bool,
}

#[derive(Debug, Clone)]
pub struct AuditOutcome {
    /// config fingerprint the ledger was produced under
    pub fingerprint: String,
    pub entries: Vec<AuditEntry>,
}

impl AuditOutcome {
    /// Reports must run under the ledger of their own configuration.
    pub fn guard(&self, cfg: &ExperimentConfig) -> Result<()> {
        if self.fingerprint != cfg.fingerprint() {
            return Err(Error::Consistency(format!(
                "stale ledger: audited fingerprint {} != config fingerprint {}",
                self.fingerprint,
                cfg.fingerprint()
            )));
        }
        Ok(())
    }

    pub fn entry(&self, n_sites: usize, n_blocks: usize) -> Result<&AuditEntry> {
        self.entries
            .iter()
            .find(|e| e.n_sites == n_sites && e.n_blocks == n_blocks)
            .ok_or_else(|| {
                Error::Domain(format!("no audited entry for N = {}, M = {}", n_sites, n_blocks))
            })
    }

    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "# ledger fingerprint={}", self.fingerprint)?;
        writeln!(
            w,
            "N,M,rho,lambda,Lambda,kappa,tau,alpha,beta,gamma,c1,c2,rho_hat,rho_is_fallback"
        )?;
        for e in &self.entries {
            let l = &e.ledger;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                e.n_sites,
                e.n_blocks,
                l.rho,
                l.lambda,
                l.big_lambda,
                l.kappa,
                l.tau,
                l.alpha,
                l.beta,
                l.gamma,
                l.c1,
                l.c2,
                e.rho_hat,
                e.rho_is_fallback
            )?;
        }
        Ok(())
    }
}

/// Largest generalized Rayleigh quotient
/// M^2 |(id - N P^t P) x|^2 / <x, A x> : the exact supremum by power
/// iteration on A^{-1/2} (id - Pi) A^{-1/2}, cross-checked against Fourier
/// modes and random probes.
pub fn gamma_constant(
    op: &KawasakiOperator<f64>,
    proj: &Projection,
    n_probes: usize,
    seed: u64,
) -> f64 {
    use rand::{Rng, SeedableRng};
    let n = op.n_sites();
    let m = proj.n_blocks() as f64;
    let mut buf = op.make_buf();

    let fluct = |x: &[f64]| -> Vec<f64> {
        let lifted = proj.lift(&proj.project(x).unwrap()).unwrap();
        x.iter().zip(lifted.iter()).map(|(a, b)| a - b).collect()
    };

    // exact supremum: lambda_max of A^{-1/2} (id - Pi) A^{-1/2}
    let mut sup = {
        let apply = |v: &[f64]| -> Vec<f64> {
            let mut w = op.make_buf();
            let half = op.apply_spectral_fn(v, |l| 1.0 / l.sqrt(), &mut w);
            let mid = fluct(&half);
            op.apply_spectral_fn(&mid, |l| 1.0 / l.sqrt(), &mut w)
        };
        crate::linalg::power_iteration(n, apply, 300).max(0.0)
    };

    // Fourier-mode quotients (the lowest intra-block frequency attains
    // M^2/lambda_M on exact length-resonances)
    for k in 1..n {
        let angle = std::f64::consts::TAU * k as f64 / n as f64;
        for phase in [0.0, 0.25 * std::f64::consts::TAU] {
            let x: Vec<f64> = (0..n).map(|j| (angle * j as f64 + phase).sin()).collect();
            let x = center(&x);
            let den: f64 = op.apply(&x).iter().zip(x.iter()).map(|(a, b)| a * b).sum();
            if den <= 0.0 {
                continue;
            }
            let f = fluct(&x);
            let num: f64 = f.iter().map(|v| v * v).sum();
            sup = sup.max(num / den);
        }
    }

    // random mean-zero probes
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_probes {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = center(&x);
        let den: f64 = op.apply(&x).iter().zip(x.iter()).map(|(a, b)| a * b).sum();
        if den <= 0.0 {
            continue;
        }
        let f = fluct(&x);
        let num: f64 = f.iter().map(|v| v * v).sum();
        sup = sup.max(num / den);
    }
    drop(buf.buf.drain(..));
    m * m * sup
}

/// Initial-entropy constant C1 for the local-Gibbs start: an upper bound on
/// (1/N) Ent_mu(G^eta0 mu) assembled from the Laplace brackets.
fn c1_bound(ham: &CoarseHamiltonian<f64>, eta0: &MacroProfile<f64>) -> Result<f64> {
    let n = ham.n_sites() as f64;
    let m = ham.n_blocks() as f64;
    let g = ham.grad(eta0)?;
    let grad_norm = norm_y_sq(&g).sqrt();
    let log_gap = if ham.n_blocks() > 1 {
        let two_pi_m = std::f64::consts::TAU * m;
        (m - 1.0) / (2.0 * n)
            * ((two_pi_m / (ham.lambda * n)).ln() - (two_pi_m / (ham.big_lambda * n)).ln())
    } else {
        0.0
    };
    let h0_eta = ham.energy0(eta0.values())?;
    let h0_min = ham.psi_k().eval(ham.mean())?;
    Ok((h0_eta - h0_min) + log_gap + grad_norm * (m / (ham.lambda * n)).sqrt())
}

/// Run the full assumption audit over the ladder.
pub fn run_assumption_audit(cfg: &ExperimentConfig, prepared: &Prepared) -> Result<AuditOutcome> {
    let mut entries = Vec::with_capacity(prepared.entries.len());
    for ctx in &prepared.entries {
        let n = ctx.n_sites;
        let m = ctx.n_blocks;
        let k = n / m;
        let kappa = estimate_kappa::<f64>(&cfg.potential, n, k, 16, cfg.seed ^ 0xa1)?;
        let tau = ctx.op.min_nonzero_eigenvalue();
        let lambda = ctx.ham.lambda;
        let big_lambda = ctx.ham.big_lambda;

        // alpha: equilibrium second moment per site
        let alpha = match cfg.potential.delta {
            DeltaPsi::Zero => 1.0 - 1.0 / n as f64 + cfg.mean * cfg.mean,
            _ => {
                let params =
                    SamplerParams { burn_in_sweeps: 200, ..Default::default() };
                let (e, _) = sample_equilibrium(
                    &cfg.potential,
                    n,
                    cfg.mean,
                    256,
                    cfg.seed ^ 0xa2,
                    &params,
                )?;
                let (mean, se) =
                    e.observable(|row| row.iter().map(|v| v * v).sum::<f64>() / row.len() as f64);
                mean + 3.0 * se
            }
        };

        // beta: -inf H-bar over the tabulated window, conservative side of
        // the partition bracket
        let (lo_z, _) = ctx.ham.log_partition_bracket();
        let (min_psi, _) = {
            let d = ctx.psi_k.values();
            let interior = &d[2..d.len() - 2];
            (
                interior.iter().copied().fold(f64::INFINITY, f64::min),
                interior.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )
        };
        let beta = (-(min_psi + lo_z)).max(0.0);

        let gamma = gamma_constant(&ctx.op, &ctx.proj, 16, cfg.seed ^ 0xa3);

        // rho: Bakry-Emery floor of the conditionals, else the configured
        // fallback
        let floor = cfg.potential.hessian_floor();
        let (rho, rho_is_fallback) =
            if floor > 0.0 { (floor, false) } else { (cfg.rho_fallback, true) };

        let c1 = c1_bound(&ctx.ham, &ctx.eta0)?;
        let c2 = {
            let (_, hi_z) = ctx.ham.log_partition_bracket();
            (ctx.ham.energy0(ctx.eta0.values())? + hi_z).max(0.0)
        };

        let ledger = ConstantsLedger {
            rho,
            lambda,
            big_lambda,
            kappa,
            tau,
            alpha,
            beta,
            gamma,
            c1,
            c2,
        };
        ledger.validate()?;
        let rho_hat = two_scale_lsi_constant(rho, lambda, kappa)?;
        entries.push(AuditEntry {
            n_sites: n,
            n_blocks: m,
            ledger,
            rho_hat,
            rho_is_fallback,
        });
    }
    Ok(AuditOutcome { fingerprint: cfg.fingerprint(), entries })
}
