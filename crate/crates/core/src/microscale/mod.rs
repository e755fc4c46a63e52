//! Microscopic scale: the spin state space X_{N,m}, the canonical (mean-
//! constrained) Gibbs ensemble, Kawasaki SDE dynamics, the two-scale
//! interaction constant kappa, and the Theta distance functional.

mod fokker_planck;
mod operator;
mod snapshot;

pub use fokker_planck::{Diffusion, FokkerPlanck, FpFrame, GridDensity};
pub use operator::KawasakiOperator;
pub use snapshot::{read_snapshot, write_snapshot, SnapshotMeta};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::scalar::{RandScalar, Scalar};

/// R replicas of N spins on the hyperplane X_{N,m} = { mean(x) = m },
/// each replica carrying its own deterministic RNG stream
/// (seeded seed XOR replica index), so results do not depend on the
/// number of worker threads.
#[derive(Debug, Clone)]
pub struct MicroEnsemble<T> {
    n_sites: usize,
    n_replicas: usize,
    mean: T,
    time: T,
    rng_seed: u64,
    replicas: Vec<T>,
    rngs: Vec<ChaCha8Rng>,
}

impl<T: Scalar> MicroEnsemble<T> {
    pub fn from_replicas(n_sites: usize, mean: T, replicas: Vec<T>, rng_seed: u64) -> Result<Self> {
        if n_sites == 0 || replicas.is_empty() || replicas.len() % n_sites != 0 {
            return Err(Error::Domain("replica array not a multiple of N".into()));
        }
        let n_replicas = replicas.len() / n_sites;
        let e = Self {
            n_sites,
            n_replicas,
            mean,
            time: T::zero(),
            rng_seed,
            replicas,
            rngs: replica_streams(rng_seed, n_replicas),
        };
        e.check_means()?;
        Ok(e)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_replicas(&self) -> usize {
        self.n_replicas
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn replica(&self, r: usize) -> &[T] {
        &self.replicas[r * self.n_sites..(r + 1) * self.n_sites]
    }

    pub fn replicas_flat(&self) -> &[T] {
        &self.replicas
    }

    /// Verify the hyperplane constraint |mean(row) - m| <= 1e-10 on every row.
    pub fn check_means(&self) -> Result<()> {
        let tol = T::of(1e-10) * (T::one() + self.mean.abs());
        for r in 0..self.n_replicas {
            let row = self.replica(r);
            let mean = row.iter().copied().sum::<T>() / T::from_usize(self.n_sites).unwrap();
            if (mean - self.mean).abs() > tol {
                return Err(Error::Consistency(format!(
                    "replica {} drifted off the hyperplane: mean {} vs {}",
                    r, mean, self.mean
                )));
            }
        }
        Ok(())
    }

    /// Monte Carlo average and standard error of a per-replica observable.
    pub fn observable<F>(&self, f: F) -> (T, T)
    where
        F: Fn(&[T]) -> T + Sync,
        T: Send + Sync,
    {
        let vals: Vec<T> = (0..self.n_replicas).map(|r| f(self.replica(r))).collect();
        mean_stderr(&vals)
    }
}

pub(crate) fn mean_stderr<T: Scalar>(vals: &[T]) -> (T, T) {
    let n = T::from_usize(vals.len()).unwrap();
    let mean = vals.iter().copied().sum::<T>() / n;
    if vals.len() < 2 {
        return (mean, T::zero());
    }
    let var = vals.iter().map(|v| (*v - mean) * (*v - mean)).sum::<T>()
        / (n - T::one());
    (mean, (var / n).sqrt())
}

fn replica_streams(seed: u64, n_replicas: usize) -> Vec<ChaCha8Rng> {
    (0..n_replicas)
        .map(|r| ChaCha8Rng::seed_from_u64(seed ^ (r as u64)))
        .collect()
}

/// Metropolis parameters for the mean-preserving pairwise exchange sampler.
#[derive(Debug, Clone, Copy)]
pub struct SamplerParams {
    /// Uniform proposal half-width for the exchanged amount.
    pub proposal_scale: f64,
    /// Burn-in length in sweeps (one sweep = N proposed exchanges).
    pub burn_in_sweeps: usize,
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self { proposal_scale: 0.5, burn_in_sweeps: 1000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerStatus {
    Converged,
    /// split R-hat above 1.1 on the energy observable.
    Warning,
}

#[derive(Debug, Clone)]
pub struct SamplerDiagnostics<T> {
    pub split_rhat: T,
    pub ess: T,
    pub status: SamplerStatus,
}

/// One pairwise-exchange Metropolis proposal: x_i += d, x_j -= d. The move
/// conserves the row sum by construction; per-site potential values are
/// cached so each proposal costs two fresh evaluations.
#[inline]
fn exchange_move<T: RandScalar>(
    x: &mut [T],
    psi: &mut [T],
    p: &Potential,
    tilt: Option<&[T]>,
    scale: T,
    rng: &mut ChaCha8Rng,
) {
    let n = x.len();
    let i = rng.gen_range(0..n);
    let mut j = rng.gen_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    let d = (T::of(2.0) * T::unit_uniform(rng) - T::one()) * scale;
    let pi_new = p.value(x[i] + d);
    let pj_new = p.value(x[j] - d);
    let mut dh = pi_new + pj_new - psi[i] - psi[j];
    if let Some(l) = tilt {
        // target density carries exp(sum l_i x_i)
        dh -= (l[i] - l[j]) * d;
    }
    let accept = dh <= T::zero() || T::unit_uniform(rng) < (-dh).exp();
    if accept {
        x[i] = x[i] + d;
        x[j] = x[j] - d;
        psi[i] = pi_new;
        psi[j] = pj_new;
    }
}

fn run_chain<T: RandScalar>(
    x: &mut [T],
    p: &Potential,
    tilt: Option<&[T]>,
    params: &SamplerParams,
    rng: &mut ChaCha8Rng,
    record: bool,
) -> Vec<T> {
    let n = x.len();
    let scale = T::of(params.proposal_scale);
    let mut psi: Vec<T> = x.iter().map(|&v| p.value(v)).collect();
    let mut trace = Vec::new();
    for _ in 0..params.burn_in_sweeps {
        for _ in 0..n {
            exchange_move(x, &mut psi, p, tilt, scale, rng);
        }
        if record {
            trace.push(psi.iter().copied().sum::<T>());
        }
    }
    trace
}

/// Split R-hat over per-chain traces (each chain's recorded second half is
/// split in two).
fn split_rhat<T: Scalar>(traces: &[Vec<T>]) -> T {
    let len = traces.first().map_or(0, |t| t.len());
    if traces.is_empty() || len < 8 {
        return T::one();
    }
    let half = len / 2; // use the second half of burn-in
    let seg = half / 2;
    let mut chains: Vec<&[T]> = Vec::new();
    for t in traces {
        chains.push(&t[half..half + seg]);
        chains.push(&t[half + seg..half + 2 * seg]);
    }
    let m = T::from_usize(chains.len()).unwrap();
    let n = T::from_usize(seg).unwrap();
    let means: Vec<T> = chains
        .iter()
        .map(|c| c.iter().copied().sum::<T>() / n)
        .collect();
    let grand = means.iter().copied().sum::<T>() / m;
    let b = means.iter().map(|&mu| (mu - grand) * (mu - grand)).sum::<T>() * n
        / (m - T::one());
    let w = chains
        .iter()
        .zip(means.iter())
        .map(|(c, &mu)| c.iter().map(|&v| (v - mu) * (v - mu)).sum::<T>() / (n - T::one()))
        .sum::<T>()
        / m;
    if w <= T::zero() {
        return T::one();
    }
    let var_plus = (n - T::one()) / n * w + b / n;
    (var_plus / w).sqrt()
}

/// Crude effective sample size of the pooled traces from the lag-1
/// autocorrelation (enough to flag a stuck sampler).
fn ess_estimate<T: Scalar>(traces: &[Vec<T>]) -> T {
    let len = traces.first().map_or(0, |t| t.len());
    if traces.is_empty() || len < 8 {
        return T::zero();
    }
    let half = len / 2;
    let mut total = T::zero();
    for t in traces {
        let c = &t[half..];
        let n = T::from_usize(c.len()).unwrap();
        let mean = c.iter().copied().sum::<T>() / n;
        let var = c.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        if var <= T::zero() {
            continue;
        }
        let mut rho = T::zero();
        for i in 1..c.len() {
            rho += (c[i] - mean) * (c[i - 1] - mean);
        }
        rho = rho / (n * var);
        let rho = rho.max(T::zero()).min(T::of(0.999));
        total += n * (T::one() - rho) / (T::one() + rho);
    }
    total
}

/// Draw R approximate samples of the canonical ensemble mu_{N,m} by running
/// R independent mean-preserving exchange chains.
pub fn sample_equilibrium<T: RandScalar + Send + Sync>(
    p: &Potential,
    n: usize,
    m: T,
    r: usize,
    seed: u64,
    params: &SamplerParams,
) -> Result<(MicroEnsemble<T>, SamplerDiagnostics<T>)> {
    sample_gibbs(p, n, m, r, seed, params, None)
}

/// Local-Gibbs sampler: the target carries the tilt exp(sum lambda_i x_i)
/// with a block-constant lambda (the lifted macroscopic gradient).
pub fn sample_tilted<T: RandScalar + Send + Sync>(
    p: &Potential,
    n: usize,
    m: T,
    r: usize,
    seed: u64,
    params: &SamplerParams,
    lambda: &[T],
) -> Result<(MicroEnsemble<T>, SamplerDiagnostics<T>)> {
    if lambda.len() != n {
        return Err(Error::Domain("tilt vector length != N".into()));
    }
    sample_gibbs(p, n, m, r, seed, params, Some(lambda))
}

fn sample_gibbs<T: RandScalar + Send + Sync>(
    p: &Potential,
    n: usize,
    m: T,
    r: usize,
    seed: u64,
    params: &SamplerParams,
    tilt: Option<&[T]>,
) -> Result<(MicroEnsemble<T>, SamplerDiagnostics<T>)> {
    if r < 1 {
        return Err(Error::Precondition("need at least one replica".into()));
    }
    if n < 2 {
        return Err(Error::Domain("exchange sampler needs N >= 2".into()));
    }
    let mut rngs = replica_streams(seed, r);
    let n_traced = r.min(32);
    let mut replicas = vec![T::zero(); r * n];
    let traces: Vec<Vec<T>> = replicas
        .par_chunks_mut(n)
        .zip(rngs.par_iter_mut())
        .enumerate()
        .map(|(idx, (row, rng))| {
            // Start from the quadratic-part conditional law (exact for
            // delta_psi = 0): centered Gaussian noise shifted to the tilt.
            for v in row.iter_mut() {
                *v = T::standard_normal(rng);
            }
            if let Some(l) = tilt {
                for (v, &li) in row.iter_mut().zip(l.iter()) {
                    *v += li;
                }
            }
            let mean = row.iter().copied().sum::<T>() / T::from_usize(n).unwrap();
            for v in row.iter_mut() {
                *v = *v - mean + m;
            }
            run_chain(row, p, tilt, params, rng, idx < n_traced)
        })
        .collect();

    let traced: Vec<Vec<T>> = traces.into_iter().take(n_traced).collect();
    let rhat = split_rhat(&traced);
    let diag = SamplerDiagnostics {
        split_rhat: rhat,
        ess: ess_estimate(&traced),
        status: if rhat > T::of(1.1) { SamplerStatus::Warning } else { SamplerStatus::Converged },
    };
    let ensemble = MicroEnsemble::from_replicas(n, m, replicas, seed)?;
    Ok((ensemble, diag))
}

/// Time integrator for the Kawasaki SDE dX = -A grad H(X) dt + sqrt(2) N B^t dW.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdeScheme {
    /// Plain Euler-Maruyama with the bond-noise factorization
    /// (B x)_i = x_{i+1} - x_i; requires dt below the explicit stability
    /// bound 0.5 / (lambda_max(A) sup psi'').
    EulerMaruyama,
    /// Splitting integrator: the quadratic part of the drift and the noise
    /// are integrated exactly as an Ornstein-Uhlenbeck flow in Fourier
    /// space, the bounded perturbation delta_psi' is frozen over the step.
    /// Exact in law for delta_psi = 0 at any dt.
    ExactOuSplitting,
}

impl<T: RandScalar + Send + Sync> MicroEnsemble<T> {
    /// One SDE step of the whole ensemble.
    pub fn step(&mut self, p: &Potential, op: &KawasakiOperator<T>, dt: T, scheme: SdeScheme) -> Result<()> {
        self.evolve(p, op, dt, 1, scheme)
    }

    /// `n_steps` SDE steps of size dt; replicas evolve in parallel on their
    /// deterministic streams.
    pub fn evolve(
        &mut self,
        p: &Potential,
        op: &KawasakiOperator<T>,
        dt: T,
        n_steps: usize,
        scheme: SdeScheme,
    ) -> Result<()> {
        if self.n_sites != op.n_sites() {
            return Err(Error::Domain("operator size != ensemble size".into()));
        }
        if dt < T::zero() {
            return Err(Error::Precondition("negative dt".into()));
        }
        if scheme == SdeScheme::EulerMaruyama {
            let sup_psi2 = T::of(1.0 + p.delta.d2_sup());
            let bound = T::of(0.5) / (op.max_eigenvalue() * sup_psi2);
            if dt > bound {
                return Err(Error::Precondition(format!(
                    "dt = {} above the Euler-Maruyama stability bound {}",
                    dt, bound
                )));
            }
        }
        if dt == T::zero() || n_steps == 0 {
            return Ok(());
        }
        let n = self.n_sites;
        match scheme {
            SdeScheme::EulerMaruyama => {
                self.replicas
                    .par_chunks_mut(n)
                    .zip(self.rngs.par_iter_mut())
                    .for_each(|(row, rng)| {
                        let mut grad = vec![T::zero(); n];
                        let mut noise = vec![T::zero(); n];
                        for _ in 0..n_steps {
                            em_step(row, p, dt, rng, &mut grad, &mut noise);
                        }
                    });
            }
            SdeScheme::ExactOuSplitting => {
                let eigs = op.eigenvalues();
                let decay: Vec<T> = eigs.iter().map(|&l| (-l * dt).exp()).collect();
                let noise_amp: Vec<T> = decay
                    .iter()
                    .map(|&d| (T::one() - d * d).max(T::zero()).sqrt())
                    .collect();
                let plan = op.plan().clone();
                self.replicas
                    .par_chunks_mut(n)
                    .zip(self.rngs.par_iter_mut())
                    .for_each(|(row, rng)| {
                        let mut drift = vec![Complex::new(T::zero(), T::zero()); n];
                        let mut scratch =
                            vec![Complex::new(T::zero(), T::zero()); plan.scratch_len()];
                        let mut g = vec![T::zero(); n];
                        for _ in 0..n_steps {
                            splitting_step(
                                row, p, rng, &plan, &decay, &noise_amp, &mut drift,
                                &mut scratch, &mut g,
                            );
                        }
                    });
            }
        }
        self.time += dt * T::from_usize(n_steps).unwrap();
        Ok(())
    }
}

/// Euler-Maruyama step on one replica. The drift is A psi'(x) via the
/// stencil; the noise sqrt(2 dt) N B^t xi has one Gaussian per bond and each
/// column of B^t sums to zero, so the row sum is conserved move by move.
fn em_step<T: RandScalar>(
    x: &mut [T],
    p: &Potential,
    dt: T,
    rng: &mut ChaCha8Rng,
    grad: &mut [T],
    noise: &mut [T],
) {
    let n = x.len();
    let n_t = T::from_usize(n).unwrap();
    let n2 = n_t * n_t;
    let two = T::of(2.0);
    for (g, &v) in grad.iter_mut().zip(x.iter()) {
        *g = p.grad(v);
    }
    for xi in noise.iter_mut() {
        *xi = T::standard_normal(rng);
    }
    let amp = (two * dt).sqrt() * n_t;
    for i in 0..n {
        let prev = grad[(i + n - 1) % n];
        let next = grad[(i + 1) % n];
        let drift = n2 * (two * grad[i] - prev - next);
        let bond = noise[(i + n - 1) % n] - noise[i];
        x[i] = x[i] - drift * dt + amp * bond;
    }
}

fn splitting_step<T: RandScalar>(
    x: &mut [T],
    p: &Potential,
    rng: &mut ChaCha8Rng,
    plan: &crate::spectral::FftPlan<T>,
    decay: &[T],
    noise_amp: &[T],
    drift: &mut [Complex<T>],
    scratch: &mut [Complex<T>],
    g: &mut [T],
) {
    let n = x.len();
    let mut sum = T::zero();
    for ((d, &v), gi) in drift.iter_mut().zip(x.iter()).zip(g.iter_mut()) {
        let (_, dp, _) = p.delta.eval(v);
        *gi = dp;
        let y = v + dp;
        sum += y;
        *d = Complex::new(y, T::zero());
    }
    plan.forward(drift, scratch);
    // the zero mode carries the conserved sum exactly
    drift[0] = Complex::new(sum, T::zero());
    // white noise drawn directly in the frequency domain: the DFT of a unit
    // Gaussian vector has independent Hermitian-symmetric modes of variance
    // N (split over real and imaginary parts on the paired bins)
    let n_t = T::from_usize(n).unwrap();
    let sqrt_half_n = (n_t * T::of(0.5)).sqrt();
    for k in 1..=(n - 1) / 2 {
        let a = T::standard_normal(rng);
        let b = T::standard_normal(rng);
        let z = Complex::new(a * sqrt_half_n, b * sqrt_half_n);
        drift[k] = drift[k] * decay[k] + z * noise_amp[k];
        drift[n - k] = drift[n - k] * decay[n - k] + z.conj() * noise_amp[n - k];
    }
    if n % 2 == 0 {
        let m = n / 2;
        let c = T::standard_normal(rng);
        drift[m] = drift[m] * decay[m] + Complex::new(c * n_t.sqrt(), T::zero()) * noise_amp[m];
    }
    plan.inverse(drift, scratch);
    for ((v, d), &gi) in x.iter_mut().zip(drift.iter()).zip(g.iter()) {
        *v = d.re - gi;
    }
}

/// Theta distance of the ensemble to a lifted macroscopic profile:
/// Monte Carlo average of (1/2N) <x - lift(eta), A^-1 (x - lift(eta))>.
/// Returns (value, standard error).
pub fn theta_functional_lifted<T: Scalar + Send + Sync>(
    e: &MicroEnsemble<T>,
    lifted_eta: &[T],
    op: &KawasakiOperator<T>,
) -> Result<(T, T)> {
    if lifted_eta.len() != e.n_sites() {
        return Err(Error::Domain("lifted profile length != N".into()));
    }
    let n = e.n_sites();
    let half_over_n = T::of(0.5) / T::from_usize(n).unwrap();
    let vals: Result<Vec<T>> = (0..e.n_replicas())
        .into_par_iter()
        .map(|ridx| {
            let mut buf = op.make_buf();
            let row = e.replica(ridx);
            let r: Vec<T> = row.iter().zip(lifted_eta.iter()).map(|(&a, &b)| a - b).collect();
            // project onto the tangent space: removes the roundoff mean of
            // the difference of two mean-m vectors
            let avg = r.iter().copied().sum::<T>() / T::from_usize(n).unwrap();
            let r: Vec<T> = r.iter().map(|&v| v - avg).collect();
            Ok(op.inverse_quadratic_form(&r, &mut buf)? * half_over_n)
        })
        .collect();
    Ok(mean_stderr(&vals?))
}

/// kappa estimate (Hess H = diag(psi''(x_i))): the largest operator norm of
/// the block-off-diagonal part Pi_perp Hess H Pi_par over sampled states,
/// by power iteration. Always bounded by sup |delta_psi''|.
pub fn estimate_kappa<T: RandScalar>(
    p: &Potential,
    n: usize,
    k_block: usize,
    n_probes: usize,
    seed: u64,
) -> Result<T> {
    if k_block == 0 || n % k_block != 0 {
        return Err(Error::Precondition(format!("N = {} not a multiple of K = {}", n, k_block)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = T::zero();

    let mut probe = |x: &Vec<T>| {
        // d_i = psi''(x_i); S = Pi_par D Pi_perp D Pi_par, kappa^2 = lambda_max(S)
        let d: Vec<T> = x.iter().map(|&v| p.eval_unchecked(v).2).collect();
        let apply = |v: &[T]| -> Vec<T> {
            let v1 = block_avg_projection(v, k_block);
            let mut dv: Vec<T> = d.iter().zip(v1.iter()).map(|(&a, &b)| a * b).collect();
            let dv_par = block_avg_projection(&dv, k_block);
            for (w, par) in dv.iter_mut().zip(dv_par.iter()) {
                *w = *w - *par; // Pi_perp
            }
            for (w, &di) in dv.iter_mut().zip(d.iter()) {
                *w = *w * di;
            }
            block_avg_projection(&dv, k_block)
        };
        let lam = crate::linalg::power_iteration(n, apply, 60).max(T::zero());
        let kappa = lam.sqrt();
        if kappa > worst {
            worst = kappa;
        }
    };

    // Adversarial pattern: psi'' alternating between its extremes inside
    // each block maximizes the within-block fluctuation.
    let (xmin, xmax) = extreme_curvature_points(p);
    let alternating: Vec<T> = (0..n)
        .map(|i| if i % 2 == 0 { xmin } else { xmax })
        .collect();
    probe(&alternating);
    for _ in 0..n_probes {
        let x: Vec<T> = (0..n).map(|_| T::uniform(&mut rng, T::of(-3.0), T::of(3.0))).collect();
        probe(&x);
    }
    Ok(worst)
}

fn extreme_curvature_points<T: Scalar>(p: &Potential) -> (T, T) {
    // scan psi'' over a period-sized window
    let mut best_lo = (T::infinity(), T::zero());
    let mut best_hi = (T::neg_infinity(), T::zero());
    for i in 0..=1256 {
        let x = T::of(-3.15 + 0.005 * i as f64);
        let (_, _, d2) = p.eval_unchecked(x);
        if d2 < best_lo.0 {
            best_lo = (d2, x);
        }
        if d2 > best_hi.0 {
            best_hi = (d2, x);
        }
    }
    (best_lo.1, best_hi.1)
}

/// lift(project(v)) with block size K: each site replaced by its block mean.
fn block_avg_projection<T: Scalar>(v: &[T], k_block: usize) -> Vec<T> {
    let k_t = T::from_usize(k_block).unwrap();
    let mut out = vec![T::zero(); v.len()];
    for (b, chunk) in v.chunks(k_block).enumerate() {
        let avg = chunk.iter().copied().sum::<T>() / k_t;
        for w in out[b * k_block..(b + 1) * k_block].iter_mut() {
            *w = avg;
        }
    }
    out
}
