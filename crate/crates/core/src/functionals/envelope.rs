//! The abstract convergence envelope: the constants ledger of the two-scale
//! assumptions, the error functional Xi(T, M, N), and the assembled
//! free-energy gap bound.

use crate::coarse_grain::two_scale_lsi_constant;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Constants of the two-scale assumptions:
/// rho    - LSI constant of the conditional measures,
/// lambda - uniform convexity of the coarse Hamiltonian,
/// big_lambda - upper Hessian bound of the coarse Hamiltonian,
/// kappa  - mixed-scale Hessian coupling,
/// tau    - spectral floor of A,
/// alpha  - equilibrium second moment per site,
/// beta   - lower bound offset of the coarse Hamiltonian,
/// gamma  - block-fluctuation vs Dirichlet-form constant,
/// c1, c2 - initial data bounds (microscopic entropy / coarse energy).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantsLedger<T> {
    pub rho: T,
    pub lambda: T,
    pub big_lambda: T,
    pub kappa: T,
    pub tau: T,
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
    pub c1: T,
    pub c2: T,
}

impl<T: Scalar> ConstantsLedger<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > T::zero() && self.lambda > T::zero() && self.tau > T::zero()) {
            return Err(Error::Domain(
                "ledger needs rho, lambda, tau > 0 for the envelope".into(),
            ));
        }
        for (name, v) in [
            ("kappa", self.kappa),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("c1", self.c1),
            ("c2", self.c2),
            ("Lambda", self.big_lambda),
        ] {
            if v < T::zero() || !v.is_finite() {
                return Err(Error::Domain(format!("ledger entry {} = {} invalid", name, v)));
            }
        }
        Ok(())
    }
}

/// Xi(T, M, N) = Theta(0) + T M/N + (C1 gamma kappa^2)/(2 lambda rho^2 M^2)
///             + (1/M) sqrt(2 gamma T) (alpha + 2 C1/rho_hat)^{1/2}
///               (sqrt(C1) + sqrt(C2 + beta)).
pub fn xi_bound<T: Scalar>(
    t_horizon: T,
    m_blocks: usize,
    n_sites: usize,
    c: &ConstantsLedger<T>,
    theta0: T,
) -> Result<T> {
    c.validate()?;
    if theta0 < T::zero() {
        return Err(Error::Domain("theta0 must be nonnegative".into()));
    }
    let m = T::from_usize(m_blocks).unwrap();
    let n = T::from_usize(n_sites).unwrap();
    let rho_hat = two_scale_lsi_constant(c.rho, c.lambda, c.kappa)?;
    let two = T::of(2.0);
    let term_transport = t_horizon * m / n;
    let term_scale = c.c1 * c.gamma * c.kappa * c.kappa / (two * c.lambda * c.rho * c.rho) / (m * m);
    let term_cross = (two * c.gamma * t_horizon).sqrt()
        * (c.alpha + two * c.c1 / rho_hat).sqrt()
        * (c.c1.sqrt() + (c.c2 + c.beta).sqrt())
        / m;
    Ok(theta0 + term_transport + term_scale + term_cross)
}

/// Envelope for the time-integrated local-Gibbs relative entropy
/// (the HWI route): sqrt(2TM/N + (4/lambda) Xi) sqrt(2(C2+beta)/(N^2 tau)
/// + 2 C1 (kappa^2 + rho^2)/(tau rho^2)) + gamma C1/(2 M^2 rho).
pub fn local_gibbs_entropy_bound<T: Scalar>(
    t_horizon: T,
    m_blocks: usize,
    n_sites: usize,
    c: &ConstantsLedger<T>,
    theta0: T,
) -> Result<T> {
    c.validate()?;
    let m = T::from_usize(m_blocks).unwrap();
    let n = T::from_usize(n_sites).unwrap();
    let two = T::of(2.0);
    let four = T::of(4.0);
    let xi = xi_bound(t_horizon, m_blocks, n_sites, c, theta0)?;
    let w2_sq = two * t_horizon * m / n + four / c.lambda * xi;
    let fisher = two * (c.c2 + c.beta) / (n * n * c.tau)
        + two * c.c1 * (c.kappa * c.kappa + c.rho * c.rho) / (c.tau * c.rho * c.rho);
    Ok(w2_sq.sqrt() * fisher.sqrt() + c.gamma * c.c1 / (two * m * m * c.rho))
}

/// The explicit free-energy gap bound assembled from the envelope proof:
/// the local-Gibbs relative entropy term, the Wasserstein pairing terms, and
/// the Gibbs free-energy gap (with Gamma(Y)^{2/(M-1)} = 2 pi M on this
/// macroscopic geometry).
pub fn free_energy_gap_bound<T: Scalar>(
    t_horizon: T,
    m_blocks: usize,
    n_sites: usize,
    c: &ConstantsLedger<T>,
    theta0: T,
) -> Result<T> {
    c.validate()?;
    let m = T::from_usize(m_blocks).unwrap();
    let n = T::from_usize(n_sites).unwrap();
    let two = T::of(2.0);
    let xi = xi_bound(t_horizon, m_blocks, n_sites, c, theta0)?;
    let c2b = c.c2 + c.beta;

    // relative entropy vs the local Gibbs state (HWI route)
    let term_entropy = local_gibbs_entropy_bound(t_horizon, m_blocks, n_sites, c, theta0)?;

    // pairing of (f - G) against log G
    let term_pairing =
        (two * c2b * xi / (c.lambda * c.tau)).sqrt() + (t_horizon * m * c2b / (n * c.lambda * c.tau)).sqrt();

    // Gibbs free-energy gap, Gamma(Y)^{2/(M-1)} = 2 pi M
    let two_pi_m = T::of(std::f64::consts::TAU) * m;
    let log_gap = (two_pi_m / (c.big_lambda * n))
        .ln()
        .abs()
        .max((two_pi_m / (c.lambda * n)).ln().abs());
    let term_gibbs = t_horizon * (m - T::one()) / (two * n) * log_gap
        + (t_horizon * m * c2b / (c.lambda * n * c.tau)).sqrt();

    Ok(term_entropy + term_pairing + term_gibbs)
}
