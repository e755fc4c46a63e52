//! Closed-form oracle for the quadratic potential (delta_psi = 0): the
//! Kawasaki SDE is then an Ornstein-Uhlenbeck flow and every functional of
//! interest is available analytically from the mean and the covariance.
//!
//! Covariances are stored spectrally: a variance per Fourier mode of the
//! circulant operator A. Every covariance arising in the oracle's contract
//! (equilibrium projection, scaled equilibrium, their OU evolution) is a
//! function of A, hence exactly of this form.

use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::microscale::KawasakiOperator;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct GaussianState<T> {
    /// State mean, a vector on the hyperplane of mean m.
    pub mean: Vec<T>,
    /// Variance per Fourier mode, k = 0..N-1; mode 0 pinned to zero by the
    /// conservation law. Realness requires mode_var[k] = mode_var[N-k].
    pub mode_var: Vec<T>,
}

impl<T: Scalar> GaussianState<T> {
    pub fn new(mean: Vec<T>, mode_var: Vec<T>) -> Result<Self> {
        let n = mean.len();
        if mode_var.len() != n {
            return Err(Error::Domain("mode variance length != N".into()));
        }
        let tol = T::of(1e-12);
        for k in 0..n {
            if mode_var[k] < -tol {
                return Err(Error::Numerical(format!(
                    "covariance not PSD: mode {} variance {}",
                    k, mode_var[k]
                )));
            }
            if (mode_var[k] - mode_var[(n - k) % n]).abs() > tol {
                return Err(Error::Domain("mode variances not conjugate-symmetric".into()));
            }
        }
        if mode_var[0].abs() > tol {
            return Err(Error::Domain("zero mode must carry no variance".into()));
        }
        Ok(Self { mean, mode_var })
    }

    /// Equilibrium state: mean m, covariance the projection Id - (1/N)11^t.
    pub fn equilibrium(n: usize, m: T) -> Self {
        let mut mode_var = vec![T::one(); n];
        mode_var[0] = T::zero();
        Self { mean: vec![m; n], mode_var }
    }

    /// Equilibrium fluctuations scaled by `factor` around a given mean.
    pub fn scaled_equilibrium(mean: Vec<T>, factor: T) -> Result<Self> {
        let n = mean.len();
        let mut mode_var = vec![factor; n];
        mode_var[0] = T::zero();
        Self::new(mean, mode_var)
    }

    pub fn n_sites(&self) -> usize {
        self.mean.len()
    }

    /// OU evolution over time t under dX = -A X dt + sqrt(2) N B^t dW:
    /// mean(t) = e^{-At} mean, per-mode s_k(t) = 1 + (s_k - 1) e^{-2 lambda_k t}.
    pub fn evolve(&self, op: &KawasakiOperator<T>, t: T) -> Result<Self> {
        if op.n_sites() != self.n_sites() {
            return Err(Error::Domain("operator size mismatch".into()));
        }
        let mut buf = op.make_buf();
        let mean = op.apply_exp_with(&self.mean, t, &mut buf);
        let mut mode_var = Vec::with_capacity(self.mode_var.len());
        mode_var.push(T::zero());
        for k in 1..self.mode_var.len() {
            let decay = (-T::of(2.0) * op.eigenvalues()[k] * t).exp();
            let s = T::one() + (self.mode_var[k] - T::one()) * decay;
            if s < -T::of(1e-12) {
                return Err(Error::Numerical("propagated covariance lost positivity".into()));
            }
            mode_var.push(s.max(T::zero()));
        }
        Ok(Self { mean, mode_var })
    }

    /// Relative entropy Ent_mu(f) against the equilibrium N(m 1, Pi):
    /// (1/2) sum_k (s_k - 1 - ln s_k) + (1/2) |mean - m 1|^2.
    pub fn relative_entropy(&self, m: T) -> Result<T> {
        let half = T::of(0.5);
        let mut acc = T::zero();
        for (k, &s) in self.mode_var.iter().enumerate() {
            if k == 0 {
                continue;
            }
            if s <= T::zero() {
                return Err(Error::Domain(
                    "relative entropy infinite: degenerate mode variance".into(),
                ));
            }
            acc += s - T::one() - s.ln();
        }
        let shift: T = self.mean.iter().map(|&x| (x - m) * (x - m)).sum();
        Ok(half * (acc + shift))
    }

    /// Fisher information against the equilibrium:
    /// sum_k (s_k - 1)^2 / s_k + |mean - m 1|^2.
    pub fn fisher_information(&self, m: T) -> Result<T> {
        let mut acc = T::zero();
        for (k, &s) in self.mode_var.iter().enumerate() {
            if k == 0 {
                continue;
            }
            if s <= T::zero() {
                return Err(Error::Domain("fisher infinite: degenerate mode variance".into()));
            }
            acc += (s - T::one()) * (s - T::one()) / s;
        }
        let shift: T = self.mean.iter().map(|&x| (x - m) * (x - m)).sum();
        Ok(acc + shift)
    }

    /// Theta distance to a lifted profile:
    /// (1/2N) [ <d, A^-1 d> + sum_k s_k / lambda_k ], d = mean - lifted.
    pub fn theta(&self, lifted_eta: &[T], op: &KawasakiOperator<T>) -> Result<T> {
        let n = self.n_sites();
        if lifted_eta.len() != n || op.n_sites() != n {
            return Err(Error::Domain("profile/operator size mismatch".into()));
        }
        // both vectors carry the conserved mean m; the difference lives on
        // the tangent space up to roundoff, which the centering removes
        let d: Vec<T> = self.mean.iter().zip(lifted_eta.iter()).map(|(&a, &b)| a - b).collect();
        let avg = d.iter().copied().sum::<T>() / T::from_usize(n).unwrap();
        let d: Vec<T> = d.iter().map(|&v| v - avg).collect();
        let mut buf = op.make_buf();
        let quad = op.inverse_quadratic_form(&d, &mut buf)?;
        let mut fluct = T::zero();
        for k in 1..n {
            fluct += self.mode_var[k] / op.eigenvalues()[k];
        }
        Ok((quad + fluct) / (T::of(2.0) * T::from_usize(n).unwrap()))
    }

    /// E |P x - eta|_Y^2 for the block-average projection onto M blocks:
    /// deterministic part |P mean - eta|_Y^2 plus the fluctuation trace
    /// (1/M) sum_modes s_mode |P v_mode|_2^2.
    pub fn macro_second_moment(&self, eta: &[T], m_blocks: usize) -> Result<T> {
        let n = self.n_sites();
        if n % m_blocks != 0 || eta.len() != m_blocks {
            return Err(Error::Domain("block structure mismatch".into()));
        }
        let k_block = n / m_blocks;
        let m_t = T::from_usize(m_blocks).unwrap();
        let proj = |v: &[T]| -> Vec<T> {
            v.chunks(k_block)
                .map(|c| c.iter().copied().sum::<T>() / T::from_usize(k_block).unwrap())
                .collect()
        };
        let p_mean = proj(&self.mean);
        let mut det = T::zero();
        for (a, b) in p_mean.iter().zip(eta.iter()) {
            det += (*a - *b) * (*a - *b);
        }
        det = det / m_t;
        Ok(det + self.fluctuation_macro_trace(m_blocks))
    }

    /// (1/M) tr(P Sigma P^t) over the real Fourier eigenbasis of A.
    pub fn fluctuation_macro_trace(&self, m_blocks: usize) -> T {
        let n = self.n_sites();
        let k_block = n / m_blocks;
        let m_t = T::from_usize(m_blocks).unwrap();
        let tau = T::of(std::f64::consts::TAU);
        let n_t = T::from_usize(n).unwrap();
        let norm = (T::of(2.0) / n_t).sqrt();
        let mut acc = T::zero();
        let proj_norm2 = |v: &[T]| -> T {
            v.chunks(k_block)
                .map(|c| {
                    let avg = c.iter().copied().sum::<T>() / T::from_usize(k_block).unwrap();
                    avg * avg
                })
                .sum::<T>()
        };
        for k in 1..=n / 2 {
            let angle = tau * T::from_usize(k).unwrap() / n_t;
            if k < n - k {
                let cosv: Vec<T> = (0..n)
                    .map(|j| norm * (angle * T::from_usize(j).unwrap()).cos())
                    .collect();
                let sinv: Vec<T> = (0..n)
                    .map(|j| norm * (angle * T::from_usize(j).unwrap()).sin())
                    .collect();
                acc += self.mode_var[k] * (proj_norm2(&cosv) + proj_norm2(&sinv));
            } else {
                // Nyquist mode (even N): alternating +-1/sqrt(N)
                let alt: Vec<T> = (0..n)
                    .map(|j| {
                        let sign = if j % 2 == 0 { T::one() } else { -T::one() };
                        sign / n_t.sqrt()
                    })
                    .collect();
                acc += self.mode_var[k] * proj_norm2(&alt);
            }
        }
        acc / m_t
    }

    /// Per-replica sampler consistent with this law (for cross-checks):
    /// x = mean + sum_k sqrt(s_k) xi_k v_k over the real eigenbasis.
    pub fn sample_into(&self, op: &KawasakiOperator<T>, white: &[T], out: &mut [T]) {
        let n = self.n_sites();
        let mut buf = op.make_buf();
        for (c, &w) in buf.buf.iter_mut().zip(white.iter()) {
            *c = Complex::new(w, T::zero());
        }
        op.plan().forward(&mut buf.buf, &mut buf.scratch);
        buf.buf[0] = Complex::new(T::zero(), T::zero());
        for k in 1..n {
            let s = self.mode_var[k].max(T::zero()).sqrt();
            buf.buf[k] = buf.buf[k] * s;
        }
        op.plan().inverse(&mut buf.buf, &mut buf.scratch);
        for ((o, c), &mu) in out.iter_mut().zip(buf.buf.iter()).zip(self.mean.iter()) {
            *o = c.re + mu;
        }
    }
}
