//! The Kawasaki operator A = N^2 (2 id - shift - shift^t) on the periodic
//! lattice: stencil application, analytic spectrum, and the inverse on the
//! mean-zero subspace via the circulant diagonalization in Fourier space.

use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spectral::{FftBuf, FftPlan};

#[derive(Debug, Clone)]
pub struct KawasakiOperator<T: Scalar> {
    n: usize,
    plan: FftPlan<T>,
    eigenvalues: Vec<T>,
}

impl<T: Scalar> KawasakiOperator<T> {
    /// Build the operator for N >= 3 lattice sites.
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Domain(format!("Kawasaki operator needs N >= 3, got {}", n)));
        }
        let n_t = T::from_usize(n).unwrap();
        let two = T::of(2.0);
        let tau = T::of(std::f64::consts::TAU);
        let eigenvalues = (0..n)
            .map(|k| {
                let angle = tau * T::from_usize(k).unwrap() / n_t;
                two * n_t * n_t * (T::one() - angle.cos())
            })
            .collect();
        Ok(Self { n, plan: FftPlan::new(n), eigenvalues })
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    /// Analytic spectrum 2N^2(1 - cos(2k pi/N)), k = 0..N-1.
    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    /// tau: smallest nonzero eigenvalue (k = 1).
    pub fn min_nonzero_eigenvalue(&self) -> T {
        self.eigenvalues[1]
    }

    pub fn max_eigenvalue(&self) -> T {
        self.eigenvalues
            .iter()
            .copied()
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    /// A x by the periodic second-difference stencil.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        let n = self.n;
        let n2 = T::from_usize(n).unwrap() * T::from_usize(n).unwrap();
        let two = T::of(2.0);
        (0..n)
            .map(|i| {
                let prev = x[(i + n - 1) % n];
                let next = x[(i + 1) % n];
                n2 * (two * x[i] - prev - next)
            })
            .collect()
    }

    pub fn make_buf(&self) -> FftBuf<T> {
        FftBuf::for_plan(&self.plan)
    }

    /// Solve A z = x on the mean-zero subspace. Requires mean-zero input.
    pub fn apply_inverse(&self, x: &[T]) -> Result<Vec<T>> {
        let mut buf = self.make_buf();
        self.apply_inverse_with(x, &mut buf)
    }

    pub fn apply_inverse_with(&self, x: &[T], w: &mut FftBuf<T>) -> Result<Vec<T>> {
        assert_eq!(x.len(), self.n);
        let sum: T = x.iter().copied().sum();
        let amax = x.iter().fold(T::zero(), |a, v| a.max(v.abs()));
        let bound = T::of(1e-8) * T::from_usize(self.n).unwrap() * amax;
        if amax > T::zero() && sum.abs() > bound {
            return Err(Error::Precondition(format!(
                "A^-1 needs a mean-zero input (|sum| = {} > {})",
                sum.abs(),
                bound
            )));
        }
        w.load_real(x);
        self.plan.forward(&mut w.buf, &mut w.scratch);
        w.buf[0] = Complex::new(T::zero(), T::zero());
        for k in 1..self.n {
            let lambda = self.eigenvalues[k];
            w.buf[k] = w.buf[k] / lambda;
        }
        self.plan.inverse(&mut w.buf, &mut w.scratch);
        let mut out = vec![T::zero(); self.n];
        w.store_real(&mut out);
        Ok(out)
    }

    /// exp(-A t) x, exact per Fourier mode (the zero mode is preserved).
    pub fn apply_exp_with(&self, x: &[T], t: T, w: &mut FftBuf<T>) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        w.load_real(x);
        self.plan.forward(&mut w.buf, &mut w.scratch);
        for k in 1..self.n {
            let factor = (-self.eigenvalues[k] * t).exp();
            w.buf[k] = w.buf[k] * factor;
        }
        self.plan.inverse(&mut w.buf, &mut w.scratch);
        let mut out = vec![T::zero(); self.n];
        w.store_real(&mut out);
        out
    }

    /// <x, A^-1 x> for mean-zero x.
    pub fn inverse_quadratic_form(&self, x: &[T], w: &mut FftBuf<T>) -> Result<T> {
        let z = self.apply_inverse_with(x, w)?;
        Ok(x.iter().zip(z.iter()).map(|(a, b)| *a * *b).sum())
    }

    /// Spectral multiplier f(lambda_k) on the nonzero Fourier modes (the
    /// zero mode is annihilated).
    pub fn apply_spectral_fn(&self, x: &[T], f: impl Fn(T) -> T, w: &mut FftBuf<T>) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        w.load_real(x);
        self.plan.forward(&mut w.buf, &mut w.scratch);
        w.buf[0] = Complex::new(T::zero(), T::zero());
        for k in 1..self.n {
            let factor = f(self.eigenvalues[k]);
            w.buf[k] = w.buf[k] * factor;
        }
        self.plan.inverse(&mut w.buf, &mut w.scratch);
        let mut out = vec![T::zero(); self.n];
        w.store_real(&mut out);
        out
    }

    pub(crate) fn plan(&self) -> &FftPlan<T> {
        &self.plan
    }
}
