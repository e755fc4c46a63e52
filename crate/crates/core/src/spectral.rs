//! Shared FFT plumbing: complex plans over real data for circulant operators
//! on the periodic lattice and the torus grid.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::scalar::Scalar;

/// Forward/inverse FFT plan pair of a fixed length.
#[derive(Clone)]
pub struct FftPlan<T: Scalar> {
    pub n: usize,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
}

impl<T: Scalar> FftPlan<T> {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft(n, FftDirection::Forward);
        let inv = planner.plan_fft(n, FftDirection::Inverse);
        Self { n, fwd, inv }
    }

    pub fn scratch_len(&self) -> usize {
        self.fwd
            .get_inplace_scratch_len()
            .max(self.inv.get_inplace_scratch_len())
    }

    /// In-place forward transform (unnormalized).
    pub fn forward(&self, buf: &mut [Complex<T>], scratch: &mut [Complex<T>]) {
        self.fwd.process_with_scratch(buf, scratch);
    }

    /// In-place inverse transform, normalized by 1/n.
    pub fn inverse(&self, buf: &mut [Complex<T>], scratch: &mut [Complex<T>]) {
        self.inv.process_with_scratch(buf, scratch);
        let scale = T::one() / T::from_usize(self.n).unwrap();
        for c in buf.iter_mut() {
            *c = *c * scale;
        }
    }
}

impl<T: Scalar> std::fmt::Debug for FftPlan<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPlan").field("n", &self.n).finish()
    }
}

/// Reusable buffers for repeated transforms of one length.
#[derive(Debug)]
pub struct FftBuf<T: Scalar> {
    pub buf: Vec<Complex<T>>,
    pub scratch: Vec<Complex<T>>,
}

impl<T: Scalar> FftBuf<T> {
    pub fn for_plan(plan: &FftPlan<T>) -> Self {
        Self {
            buf: vec![Complex::new(T::zero(), T::zero()); plan.n],
            scratch: vec![Complex::new(T::zero(), T::zero()); plan.scratch_len()],
        }
    }

    pub fn load_real(&mut self, x: &[T]) {
        for (c, v) in self.buf.iter_mut().zip(x.iter()) {
            *c = Complex::new(*v, T::zero());
        }
    }

    pub fn store_real(&self, out: &mut [T]) {
        for (v, c) in out.iter_mut().zip(self.buf.iter()) {
            *v = c.re;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn roundtrip() {
        let n = 12;
        let plan = FftPlan::<f64>::new(n);
        let mut w = FftBuf::for_plan(&plan);
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 0.3).collect();
        w.load_real(&x);
        plan.forward(&mut w.buf, &mut w.scratch);
        plan.inverse(&mut w.buf, &mut w.scratch);
        let mut y = vec![0.0; n];
        w.store_real(&mut y);
        for (a, b) in x.iter().zip(y.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }
}
