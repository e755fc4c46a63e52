//! Single-site Ginzburg-Landau potential psi(x) = x^2/2 + delta_psi(x), its
//! Cramer transform phi, and the block-coarse-grained potential psi_K, all
//! with certified convexity bounds.

mod coarse;
mod cramer;
mod tabulated;

pub use coarse::coarse_potential;
pub use cramer::{convexity_bounds, cramer_transform, legendre_transform, QuadratureSpec};
pub use tabulated::{GridSpec, TabulatedFunction};

pub(crate) use tabulated::fd_derivatives;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// The bounded C^2 perturbation delta_psi of the quadratic single-site
/// potential. Families are closed-form so that evaluation stays exact in any
/// scalar type and the potential can be tagged in file headers.
#[derive(Debug, Clone, PartialEq)]
pub enum DeltaPsi {
    Zero,
    /// amplitude * cos(x)
    Cos { amplitude: f64 },
}

impl DeltaPsi {
    /// (delta_psi, delta_psi', delta_psi'') at x.
    pub fn eval<T: Scalar>(&self, x: T) -> (T, T, T) {
        match self {
            DeltaPsi::Zero => (T::zero(), T::zero(), T::zero()),
            DeltaPsi::Cos { amplitude } => {
                let a = T::of(*amplitude);
                let (s, c) = x.sin_cos();
                (a * c, -a * s, -a * c)
            }
        }
    }

    /// Upper bound on sup(|dpsi| + |dpsi'| + |dpsi''|).
    pub fn c2_bound(&self) -> f64 {
        match self {
            DeltaPsi::Zero => 0.0,
            // max over x of a(2|cos x| + |sin x|) = a*sqrt(5)
            DeltaPsi::Cos { amplitude } => amplitude.abs() * 5.0_f64.sqrt(),
        }
    }

    /// sup |delta_psi''|.
    pub fn d2_sup(&self) -> f64 {
        match self {
            DeltaPsi::Zero => 0.0,
            DeltaPsi::Cos { amplitude } => amplitude.abs(),
        }
    }

    pub fn tag(&self) -> String {
        match self {
            DeltaPsi::Zero => "zero".to_string(),
            DeltaPsi::Cos { amplitude } => format!("cos:{}", amplitude),
        }
    }
}

/// Single-site potential psi(x) = x^2/2 + delta_psi(x).
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub delta: DeltaPsi,
}

impl Potential {
    pub fn quadratic() -> Self {
        Self { delta: DeltaPsi::Zero }
    }

    pub fn cos(amplitude: f64) -> Self {
        Self { delta: DeltaPsi::Cos { amplitude } }
    }

    pub fn c2_bound(&self) -> f64 {
        self.delta.c2_bound()
    }

    /// Lower bound on psi'' = 1 + delta_psi''.
    pub fn hessian_floor(&self) -> f64 {
        1.0 - self.delta.d2_sup()
    }

    pub fn tag(&self) -> String {
        self.delta.tag()
    }

    /// psi, psi', psi'' at x; rejects non-finite input.
    pub fn eval_psi<T: Scalar>(&self, x: T) -> Result<(T, T, T)> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("eval_psi at non-finite x = {}", x)));
        }
        Ok(self.eval_unchecked(x))
    }

    /// Same as [`eval_psi`](Self::eval_psi) without the finiteness check, for
    /// inner loops that already guarantee finite states.
    #[inline]
    pub fn eval_unchecked<T: Scalar>(&self, x: T) -> (T, T, T) {
        let (d0, d1, d2) = self.delta.eval(x);
        let half = T::of(0.5);
        (half * x * x + d0, x + d1, T::one() + d2)
    }

    /// psi(x) only.
    #[inline]
    pub fn value<T: Scalar>(&self, x: T) -> T {
        self.eval_unchecked(x).0
    }

    /// psi'(x) only.
    #[inline]
    pub fn grad<T: Scalar>(&self, x: T) -> T {
        self.eval_unchecked(x).1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eval_psi_pure_quadratic() {
        let p = Potential::quadratic();
        let (v, d1, d2) = p.eval_psi(2.0_f64).unwrap();
        assert_eq!((v, d1, d2), (2.0, 2.0, 1.0));
        let (v, d1, d2) = p.eval_psi(0.0_f64).unwrap();
        assert_eq!((v, d1, d2), (0.0, 0.0, 1.0));
    }

    #[test]
    fn eval_psi_cos_at_origin() {
        // Direct differentiation of 0.1 cos x at x = 0.
        let p = Potential::cos(0.1);
        let (v, d1, d2) = p.eval_psi(0.0_f64).unwrap();
        assert_relative_eq!(v, 0.1, epsilon = 1e-15);
        assert_relative_eq!(d1, 0.0, epsilon = 1e-15);
        assert_relative_eq!(d2, 0.9, epsilon = 1e-15);
    }

    #[test]
    fn eval_psi_rejects_non_finite() {
        let p = Potential::cos(0.2);
        assert!(p.eval_psi(f64::NAN).is_err());
        assert!(p.eval_psi(f64::INFINITY).is_err());
    }

    #[test]
    fn eval_psi_generic_f32() {
        let p = Potential::cos(0.1);
        let (v, _, d2) = p.eval_psi(0.0_f32).unwrap();
        assert_relative_eq!(v, 0.1_f32, epsilon = 1e-6);
        assert_relative_eq!(d2, 0.9_f32, epsilon = 1e-6);
    }

    #[test]
    fn c2_bound_dominates_probes() {
        let p = Potential::cos(0.3);
        let c2 = p.c2_bound();
        for i in 0..2000 {
            let x = -10.0 + 0.01 * i as f64;
            let (d0, d1, d2) = p.delta.eval(x);
            assert!(d0.abs() + d1.abs() + d2.abs() <= c2 + 1e-12);
            // |psi''(x) - 1| <= c2_bound
            let (_, _, p2) = p.eval_psi(x).unwrap();
            assert!((p2 - 1.0).abs() <= c2 + 1e-12);
        }
    }
}
