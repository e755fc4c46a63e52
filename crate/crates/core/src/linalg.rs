//! Minimal dense symmetric linear algebra for the macroscopic operators
//! (M <= 512 in all experiments): Cholesky solve/inverse and power iteration.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense symmetric matrix, row-major storage.
#[derive(Debug, Clone)]
pub struct SymMatrix<T> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> SymMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n] }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        let mut out = vec![T::zero(); self.n];
        for i in 0..self.n {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            let mut acc = T::zero();
            for (a, b) in row.iter().zip(x.iter()) {
                acc += *a * *b;
            }
            out[i] = acc;
        }
        out
    }

    /// Largest deviation from symmetry.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let d = (self.at(i, j) - self.at(j, i)).abs();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    /// Force exact symmetry by averaging off-diagonal pairs.
    pub fn symmetrize(&mut self) {
        let half = T::of(0.5);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let m = (self.at(i, j) + self.at(j, i)) * half;
                self.set(i, j, m);
                self.set(j, i, m);
            }
        }
    }

    /// Cholesky factor L (lower), failing on non-positive pivots.
    pub fn cholesky(&self) -> Result<SymMatrix<T>> {
        let n = self.n;
        let mut l = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.at(i, j);
                for k in 0..j {
                    s -= l.at(i, k) * l.at(j, k);
                }
                if i == j {
                    if s <= T::zero() {
                        return Err(Error::Numerical(format!(
                            "cholesky pivot {} non-positive ({})",
                            i, s
                        )));
                    }
                    l.set(i, j, s.sqrt());
                } else {
                    l.set(i, j, s / l.at(j, j));
                }
            }
        }
        Ok(l)
    }

    /// Inverse of a symmetric positive definite matrix via Cholesky.
    pub fn spd_inverse(&self) -> Result<SymMatrix<T>> {
        let n = self.n;
        let l = self.cholesky()?;
        // Invert L in place (lower triangular).
        let mut linv = SymMatrix::zeros(n);
        for i in 0..n {
            linv.set(i, i, T::one() / l.at(i, i));
            for j in (0..i).rev() {
                let mut s = T::zero();
                for k in (j + 1)..=i {
                    s += l.at(k, j) * linv.at(i, k);
                }
                linv.set(i, j, -s / l.at(j, j));
            }
        }
        // inv = L^-t L^-1
        let mut inv = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = T::zero();
                for k in i..n {
                    s += linv.at(k, i) * linv.at(k, j);
                }
                inv.set(i, j, s);
                inv.set(j, i, s);
            }
        }
        Ok(inv)
    }
}

/// Largest eigenvalue (in magnitude) of a symmetric operator given as a
/// closure, by power iteration with a deterministic start.
pub fn power_iteration<T: Scalar>(
    n: usize,
    apply: impl Fn(&[T]) -> Vec<T>,
    iters: usize,
) -> T {
    // Deterministic pseudo-random start vector avoids symmetry traps.
    let mut v: Vec<T> = (0..n)
        .map(|i| {
            let x = ((i * 2654435761usize) % 1000) as f64 / 1000.0 - 0.5;
            T::of(x + 0.01)
        })
        .collect();
    let mut lambda = T::zero();
    for _ in 0..iters {
        let w = apply(&v);
        let norm = w.iter().map(|x| *x * *x).sum::<T>().sqrt();
        if norm == T::zero() {
            return T::zero();
        }
        let vw: T = v.iter().zip(w.iter()).map(|(a, b)| *a * *b).sum();
        lambda = vw;
        for (vi, wi) in v.iter_mut().zip(w.iter()) {
            *vi = *wi / norm;
        }
    }
    lambda
}
