//! Grid-sampled scalar functions with first and second derivatives.

use std::io::Write;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Uniform grid specification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    pub min: T,
    pub max: T,
    pub n: usize,
}

impl<T: Scalar> GridSpec<T> {
    pub fn new(min: T, max: T, n: usize) -> Result<Self> {
        if !(min < max) || n < 5 {
            return Err(Error::Domain(format!(
                "grid spec needs min < max and n >= 5, got [{}, {}] with n = {}",
                min, max, n
            )));
        }
        Ok(Self { min, max, n })
    }

    pub fn step(&self) -> T {
        (self.max - self.min) / T::from_usize(self.n - 1).unwrap()
    }

    pub fn points(&self) -> Vec<T> {
        let h = self.step();
        (0..self.n)
            .map(|i| self.min + h * T::from_usize(i).unwrap())
            .collect()
    }

    pub fn abs_max(&self) -> T {
        self.min.abs().max(self.max.abs())
    }
}

/// Scalar function tabulated on a uniform grid together with its first two
/// derivatives. Immutable after construction; shares freely across threads.
#[derive(Debug, Clone)]
pub struct TabulatedFunction<T> {
    grid: Vec<T>,
    values: Vec<T>,
    d1: Vec<T>,
    d2: Vec<T>,
    source: String,
}

impl<T: Scalar> TabulatedFunction<T> {
    pub fn new(
        grid: Vec<T>,
        values: Vec<T>,
        d1: Vec<T>,
        d2: Vec<T>,
        source: impl Into<String>,
    ) -> Result<Self> {
        let n = grid.len();
        if n < 5 {
            return Err(Error::Domain("tabulated function needs >= 5 nodes".into()));
        }
        if values.len() != n || d1.len() != n || d2.len() != n {
            return Err(Error::Domain("tabulated arrays of unequal length".into()));
        }
        let h = grid[1] - grid[0];
        if h <= T::zero() {
            return Err(Error::Domain("grid must be strictly increasing".into()));
        }
        let tol = T::of(1e-12) * h.abs().max(grid[n - 1].abs());
        for i in 1..n {
            if ((grid[i] - grid[i - 1]) - h).abs() > tol {
                return Err(Error::Domain(format!(
                    "grid not uniform at node {} (step {} vs {})",
                    i,
                    grid[i] - grid[i - 1],
                    h
                )));
            }
        }
        Ok(Self { grid, values, d1, d2, source: source.into() })
    }

    /// Tabulate from values alone; derivatives by 4th-order finite differences
    /// (centered in the interior, one-sided at the edges).
    pub fn from_values(grid: Vec<T>, values: Vec<T>, source: impl Into<String>) -> Result<Self> {
        let h = grid[1] - grid[0];
        let (d1, d2) = fd_derivatives(&values, h);
        Self::new(grid, values, d1, d2, source)
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn d1(&self) -> &[T] {
        &self.d1
    }

    pub fn d2(&self) -> &[T] {
        &self.d2
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn x_min(&self) -> T {
        self.grid[0]
    }

    pub fn x_max(&self) -> T {
        *self.grid.last().unwrap()
    }

    pub fn step(&self) -> T {
        self.grid[1] - self.grid[0]
    }

    fn locate(&self, x: T) -> Result<(usize, T)> {
        let h = self.step();
        let slack = T::of(1e-9) * h;
        if x < self.x_min() - slack || x > self.x_max() + slack {
            return Err(Error::Extrapolation(format!(
                "{} evaluated at {} outside [{}, {}]",
                self.source,
                x,
                self.x_min(),
                self.x_max()
            )));
        }
        let raw = ((x - self.x_min()) / h).floor();
        let mut i = raw.to_usize().unwrap_or(0);
        if i >= self.len() - 1 {
            i = self.len() - 2;
        }
        let t = (x - self.grid[i]) / h;
        Ok((i, t))
    }

    /// Value by cubic Hermite interpolation of (values, d1).
    pub fn eval(&self, x: T) -> Result<T> {
        let (i, t) = self.locate(x)?;
        Ok(hermite(t, self.step(), self.values[i], self.d1[i], self.values[i + 1], self.d1[i + 1]))
    }

    /// First derivative by cubic Hermite interpolation of (d1, d2).
    pub fn eval_d1(&self, x: T) -> Result<T> {
        let (i, t) = self.locate(x)?;
        Ok(hermite(t, self.step(), self.d1[i], self.d2[i], self.d1[i + 1], self.d2[i + 1]))
    }

    /// Second derivative by linear interpolation of d2.
    pub fn eval_d2(&self, x: T) -> Result<T> {
        let (i, t) = self.locate(x)?;
        Ok(self.d2[i] * (T::one() - t) + self.d2[i + 1] * t)
    }

    /// CSV dump: a comment line naming the source, then m,value,d1,d2 rows.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "# source={}", self.source)?;
        writeln!(w, "m,value,d1,d2")?;
        for i in 0..self.len() {
            writeln!(w, "{},{},{},{}", self.grid[i], self.values[i], self.d1[i], self.d2[i])?;
        }
        Ok(())
    }
}

#[inline]
fn hermite<T: Scalar>(t: T, h: T, f0: T, g0: T, f1: T, g1: T) -> T {
    let one = T::one();
    let two = T::of(2.0);
    let three = T::of(3.0);
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = two * t3 - three * t2 + one;
    let h10 = t3 - two * t2 + t;
    let h01 = -two * t3 + three * t2;
    let h11 = t3 - t2;
    h00 * f0 + h10 * h * g0 + h01 * f1 + h11 * h * g1
}

/// Finite-difference weights on arbitrary nodes (Fornberg's recursion):
/// weights for the m-th derivative at z from samples at `x`.
pub(crate) fn fornberg_weights<T: Scalar>(z: T, x: &[T], m: usize) -> Vec<T> {
    let n = x.len();
    let mut c = vec![vec![T::zero(); m + 1]; n];
    let mut c1 = T::one();
    let mut c4 = x[0] - z;
    c[0][0] = T::one();
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = T::one();
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 = c2 * c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (T::from_usize(k).unwrap() * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - T::from_usize(k).unwrap() * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// 4th-order finite-difference first and second derivatives on a uniform
/// grid: 5-point centered stencils in the interior, 6-point one-sided at the
/// two nodes nearest each edge.
pub(crate) fn fd_derivatives<T: Scalar>(values: &[T], h: T) -> (Vec<T>, Vec<T>) {
    let n = values.len();
    assert!(n >= 6, "need at least 6 nodes for edge stencils");
    let mut d1 = vec![T::zero(); n];
    let mut d2 = vec![T::zero(); n];

    let offsets: Vec<T> = (0..6).map(|i| T::from_usize(i).unwrap() * h).collect();
    let stencil = |at: usize, nodes: std::ops::Range<usize>, m: usize| -> Vec<T> {
        let z = T::from_usize(at).unwrap() * h;
        let xs: Vec<T> = nodes.map(|i| offsets[i]).collect();
        fornberg_weights(z, &xs, m)
    };
    // Edge weights relative to the first (last) six nodes.
    let w1_edge: [Vec<T>; 2] = [stencil(0, 0..6, 1), stencil(1, 0..6, 1)];
    let w2_edge: [Vec<T>; 2] = [stencil(0, 0..6, 2), stencil(1, 0..6, 2)];

    let apply = |w: &[T], vals: &[T]| -> T {
        w.iter().zip(vals.iter()).map(|(a, b)| *a * *b).sum()
    };

    for i in 0..2 {
        d1[i] = apply(&w1_edge[i], &values[0..6]);
        d2[i] = apply(&w2_edge[i], &values[0..6]);
        // mirrored at the right edge
        let rev: Vec<T> = values[n - 6..n].iter().rev().copied().collect();
        d1[n - 1 - i] = -apply(&w1_edge[i], &rev);
        d2[n - 1 - i] = apply(&w2_edge[i], &rev);
    }

    let c12 = T::of(12.0);
    let h12 = c12 * h;
    let h2_12 = c12 * h * h;
    let (c8, c16, c30) = (T::of(8.0), T::of(16.0), T::of(30.0));
    for i in 2..n - 2 {
        d1[i] = (-values[i + 2] + c8 * values[i + 1] - c8 * values[i - 1] + values[i - 2]) / h12;
        d2[i] = (-values[i + 2] + c16 * values[i + 1] - c30 * values[i] + c16 * values[i - 1]
            - values[i - 2])
            / h2_12;
    }
    (d1, d2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fornberg_reproduces_classical_central_weights() {
        let x: Vec<f64> = vec![-2.0, -1.0, 0.0, 1.0, 2.0];
        let w1 = fornberg_weights(0.0, &x, 1);
        let expect1 = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        for (a, b) in w1.iter().zip(expect1.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-13);
        }
        let w2 = fornberg_weights(0.0, &x, 2);
        let expect2 = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
        for (a, b) in w2.iter().zip(expect2.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-13);
        }
    }

    #[test]
    fn fd_derivatives_fourth_order_on_sin() {
        let n = 101;
        let h = 0.02_f64;
        let values: Vec<f64> = (0..n).map(|i| (i as f64 * h).sin()).collect();
        let (d1, d2) = fd_derivatives(&values, h);
        for i in 0..n {
            let x = i as f64 * h;
            assert_relative_eq!(d1[i], x.cos(), epsilon = 5e-8);
            assert_relative_eq!(d2[i], -x.sin(), epsilon = 5e-6);
        }
    }

    #[test]
    fn tabulated_rejects_nonuniform_grid() {
        let mut grid: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        grid[5] += 1e-3;
        let vals = vec![0.0; 10];
        assert!(TabulatedFunction::new(grid, vals.clone(), vals.clone(), vals, "bad").is_err());
    }

    #[test]
    fn fd_consistency_invariant_on_tabulated_smooth_function() {
        // d1, d2 consistent with second-order central differences of values.
        let spec = GridSpec::new(-1.0_f64, 1.0, 201).unwrap();
        let grid = spec.points();
        let values: Vec<f64> = grid.iter().map(|x| (0.7 * x).cosh()).collect();
        let f = TabulatedFunction::from_values(grid, values, "cosh").unwrap();
        let h = f.step();
        for i in 1..f.len() - 1 {
            let c1 = (f.values()[i + 1] - f.values()[i - 1]) / (2.0 * h);
            let c2 = (f.values()[i + 1] - 2.0 * f.values()[i] + f.values()[i - 1]) / (h * h);
            assert_relative_eq!(c1, f.d1()[i], epsilon = 2.0 * h * h);
            assert_relative_eq!(c2, f.d2()[i], epsilon = 2.0 * h * h);
        }
    }

    #[test]
    fn hermite_eval_matches_function() {
        let spec = GridSpec::new(-2.0_f64, 2.0, 101).unwrap();
        let grid = spec.points();
        let values: Vec<f64> = grid.iter().map(|x| x.exp()).collect();
        let d1 = values.clone();
        let d2 = values.clone();
        let f = TabulatedFunction::new(grid, values, d1, d2, "exp").unwrap();
        for k in 0..400 {
            let x = -2.0 + 4.0 * (k as f64 + 0.37) / 400.0;
            assert_relative_eq!(f.eval(x).unwrap(), x.exp(), epsilon = 1e-7);
            assert_relative_eq!(f.eval_d1(x).unwrap(), x.exp(), epsilon = 1e-7);
        }
        assert!(f.eval(2.5).is_err());
        assert!(f.eval(-2.5).is_err());
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let spec = GridSpec::new(0.0_f64, 1.0, 5).unwrap();
        let grid = spec.points();
        let z = vec![0.0; 5];
        let f = TabulatedFunction::new(grid, z.clone(), z.clone(), z, "phi zero").unwrap();
        let mut out = Vec::new();
        f.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# source=phi zero");
        assert_eq!(lines.next().unwrap(), "m,value,d1,d2");
        assert_eq!(lines.count(), 5);
    }
}
