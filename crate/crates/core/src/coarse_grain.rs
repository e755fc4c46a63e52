//! Macroscopic scale: the block-average projection P, the coarse-grained
//! Hamiltonian H-bar with certified convexity, the macroscopic operator
//! A-bar, the local Gibbs state, and the two-scale LSI constant.
//!
//! Conventions: X carries the plain l2 inner product, Y carries
//! <y, z>_Y = (1/M) sum y_j z_j, and the reference measure on the
//! constrained macroscopic space Y_{M,m} is the (M-1)-dimensional Lebesgue
//! surface measure in orthonormal l2 coordinates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{power_iteration, SymMatrix};
use crate::microscale::{theta_functional_lifted, KawasakiOperator, MicroEnsemble};
use crate::potentials::TabulatedFunction;
use crate::scalar::{RandScalar, Scalar};

/// Block-average projection from N sites onto M blocks of size K = N/M.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Projection {
    n_sites: usize,
    n_blocks: usize,
    block_size: usize,
}

impl Projection {
    pub fn new(n_sites: usize, n_blocks: usize) -> Result<Self> {
        if n_blocks == 0 || n_sites % n_blocks != 0 {
            return Err(Error::Domain(format!(
                "N = {} not divisible into M = {} blocks",
                n_sites, n_blocks
            )));
        }
        Ok(Self { n_sites, n_blocks, block_size: n_sites / n_blocks })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// y_j = block average of x.
    pub fn project<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.n_sites {
            return Err(Error::Domain(format!(
                "project: vector length {} != N = {}",
                x.len(),
                self.n_sites
            )));
        }
        let k = T::from_usize(self.block_size).unwrap();
        Ok(x.chunks(self.block_size)
            .map(|c| c.iter().copied().sum::<T>() / k)
            .collect())
    }

    /// N P^t y: each block filled with its y_j.
    pub fn lift<T: Scalar>(&self, y: &[T]) -> Result<Vec<T>> {
        if y.len() != self.n_blocks {
            return Err(Error::Domain(format!(
                "lift: vector length {} != M = {}",
                y.len(),
                self.n_blocks
            )));
        }
        let mut out = Vec::with_capacity(self.n_sites);
        for &v in y {
            out.extend(std::iter::repeat(v).take(self.block_size));
        }
        Ok(out)
    }
}

/// Macroscopic profile on Y_{M,m}: M block values of mean m.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroProfile<T> {
    values: Vec<T>,
    mean: T,
}

impl<T: Scalar> MacroProfile<T> {
    pub fn new(values: Vec<T>, mean: T) -> Result<Self> {
        let n = T::from_usize(values.len()).unwrap();
        let avg = values.iter().copied().sum::<T>() / n;
        if (avg - mean).abs() > T::of(1e-10) * (T::one() + mean.abs()) {
            return Err(Error::Domain(format!(
                "profile mean {} differs from declared {}",
                avg, mean
            )));
        }
        Ok(Self { values, mean })
    }

    pub fn from_values(values: Vec<T>) -> Self {
        let n = T::from_usize(values.len()).unwrap();
        let mean = values.iter().copied().sum::<T>() / n;
        Self { values, mean }
    }

    pub fn constant(m_blocks: usize, mean: T) -> Self {
        Self { values: vec![mean; m_blocks], mean }
    }

    pub fn n_blocks(&self) -> usize {
        self.values.len()
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// <self, other>_Y = (1/M) sum y_j z_j.
    pub fn inner_y(&self, other: &[T]) -> T {
        let m = T::from_usize(self.values.len()).unwrap();
        self.values.iter().zip(other.iter()).map(|(&a, &b)| a * b).sum::<T>() / m
    }
}

/// |v|_Y^2 = (1/M) sum v_j^2 of a Y-tangent vector.
pub fn norm_y_sq<T: Scalar>(v: &[T]) -> T {
    let m = T::from_usize(v.len()).unwrap();
    v.iter().map(|&a| a * a).sum::<T>() / m
}

/// Subtract the average: the tangent-space projection of a Y gradient.
pub fn center<T: Scalar>(v: &[T]) -> Vec<T> {
    let m = T::from_usize(v.len()).unwrap();
    let avg = v.iter().copied().sum::<T>() / m;
    v.iter().map(|&a| a - avg).collect()
}

/// Coarse-grained Hamiltonian H-bar(y) = (1/M) sum psi_K(y_j) + (1/N) log Z-bar
/// with certified convexity window [lambda, Lambda].
#[derive(Debug, Clone)]
pub struct CoarseHamiltonian<T> {
    psi_k: TabulatedFunction<T>,
    n_sites: usize,
    n_blocks: usize,
    mean: T,
    pub lambda: T,
    pub big_lambda: T,
    log_zbar_per_n: T,
    log_zbar_bracket: (T, T),
}

impl<T: Scalar> CoarseHamiltonian<T> {
    pub fn new(
        psi_k: TabulatedFunction<T>,
        n_sites: usize,
        n_blocks: usize,
        mean: T,
    ) -> Result<Self> {
        if n_blocks == 0 || n_sites % n_blocks != 0 {
            return Err(Error::Domain("N must be a multiple of M".into()));
        }
        let (lambda, big_lambda) = crate::potentials::convexity_bounds(&psi_k);
        if !(lambda > T::zero()) {
            return Err(Error::Precondition(format!(
                "coarse Hamiltonian not uniformly convex on the window: lambda = {}",
                lambda
            )));
        }
        let mut h = Self {
            psi_k,
            n_sites,
            n_blocks,
            mean,
            lambda,
            big_lambda,
            log_zbar_per_n: T::zero(),
            log_zbar_bracket: (T::zero(), T::zero()),
        };
        let bracket = h.laplace_bracket()?;
        let value = if n_blocks <= 3 {
            let v = h.log_partition_quadrature()?;
            if v < bracket.0 - T::of(1e-6) || v > bracket.1 + T::of(1e-6) {
                return Err(Error::Consistency(format!(
                    "quadrature log partition {} outside the Laplace bracket [{}, {}]",
                    v, bracket.0, bracket.1
                )));
            }
            v
        } else {
            (bracket.0 + bracket.1) * T::of(0.5)
        };
        h.log_zbar_per_n = value;
        h.log_zbar_bracket = bracket;
        Ok(h)
    }

    pub fn psi_k(&self) -> &TabulatedFunction<T> {
        &self.psi_k
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    /// (1/N) log Z-bar (quadrature value for M <= 3, bracket midpoint above).
    pub fn log_partition_per_n(&self) -> T {
        self.log_zbar_per_n
    }

    /// Two-sided Laplace bracket around (1/N) log Z-bar from the lambda /
    /// Lambda Gaussian comparison at the constrained minimum psi_K(m).
    pub fn log_partition_bracket(&self) -> (T, T) {
        self.log_zbar_bracket
    }

    /// (1/M) sum psi_K(y_j), the energy without the partition constant.
    pub fn energy0(&self, y: &[T]) -> Result<T> {
        let m = T::from_usize(self.n_blocks).unwrap();
        let mut acc = T::zero();
        for &v in y {
            acc += self.psi_k.eval(v)?;
        }
        Ok(acc / m)
    }

    /// H-bar(y).
    pub fn energy(&self, y: &MacroProfile<T>) -> Result<T> {
        Ok(self.energy0(y.values())? + self.log_zbar_per_n)
    }

    /// Constrained minimum of H-bar over Y_{M,m} (attained at the constant
    /// profile by convexity).
    pub fn energy_min(&self) -> Result<T> {
        Ok(self.psi_k.eval(self.mean)? + self.log_zbar_per_n)
    }

    /// Y-metric gradient of H-bar on the tangent space: components
    /// psi_K'(y_j), centered.
    pub fn grad(&self, y: &MacroProfile<T>) -> Result<Vec<T>> {
        let mut g = Vec::with_capacity(self.n_blocks);
        for &v in y.values() {
            g.push(self.psi_k.eval_d1(v)?);
        }
        Ok(center(&g))
    }

    fn laplace_bracket(&self) -> Result<(T, T)> {
        let m = T::from_usize(self.n_blocks).unwrap();
        let n = T::from_usize(self.n_sites).unwrap();
        let psi_m = self.psi_k.eval(self.mean)?;
        if self.n_blocks == 1 {
            return Ok((-psi_m, -psi_m));
        }
        let pref = (m - T::one()) / (T::of(2.0) * n);
        let two_pi_m = T::of(std::f64::consts::TAU) * m;
        let lo = -psi_m + pref * (two_pi_m / (self.big_lambda * n)).ln();
        let hi = -psi_m + pref * (two_pi_m / (self.lambda * n)).ln();
        Ok((lo, hi))
    }

    /// Direct quadrature of (1/N) log int exp(-N/M sum psi_K) over Y_{M,m}
    /// (M <= 3).
    fn log_partition_quadrature(&self) -> Result<T> {
        let n = T::from_usize(self.n_sites).unwrap();
        if self.n_blocks == 1 {
            return Ok(-self.psi_k.eval(self.mean)?);
        }
        let quad = HyperplaneQuad::new(self, self.mean)?;
        let g0 = vec![T::zero(); self.n_blocks];
        let logz = quad.log_integral(|y, acc| acc.energy_only(self, y, &g0))?;
        Ok(logz / n)
    }
}

/// Quadrature over the (M-1)-dimensional constrained space for M in {2, 3}:
/// an orthonormal-coordinate box of half-width 8 sigma around the constant
/// profile, with sigma^2 = M/(lambda N).
struct HyperplaneQuad<T> {
    basis: Vec<Vec<T>>,
    origin: Vec<T>,
    half_width: T,
    n_axis: usize,
}

#[derive(Clone, Copy)]
struct QuadAccess;

impl QuadAccess {
    /// exponent -N/M sum psi_K(y_j) + N <g, y>_Y for the tilted integrals
    fn energy_only<T: Scalar>(
        &self,
        h: &CoarseHamiltonian<T>,
        y: &[T],
        g: &[T],
    ) -> Result<T> {
        let n = T::from_usize(h.n_sites).unwrap();
        let m = T::from_usize(h.n_blocks).unwrap();
        let mut acc = T::zero();
        let mut tilt = T::zero();
        for (&v, &gi) in y.iter().zip(g.iter()) {
            acc += h.psi_k.eval(v)?;
            tilt += gi * v;
        }
        Ok(n * (tilt / m - acc / m))
    }
}

/// Orthonormal l2 basis of the mean-zero tangent subspace, for the
/// low-dimensional quadrature and histogram coordinates (M in {2, 3}).
pub fn tangent_basis<T: Scalar>(m_blocks: usize) -> Result<Vec<Vec<T>>> {
    match m_blocks {
        2 => {
            let s = T::of(1.0 / std::f64::consts::SQRT_2);
            Ok(vec![vec![s, -s]])
        }
        3 => {
            let s2 = T::of(1.0 / std::f64::consts::SQRT_2);
            let s6 = T::of(1.0 / 6.0_f64.sqrt());
            Ok(vec![vec![s2, -s2, T::zero()], vec![s6, s6, -T::of(2.0) * s6]])
        }
        other => Err(Error::Precondition(format!(
            "tangent coordinates supported for M in {{2, 3}}, got {}",
            other
        ))),
    }
}

impl<T: Scalar> HyperplaneQuad<T> {
    fn new(h: &CoarseHamiltonian<T>, mean: T) -> Result<Self> {
        let m_blocks = h.n_blocks;
        let basis = tangent_basis::<T>(m_blocks)?;
        let n = T::from_usize(h.n_sites).unwrap();
        let m = T::from_usize(m_blocks).unwrap();
        let sigma = (m / (h.lambda * n)).sqrt();
        let mut half_width = T::of(8.0) * sigma;
        // clamp inside the tabulated window
        let max_coeff = basis
            .iter()
            .flat_map(|b| b.iter())
            .fold(T::zero(), |a, &v| a.max(v.abs()));
        let room = (h.psi_k.x_max() - mean).min(mean - h.psi_k.x_min()) / max_coeff;
        if room < T::of(6.0) * sigma {
            return Err(Error::Numerical(
                "psi_K table too narrow for the hyperplane quadrature".into(),
            ));
        }
        half_width = half_width.min(room * T::of(0.999));
        Ok(Self { basis, origin: vec![mean; m_blocks], half_width, n_axis: 601 })
    }

    fn point(&self, coords: &[T]) -> Vec<T> {
        let mut y = self.origin.clone();
        for (b, &c) in self.basis.iter().zip(coords.iter()) {
            for (yi, &bi) in y.iter_mut().zip(b.iter()) {
                *yi += c * bi;
            }
        }
        y
    }

    /// log of int exp(E(y)) over the box, trapezoid in orthonormal coords.
    fn log_integral(&self, log_f: impl Fn(&[T], &QuadAccess) -> Result<T>) -> Result<T> {
        let (vals, _pts) = self.tabulate(&log_f)?;
        let h = self.step();
        let dim = self.basis.len();
        let emax = vals.iter().copied().fold(T::neg_infinity(), T::max);
        let mut acc = T::zero();
        for (i, &e) in vals.iter().enumerate() {
            acc += self.weight(i) * (e - emax).exp();
        }
        Ok(emax + (acc * h.powi(dim as i32)).ln())
    }

    /// E_G[y] under the density proportional to exp(E(y)).
    fn mean_vector(&self, log_f: impl Fn(&[T], &QuadAccess) -> Result<T>) -> Result<Vec<T>> {
        let (vals, pts) = self.tabulate(&log_f)?;
        let emax = vals.iter().copied().fold(T::neg_infinity(), T::max);
        let mut z = T::zero();
        let mut mean = vec![T::zero(); self.origin.len()];
        for (i, &e) in vals.iter().enumerate() {
            let w = self.weight(i) * (e - emax).exp();
            z += w;
            for (mj, &yj) in mean.iter_mut().zip(pts[i].iter()) {
                *mj += w * yj;
            }
        }
        for mj in mean.iter_mut() {
            *mj = *mj / z;
        }
        Ok(mean)
    }

    fn step(&self) -> T {
        T::of(2.0) * self.half_width / T::from_usize(self.n_axis - 1).unwrap()
    }

    fn weight(&self, idx: usize) -> T {
        let half = T::of(0.5);
        match self.basis.len() {
            1 => {
                if idx == 0 || idx == self.n_axis - 1 {
                    half
                } else {
                    T::one()
                }
            }
            _ => {
                let (i, j) = (idx / self.n_axis, idx % self.n_axis);
                let wi = if i == 0 || i == self.n_axis - 1 { half } else { T::one() };
                let wj = if j == 0 || j == self.n_axis - 1 { half } else { T::one() };
                wi * wj
            }
        }
    }

    fn tabulate(
        &self,
        log_f: &impl Fn(&[T], &QuadAccess) -> Result<T>,
    ) -> Result<(Vec<T>, Vec<Vec<T>>)> {
        let acc = QuadAccess;
        let h = self.step();
        let start = -self.half_width;
        let dim = self.basis.len();
        let count = if dim == 1 { self.n_axis } else { self.n_axis * self.n_axis };
        let mut vals = Vec::with_capacity(count);
        let mut pts = Vec::with_capacity(count);
        for idx in 0..count {
            let coords: Vec<T> = if dim == 1 {
                vec![start + h * T::from_usize(idx).unwrap()]
            } else {
                vec![
                    start + h * T::from_usize(idx / self.n_axis).unwrap(),
                    start + h * T::from_usize(idx % self.n_axis).unwrap(),
                ]
            };
            let y = self.point(&coords);
            vals.push(log_f(&y, &acc)?);
            pts.push(y);
        }
        Ok((vals, pts))
    }
}

/// The local Gibbs state G^eta: density proportional to
/// exp(N(<grad H-bar(eta), y>_Y - (1/M) sum psi_K(y_j))) on Y_{M,m}.
pub struct LocalGibbs<'a, T> {
    ham: &'a CoarseHamiltonian<T>,
    eta: MacroProfile<T>,
    grad_eta: Vec<T>,
    log_norm: Option<T>,
}

impl<'a, T: Scalar> LocalGibbs<'a, T> {
    pub fn new(ham: &'a CoarseHamiltonian<T>, eta: MacroProfile<T>) -> Result<Self> {
        if eta.n_blocks() != ham.n_blocks() {
            return Err(Error::Domain("profile size != M".into()));
        }
        let grad_eta = ham.grad(&eta)?;
        let log_norm = if (2..=3).contains(&ham.n_blocks()) {
            let quad = HyperplaneQuad::new(ham, eta.mean())?;
            Some(quad.log_integral(|y, acc| acc.energy_only(ham, y, &grad_eta))?)
        } else {
            None
        };
        Ok(Self { ham, eta, grad_eta, log_norm })
    }

    pub fn grad_eta(&self) -> &[T] {
        &self.grad_eta
    }

    pub fn eta(&self) -> &MacroProfile<T> {
        &self.eta
    }

    /// Log density at y: normalized over the quadrature grid for M <= 3,
    /// otherwise up to the unknown additive constant.
    pub fn log_density(&self, y: &MacroProfile<T>) -> Result<T> {
        if y.n_blocks() != self.ham.n_blocks() {
            return Err(Error::Domain("profile size != M".into()));
        }
        let n = T::from_usize(self.ham.n_sites()).unwrap();
        let e = n * (self.eta.inner_y(&self.grad_eta) * T::zero()
            + MacroProfile::new(y.values().to_vec(), y.mean())?.inner_y(&self.grad_eta)
            - self.ham.energy0(y.values())?);
        Ok(e - self.log_norm.unwrap_or(T::zero()))
    }

    /// Mean-preserving exchange Metropolis targeting the local Gibbs
    /// density; returns R samples (flattened R x M) and the acceptance rate.
    pub fn sample(&self, r: usize, seed: u64, sweeps: usize) -> Result<(Vec<T>, T)>
    where
        T: RandScalar,
    {
        if r < 1 {
            return Err(Error::Precondition("need at least one sample".into()));
        }
        let m = self.ham.n_blocks();
        if m < 2 {
            return Err(Error::Domain("sampling needs M >= 2".into()));
        }
        let n_t = T::from_usize(self.ham.n_sites()).unwrap();
        let m_t = T::from_usize(m).unwrap();
        // proposals scaled to the target width sqrt(M/(lambda N))
        let scale = T::of(2.0) * (m_t / (self.ham.lambda * n_t)).sqrt();
        let mut out = vec![T::zero(); r * m];
        let mut accepted = 0usize;
        let mut proposed = 0usize;
        for ridx in 0..r {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (ridx as u64));
            let row = &mut out[ridx * m..(ridx + 1) * m];
            row.copy_from_slice(self.eta.values());
            for _ in 0..sweeps {
                for _ in 0..m {
                    proposed += 1;
                    let i = rng.gen_range(0..m);
                    let mut j = rng.gen_range(0..m - 1);
                    if j >= i {
                        j += 1;
                    }
                    let d = (T::of(2.0) * T::unit_uniform(&mut rng) - T::one()) * scale;
                    let (yi, yj) = (row[i], row[j]);
                    let (pi_new, pj_new) = (yi + d, yj - d);
                    if pi_new < self.ham.psi_k.x_min()
                        || pi_new > self.ham.psi_k.x_max()
                        || pj_new < self.ham.psi_k.x_min()
                        || pj_new > self.ham.psi_k.x_max()
                    {
                        continue;
                    }
                    // Delta of N(<g, y>_Y - (1/M) sum psi_K)
                    let de = n_t / m_t
                        * ((self.grad_eta[i] - self.grad_eta[j]) * d
                            - (self.ham.psi_k.eval(pi_new)? + self.ham.psi_k.eval(pj_new)?
                                - self.ham.psi_k.eval(yi)?
                                - self.ham.psi_k.eval(yj)?));
                    let accept = de >= T::zero() || T::unit_uniform(&mut rng) < de.exp();
                    if accept {
                        row[i] = pi_new;
                        row[j] = pj_new;
                        accepted += 1;
                    }
                }
            }
        }
        let rate = T::from_usize(accepted).unwrap() / T::from_usize(proposed.max(1)).unwrap();
        Ok((out, rate))
    }

    /// E_G[y] by quadrature (M <= 3).
    pub fn mean_by_quadrature(&self) -> Result<Vec<T>> {
        let quad = HyperplaneQuad::new(self.ham, self.eta.mean())?;
        quad.mean_vector(|y, acc| acc.energy_only(self.ham, y, &self.grad_eta))
    }

    /// E_G |y - eta|_Y^2 by quadrature (M <= 3).
    pub fn second_moment_by_quadrature(&self) -> Result<T> {
        let quad = HyperplaneQuad::new(self.ham, self.eta.mean())?;
        let (vals, pts) = quad.tabulate(&|y, acc| acc.energy_only(self.ham, y, &self.grad_eta))?;
        let emax = vals.iter().copied().fold(T::neg_infinity(), T::max);
        let mut z = T::zero();
        let mut mom = T::zero();
        for (i, &e) in vals.iter().enumerate() {
            let w = quad.weight(i) * (e - emax).exp();
            z += w;
            let mut d2 = T::zero();
            for (a, b) in pts[i].iter().zip(self.eta.values().iter()) {
                d2 += (*a - *b) * (*a - *b);
            }
            mom += w * d2 / T::from_usize(self.ham.n_blocks()).unwrap();
        }
        Ok(mom / z)
    }

    /// Profile at orthonormal tangent coordinates around eta (M <= 3).
    pub fn point_at_coords(&self, coords: &[T]) -> Result<MacroProfile<T>> {
        let basis = tangent_basis::<T>(self.ham.n_blocks())?;
        if coords.len() != basis.len() {
            return Err(Error::Domain("coordinate count != tangent dimension".into()));
        }
        let mut y = self.eta.values().to_vec();
        for (b, &c) in basis.iter().zip(coords.iter()) {
            for (yi, &bi) in y.iter_mut().zip(b.iter()) {
                *yi += c * bi;
            }
        }
        MacroProfile::new(y, self.eta.mean())
    }

    /// exact sampler for the quadratic case psi_K'' = 1: y = eta +
    /// sqrt(M/N) Pi w with white w (law of the Gaussian local Gibbs state).
    pub fn sample_gaussian_exact(&self, r: usize, seed: u64) -> Vec<T>
    where
        T: RandScalar,
    {
        let m = self.ham.n_blocks();
        let n_t = T::from_usize(self.ham.n_sites()).unwrap();
        let m_t = T::from_usize(m).unwrap();
        let sd = (m_t / n_t).sqrt();
        let mut out = vec![T::zero(); r * m];
        for ridx in 0..r {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (ridx as u64));
            let row = &mut out[ridx * m..(ridx + 1) * m];
            let w: Vec<T> = (0..m).map(|_| T::standard_normal(&mut rng)).collect();
            let avg = w.iter().copied().sum::<T>() / m_t;
            for (o, (&wi, &ei)) in row.iter_mut().zip(w.iter().zip(self.eta.values().iter())) {
                *o = ei + sd * (wi - avg);
            }
        }
        out
    }
}

/// Dense symmetric macroscopic operator A-bar with A-bar^{-1} = P A^{-1} N P^t,
/// assembled column-wise through the circulant inverse and inverted on the
/// mean-zero tangent space.
#[derive(Debug, Clone)]
pub struct MacroOperator<T> {
    m_blocks: usize,
    abar: SymMatrix<T>,
    abar_inv: SymMatrix<T>,
    lambda_max: T,
    lambda_min: T,
}

/// Assemble A-bar for the given projection and Kawasaki operator.
pub fn build_macro_operator<T: Scalar>(
    proj: &Projection,
    op: &KawasakiOperator<T>,
) -> Result<MacroOperator<T>> {
    if proj.n_sites() != op.n_sites() {
        return Err(Error::Domain("projection and operator disagree on N".into()));
    }
    let m = proj.n_blocks();
    let m_t = T::from_usize(m).unwrap();
    let mut inv = SymMatrix::zeros(m);
    let mut buf = op.make_buf();
    for j in 0..m {
        let mut e = vec![T::zero(); m];
        e[j] = T::one();
        let e = center(&e);
        let x = proj.lift(&e)?;
        let z = op.apply_inverse_with(&x, &mut buf)?;
        let col = center(&proj.project(&z)?);
        for i in 0..m {
            inv.set(i, j, col[i]);
        }
    }
    let asym = inv.asymmetry();
    if asym > T::of(1e-9) {
        return Err(Error::Numerical(format!("A-bar^-1 assembly asymmetric by {}", asym)));
    }
    inv.symmetrize();
    // shift the kernel (constants) to eigenvalue 1, invert, shift back
    let mut shifted = inv.clone();
    for i in 0..m {
        for j in 0..m {
            let v = shifted.at(i, j) + T::one() / m_t;
            shifted.set(i, j, v);
        }
    }
    let mut abar = shifted.spd_inverse()?;
    for i in 0..m {
        for j in 0..m {
            let v = abar.at(i, j) - T::one() / m_t;
            abar.set(i, j, v);
        }
    }
    abar.symmetrize();
    let apply = |v: &[T]| abar.matvec(&center(v));
    let lambda_max = power_iteration(m, apply, 200);
    let apply_inv = |v: &[T]| inv.matvec(&center(v));
    let inv_max = power_iteration(m, apply_inv, 200);
    Ok(MacroOperator { m_blocks: m, abar, abar_inv: inv, lambda_max, lambda_min: T::one() / inv_max })
}

impl<T: Scalar> MacroOperator<T> {
    pub fn n_blocks(&self) -> usize {
        self.m_blocks
    }

    /// A-bar y on the tangent space (input centered first).
    pub fn apply(&self, y: &[T]) -> Vec<T> {
        self.abar.matvec(&center(y))
    }

    /// A-bar^{-1} y on the tangent space.
    pub fn apply_inverse(&self, y: &[T]) -> Vec<T> {
        self.abar_inv.matvec(&center(y))
    }

    /// Largest eigenvalue on the tangent space.
    pub fn lambda_max(&self) -> T {
        self.lambda_max
    }

    /// Smallest tangent eigenvalue (spectral floor, >= tau of A).
    pub fn lambda_min(&self) -> T {
        self.lambda_min
    }

    pub fn matrix(&self) -> &SymMatrix<T> {
        &self.abar
    }
}

/// Theta functional against a macroscopic profile (lifts eta and averages
/// the A^{-1}-weighted square distance over replicas).
pub fn theta_functional<T: Scalar + Send + Sync>(
    e: &MicroEnsemble<T>,
    eta: &MacroProfile<T>,
    op: &KawasakiOperator<T>,
    proj: &Projection,
) -> Result<(T, T)> {
    if (eta.mean() - e.mean()).abs() > T::of(1e-9) * (T::one() + e.mean().abs()) {
        return Err(Error::Precondition(format!(
            "profile mean {} != ensemble mean {}",
            eta.mean(),
            e.mean()
        )));
    }
    let lifted = proj.lift(eta.values())?;
    theta_functional_lifted(e, &lifted, op)
}

/// Two-scale logarithmic Sobolev constant (kappa = 0 reduces exactly to
/// min(rho, lambda)):
/// rho_hat = (rho + lambda + kappa^2/rho
///            - sqrt((rho + lambda + kappa^2/rho)^2 - 4 rho lambda)) / 2.
pub fn two_scale_lsi_constant<T: Scalar>(rho: T, lambda: T, kappa: T) -> Result<T> {
    if !(rho > T::zero()) || !(lambda > T::zero()) {
        return Err(Error::Domain(format!(
            "two-scale LSI needs rho, lambda > 0 (got {}, {})",
            rho, lambda
        )));
    }
    if kappa < T::zero() {
        return Err(Error::Domain("kappa must be nonnegative".into()));
    }
    if kappa == T::zero() {
        return Ok(rho.min(lambda));
    }
    let s = rho + lambda + kappa * kappa / rho;
    let disc = (s * s - T::of(4.0) * rho * lambda).max(T::zero());
    let rho_hat = T::of(0.5) * (s - disc.sqrt());
    debug_assert!(rho_hat > T::zero() && rho_hat <= rho.min(lambda) + T::of(1e-12));
    Ok(rho_hat)
}

/// Gaussian integral of the Y norm: Gamma(Y, |.|_Y) = (2 pi M)^{(M-1)/2},
/// evaluated in log space.
pub fn gamma_y<T: Scalar>(m_blocks: usize) -> T {
    if m_blocks <= 1 {
        return T::one();
    }
    let m = T::from_usize(m_blocks).unwrap();
    let half = T::of(0.5);
    (half * (m - T::one()) * (T::of(std::f64::consts::TAU) * m).ln()).exp()
}

#[derive(Debug, Clone, Copy)]
pub struct GibbsGapReport<T> {
    pub bound: T,
    pub log_term: T,
    pub gradient_term: T,
    /// |(1/N) int Phi(G) dmu - H-bar(eta)| by quadrature, when M <= 3.
    pub lhs: Option<T>,
}

/// Free-energy gap of the local Gibbs state (Prop.-style bound):
/// (M-1)/(2N) max(|log(2 pi M/(Lambda N))|, |log(2 pi M/(lambda N))|)
/// + sqrt(M/(lambda N)) |grad H-bar(eta)|_Y; the quadrature left-hand side
/// is verified against the bound for M <= 3.
pub fn gibbs_free_energy_gap<T: Scalar>(
    h: &CoarseHamiltonian<T>,
    eta: &MacroProfile<T>,
) -> Result<GibbsGapReport<T>> {
    let m = T::from_usize(h.n_blocks()).unwrap();
    let n = T::from_usize(h.n_sites()).unwrap();
    let g = h.grad(eta)?;
    let grad_norm = norm_y_sq(&g).sqrt();
    let log_term = if h.n_blocks() > 1 {
        let two_pi_m = T::of(std::f64::consts::TAU) * m;
        (m - T::one()) / (T::of(2.0) * n)
            * (two_pi_m / (h.big_lambda * n))
                .ln()
                .abs()
                .max((two_pi_m / (h.lambda * n)).ln().abs())
    } else {
        T::zero()
    };
    let gradient_term = (m / (h.lambda * n)).sqrt() * grad_norm;
    let bound = log_term + gradient_term;
    let lhs = if (2..=3).contains(&h.n_blocks()) {
        let gibbs = LocalGibbs::new(h, eta.clone())?;
        let quad = HyperplaneQuad::new(h, eta.mean())?;
        let log_z_tilt = quad.log_integral(|y, acc| acc.energy_only(h, y, &g))?;
        let mean_g = gibbs.mean_by_quadrature()?;
        let mean_profile = MacroProfile::from_values(mean_g);
        let inner = mean_profile.inner_y(&g);
        let lhs = (inner - log_z_tilt / n - h.energy0(eta.values())?).abs();
        if lhs > bound + T::of(1e-8) {
            return Err(Error::Consistency(format!(
                "free-energy gap {} exceeds its bound {}",
                lhs, bound
            )));
        }
        Some(lhs)
    } else {
        None
    };
    Ok(GibbsGapReport { bound, log_term, gradient_term, lhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{coarse_potential, GridSpec, Potential};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::Rng;

    fn psi_table(p: &Potential, k: usize) -> TabulatedFunction<f64> {
        let spec = GridSpec::new(-3.0, 3.0, 301).unwrap();
        coarse_potential(p, k, &spec).unwrap()
    }

    #[test]
    fn projection_identities() {
        let proj = Projection::new(24, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let y: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            // P N P^t = id_Y
            let back = proj.project(&proj.lift(&y).unwrap()).unwrap();
            for (a, b) in back.iter().zip(y.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
            // adjointness <lift(y), x>_X = N <y, Px>_Y
            let x: Vec<f64> = (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lhs: f64 =
                proj.lift(&y).unwrap().iter().zip(x.iter()).map(|(a, b)| a * b).sum();
            let px = proj.project(&x).unwrap();
            let rhs = 24.0 * px.iter().zip(y.iter()).map(|(a, b)| a * b).sum::<f64>() / 6.0;
            assert_relative_eq!(lhs, rhs, epsilon = 1e-12);
        }
        // idempotence and self-adjointness of N P^t P
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let x: Vec<f64> = (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let px = proj.lift(&proj.project(&x).unwrap()).unwrap();
            let ppx = proj.lift(&proj.project(&px).unwrap()).unwrap();
            for (a, b) in px.iter().zip(ppx.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
            let z: Vec<f64> = (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let pz = proj.lift(&proj.project(&z).unwrap()).unwrap();
            let lhs: f64 = px.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.iter().zip(pz.iter()).map(|(a, b)| a * b).sum();
            assert_relative_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }

    #[test]
    fn project_hand_example() {
        let proj = Projection::new(4, 2).unwrap();
        let y = proj.project(&[1.0, 3.0, -2.0, -2.0]).unwrap();
        assert_eq!(y, vec![2.0, -2.0]);
        let x = proj.lift(&[2.0, -2.0]).unwrap();
        assert_eq!(x, vec![2.0, 2.0, -2.0, -2.0]);
        let c = proj.project(&[0.7; 4]).unwrap();
        assert_eq!(c, vec![0.7, 0.7]);
    }

    #[test]
    fn grad_hbar_gaussian_is_centered_identity() {
        let p = Potential::quadratic();
        let h = CoarseHamiltonian::new(psi_table(&p, 4), 16, 4, 0.1).unwrap();
        let eta =
            MacroProfile::new(vec![0.4, 0.2, -0.1, -0.1], 0.1).unwrap();
        let g = h.grad(&eta).unwrap();
        for (gi, &ei) in g.iter().zip(eta.values().iter()) {
            assert_abs_diff_eq!(*gi, ei - 0.1, epsilon = 1e-6);
        }
        // constant profile: centered gradient vanishes
        let flat = MacroProfile::constant(4, 0.1);
        let g0 = h.grad(&flat).unwrap();
        for gi in g0 {
            assert_abs_diff_eq!(gi, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn grad_hbar_matches_directional_difference() {
        let p = Potential::cos(0.2);
        let h = CoarseHamiltonian::new(psi_table(&p, 4), 16, 4, 0.0).unwrap();
        let eta = MacroProfile::new(vec![0.3, -0.3, 0.1, -0.1], 0.0).unwrap();
        let g = h.grad(&eta).unwrap();
        let tangent = vec![0.5, -0.25, 0.0, -0.25];
        let eps = 1e-5;
        let shift = |s: f64| {
            let vals: Vec<f64> =
                eta.values().iter().zip(tangent.iter()).map(|(&a, &b)| a + s * b).collect();
            MacroProfile::new(vals, 0.0).unwrap()
        };
        let num =
            (h.energy(&shift(eps)).unwrap() - h.energy(&shift(-eps)).unwrap()) / (2.0 * eps);
        let analytic = MacroProfile::from_values(tangent.clone()).inner_y(&g);
        assert_abs_diff_eq!(num, analytic, epsilon = 1e-8);
    }

    #[test]
    fn macro_operator_identities() {
        let n = 32;
        let m = 8;
        let proj = Projection::new(n, m).unwrap();
        let op = KawasakiOperator::new(n).unwrap();
        let abar = build_macro_operator(&proj, &op).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let tau = op.min_nonzero_eigenvalue();
        for _ in 0..20 {
            let y = center(&(0..m).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>());
            // inverse identity
            let back = abar.apply(&abar.apply_inverse(&y));
            for (a, b) in back.iter().zip(y.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-9);
            }
            // <Abar^-1 y, y>_Y <= |y|_Y^2 / tau
            let quad = MacroProfile::from_values(abar.apply_inverse(&y)).inner_y(&y) * m as f64
                / m as f64;
            let lhs = quad;
            let rhs = norm_y_sq(&y) / tau;
            assert!(lhs <= rhs + 1e-12, "{} vs {}", lhs, rhs);
        }
        // spectral floor
        assert!(abar.lambda_min() >= tau - 1e-6, "{} vs tau {}", abar.lambda_min(), tau);
    }

    #[test]
    fn macro_operator_equals_a_when_k_is_one() {
        let n = 12;
        let proj = Projection::new(n, n).unwrap();
        let op = KawasakiOperator::new(n).unwrap();
        let abar = build_macro_operator(&proj, &op).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y = center(&(0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>());
        let via_abar = abar.apply(&y);
        let via_a = op.apply(&y);
        for (a, b) in via_abar.iter().zip(via_a.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-7, max_relative = 1e-7);
        }
    }

    #[test]
    fn local_gibbs_maximum_at_eta() {
        let p = Potential::cos(0.2);
        let h = CoarseHamiltonian::new(psi_table(&p, 8), 16, 2, 0.0).unwrap();
        let eta = MacroProfile::new(vec![0.25, -0.25], 0.0).unwrap();
        let gibbs = LocalGibbs::new(&h, eta.clone()).unwrap();
        let at_eta = gibbs.log_density(&eta).unwrap();
        for d in [-0.2, -0.1, 0.05, 0.15] {
            let y = MacroProfile::new(vec![0.25 + d, -0.25 - d], 0.0).unwrap();
            assert!(gibbs.log_density(&y).unwrap() <= at_eta + 1e-12);
        }
    }

    #[test]
    fn local_gibbs_hessian_floor() {
        // Hessian of -log density >= lambda N in the Y metric: check the
        // 1-D restriction curvature numerically.
        let p = Potential::cos(0.2);
        let n = 16;
        let h = CoarseHamiltonian::new(psi_table(&p, 8), n, 2, 0.0).unwrap();
        let eta = MacroProfile::new(vec![0.2, -0.2], 0.0).unwrap();
        let gibbs = LocalGibbs::new(&h, eta).unwrap();
        let f = |s: f64| {
            let y = MacroProfile::new(vec![0.2 + s, -0.2 - s], 0.0).unwrap();
            gibbs.log_density(&y).unwrap()
        };
        let eps = 1e-4;
        // |dy|_Y^2 of the direction (1,-1) is 1, so the second difference in
        // s is exactly the Y-metric Hessian quadratic form times... the
        // direction has |.|_Y^2 = 1: curvature >= lambda N.
        let second = -(f(eps) - 2.0 * f(0.0) + f(-eps)) / (eps * eps);
        assert!(second >= h.lambda * n as f64 * (1.0 - 1e-4), "{}", second);
    }

    #[test]
    fn gaussian_local_gibbs_density_shape() {
        // delta_psi = 0: the density is Gaussian centered at eta with
        // quadratic form (N/2M) |y - eta|_2^2 (up to psi_K'' = 1).
        let p = Potential::quadratic();
        let n = 16;
        let h = CoarseHamiltonian::new(psi_table(&p, 8), n, 2, 0.0).unwrap();
        let eta = MacroProfile::new(vec![0.3, -0.3], 0.0).unwrap();
        let gibbs = LocalGibbs::new(&h, eta.clone()).unwrap();
        let at_eta = gibbs.log_density(&eta).unwrap();
        for s in [-0.3, -0.1, 0.2, 0.4] {
            let y = MacroProfile::new(vec![0.3 + s, -0.3 - s], 0.0).unwrap();
            let drop = at_eta - gibbs.log_density(&y).unwrap();
            // |y - eta|_2^2 = 2 s^2; N/(2M) * 2 s^2 = N s^2 / M
            assert_relative_eq!(drop, n as f64 * s * s / 2.0, epsilon = 1e-5);
        }
    }

    #[test]
    fn local_gibbs_second_moment_gaussian_closed_form() {
        // E|y - eta|_Y^2 = (M-1)/(lambda N) for the quadratic case, by
        // quadrature and by the exact sampler.
        let p = Potential::quadratic();
        let n = 16;
        let h = CoarseHamiltonian::new(psi_table(&p, 8), n, 2, 0.0).unwrap();
        let eta = MacroProfile::new(vec![0.2, -0.2], 0.0).unwrap();
        let gibbs = LocalGibbs::new(&h, eta).unwrap();
        let quad = gibbs.second_moment_by_quadrature().unwrap();
        let closed = 1.0 / (h.lambda * n as f64);
        assert_relative_eq!(quad, closed, epsilon = 1e-4);
        let samples = gibbs.sample_gaussian_exact(200_000, 11);
        let (mc, se) = crate::functionals::w2_to_dirac_samples(
            &samples,
            2,
            gibbs.eta().values(),
            0.5,
        )
        .unwrap();
        assert_abs_diff_eq!(mc, closed, epsilon = 4.0 * se);
    }

    #[test]
    fn local_gibbs_metropolis_obeys_moment_bound() {
        let p = Potential::cos(0.2);
        let n = 64;
        let m = 4;
        let h = CoarseHamiltonian::new(psi_table(&p, n / m), n, m, 0.0).unwrap();
        let eta = MacroProfile::new(vec![0.3, -0.1, -0.3, 0.1], 0.0).unwrap();
        let gibbs = LocalGibbs::new(&h, eta.clone()).unwrap();
        let (samples, rate) = gibbs.sample(2000, 5, 400).unwrap();
        assert!(rate > 0.1 && rate < 0.9, "acceptance {}", rate);
        let (m2, se) = crate::functionals::w2_to_dirac_samples(
            &samples,
            m,
            eta.values(),
            1.0 / m as f64,
        )
        .unwrap();
        let bound = m as f64 / (h.lambda * n as f64);
        assert!(m2 <= bound + 3.0 * se, "moment {} vs bound {}", m2, bound);
    }

    #[test]
    fn log_partition_quadrature_inside_bracket_gaussian() {
        // delta_psi = 0, M = 2, N = 8: lambda = Lambda = 1 pins the bracket
        // to -psi_K(m) + (1/16) log(pi/2); quadrature must agree.
        let p = Potential::quadratic();
        let h = CoarseHamiltonian::new(psi_table(&p, 4), 8, 2, 0.0).unwrap();
        let (lo, hi) = h.log_partition_bracket();
        let expect = -h.psi_k().eval(0.0).unwrap()
            + (1.0 / 16.0) * (std::f64::consts::PI / 2.0).ln();
        assert_relative_eq!(lo, expect, epsilon = 1e-6);
        assert_relative_eq!(hi, expect, epsilon = 1e-6);
        assert_relative_eq!(h.log_partition_per_n(), expect, epsilon = 1e-6);
    }

    #[test]
    fn log_partition_bracket_narrows_along_ladder() {
        let p = Potential::cos(0.2);
        let mut prev_width = f64::INFINITY;
        for (n, m) in [(16usize, 2usize), (64, 4), (256, 8)] {
            let h = CoarseHamiltonian::new(psi_table(&p, n / m), n, m, 0.0).unwrap();
            let (lo, hi) = h.log_partition_bracket();
            let width = hi - lo;
            assert!(width >= 0.0 && width < prev_width);
            prev_width = width;
        }
        assert!(prev_width < 0.01);
    }

    #[test]
    fn log_partition_trend_towards_minus_cramer() {
        // |(1/N) log Z-bar + psi_K(m)| -> 0 as the block size grows at fixed
        // M (the Laplace factor scales like (M-1)/(2N) log(2 pi M / N)); the
        // quadrature value tracks the shrinking analytic envelope.
        let p = Potential::cos(0.2);
        let m = 2usize;
        let mut prev = f64::INFINITY;
        for k in [4usize, 16, 64] {
            let n = k * m;
            let h = CoarseHamiltonian::new(psi_table(&p, k), n, m, 0.0).unwrap();
            let resid = (h.log_partition_per_n() + h.psi_k().eval(0.0).unwrap()).abs();
            let envelope = ((std::f64::consts::TAU * m as f64 / n as f64).ln().abs() + 1.0)
                / (2.0 * n as f64 / (m as f64 - 1.0));
            assert!(resid <= envelope, "K = {}: residual {} vs envelope {}", k, resid, envelope);
            assert!(resid < prev + 1e-12);
            prev = resid;
        }
        assert!(prev < 1e-2, "residual {}", prev);
    }

    #[test]
    fn rho_hat_reductions() {
        assert_eq!(two_scale_lsi_constant(1.0, 2.0, 0.0).unwrap(), 1.0);
        assert_eq!(two_scale_lsi_constant(2.0, 0.5, 0.0).unwrap(), 0.5);
        let v = two_scale_lsi_constant(1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(v, 0.5 * (3.0 - 5.0_f64.sqrt()), epsilon = 1e-15);
        assert!(two_scale_lsi_constant(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn rho_hat_monotone_in_kappa() {
        let mut prev = f64::INFINITY;
        for i in 0..40 {
            let kappa = 0.1 * i as f64;
            let v = two_scale_lsi_constant(0.8, 1.3, kappa).unwrap();
            assert!(v <= prev + 1e-15);
            assert!(v > 0.0 && v <= 0.8_f64.min(1.3));
            prev = v;
        }
    }

    #[test]
    fn gamma_y_values() {
        assert_relative_eq!(gamma_y::<f64>(2), (4.0 * std::f64::consts::PI).sqrt(), epsilon = 1e-12);
        assert_eq!(gamma_y::<f64>(1), 1.0);
        // M = 3: 2-D quadrature over the tangent plane
        let mut acc = 0.0;
        let h = 0.01;
        let n_side = 4001;
        for i in 0..n_side {
            for j in 0..n_side {
                let s = -20.0 + h * i as f64;
                let t = -20.0 + h * j as f64;
                // |y|_Y^2 = (s^2 + t^2)/3 for orthonormal (s, t)
                acc += (-(s * s + t * t) / 6.0).exp();
            }
        }
        acc *= h * h;
        assert_relative_eq!(gamma_y::<f64>(3), acc, epsilon = 1e-6);
    }

    #[test]
    fn gibbs_gap_centered_profile_has_no_gradient_term() {
        let p = Potential::cos(0.2);
        let h = CoarseHamiltonian::new(psi_table(&p, 8), 16, 2, 0.0).unwrap();
        let flat = MacroProfile::constant(2, 0.0);
        let rep = gibbs_free_energy_gap(&h, &flat).unwrap();
        assert_abs_diff_eq!(rep.gradient_term, 0.0, epsilon = 1e-12);
        assert_relative_eq!(rep.bound, rep.log_term, epsilon = 1e-12);
        assert!(rep.lhs.unwrap() <= rep.bound + 1e-8);
    }

    #[test]
    fn gibbs_gap_lhs_below_bound_gaussian() {
        let p = Potential::quadratic();
        let h = CoarseHamiltonian::new(psi_table(&p, 8), 16, 2, 0.0).unwrap();
        let eta = MacroProfile::new(vec![0.3, -0.3], 0.0).unwrap();
        let rep = gibbs_free_energy_gap(&h, &eta).unwrap();
        let lhs = rep.lhs.unwrap();
        assert!(lhs <= rep.bound);
        assert!(rep.bound > 0.0);
    }

    #[test]
    fn gibbs_gap_bound_vanishes_along_ladders() {
        // bound -> 0 when M/N log N -> 0 with a fixed profile shape
        let p = Potential::cos(0.2);
        let mut prev = f64::INFINITY;
        for (n, m) in [(32usize, 2usize), (256, 4), (2048, 8)] {
            let h = CoarseHamiltonian::new(psi_table(&p, n / m), n, m, 0.0).unwrap();
            let vals: Vec<f64> =
                (0..m).map(|j| if j % 2 == 0 { 0.3 } else { -0.3 }).collect();
            let eta = MacroProfile::from_values(center(&vals));
            let rep = gibbs_free_energy_gap(&h, &eta).unwrap();
            assert!(rep.bound < prev);
            prev = rep.bound;
        }
        assert!(prev < 0.05);
    }

    #[test]
    fn theta_wrapper_checks_mean() {
        let p = Potential::quadratic();
        let n = 8;
        let op = KawasakiOperator::new(n).unwrap();
        let proj = Projection::new(n, 2).unwrap();
        let params = crate::microscale::SamplerParams { burn_in_sweeps: 10, ..Default::default() };
        let (e, _) = crate::microscale::sample_equilibrium(&p, n, 0.0_f64, 8, 5, &params).unwrap();
        let eta_bad = MacroProfile::new(vec![0.5, 0.5], 0.5).unwrap();
        assert!(theta_functional(&e, &eta_bad, &op, &proj).is_err());
        let eta = MacroProfile::new(vec![0.25, -0.25], 0.0).unwrap();
        let (theta, _) = theta_functional(&e, &eta, &op, &proj).unwrap();
        assert!(theta >= 0.0);
    }
}
