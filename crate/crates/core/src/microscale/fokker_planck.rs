//! Low-dimensional Fokker-Planck grid solver for the same dynamics as the
//! spin SDE, written in its natural form d/dt (u mu) = div(mu D grad u) with
//! u = rho/mu. The mu-weighted flux makes the discrete Gibbs density exactly
//! stationary and the discrete entropy non-increasing.

use crate::error::{Error, Result};
use crate::potentials::GridSpec;
use crate::scalar::Scalar;

/// Nonnegative density tabulated on a node-centered uniform grid,
/// d in {1, 2}; mass is the trapezoidal integral.
#[derive(Debug, Clone)]
pub struct GridDensity<T> {
    pub x: GridSpec<T>,
    pub y: Option<GridSpec<T>>,
    pub values: Vec<T>,
}

impl<T: Scalar> GridDensity<T> {
    pub fn new_1d(x: GridSpec<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != x.n {
            return Err(Error::Domain("grid density length mismatch".into()));
        }
        let mut d = Self { x, y: None, values };
        d.normalize()?;
        Ok(d)
    }

    pub fn new_2d(x: GridSpec<T>, y: GridSpec<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != x.n * y.n {
            return Err(Error::Domain("grid density length mismatch".into()));
        }
        let mut d = Self { x, y: Some(y), values };
        d.normalize()?;
        Ok(d)
    }

    pub fn dim(&self) -> usize {
        if self.y.is_some() {
            2
        } else {
            1
        }
    }

    fn weight(&self, idx: usize) -> T {
        let half = T::of(0.5);
        match &self.y {
            None => {
                if idx == 0 || idx == self.x.n - 1 {
                    half
                } else {
                    T::one()
                }
            }
            Some(y) => {
                let (i, j) = (idx / y.n, idx % y.n);
                let wx = if i == 0 || i == self.x.n - 1 { half } else { T::one() };
                let wy = if j == 0 || j == y.n - 1 { half } else { T::one() };
                wx * wy
            }
        }
    }

    fn cell_volume(&self) -> T {
        match &self.y {
            None => self.x.step(),
            Some(y) => self.x.step() * y.step(),
        }
    }

    /// Trapezoidal mass.
    pub fn mass(&self) -> T {
        let vol = self.cell_volume();
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| self.weight(i) * v)
            .sum::<T>()
            * vol
    }

    /// Scale to unit mass; rejects negative values and zero mass.
    pub fn normalize(&mut self) -> Result<()> {
        if self.values.iter().any(|v| *v < T::zero() || !v.is_finite()) {
            return Err(Error::Domain("density has negative or non-finite values".into()));
        }
        let m = self.mass();
        if !(m > T::zero()) {
            return Err(Error::Domain("density has zero mass".into()));
        }
        for v in self.values.iter_mut() {
            *v = *v / m;
        }
        let check = (self.mass() - T::one()).abs();
        if check > T::of(1e-8) {
            return Err(Error::Numerical(format!("normalization residual {}", check)));
        }
        Ok(())
    }

    /// First moment along axis 0.
    pub fn mean_x(&self) -> T {
        let vol = self.cell_volume();
        let h = self.x.step();
        let ny = self.y.as_ref().map_or(1, |y| y.n);
        self.values
            .iter()
            .enumerate()
            .map(|(idx, &v)| {
                let i = idx / ny;
                let x = self.x.min + h * T::from_usize(i).unwrap();
                self.weight(idx) * v * x
            })
            .sum::<T>()
            * vol
    }

    /// Second moment about `c` along axis 0.
    pub fn variance_x(&self, c: T) -> T {
        let vol = self.cell_volume();
        let h = self.x.step();
        let ny = self.y.as_ref().map_or(1, |y| y.n);
        self.values
            .iter()
            .enumerate()
            .map(|(idx, &v)| {
                let i = idx / ny;
                let x = self.x.min + h * T::from_usize(i).unwrap();
                self.weight(idx) * v * (x - c) * (x - c)
            })
            .sum::<T>()
            * vol
    }
}

/// Constant diffusion: scalar in 1-D, symmetric positive definite 2x2 in 2-D.
#[derive(Debug, Clone, Copy)]
pub enum Diffusion<T> {
    Scalar(T),
    Matrix2([[T; 2]; 2]),
}

/// One stored output frame of a Fokker-Planck trajectory.
#[derive(Debug, Clone)]
pub struct FpFrame<T> {
    pub time: T,
    pub density: GridDensity<T>,
    pub mass: T,
    pub entropy: T,
}

/// Fokker-Planck problem d/dt rho = div(D grad rho + rho D grad H) on a box
/// with no-flux boundary, discretized in the mu-weighted flux form
/// F = D mu grad(rho/mu), mu = exp(-H).
#[derive(Debug, Clone)]
pub struct FokkerPlanck<T> {
    x: GridSpec<T>,
    y: Option<GridSpec<T>>,
    /// exp(-(H - min H)) at the nodes.
    mu: Vec<T>,
    diffusion: Diffusion<T>,
}

impl<T: Scalar> FokkerPlanck<T> {
    pub fn new_1d(x: GridSpec<T>, hamiltonian: &[T], diffusion: T) -> Result<Self> {
        if hamiltonian.len() != x.n {
            return Err(Error::Domain("hamiltonian length mismatch".into()));
        }
        if !(diffusion > T::zero()) {
            return Err(Error::Domain("diffusion must be positive".into()));
        }
        Ok(Self {
            x,
            y: None,
            mu: shifted_gibbs(hamiltonian),
            diffusion: Diffusion::Scalar(diffusion),
        })
    }

    /// Build from the SDE drift b = -D H' on the grid, recovering H by
    /// cumulative integration.
    pub fn from_drift_1d(x: GridSpec<T>, drift: &[T], diffusion: T) -> Result<Self> {
        if drift.len() != x.n {
            return Err(Error::Domain("drift length mismatch".into()));
        }
        let h = x.step();
        let mut ham = vec![T::zero(); x.n];
        for i in 1..x.n {
            // H' = -b/D, trapezoidal accumulation
            let slope = -(drift[i - 1] + drift[i]) * T::of(0.5) / diffusion;
            ham[i] = ham[i - 1] + slope * h;
        }
        Self::new_1d(x, &ham, diffusion)
    }

    pub fn new_2d(
        x: GridSpec<T>,
        y: GridSpec<T>,
        hamiltonian: &[T],
        diffusion: Diffusion<T>,
    ) -> Result<Self> {
        if hamiltonian.len() != x.n * y.n {
            return Err(Error::Domain("hamiltonian length mismatch".into()));
        }
        if let Diffusion::Matrix2(d) = diffusion {
            let det = d[0][0] * d[1][1] - d[0][1] * d[1][0];
            if !(d[0][0] > T::zero() && det > T::zero()) || (d[0][1] - d[1][0]).abs() > T::of(1e-12)
            {
                return Err(Error::Domain("diffusion matrix not symmetric positive definite".into()));
            }
        } else {
            return Err(Error::Domain("2-D problem needs a matrix diffusion".into()));
        }
        Ok(Self { x, y: Some(y), mu: shifted_gibbs(hamiltonian), diffusion })
    }

    /// Build the 2-D problem from the drift field b = -D grad H; the two
    /// components must be a consistent gradient (curl check).
    pub fn from_drift_2d(
        x: GridSpec<T>,
        y: GridSpec<T>,
        drift_x: &[T],
        drift_y: &[T],
        diffusion: [[T; 2]; 2],
    ) -> Result<Self> {
        let (nx, ny) = (x.n, y.n);
        if drift_x.len() != nx * ny || drift_y.len() != nx * ny {
            return Err(Error::Domain("drift field length mismatch".into()));
        }
        let det = diffusion[0][0] * diffusion[1][1] - diffusion[0][1] * diffusion[1][0];
        if !(det > T::zero()) {
            return Err(Error::Domain("singular diffusion matrix".into()));
        }
        // grad H = -D^{-1} b
        let inv = [
            [diffusion[1][1] / det, -diffusion[0][1] / det],
            [-diffusion[1][0] / det, diffusion[0][0] / det],
        ];
        let gx: Vec<T> = (0..nx * ny)
            .map(|i| -(inv[0][0] * drift_x[i] + inv[0][1] * drift_y[i]))
            .collect();
        let gy: Vec<T> = (0..nx * ny)
            .map(|i| -(inv[1][0] * drift_x[i] + inv[1][1] * drift_y[i]))
            .collect();
        // curl check on interior nodes
        let (hx, hy) = (x.step(), y.step());
        let mut worst = T::zero();
        let mut scale = T::zero();
        for i in 1..nx - 1 {
            for j in 1..ny - 1 {
                let dgx_dy = (gx[i * ny + j + 1] - gx[i * ny + j - 1]) / (T::of(2.0) * hy);
                let dgy_dx = (gy[(i + 1) * ny + j] - gy[(i - 1) * ny + j]) / (T::of(2.0) * hx);
                worst = worst.max((dgx_dy - dgy_dx).abs());
                scale = scale.max(dgx_dy.abs()).max(dgy_dx.abs());
            }
        }
        if worst > T::of(1e-6) * (T::one() + scale) {
            return Err(Error::Domain(format!(
                "drift is not a gradient field: curl residual {}",
                worst
            )));
        }
        // integrate H along axis paths: H(x_i, y_j) = int gx dx + int gy dy
        let mut ham = vec![T::zero(); nx * ny];
        for i in 1..nx {
            ham[i * ny] =
                ham[(i - 1) * ny] + (gx[(i - 1) * ny] + gx[i * ny]) * T::of(0.5) * hx;
        }
        for i in 0..nx {
            for j in 1..ny {
                ham[i * ny + j] = ham[i * ny + j - 1]
                    + (gy[i * ny + j - 1] + gy[i * ny + j]) * T::of(0.5) * hy;
            }
        }
        Self::new_2d(x, y, &ham, Diffusion::Matrix2(diffusion))
    }

    /// Normalized Gibbs density exp(-H)/Z on this grid.
    pub fn gibbs_density(&self) -> Result<GridDensity<T>> {
        match &self.y {
            None => GridDensity::new_1d(self.x, self.mu.clone()),
            Some(y) => GridDensity::new_2d(self.x, *y, self.mu.clone()),
        }
    }

    /// Relative entropy Ent_mu(rho/mu) = int (rho/mu) log(rho/mu) dmu >= 0
    /// of a density against the problem's Gibbs measure.
    pub fn relative_entropy(&self, rho: &GridDensity<T>) -> Result<T> {
        let gibbs = self.gibbs_density()?;
        crate::functionals::entropy_grid(rho, &gibbs)
    }

    fn rate_bound(&self) -> T {
        // max_i sum_faces conductance / (w_i mu_i h^2)
        match &self.y {
            None => {
                let n = self.x.n;
                let h2 = self.x.step() * self.x.step();
                let d = match self.diffusion {
                    Diffusion::Scalar(d) => d,
                    _ => unreachable!(),
                };
                let mut worst = T::zero();
                for i in 0..n {
                    let left = if i > 0 { face_mu(self.mu[i - 1], self.mu[i]) } else { T::zero() };
                    let right =
                        if i < n - 1 { face_mu(self.mu[i], self.mu[i + 1]) } else { T::zero() };
                    let w = if i == 0 || i == n - 1 { T::of(0.5) } else { T::one() };
                    worst = worst.max(d * (left + right) / (w * self.mu[i] * h2));
                }
                worst
            }
            Some(y) => {
                let (nx, ny) = (self.x.n, y.n);
                let hx2 = self.x.step() * self.x.step();
                let hy2 = y.step() * y.step();
                let (dxx, dyy) = match self.diffusion {
                    Diffusion::Matrix2(d) => (d[0][0], d[1][1]),
                    Diffusion::Scalar(d) => (d, d),
                };
                let mut worst = T::zero();
                for i in 0..nx {
                    for j in 0..ny {
                        let at = |ii: usize, jj: usize| self.mu[ii * ny + jj];
                        let c = at(i, j);
                        let mut rate = T::zero();
                        if i > 0 {
                            rate += dxx * face_mu(at(i - 1, j), c) / hx2;
                        }
                        if i < nx - 1 {
                            rate += dxx * face_mu(c, at(i + 1, j)) / hx2;
                        }
                        if j > 0 {
                            rate += dyy * face_mu(at(i, j - 1), c) / hy2;
                        }
                        if j < ny - 1 {
                            rate += dyy * face_mu(c, at(i, j + 1)) / hy2;
                        }
                        let wx = if i == 0 || i == nx - 1 { T::of(0.5) } else { T::one() };
                        let wy = if j == 0 || j == ny - 1 { T::of(0.5) } else { T::one() };
                        worst = worst.max(rate / (wx * wy * c));
                    }
                }
                worst
            }
        }
    }

    /// Largest stable explicit step (with a 0.9 safety factor).
    pub fn cfl_dt(&self) -> T {
        T::of(0.9) / self.rate_bound()
    }

    /// Integrate to `t_end` with explicit Euler steps of size `dt`, storing
    /// `n_outputs + 1` frames (including the initial one). Checks mass
    /// conservation and boundary leakage at every output.
    pub fn solve(
        &self,
        rho0: &GridDensity<T>,
        t_end: T,
        dt: T,
        n_outputs: usize,
    ) -> Result<Vec<FpFrame<T>>> {
        if rho0.dim() != if self.y.is_some() { 2 } else { 1 } || rho0.x != self.x || rho0.y != self.y
        {
            return Err(Error::Domain("density grid does not match the problem grid".into()));
        }
        if dt > T::one() / self.rate_bound() {
            return Err(Error::Precondition(format!(
                "dt = {} violates the CFL bound {}",
                dt,
                T::one() / self.rate_bound()
            )));
        }
        let total_steps = (t_end / dt).to_f64().unwrap().round() as usize;
        let n_outputs = n_outputs.max(1).min(total_steps.max(1));

        // state: u = rho/mu
        let mut u: Vec<T> =
            rho0.values.iter().zip(self.mu.iter()).map(|(&r, &m)| r / m).collect();
        let mut frames = Vec::with_capacity(n_outputs + 1);
        let push_frame = |frames: &mut Vec<FpFrame<T>>, u: &[T], t: T| -> Result<()> {
            let values: Vec<T> =
                u.iter().zip(self.mu.iter()).map(|(&ui, &mi)| ui * mi).collect();
            let density = match &self.y {
                None => GridDensity { x: self.x, y: None, values },
                Some(y) => GridDensity { x: self.x, y: Some(*y), values },
            };
            let mass = density.mass();
            self.check_boundary(&density)?;
            let entropy = self.relative_entropy(&density)?;
            frames.push(FpFrame { time: t, density, mass, entropy });
            Ok(())
        };
        push_frame(&mut frames, &u, T::zero())?;

        let mut du = vec![T::zero(); u.len()];
        let mut done = 0usize;
        for out in 1..=n_outputs {
            let target = total_steps * out / n_outputs;
            while done < target {
                self.step_u(&u, &mut du, dt);
                for (ui, di) in u.iter_mut().zip(du.iter()) {
                    *ui += *di;
                }
                done += 1;
            }
            push_frame(&mut frames, &u, dt * T::from_usize(done).unwrap())?;
        }
        Ok(frames)
    }

    /// du accumulation: du_i = dt * div(mu D grad u)_i / (w_i mu_i).
    fn step_u(&self, u: &[T], du: &mut [T], dt: T) {
        match &self.y {
            None => {
                let n = self.x.n;
                let h2 = self.x.step() * self.x.step();
                let d = match self.diffusion {
                    Diffusion::Scalar(d) => d,
                    _ => unreachable!(),
                };
                for i in 0..n {
                    let right = if i < n - 1 {
                        face_mu(self.mu[i], self.mu[i + 1]) * (u[i + 1] - u[i])
                    } else {
                        T::zero()
                    };
                    let left = if i > 0 {
                        face_mu(self.mu[i - 1], self.mu[i]) * (u[i] - u[i - 1])
                    } else {
                        T::zero()
                    };
                    let w = if i == 0 || i == n - 1 { T::of(0.5) } else { T::one() };
                    du[i] = dt * d * (right - left) / (h2 * w * self.mu[i]);
                }
            }
            Some(y) => {
                let (nx, ny) = (self.x.n, y.n);
                let (hx, hy) = (self.x.step(), y.step());
                let dm = match self.diffusion {
                    Diffusion::Matrix2(d) => d,
                    Diffusion::Scalar(d) => [[d, T::zero()], [T::zero(), d]],
                };
                let at = |v: &[T], i: usize, j: usize| v[i * ny + j];
                // face fluxes with central transverse differences for the
                // mixed terms
                for i in 0..nx {
                    for j in 0..ny {
                        let mut div = T::zero();
                        // x faces
                        for (ii, sgn) in [(i, T::one()), (i.wrapping_sub(1), -T::one())] {
                            if ii >= nx - 1 || (sgn < T::zero() && i == 0) {
                                continue;
                            }
                            let mu_f = face_mu(at(&self.mu, ii, j), at(&self.mu, ii + 1, j));
                            let dudx = (at(u, ii + 1, j) - at(u, ii, j)) / hx;
                            let dudy_l = transverse(u, ii, j, ny, hy);
                            let dudy_r = transverse(u, ii + 1, j, ny, hy);
                            let dudy = (dudy_l + dudy_r) * T::of(0.5);
                            div += sgn * mu_f * (dm[0][0] * dudx + dm[0][1] * dudy) / hx;
                        }
                        // y faces
                        for (jj, sgn) in [(j, T::one()), (j.wrapping_sub(1), -T::one())] {
                            if jj >= ny - 1 || (sgn < T::zero() && j == 0) {
                                continue;
                            }
                            let mu_f = face_mu(at(&self.mu, i, jj), at(&self.mu, i, jj + 1));
                            let dudy = (at(u, i, jj + 1) - at(u, i, jj)) / hy;
                            let dudx_l = transverse_x(u, i, jj, nx, ny, hx);
                            let dudx_r = transverse_x(u, i, jj + 1, nx, ny, hx);
                            let dudx = (dudx_l + dudx_r) * T::of(0.5);
                            div += sgn * mu_f * (dm[1][0] * dudx + dm[1][1] * dudy) / hy;
                        }
                        let wx = if i == 0 || i == nx - 1 { T::of(0.5) } else { T::one() };
                        let wy = if j == 0 || j == ny - 1 { T::of(0.5) } else { T::one() };
                        du[i * ny + j] = dt * div / (wx * wy * at(&self.mu, i, j));
                    }
                }
            }
        }
    }

    fn check_boundary(&self, rho: &GridDensity<T>) -> Result<()> {
        let tol = T::of(1e-8);
        let leak = match &self.y {
            None => {
                let n = self.x.n;
                let h = self.x.step();
                (rho.values[0] + rho.values[1] + rho.values[n - 2] + rho.values[n - 1]) * h
            }
            Some(y) => {
                let (nx, ny) = (self.x.n, y.n);
                let vol = self.x.step() * y.step();
                let mut s = T::zero();
                for i in 0..nx {
                    for j in 0..ny {
                        if i <= 1 || i >= nx - 2 || j <= 1 || j >= ny - 2 {
                            s += rho.values[i * ny + j];
                        }
                    }
                }
                s * vol
            }
        };
        if leak > tol {
            return Err(Error::Numerical(format!(
                "boundary mass {} above the leakage threshold; enlarge the box",
                leak
            )));
        }
        Ok(())
    }
}

#[inline]
fn face_mu<T: Scalar>(a: T, b: T) -> T {
    // geometric mean: keeps the Gibbs state exactly stationary and the
    // entropy production sign-definite
    (a * b).sqrt()
}

#[inline]
fn transverse<T: Scalar>(u: &[T], i: usize, j: usize, ny: usize, hy: T) -> T {
    // du/dy at node (i, j), one-sided at the walls
    if j == 0 {
        (u[i * ny + 1] - u[i * ny]) / hy
    } else if j == ny - 1 {
        (u[i * ny + j] - u[i * ny + j - 1]) / hy
    } else {
        (u[i * ny + j + 1] - u[i * ny + j - 1]) / (T::of(2.0) * hy)
    }
}

#[inline]
fn transverse_x<T: Scalar>(u: &[T], i: usize, j: usize, nx: usize, ny: usize, hx: T) -> T {
    if i == 0 {
        (u[ny + j] - u[j]) / hx
    } else if i == nx - 1 {
        (u[i * ny + j] - u[(i - 1) * ny + j]) / hx
    } else {
        (u[(i + 1) * ny + j] - u[(i - 1) * ny + j]) / (T::of(2.0) * hx)
    }
}

fn shifted_gibbs<T: Scalar>(hamiltonian: &[T]) -> Vec<T> {
    let hmin = hamiltonian.iter().copied().fold(T::infinity(), |a, b| a.min(b));
    hamiltonian.iter().map(|&h| (-(h - hmin)).exp()).collect()
}
