//! The hydrodynamic nonlinear diffusion d zeta/dt = d^2/dtheta^2 phi'(zeta)
//! on the unit torus: conservative flux-form solver, the H^-1 norm (two
//! cross-checked routes), step embeddings of lattice states, and the
//! regularity diagnostics.

use std::io::Write;

use crate::error::{Error, Result};
use crate::potentials::TabulatedFunction;
use crate::scalar::Scalar;
use crate::spectral::{FftBuf, FftPlan};

/// Periodic field of cell averages on the torus: value i lives on the cell
/// ((i)/G, (i+1)/G]; the cell-average mean is the conserved mass.
#[derive(Debug, Clone, PartialEq)]
pub struct HydroField<T> {
    values: Vec<T>,
    mean: T,
}

impl<T: Scalar> HydroField<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Domain("field needs at least two cells".into()));
        }
        let mean = values.iter().copied().sum::<T>() / T::from_usize(values.len()).unwrap();
        Ok(Self { values, mean })
    }

    /// Sample a smooth profile by cell midpoints on `n_cells` cells.
    pub fn from_profile(n_cells: usize, f: impl Fn(T) -> T) -> Result<Self> {
        let h = T::one() / T::from_usize(n_cells).unwrap();
        let half = T::of(0.5);
        let values = (0..n_cells)
            .map(|i| f((T::from_usize(i).unwrap() + half) * h))
            .collect();
        Self::new(values)
    }

    pub fn n_cells(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    pub fn cell_width(&self) -> T {
        T::one() / T::from_usize(self.values.len()).unwrap()
    }

    /// L2(torus) norm squared of the step function.
    pub fn l2_sq(&self) -> T {
        let h = self.cell_width();
        self.values.iter().map(|&v| v * v).sum::<T>() * h
    }

    /// Pointwise difference; both fields are refined to the common grid
    /// first (exact for step functions when one resolution divides the
    /// other).
    pub fn sub(&self, other: &Self) -> Result<Self> {
        let g = lcm(self.n_cells(), other.n_cells());
        if g > 1 << 22 {
            return Err(Error::Domain("incommensurate field resolutions".into()));
        }
        let a = self.refine(g / self.n_cells());
        let b = other.refine(g / other.n_cells());
        let values: Vec<T> =
            a.values.iter().zip(b.values.iter()).map(|(&x, &y)| x - y).collect();
        Self::new(values)
    }

    /// Replicate each cell `factor` times (exact refinement of the step
    /// function).
    pub fn refine(&self, factor: usize) -> Self {
        if factor <= 1 {
            return self.clone();
        }
        let mut values = Vec::with_capacity(self.values.len() * factor);
        for &v in &self.values {
            values.extend(std::iter::repeat(v).take(factor));
        }
        Self { values, mean: self.mean }
    }

    /// Block-average down to `n_cells` (must divide the current resolution).
    pub fn restrict(&self, n_cells: usize) -> Result<Self> {
        if n_cells == 0 || self.n_cells() % n_cells != 0 {
            return Err(Error::Domain("restriction target must divide the resolution".into()));
        }
        let k = self.n_cells() / n_cells;
        let k_t = T::from_usize(k).unwrap();
        let values: Vec<T> = self
            .values
            .chunks(k)
            .map(|c| c.iter().copied().sum::<T>() / k_t)
            .collect();
        Self::new(values)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// Piecewise-constant embedding of a lattice state (micro vector or
/// macroscopic profile): x-bar(theta) = x_j on ((j-1)/N, j/N].
pub fn step_embed<T: Scalar>(v: &[T]) -> Result<HydroField<T>> {
    HydroField::new(v.to_vec())
}

/// H^-1(torus) squared norm of a mean-zero step function, through the
/// centered antiderivative (exact for the piecewise-constant field).
pub fn h_minus_one_norm_sq<T: Scalar>(f: &HydroField<T>) -> Result<T> {
    check_mean_zero(f)?;
    let g = f.n_cells();
    let h = f.cell_width();
    // w nodes: w_0 = 0, w_{i+1} = w_i + h f_i (periodic up to roundoff)
    let mut w = Vec::with_capacity(g + 1);
    let mut acc = T::zero();
    w.push(acc);
    for &v in f.values() {
        acc += h * v;
        w.push(acc);
    }
    let half = T::of(0.5);
    let third = T::of(1.0 / 3.0);
    let mut mean_w = T::zero();
    let mut int_w2 = T::zero();
    for i in 0..g {
        mean_w += (w[i] + w[i + 1]) * half * h;
        int_w2 += (w[i] * w[i] + w[i] * w[i + 1] + w[i + 1] * w[i + 1]) * third * h;
    }
    Ok(int_w2 - mean_w * mean_w)
}

/// The same norm in Fourier space: sum over modes of
/// |F_k|^2 h^3/G (2 + cos phi_k) / (6 (1 - cos phi_k)), phi_k = 2 pi k/G -
/// the exact discrete weight, which reduces to |f_hat_k|^2/(2 pi k)^2 in the
/// continuum limit.
pub fn h_minus_one_norm_sq_fourier<T: Scalar>(f: &HydroField<T>) -> Result<T> {
    check_mean_zero(f)?;
    let g = f.n_cells();
    let plan = FftPlan::<T>::new(g);
    let mut buf = FftBuf::for_plan(&plan);
    buf.load_real(f.values());
    plan.forward(&mut buf.buf, &mut buf.scratch);
    let h = f.cell_width();
    let tau = T::of(std::f64::consts::TAU);
    let g_t = T::from_usize(g).unwrap();
    let pref = h * h * h / g_t;
    let (two, six) = (T::of(2.0), T::of(6.0));
    let mut acc = T::zero();
    for k in 1..g {
        let phi = tau * T::from_usize(k).unwrap() / g_t;
        let weight = pref * (two + phi.cos()) / (six * (T::one() - phi.cos()));
        acc += weight * buf.buf[k].norm_sqr();
    }
    Ok(acc)
}

fn check_mean_zero<T: Scalar>(f: &HydroField<T>) -> Result<()> {
    let scale = f
        .values()
        .iter()
        .fold(T::zero(), |a, v| a.max(v.abs()))
        .max(T::one());
    if f.mean().abs() > T::of(1e-10) * scale {
        return Err(Error::Domain(format!(
            "H^-1 norm needs a mean-zero field (mean = {})",
            f.mean()
        )));
    }
    Ok(())
}

/// Stored trajectory of the hydrodynamic solver.
#[derive(Debug, Clone)]
pub struct HydroTrajectory<T> {
    pub times: Vec<T>,
    pub fields: Vec<HydroField<T>>,
}

impl<T: Scalar> HydroTrajectory<T> {
    pub fn field_at(&self, t: T) -> Result<&HydroField<T>> {
        let tol = T::of(1e-9) * (T::one() + t.abs());
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= tol)
            .map(|i| &self.fields[i])
            .ok_or_else(|| Error::Domain(format!("no stored frame at t = {}", t)))
    }

    /// CSV: theta-grid header, one row per output time.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        let g = self.fields.first().map_or(0, |f| f.n_cells());
        write!(w, "t")?;
        for i in 0..g {
            write!(w, ",theta_{}", i)?;
        }
        writeln!(w)?;
        for (t, f) in self.times.iter().zip(self.fields.iter()) {
            write!(w, "{}", t)?;
            for v in f.values() {
                write!(w, ",{}", v)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Conservative flux-form solver for d zeta/dt = d^2 phi'(zeta)/d theta^2
/// with explicit Euler steps under the CFL bound dt <= h^2/(2 Lambda),
/// Lambda = max phi'' on the table.
pub fn solve_hydro<T: Scalar>(
    zeta0: &HydroField<T>,
    phi: &TabulatedFunction<T>,
    t_end: T,
    dt: T,
    n_outputs: usize,
) -> Result<HydroTrajectory<T>> {
    let g = zeta0.n_cells();
    let h = zeta0.cell_width();
    let big_lambda = phi
        .d2()
        .iter()
        .fold(T::zero(), |a, &v| a.max(v.abs()))
        .max(T::of(1e-30));
    let cfl = h * h / (T::of(2.0) * big_lambda);
    if dt > cfl {
        return Err(Error::Precondition(format!(
            "dt = {} violates the CFL bound {} (h = {}, Lambda = {})",
            dt, cfl, h, big_lambda
        )));
    }
    let total_steps = (t_end / dt).to_f64().unwrap().round().max(1.0) as usize;
    let n_outputs = n_outputs.max(1).min(total_steps);

    let mut zeta = zeta0.values().to_vec();
    let mut flux = vec![T::zero(); g];
    let mut potential = vec![T::zero(); g];
    let mut traj = HydroTrajectory {
        times: vec![T::zero()],
        fields: vec![zeta0.clone()],
    };
    let mut done = 0usize;
    for out in 1..=n_outputs {
        let target = total_steps * out / n_outputs;
        while done < target {
            for (pv, &z) in potential.iter_mut().zip(zeta.iter()) {
                *pv = phi.eval_d1(z)?;
            }
            for i in 0..g {
                // F_{i+1/2} = (phi'(zeta_{i+1}) - phi'(zeta_i))/h
                flux[i] = (potential[(i + 1) % g] - potential[i]) / h;
            }
            for i in 0..g {
                let div = (flux[i] - flux[(i + g - 1) % g]) / h;
                zeta[i] += dt * div;
            }
            done += 1;
        }
        traj.times.push(dt * T::from_usize(done).unwrap());
        traj.fields.push(HydroField::new(zeta.clone())?);
    }
    Ok(traj)
}

/// One frame of the regularity diagnostics along a hydrodynamic trajectory.
#[derive(Debug, Clone, Copy)]
pub struct DiagnosticsFrame<T> {
    pub time: T,
    /// ||zeta||_L2^2
    pub l2_sq: T,
    /// ||d_theta zeta||_L2^2 (face differences)
    pub grad_l2_sq: T,
    /// D1 = ||d_theta phi'(zeta)||_L2^2
    pub d1: T,
    /// D2 = ||d^2_theta phi'(zeta)||_L2^2 (spectral differentiation)
    pub d2: T,
    /// ||u||_L4 / (2^{1/4} ||u||_L2^{3/4} ||u'||_L2^{1/4}) for
    /// u = d_theta phi'(zeta); the interpolation inequality requires <= 1.
    pub l4_ratio: T,
}

/// Compute the diagnostic time series of a trajectory.
pub fn regularity_diagnostics<T: Scalar>(
    traj: &HydroTrajectory<T>,
    phi: &TabulatedFunction<T>,
) -> Result<Vec<DiagnosticsFrame<T>>> {
    let g = traj.fields.first().map(|f| f.n_cells()).unwrap_or(0);
    if g == 0 {
        return Ok(Vec::new());
    }
    let plan = FftPlan::<T>::new(g);
    let mut buf = FftBuf::for_plan(&plan);
    let h = T::one() / T::from_usize(g).unwrap();
    let mut frames = Vec::with_capacity(traj.times.len());
    for (&t, f) in traj.times.iter().zip(traj.fields.iter()) {
        let zeta = f.values();
        let mut pot = Vec::with_capacity(g);
        for &z in zeta {
            pot.push(phi.eval_d1(z)?);
        }
        let grad_l2_sq = face_grad_l2_sq(zeta, h);
        let u: Vec<T> = (0..g).map(|i| (pot[(i + 1) % g] - pot[i]) / h).collect();
        let d1 = u.iter().map(|&v| v * v).sum::<T>() * h;
        let d2 = spectral_second_derivative_l2_sq(&plan, &mut buf, &pot);
        // L4 interpolation inequality on the (mean-zero) face field u
        let l4 = (u.iter().map(|&v| v * v * v * v).sum::<T>() * h).powf(T::of(0.25));
        let u_l2 = d1.sqrt();
        let up_l2 = spectral_first_derivative_l2_sq(&plan, &mut buf, &u).sqrt();
        let rhs = T::of(2.0).powf(T::of(0.25))
            * u_l2.powf(T::of(0.75))
            * up_l2.powf(T::of(0.25));
        let l4_ratio = if rhs > T::zero() { l4 / rhs } else { T::zero() };
        frames.push(DiagnosticsFrame {
            time: t,
            l2_sq: f.l2_sq(),
            grad_l2_sq,
            d1,
            d2,
            l4_ratio,
        });
    }
    Ok(frames)
}

fn face_grad_l2_sq<T: Scalar>(v: &[T], h: T) -> T {
    let g = v.len();
    (0..g)
        .map(|i| {
            let d = (v[(i + 1) % g] - v[i]) / h;
            d * d
        })
        .sum::<T>()
        * h
}

fn spectral_derivative_l2_sq<T: Scalar>(
    plan: &FftPlan<T>,
    buf: &mut FftBuf<T>,
    v: &[T],
    order: u32,
) -> T {
    let g = v.len();
    buf.load_real(v);
    plan.forward(&mut buf.buf, &mut buf.scratch);
    let tau = T::of(std::f64::consts::TAU);
    let g_t = T::from_usize(g).unwrap();
    let mut acc = T::zero();
    for k in 1..g {
        let signed = if k <= g / 2 { k as i64 } else { k as i64 - g as i64 };
        let omega = tau * T::from_i64(signed.abs()).unwrap();
        acc += omega.powi(2 * order as i32) * buf.buf[k].norm_sqr();
    }
    // Parseval with the unnormalized DFT: ||v||^2 = (1/G^2) sum |V_k|^2 * G h
    acc / (g_t * g_t)
}

fn spectral_second_derivative_l2_sq<T: Scalar>(
    plan: &FftPlan<T>,
    buf: &mut FftBuf<T>,
    v: &[T],
) -> T {
    spectral_derivative_l2_sq(plan, buf, v, 2)
}

fn spectral_first_derivative_l2_sq<T: Scalar>(
    plan: &FftPlan<T>,
    buf: &mut FftBuf<T>,
    v: &[T],
) -> T {
    spectral_derivative_l2_sq(plan, buf, v, 1)
}

/// Verify the exponential contraction D1(t2) <= D1(t1) e^{-2 lambda pi^2
/// (t2 - t1)} (1 + tol) for all stored t2 > t1 >= t_min; returns the
/// observed decay rate fitted on [t_min, end] for reporting.
pub fn check_d1_contraction<T: Scalar>(
    frames: &[DiagnosticsFrame<T>],
    lambda: T,
    t_min: T,
    tol: T,
) -> Result<T> {
    let pi2 = T::of(std::f64::consts::PI * std::f64::consts::PI);
    let rate = T::of(2.0) * lambda * pi2;
    let sel: Vec<&DiagnosticsFrame<T>> =
        frames.iter().filter(|f| f.time >= t_min && f.d1 > T::zero()).collect();
    for i in 0..sel.len() {
        for j in (i + 1)..sel.len() {
            let (a, b) = (sel[i], sel[j]);
            let bound = a.d1 * (-rate * (b.time - a.time)).exp() * (T::one() + tol);
            if b.d1 > bound {
                return Err(Error::Consistency(format!(
                    "D1 contraction violated between t = {} and t = {}: {} > {}",
                    a.time, b.time, b.d1, bound
                )));
            }
        }
    }
    // observed rate: least-squares slope of log D1
    if sel.len() < 2 {
        return Ok(T::zero());
    }
    let n = T::from_usize(sel.len()).unwrap();
    let mean_t = sel.iter().map(|f| f.time).sum::<T>() / n;
    let mean_l = sel.iter().map(|f| f.d1.ln()).sum::<T>() / n;
    let mut num = T::zero();
    let mut den = T::zero();
    for f in &sel {
        num += (f.time - mean_t) * (f.d1.ln() - mean_l);
        den += (f.time - mean_t) * (f.time - mean_t);
    }
    Ok(-num / den)
}
