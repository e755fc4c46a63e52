//! Inequality checkers: the HWI interpolation inequality for log-concave
//! references and the uniform-convexity second-moment lemma.

use crate::error::{Error, Result};
use crate::microscale::GridDensity;
use crate::potentials::{fd_derivatives, GridSpec};
use crate::scalar::Scalar;

use super::grid::{entropy_grid, fisher_grid};
use super::wasserstein::w2_grid_1d;

#[derive(Debug, Clone, Copy)]
pub struct HwiReport<T> {
    pub entropy: T,
    pub wasserstein: T,
    pub fisher: T,
    pub rhs: T,
    pub holds: bool,
}

/// HWI check on 1-D grid densities:
/// Ent_mu(nu) <= W2(mu, nu) sqrt(I_mu(nu)) - (lambda/2) W2(mu, nu)^2,
/// where lambda is the supplied Hessian lower bound of -log mu (verified
/// numerically before use).
pub fn hwi_check<T: Scalar>(
    mu: &GridDensity<T>,
    nu: &GridDensity<T>,
    lambda: T,
) -> Result<HwiReport<T>> {
    if mu.dim() != 1 || nu.dim() != 1 {
        return Err(Error::Domain("hwi_check works on 1-D grids".into()));
    }
    verify_log_concavity(mu, lambda)?;
    let entropy = entropy_grid(nu, mu)?;
    let fisher = fisher_grid(nu, mu)?;
    let w2 = w2_grid_1d(mu, nu, 8001)?;
    let rhs = w2 * fisher.sqrt() - lambda * T::of(0.5) * w2 * w2;
    let holds = entropy <= rhs + T::of(1e-8);
    Ok(HwiReport { entropy, wasserstein: w2, fisher, rhs, holds })
}

/// Hess(-log mu) >= lambda, checked by central second differences on nodes
/// where mu is above the underflow floor.
fn verify_log_concavity<T: Scalar>(mu: &GridDensity<T>, lambda: T) -> Result<()> {
    let h = mu.x.step();
    let floor = mu.values.iter().copied().fold(T::zero(), |a, b| a.max(b)) * T::of(1e-12);
    let tol = T::of(1e-6) * (T::one() + lambda.abs());
    for i in 1..mu.values.len() - 1 {
        let (a, b, c) = (mu.values[i - 1], mu.values[i], mu.values[i + 1]);
        if a < floor || b < floor || c < floor {
            continue;
        }
        // -(log mu)'' = -(log a - 2 log b + log c)/h^2
        let second = -((a.ln() - T::of(2.0) * b.ln() + c.ln()) / (h * h));
        if second < lambda - tol {
            return Err(Error::Precondition(format!(
                "-log mu has curvature {} < claimed lambda = {} at node {}",
                second, lambda, i
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct LemmaReport<T> {
    pub lhs: T,
    pub rhs: T,
    pub holds: bool,
}

/// Second-moment bound for uniformly convex confinement:
/// int |x|^2 e^{-f} dx <= (M/lambda) int e^{-f} dx for Hess f >= lambda
/// with the minimum of f at the origin, M in {1, 2} by quadrature.
pub fn second_moment_lemma_check<T: Scalar>(
    x: &GridSpec<T>,
    y: Option<&GridSpec<T>>,
    f_values: &[T],
    lambda: T,
) -> Result<LemmaReport<T>> {
    let dim = if y.is_some() { 2 } else { 1 };
    let expected_len = x.n * y.map_or(1, |s| s.n);
    if f_values.len() != expected_len {
        return Err(Error::Domain("f array length mismatch".into()));
    }
    if !(lambda > T::zero()) {
        return Err(Error::Domain("lambda must be positive".into()));
    }
    verify_convexity_and_min(x, y, f_values, lambda)?;

    let hx = x.step();
    let (hy, ny) = match y {
        Some(s) => (s.step(), s.n),
        None => (T::one(), 1),
    };
    let vol = if dim == 2 { hx * hy } else { hx };
    let mut zi = T::zero();
    let mut m2 = T::zero();
    for (idx, &fv) in f_values.iter().enumerate() {
        let i = idx / ny;
        let j = idx % ny;
        let mut wx = if i == 0 || i == x.n - 1 { T::of(0.5) } else { T::one() };
        if let Some(s) = y {
            let wy = if j == 0 || j == s.n - 1 { T::of(0.5) } else { T::one() };
            wx = wx * wy;
        }
        let xi = x.min + hx * T::from_usize(i).unwrap();
        let r2 = match y {
            Some(s) => {
                let yj = s.min + hy * T::from_usize(j).unwrap();
                xi * xi + yj * yj
            }
            None => xi * xi,
        };
        let w = wx * (-fv).exp();
        zi += w;
        m2 += w * r2;
    }
    let lhs = m2 * vol;
    let rhs = T::from_usize(dim).unwrap() / lambda * zi * vol;
    Ok(LemmaReport { lhs, rhs, holds: lhs <= rhs + T::of(1e-8) })
}

fn verify_convexity_and_min<T: Scalar>(
    x: &GridSpec<T>,
    y: Option<&GridSpec<T>>,
    f: &[T],
    lambda: T,
) -> Result<()> {
    // the minimum must sit at the node nearest the origin
    let ny = y.map_or(1, |s| s.n);
    let (argmin, _) = f
        .iter()
        .enumerate()
        .fold((0usize, T::infinity()), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    let i0 = argmin / ny;
    let xi = x.min + x.step() * T::from_usize(i0).unwrap();
    let mut off_origin = xi.abs() > x.step();
    if let Some(s) = y {
        let j0 = argmin % ny;
        let yj = s.min + s.step() * T::from_usize(j0).unwrap();
        off_origin = off_origin || yj.abs() > s.step();
    }
    if off_origin {
        return Err(Error::Precondition("minimum of f is not at the origin".into()));
    }
    // axis curvature >= lambda (up to discretization slack)
    let tol = T::of(1e-6) * (T::one() + lambda);
    match y {
        None => {
            let (_, d2) = fd_derivatives(f, x.step());
            if d2[2..f.len() - 2].iter().any(|&v| v < lambda - tol) {
                return Err(Error::Precondition(
                    "f is not uniformly convex with the claimed lambda".into(),
                ));
            }
        }
        Some(s) => {
            for i in 0..x.n {
                let row: Vec<T> = (0..s.n).map(|j| f[i * s.n + j]).collect();
                let (_, d2) = fd_derivatives(&row, s.step());
                if d2[2..s.n - 2].iter().any(|&v| v < lambda - tol) {
                    return Err(Error::Precondition("f not lambda-convex along axis y".into()));
                }
            }
            for j in 0..s.n {
                let col: Vec<T> = (0..x.n).map(|i| f[i * s.n + j]).collect();
                let (_, d2) = fd_derivatives(&col, x.step());
                if d2[2..x.n - 2].iter().any(|&v| v < lambda - tol) {
                    return Err(Error::Precondition("f not lambda-convex along axis x".into()));
                }
            }
        }
    }
    Ok(())
}
