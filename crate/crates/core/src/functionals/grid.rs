//! Relative entropy and Fisher information of grid densities.

use crate::error::{Error, Result};
use crate::microscale::GridDensity;
use crate::potentials::fd_derivatives;
use crate::scalar::Scalar;

fn common_grid<T: Scalar>(rho: &GridDensity<T>, mu: &GridDensity<T>) -> Result<()> {
    if rho.x != mu.x || rho.y != mu.y {
        return Err(Error::Domain("densities live on different grids".into()));
    }
    Ok(())
}

/// Ent_mu(rho/mu) = int (rho/mu) log(rho/mu) dmu, trapezoidal. Nonnegative
/// up to quadrature error for normalized inputs.
pub fn entropy_grid<T: Scalar>(rho: &GridDensity<T>, mu: &GridDensity<T>) -> Result<T> {
    common_grid(rho, mu)?;
    let vol = match &rho.y {
        None => rho.x.step(),
        Some(y) => rho.x.step() * y.step(),
    };
    let mut acc = T::zero();
    for (idx, (&r, &m)) in rho.values.iter().zip(mu.values.iter()).enumerate() {
        if r == T::zero() {
            continue;
        }
        if m <= T::zero() {
            return Err(Error::Domain(format!(
                "rho not absolutely continuous: rho = {} where mu = {} (node {})",
                r, m, idx
            )));
        }
        let w = weight_of(rho, idx);
        acc += w * r * (r / m).ln();
    }
    Ok(acc * vol)
}

/// Fisher information I_mu(rho) = int |grad(rho/mu)|^2 / (rho/mu) dmu with
/// 4th-order central differences for the gradient.
pub fn fisher_grid<T: Scalar>(rho: &GridDensity<T>, mu: &GridDensity<T>) -> Result<T> {
    common_grid(rho, mu)?;
    let f: Vec<T> = rho
        .values
        .iter()
        .zip(mu.values.iter())
        .map(|(&r, &m)| if m > T::zero() { r / m } else { T::zero() })
        .collect();
    for (idx, (&r, &m)) in rho.values.iter().zip(mu.values.iter()).enumerate() {
        if r > T::zero() && m <= T::zero() {
            return Err(Error::Domain(format!(
                "rho not absolutely continuous at node {}",
                idx
            )));
        }
    }
    let tiny = T::of(1e-300);
    match &rho.y {
        None => {
            let (df, _) = fd_derivatives(&f, rho.x.step());
            let h = rho.x.step();
            let mut acc = T::zero();
            for i in 0..f.len() {
                if f[i] > tiny {
                    let w = weight_of(rho, i);
                    acc += w * df[i] * df[i] / f[i] * mu.values[i];
                }
            }
            Ok(acc * h)
        }
        Some(y) => {
            let (nx, ny) = (rho.x.n, y.n);
            let (hx, hy) = (rho.x.step(), y.step());
            // per-axis 4th-order derivatives
            let mut dfx = vec![T::zero(); nx * ny];
            let mut dfy = vec![T::zero(); nx * ny];
            for j in 0..ny {
                let col: Vec<T> = (0..nx).map(|i| f[i * ny + j]).collect();
                let (d, _) = fd_derivatives(&col, hx);
                for i in 0..nx {
                    dfx[i * ny + j] = d[i];
                }
            }
            for i in 0..nx {
                let row: Vec<T> = (0..ny).map(|j| f[i * ny + j]).collect();
                let (d, _) = fd_derivatives(&row, hy);
                for j in 0..ny {
                    dfy[i * ny + j] = d[j];
                }
            }
            let mut acc = T::zero();
            for idx in 0..f.len() {
                if f[idx] > tiny {
                    let w = weight_of(rho, idx);
                    let g2 = dfx[idx] * dfx[idx] + dfy[idx] * dfy[idx];
                    acc += w * g2 / f[idx] * mu.values[idx];
                }
            }
            Ok(acc * hx * hy)
        }
    }
}

fn weight_of<T: Scalar>(d: &GridDensity<T>, idx: usize) -> T {
    let half = T::of(0.5);
    match &d.y {
        None => {
            if idx == 0 || idx == d.x.n - 1 {
                half
            } else {
                T::one()
            }
        }
        Some(y) => {
            let (i, j) = (idx / y.n, idx % y.n);
            let wx = if i == 0 || i == d.x.n - 1 { half } else { T::one() };
            let wy = if j == 0 || j == y.n - 1 { half } else { T::one() };
            wx * wy
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::GridSpec;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn gaussian_1d(spec: &GridSpec<f64>, mean: f64, var: f64) -> GridDensity<f64> {
        let vals: Vec<f64> = spec
            .points()
            .iter()
            .map(|x| (-(x - mean) * (x - mean) / (2.0 * var)).exp())
            .collect();
        GridDensity::new_1d(*spec, vals).unwrap()
    }

    #[test]
    fn entropy_of_itself_is_zero() {
        let spec = GridSpec::new(-10.0, 10.0, 2001).unwrap();
        let mu = gaussian_1d(&spec, 0.0, 1.0);
        let e = entropy_grid(&mu, &mu).unwrap();
        assert_abs_diff_eq!(e, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_shift_kl_closed_form() {
        // KL(N(a,1) || N(0,1)) = a^2/2 to 1e-6
        let spec = GridSpec::new(-12.0, 12.0, 4001).unwrap();
        let mu = gaussian_1d(&spec, 0.0, 1.0);
        for a in [0.3, 0.8, 1.5] {
            let nu = gaussian_1d(&spec, a, 1.0);
            let e = entropy_grid(&nu, &mu).unwrap();
            assert_abs_diff_eq!(e, a * a / 2.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn entropy_nonnegative_on_perturbed_densities() {
        let spec = GridSpec::new(-10.0, 10.0, 1501).unwrap();
        let mu = gaussian_1d(&spec, 0.0, 1.0);
        for k in 1..6 {
            let vals: Vec<f64> = spec
                .points()
                .iter()
                .map(|x| (-(x * x) / 2.0).exp() * (1.0 + 0.3 * (k as f64 * x).sin().powi(2)))
                .collect();
            let nu = GridDensity::new_1d(spec, vals).unwrap();
            let e = entropy_grid(&nu, &mu).unwrap();
            assert!(e >= -1e-12, "entropy = {}", e);
        }
    }

    #[test]
    fn entropy_rejects_support_violation() {
        let spec = GridSpec::<f64>::new(-5.0, 5.0, 101).unwrap();
        let mut mu_vals: Vec<f64> =
            spec.points().iter().map(|x| (-(x * x) / 2.0).exp()).collect();
        for v in mu_vals.iter_mut().take(20) {
            *v = 0.0;
        }
        let mu = GridDensity::new_1d(spec, mu_vals).unwrap();
        let nu = gaussian_1d(&spec, -3.0, 0.3);
        assert!(entropy_grid(&nu, &mu).is_err());
    }

    #[test]
    fn fisher_of_itself_is_zero() {
        let spec = GridSpec::new(-10.0, 10.0, 1001).unwrap();
        let mu = gaussian_1d(&spec, 0.0, 1.0);
        let i = fisher_grid(&mu, &mu).unwrap();
        assert_abs_diff_eq!(i, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_shift_fisher_closed_form() {
        // I(N(a,1) || N(0,1)) = a^2 to 1e-4
        let spec = GridSpec::new(-13.0, 13.0, 4001).unwrap();
        let mu = gaussian_1d(&spec, 0.0, 1.0);
        for a in [0.4, 1.0] {
            let nu = gaussian_1d(&spec, a, 1.0);
            let i = fisher_grid(&nu, &mu).unwrap();
            assert_abs_diff_eq!(i, a * a, epsilon = 1e-4);
        }
    }

    #[test]
    fn gaussian_lsi_with_sharp_constant() {
        // Ent <= I/(2 rho) with rho = 1 for the standard Gaussian.
        let spec = GridSpec::new(-12.0, 12.0, 3001).unwrap();
        let mu = gaussian_1d(&spec, 0.0, 1.0);
        for (a, v) in [(0.5, 1.0), (0.0, 0.6), (0.8, 1.3)] {
            let nu = gaussian_1d(&spec, a, v);
            let ent = entropy_grid(&nu, &mu).unwrap();
            let fish = fisher_grid(&nu, &mu).unwrap();
            assert!(ent <= fish / 2.0 + 1e-8, "a={} v={}: {} vs {}", a, v, ent, fish / 2.0);
        }
    }

    #[test]
    fn fisher_2d_product_gaussians() {
        let sx = GridSpec::new(-9.0, 9.0, 401).unwrap();
        let sy = GridSpec::new(-9.0, 9.0, 401).unwrap();
        let dens = |mx: f64, my: f64| {
            let mut vals = vec![0.0; sx.n * sy.n];
            for (i, x) in sx.points().iter().enumerate() {
                for (j, y) in sy.points().iter().enumerate() {
                    vals[i * sy.n + j] =
                        (-((x - mx).powi(2) + (y - my).powi(2)) / 2.0).exp();
                }
            }
            GridDensity::new_2d(sx, sy, vals).unwrap()
        };
        let mu = dens(0.0, 0.0);
        let nu = dens(0.5, -0.7);
        let i = fisher_grid(&nu, &mu).unwrap();
        assert_relative_eq!(i, 0.5 * 0.5 + 0.7 * 0.7, epsilon = 1e-3);
        let e = entropy_grid(&nu, &mu).unwrap();
        assert_relative_eq!(e, (0.5 * 0.5 + 0.7 * 0.7) / 2.0, epsilon = 1e-3);
    }
}
