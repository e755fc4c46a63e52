//! Coarse-grained potential psi_K from the K-fold convolution of
//! q(x) = exp(-psi(x)).
//!
//! With the (K-1)-dimensional surface measure on the constrained block and
//! the co-area factor, psi_K(m) = -(1/K) log(sqrt(K) q^{*K}(K m)). The
//! convolution is evaluated in envelope-factored form: writing
//! q^{*k}(k t) = exp(-k t^2 / 2) p_k(t), the bounded profiles p_k satisfy
//!
//!   p_{a+b}(t) = int exp(-u^2 (a+b)/(2ab)) p_a(t + u/a) p_b(t - u/b) du,
//!
//! a Gauss-weighted local product. Factoring the Gaussian envelope keeps the
//! whole recursion inside a dynamic range of exp(2K sup|delta_psi|), so the
//! tail values at K m stay accurate where a direct convolution of q would
//! drown in roundoff; the log-space rescaling below removes even that range.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::tabulated::{GridSpec, TabulatedFunction};
use super::Potential;

/// Gaussian weight cutoff exponent: integrand tails below exp(-E_CUT) are
/// dropped (4e-18 relative to the profile scale).
const E_CUT: f64 = 40.0;

/// Profile values on the fine lattice t_i = origin + i*h, rescaled to unit
/// max; `log_scale` carries the removed factor in log space.
struct Profile<T> {
    lo: i64,
    values: Vec<T>,
    log_scale: T,
}

impl<T: Scalar> Profile<T> {
    #[inline]
    fn get(&self, idx: i64) -> T {
        self.values[(idx - self.lo) as usize]
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

struct Builder<'a, T> {
    p: &'a Potential,
    origin: T,
    h: T,
}

impl<'a, T: Scalar> Builder<'a, T> {
    fn lattice(&self, idx: i64) -> T {
        self.origin + self.h * T::from_i64(idx).unwrap()
    }

    fn build(&self, k: usize, lo: i64, hi: i64) -> Profile<T> {
        if k == 1 {
            // p_1(t) = exp(-delta_psi(t)); bounded, no rescaling hazard.
            let mut values = Vec::with_capacity((hi - lo + 1) as usize);
            let mut max = T::neg_infinity();
            for idx in lo..=hi {
                let (d0, _, _) = self.p.delta.eval(self.lattice(idx));
                let v = (-d0).exp();
                if v > max {
                    max = v;
                }
                values.push(v);
            }
            for v in values.iter_mut() {
                *v = *v / max;
            }
            return Profile { lo, values, log_scale: max.ln() };
        }
        let a = k / 2;
        let b = k - a;
        let l = a / gcd(a, b) * b;
        let step_u = self.h * T::from_usize(l).unwrap();
        // exp(-u^2 (a+b)/(2ab))
        let decay = T::from_usize(a + b).unwrap()
            / (T::of(2.0) * T::from_usize(a).unwrap() * T::from_usize(b).unwrap());
        let u_max = (T::of(E_CUT) / decay).sqrt();
        let j_max = (u_max / step_u).ceil().to_i64().unwrap().max(1);
        let da = (l / a) as i64;
        let db = (l / b) as i64;

        let pa = self.build(a, lo - j_max * da, hi + j_max * da);
        let pb = if a == b {
            None
        } else {
            Some(self.build(b, lo - j_max * db, hi + j_max * db))
        };
        let pb_ref: &Profile<T> = pb.as_ref().unwrap_or(&pa);

        let weights: Vec<T> = (0..=j_max)
            .map(|j| {
                let u = step_u * T::from_i64(j).unwrap();
                (-decay * u * u).exp()
            })
            .collect();

        let mut values = Vec::with_capacity((hi - lo + 1) as usize);
        let mut max = T::neg_infinity();
        for idx in lo..=hi {
            let mut acc = weights[0] * pa.get(idx) * pb_ref.get(idx);
            for j in 1..=j_max {
                let w = weights[j as usize];
                acc += w
                    * (pa.get(idx + da * j) * pb_ref.get(idx - db * j)
                        + pa.get(idx - da * j) * pb_ref.get(idx + db * j));
            }
            let v = acc * step_u;
            if v > max {
                max = v;
            }
            values.push(v);
        }
        let log_scale = pa.log_scale + pb_ref.log_scale + max.ln();
        for v in values.iter_mut() {
            *v = *v / max;
        }
        Profile { lo, values, log_scale }
    }
}

/// Tabulate psi_K on `m_grid`. Derivatives are 4th-order central differences
/// of log q^{*K} on the internal fine lattice (spacing <= 1/512, chosen to
/// contain the m-grid nodes).
pub fn coarse_potential<T: Scalar>(
    p: &Potential,
    k: usize,
    m_grid: &GridSpec<T>,
) -> Result<TabulatedFunction<T>> {
    if k < 1 {
        return Err(Error::Domain("coarse_potential needs K >= 1".into()));
    }
    let hm = m_grid.step();
    let sub = (hm.to_f64().unwrap() * 512.0).ceil().max(1.0) as i64;
    let h = hm / T::from_i64(sub).unwrap();
    let n = m_grid.n;
    let builder = Builder { p, origin: m_grid.min, h };

    let lo = -2i64;
    let hi = (n as i64 - 1) * sub + 2;
    let prof = builder.build(k, lo, hi);

    // psi_K on the fine lattice.
    let kt = T::from_usize(k).unwrap();
    let ln_sqrt_k = T::of(0.5) * kt.ln();
    let half = T::of(0.5);
    let mut psi_fine = Vec::with_capacity(prof.values.len());
    let mut valid_lo = None;
    let mut valid_hi = None;
    for (off, &v) in prof.values.iter().enumerate() {
        let idx = lo + off as i64;
        let t = builder.lattice(idx);
        if v <= T::zero() {
            psi_fine.push(T::infinity());
            continue;
        }
        if valid_lo.is_none() {
            valid_lo = Some(t);
        }
        valid_hi = Some(t);
        psi_fine.push(half * t * t - (v.ln() + prof.log_scale + ln_sqrt_k) / kt);
    }
    if psi_fine.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!(
            "q^{{*K}} underflows in the far tails for K = {}; valid m-range is [{:?}, {:?}]",
            k, valid_lo, valid_hi
        )));
    }

    let grid = m_grid.points();
    let mut values = Vec::with_capacity(n);
    let mut d1 = Vec::with_capacity(n);
    let mut d2 = Vec::with_capacity(n);
    let c8 = T::of(8.0);
    let c16 = T::of(16.0);
    let c30 = T::of(30.0);
    let h12 = T::of(12.0) * h;
    let h2_12 = T::of(12.0) * h * h;
    for j in 0..n {
        let c = ((j as i64) * sub - lo) as usize;
        let f = &psi_fine;
        values.push(f[c]);
        d1.push((-f[c + 2] + c8 * f[c + 1] - c8 * f[c - 1] + f[c - 2]) / h12);
        d2.push((-f[c + 2] + c16 * f[c + 1] - c30 * f[c] + c16 * f[c - 1] - f[c - 2]) / h2_12);
    }
    TabulatedFunction::new(
        grid,
        values,
        d1,
        d2,
        format!("psiK K={} potential={}", k, p.tag()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::cramer::{convexity_bounds, cramer_transform, QuadratureSpec};
    use approx::assert_relative_eq;

    fn window() -> GridSpec<f64> {
        GridSpec::new(-1.0, 1.0, 81).unwrap()
    }

    #[test]
    fn gaussian_coarse_is_quadratic_for_every_k() {
        let p = Potential::quadratic();
        for k in [1usize, 2, 3, 4, 8, 16, 32] {
            let t = coarse_potential(&p, k, &window()).unwrap();
            let c_k = t.values()[40]; // value at m = 0
            for (i, &m) in t.grid().iter().enumerate() {
                assert_relative_eq!(t.values()[i] - c_k, 0.5 * m * m, epsilon = 1e-8);
                assert_relative_eq!(t.d1()[i], m, epsilon = 1e-7);
                assert_relative_eq!(t.d2()[i], 1.0, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn gaussian_constant_matches_closed_form() {
        // psi_K(m) = m^2/2 - (K-1)/(2K) log(2 pi)
        let p = Potential::quadratic();
        for k in [1usize, 2, 4, 8] {
            let t = coarse_potential(&p, k, &window()).unwrap();
            let expect = -((k as f64 - 1.0) / (2.0 * k as f64)) * (2.0 * std::f64::consts::PI).ln();
            assert_relative_eq!(t.values()[40], expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn k_equals_one_recovers_psi_exactly() {
        let p = Potential::cos(0.2);
        let t = coarse_potential(&p, 1, &window()).unwrap();
        for (i, &m) in t.grid().iter().enumerate() {
            let (v, _, d2) = p.eval_psi(m).unwrap();
            assert_relative_eq!(t.values()[i], v, epsilon = 1e-13);
            assert_relative_eq!(t.d2()[i], d2, epsilon = 1e-9);
        }
    }

    #[test]
    fn k2_matches_direct_quadrature() {
        // Oracle: psi_2(m) = -(1/2) log(sqrt(2) int e^{-psi(x) - psi(2m - x)} dx)
        let p = Potential::cos(0.2);
        let t = coarse_potential(&p, 2, &window()).unwrap();
        let m = 0.3_f64;
        let l = 14.0;
        let nq = 28001;
        let h = 2.0 * l / (nq as f64 - 1.0);
        let mut s = 0.0;
        for i in 0..nq {
            let x = -l + i as f64 * h;
            let e = -(p.value(x) + p.value(2.0 * m - x));
            s += e.exp();
        }
        let oracle = -0.5 * (2.0_f64.sqrt() * s * h).ln();
        assert_relative_eq!(t.eval(m).unwrap(), oracle, epsilon = 1e-6);
    }

    #[test]
    fn coarse_second_derivative_approaches_cramer() {
        let p = Potential::cos(0.2);
        let phi = cramer_transform(&p, &window(), &QuadratureSpec::default()).unwrap();
        let (phi_lambda, _) = convexity_bounds(&phi);
        let mut prev_gap = f64::INFINITY;
        for k in [1usize, 2, 4, 8, 16] {
            let t = coarse_potential(&p, k, &window()).unwrap();
            let (lam, _) = convexity_bounds(&t);
            let gap = (lam - phi_lambda).abs();
            assert!(gap <= prev_gap * 1.10 + 1e-9, "lambda(K) trend broken at K = {}", k);
            prev_gap = gap;
        }
    }

    #[test]
    fn nonconvex_potential_convexifies_at_some_block_size() {
        // delta_psi = 1.2 cos makes psi itself nonconvex; coarse-graining
        // restores uniform convexity at moderate K.
        let p = Potential::cos(1.2);
        let t1 = coarse_potential(&p, 1, &window()).unwrap();
        let (lam1, _) = convexity_bounds(&t1);
        assert!(lam1 < 0.0, "K = 1 should be nonconvex, got lambda = {}", lam1);
        let mut convexified = None;
        for k in [2usize, 4, 8, 16, 32] {
            let t = coarse_potential(&p, k, &window()).unwrap();
            let (lam, _) = convexity_bounds(&t);
            if lam > 0.0 {
                convexified = Some(k);
                break;
            }
        }
        assert!(convexified.is_some(), "no K <= 32 convexified psi_K");
    }

    #[test]
    fn convexity_bounds_gaussian_unit() {
        let p = Potential::quadratic();
        for k in [1usize, 4] {
            let t = coarse_potential(&p, k, &window()).unwrap();
            let (lo, hi) = convexity_bounds(&t);
            assert_relative_eq!(lo, 1.0, epsilon = 1e-6);
            assert_relative_eq!(hi, 1.0, epsilon = 1e-6);
        }
    }
}
