//! The macroscopic gradient flow d eta/dt = -A-bar grad H-bar(eta) on
//! Y_{M,m}, integrated by RK4 with Lyapunov (energy) monitoring.

use std::io::Write;

use crate::coarse_grain::{center, norm_y_sq, CoarseHamiltonian, MacroOperator, MacroProfile};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Integrated trajectory: times, states, and the coarse energies H-bar(eta).
#[derive(Debug, Clone)]
pub struct MacroTrajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<MacroProfile<T>>,
    pub energies: Vec<T>,
}

impl<T: Scalar> MacroTrajectory<T> {
    pub fn state_at(&self, t: T) -> Result<&MacroProfile<T>> {
        let tol = T::of(1e-9) * (T::one() + t.abs());
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= tol)
            .map(|i| &self.states[i])
            .ok_or_else(|| Error::Domain(format!("no stored state at t = {}", t)))
    }

    /// CSV rows t, eta_1..eta_M, H-bar.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        let m = self.states.first().map_or(0, |s| s.n_blocks());
        write!(w, "t")?;
        for j in 1..=m {
            write!(w, ",eta_{}", j)?;
        }
        writeln!(w, ",hbar")?;
        for (i, t) in self.times.iter().enumerate() {
            write!(w, "{}", t)?;
            for v in self.states[i].values() {
                write!(w, ",{}", v)?;
            }
            writeln!(w, ",{}", self.energies[i])?;
        }
        Ok(())
    }
}

/// RK4 integration of the gradient flow. `n_outputs` states are stored at
/// uniform intervals (plus the initial one); the solver enforces the
/// stability precondition dt <= 0.5/(Lambda lambda_max(A-bar)), exact mean
/// conservation, and per-step energy monotonicity.
pub fn solve_macro_ode<T: Scalar>(
    eta0: &MacroProfile<T>,
    abar: &MacroOperator<T>,
    h: &CoarseHamiltonian<T>,
    t_end: T,
    dt: T,
    n_outputs: usize,
) -> Result<MacroTrajectory<T>> {
    if eta0.n_blocks() != h.n_blocks() || abar.n_blocks() != h.n_blocks() {
        return Err(Error::Domain("profile / operator / Hamiltonian sizes disagree".into()));
    }
    let stability = T::of(0.5) / (h.big_lambda * abar.lambda_max());
    if dt > stability {
        return Err(Error::Precondition(format!(
            "dt = {} above the RK4 stability bound {}",
            dt, stability
        )));
    }
    let total_steps = (t_end / dt).to_f64().unwrap().round().max(1.0) as usize;
    let n_outputs = n_outputs.max(1).min(total_steps);

    let rhs = |y: &[T]| -> Result<Vec<T>> {
        let mut g = Vec::with_capacity(y.len());
        for &v in y {
            g.push(h.psi_k().eval_d1(v)?);
        }
        let g = center(&g);
        Ok(abar.apply(&g).iter().map(|&v| -v).collect())
    };

    let mut y = eta0.values().to_vec();
    let mean = eta0.mean();
    let mut traj = MacroTrajectory {
        times: vec![T::zero()],
        states: vec![eta0.clone()],
        energies: vec![h.energy(eta0)?],
    };
    let mut prev_energy = traj.energies[0];
    let half = T::of(0.5);
    let sixth = T::of(1.0 / 6.0);
    let two = T::of(2.0);
    let mut done = 0usize;
    for out in 1..=n_outputs {
        let target = total_steps * out / n_outputs;
        while done < target {
            let k1 = rhs(&y)?;
            let y2: Vec<T> = y.iter().zip(k1.iter()).map(|(&a, &b)| a + half * dt * b).collect();
            let k2 = rhs(&y2)?;
            let y3: Vec<T> = y.iter().zip(k2.iter()).map(|(&a, &b)| a + half * dt * b).collect();
            let k3 = rhs(&y3)?;
            let y4: Vec<T> = y.iter().zip(k3.iter()).map(|(&a, &b)| a + dt * b).collect();
            let k4 = rhs(&y4)?;
            for i in 0..y.len() {
                y[i] += dt * sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
            }
            // A-bar maps the tangent space to itself; re-centering only
            // removes roundoff drift of the conserved mean.
            let avg = y.iter().copied().sum::<T>() / T::from_usize(y.len()).unwrap();
            for v in y.iter_mut() {
                *v = *v - avg + mean;
            }
            done += 1;
            let state = MacroProfile::new(y.clone(), mean)?;
            let energy = h.energy(&state)?;
            let slack = T::of(1e-10) * (T::one() + prev_energy.abs());
            if energy > prev_energy + slack {
                return Err(Error::Numerical(format!(
                    "coarse energy increased at step {}: {} -> {}",
                    done, prev_energy, energy
                )));
            }
            prev_energy = energy;
        }
        let state = MacroProfile::new(y.clone(), mean)?;
        traj.times.push(dt * T::from_usize(done).unwrap());
        traj.energies.push(h.energy(&state)?);
        traj.states.push(state);
    }
    Ok(traj)
}

/// Trapezoidal time integral of |grad H-bar(eta(t))|_Y^2 along a stored
/// trajectory, with the gradient-flow dissipation identity asserted:
/// the integral is bounded by (H-bar(eta(0)) - inf H-bar)/tau.
pub fn dissipation_integral<T: Scalar>(
    traj: &MacroTrajectory<T>,
    abar: &MacroOperator<T>,
    h: &CoarseHamiltonian<T>,
) -> Result<T> {
    if traj.times.len() < 2 {
        return Ok(T::zero());
    }
    let mut grads = Vec::with_capacity(traj.times.len());
    for s in &traj.states {
        grads.push(norm_y_sq(&h.grad(s)?));
    }
    let mut acc = T::zero();
    for i in 1..traj.times.len() {
        let dt = traj.times[i] - traj.times[i - 1];
        acc += (grads[i] + grads[i - 1]) * T::of(0.5) * dt;
    }
    let tau = abar.lambda_min();
    let budget = (traj.energies[0] - h.energy_min()?) / tau;
    let tol = T::of(1e-8) + T::of(0.05) * budget.abs();
    if acc > budget + tol {
        return Err(Error::Consistency(format!(
            "dissipation integral {} exceeds the energy budget {}",
            acc, budget
        )));
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarse_grain::{build_macro_operator, Projection};
    use crate::microscale::KawasakiOperator;
    use crate::potentials::{coarse_potential, GridSpec, Potential};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn setup(
        p: &Potential,
        n: usize,
        m: usize,
    ) -> (CoarseHamiltonian<f64>, MacroOperator<f64>) {
        let spec = GridSpec::new(-3.0, 3.0, 301).unwrap();
        let psik = coarse_potential(p, n / m, &spec).unwrap();
        let h = CoarseHamiltonian::new(psik, n, m, 0.0).unwrap();
        let proj = Projection::new(n, m).unwrap();
        let op = KawasakiOperator::new(n).unwrap();
        let abar = build_macro_operator(&proj, &op).unwrap();
        (h, abar)
    }

    fn sine_profile(m: usize, amp: f64) -> MacroProfile<f64> {
        let vals: Vec<f64> = (0..m)
            .map(|j| amp * (std::f64::consts::TAU * (j as f64 + 0.5) / m as f64).sin())
            .collect();
        MacroProfile::from_values(center(&vals))
    }

    #[test]
    fn constant_profile_is_stationary() {
        let p = Potential::cos(0.2);
        let (h, abar) = setup(&p, 32, 8);
        let eta0 = MacroProfile::constant(8, 0.0);
        let dt = 0.4 / (h.big_lambda * abar.lambda_max());
        let traj = solve_macro_ode(&eta0, &abar, &h, 0.5, dt, 5).unwrap();
        for s in &traj.states {
            for v in s.values() {
                assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_flow_matches_spectral_oracle() {
        // delta_psi = 0: d eta/dt = -A-bar (eta - m); expand eta0 - m in
        // eigenvectors of A-bar extracted by subspace iteration on the
        // operator itself... the macroscopic operator inherits the block
        // circulant structure, so macro Fourier modes are eigenvectors; the
        // oracle decays each mode with its Rayleigh quotient.
        let p = Potential::quadratic();
        let n = 32;
        let m = 8;
        let (h, abar) = setup(&p, n, m);
        // macro Fourier modes
        let mut modes: Vec<Vec<f64>> = Vec::new();
        for k in 1..=m / 2 {
            let ang = std::f64::consts::TAU * k as f64 / m as f64;
            modes.push((0..m).map(|j| (ang * j as f64).cos()).collect());
            if k < m - k {
                modes.push((0..m).map(|j| (ang * j as f64).sin()).collect());
            }
        }
        let mut eta0 = vec![0.0; m];
        let coeffs: Vec<f64> = (0..modes.len()).map(|i| 0.3 / (1.0 + i as f64)).collect();
        for (c, v) in coeffs.iter().zip(modes.iter()) {
            for j in 0..m {
                eta0[j] += c * v[j];
            }
        }
        let eta0 = MacroProfile::from_values(center(&eta0));
        let t_end = 0.02;
        let dt = 0.25 / (h.big_lambda * abar.lambda_max());
        let traj = solve_macro_ode(&eta0, &abar, &h, t_end, dt, 1).unwrap();
        let last = traj.states.last().unwrap();
        let t = *traj.times.last().unwrap();
        // oracle: each mode decays at its Rayleigh quotient under A-bar
        let mut expect = vec![0.0; m];
        for (c, v) in coeffs.iter().zip(modes.iter()) {
            let av = abar.apply(v);
            let lam = v.iter().zip(av.iter()).map(|(a, b)| a * b).sum::<f64>()
                / v.iter().map(|a| a * a).sum::<f64>();
            let decay = (-lam * t).exp();
            for j in 0..m {
                expect[j] += c * decay * v[j];
            }
        }
        for (a, b) in last.values().iter().zip(expect.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn energy_monotone_and_mean_conserved() {
        let p = Potential::cos(0.2);
        let (h, abar) = setup(&p, 64, 8);
        let eta0 = sine_profile(8, 0.6);
        let dt = 0.4 / (h.big_lambda * abar.lambda_max());
        let traj = solve_macro_ode(&eta0, &abar, &h, 0.3, dt, 12).unwrap();
        for w in traj.energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-10);
        }
        for s in &traj.states {
            assert_abs_diff_eq!(s.mean(), 0.0, epsilon = 1e-12);
        }
        assert!(traj.energies.last().unwrap() < &traj.energies[0]);
    }

    #[test]
    fn rejects_unstable_dt() {
        let p = Potential::cos(0.2);
        let (h, abar) = setup(&p, 32, 8);
        let eta0 = sine_profile(8, 0.3);
        let dt = 1.0 / (h.big_lambda * abar.lambda_max());
        assert!(matches!(
            solve_macro_ode(&eta0, &abar, &h, 0.1, dt, 1),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn table_escape_is_extrapolation_error() {
        let p = Potential::quadratic();
        let spec = GridSpec::new(-0.4, 0.4, 41).unwrap();
        let psik = coarse_potential(&p, 4, &spec).unwrap();
        let h = CoarseHamiltonian::new(psik, 32, 8, 0.0).unwrap();
        let proj = Projection::new(32, 8).unwrap();
        let op = KawasakiOperator::new(32).unwrap();
        let abar = build_macro_operator(&proj, &op).unwrap();
        let eta0 = sine_profile(8, 0.9); // outside the table
        assert!(matches!(
            solve_macro_ode(&eta0, &abar, &h, 0.1, 1e-5, 1),
            Err(Error::Extrapolation(_))
        ));
    }

    #[test]
    fn step_halving_shows_fourth_order() {
        // Richardson ratio |eta_dt - eta_dt/2| / |eta_dt/2 - eta_dt/4| >= 12
        let p = Potential::cos(0.2);
        let (h, abar) = setup(&p, 32, 8);
        let eta0 = sine_profile(8, 0.6);
        let t_end = 0.02;
        let base_dt = 0.4 / (h.big_lambda * abar.lambda_max());
        let run = |dt: f64| {
            let traj = solve_macro_ode(&eta0, &abar, &h, t_end, dt, 1).unwrap();
            traj.states.last().unwrap().values().to_vec()
        };
        let a = run(base_dt);
        let b = run(base_dt / 2.0);
        let c = run(base_dt / 4.0);
        let d_ab = a
            .iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        let d_bc = b
            .iter()
            .zip(c.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        assert!(d_ab / d_bc >= 12.0, "Richardson ratio {}", d_ab / d_bc);
    }

    #[test]
    fn dissipation_integral_bounded_and_zero_when_stationary() {
        let p = Potential::cos(0.2);
        let (h, abar) = setup(&p, 64, 8);
        let flat = MacroProfile::constant(8, 0.0);
        let dt = 0.4 / (h.big_lambda * abar.lambda_max());
        let traj = solve_macro_ode(&flat, &abar, &h, 0.2, dt, 8).unwrap();
        let d = dissipation_integral(&traj, &abar, &h).unwrap();
        assert_abs_diff_eq!(d, 0.0, epsilon = 1e-12);

        let eta0 = sine_profile(8, 0.6);
        // outputs dense enough that the trapezoid bias on the exponentially
        // decaying integrand stays inside the 5% budget slack
        let traj = solve_macro_ode(&eta0, &abar, &h, 1.0, dt, 400).unwrap();
        let d = dissipation_integral(&traj, &abar, &h).unwrap();
        assert!(d > 0.0);
        let budget = (traj.energies[0] - h.energy_min().unwrap()) / abar.lambda_min();
        assert!(d <= budget * 1.05 + 1e-8);
    }

    #[test]
    fn single_mode_dissipation_matches_closed_form() {
        // delta_psi = 0, single macro Fourier mode of amplitude a and
        // A-bar-eigenvalue lam: eta(t) = a e^{-lam t} v, and
        // int_0^T |grad|_Y^2 dt = a^2 |v|_Y^2 (1 - e^{-2 lam T})/(2 lam).
        let p = Potential::quadratic();
        let n = 32;
        let m = 8;
        let (h, abar) = setup(&p, n, m);
        let ang = std::f64::consts::TAU / m as f64;
        let v: Vec<f64> = (0..m).map(|j| (ang * j as f64).cos()).collect();
        let a = 0.4;
        let av = abar.apply(&v);
        let lam = v.iter().zip(av.iter()).map(|(x, y)| x * y).sum::<f64>()
            / v.iter().map(|x| x * x).sum::<f64>();
        let eta0 = MacroProfile::from_values(center(&v.iter().map(|x| a * x).collect::<Vec<_>>()));
        let t_end = 0.05;
        let dt = 1e-5;
        let traj = solve_macro_ode(&eta0, &abar, &h, t_end, dt, 400).unwrap();
        let d = dissipation_integral(&traj, &abar, &h).unwrap();
        let v_norm = norm_y_sq(&v);
        let expect = a * a * v_norm * (1.0 - (-2.0 * lam * t_end).exp()) / (2.0 * lam);
        assert_relative_eq!(d, expect, epsilon = 1e-4);
    }
}
