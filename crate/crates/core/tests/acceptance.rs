//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers (visible with --nocapture; the test name itself is
//! the pass/fail line).

use twoscale::coarse_grain::{center, LocalGibbs, MacroProfile, Projection};
use twoscale::functionals::{
    hwi_check, second_moment_lemma_check, w2_to_dirac_samples,
};
use twoscale::harness::{
    grid_crosscheck, prepare, run_assumption_audit, run_entropy_convergence,
    run_hydrodynamic_limit, run_local_gibbs, ExperimentConfig, LadderEntry,
};
use twoscale::hydro_pde::{
    check_d1_contraction, regularity_diagnostics, solve_hydro, HydroField,
};
use twoscale::microscale::{GridDensity, KawasakiOperator};
use twoscale::potentials::{
    coarse_potential, convexity_bounds, cramer_transform, GridSpec, Potential, QuadratureSpec,
};

fn table_window() -> GridSpec<f64> {
    GridSpec::new(-2.5, 2.5, 501).unwrap()
}

fn gaussian_ladder_cfg() -> ExperimentConfig {
    ExperimentConfig {
        potential: Potential::quadratic(),
        ..Default::default()
    }
}

/// Criterion 1: structure identities, spectrum of A, and the spectral floor.
#[test]
fn c01_structure_identities() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for entry in ExperimentConfig::default().ladder {
        let n = entry.n_sites;
        let m = entry.n_blocks;
        let proj = Projection::new(n, m).unwrap();
        for _ in 0..100 {
            let y: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let back = proj.project(&proj.lift(&y).unwrap()).unwrap();
            for (a, b) in back.iter().zip(y.iter()) {
                assert!((a - b).abs() <= 1e-12, "PNP^t identity violated");
            }
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let px = proj.lift(&proj.project(&x).unwrap()).unwrap();
            let ppx = proj.lift(&proj.project(&px).unwrap()).unwrap();
            for (a, b) in px.iter().zip(ppx.iter()) {
                assert!((a - b).abs() <= 1e-12, "idempotence violated");
            }
            let z: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let pz = proj.lift(&proj.project(&z).unwrap()).unwrap();
            let lhs: f64 = px.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.iter().zip(pz.iter()).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()), "self-adjointness violated");
        }
    }
    // spectrum against the stencil for N in {4, 16, 64, 256}
    for n in [4usize, 16, 64, 256] {
        let op = KawasakiOperator::<f64>::new(n).unwrap();
        for k in 1..n {
            let ang = std::f64::consts::TAU * k as f64 / n as f64;
            let v: Vec<f64> =
                (0..n).map(|j| (ang * j as f64).cos() + (ang * j as f64).sin()).collect();
            let av = op.apply(&v);
            let quot = v.iter().zip(av.iter()).map(|(a, b)| a * b).sum::<f64>()
                / v.iter().map(|a| a * a).sum::<f64>();
            let expect = 2.0 * (n as f64).powi(2) * (1.0 - ang.cos());
            assert!(
                (quot - expect).abs() <= 1e-9 * expect.max(1.0),
                "spectrum mismatch at N = {}, k = {}",
                n,
                k
            );
        }
    }
    let op = KawasakiOperator::<f64>::new(256).unwrap();
    let four_pi2 = 4.0 * std::f64::consts::PI.powi(2);
    let tau = op.min_nonzero_eigenvalue();
    assert!((tau - four_pi2).abs() / four_pi2 < 0.01);
    println!(
        "criterion 1 PASS: identities to 1e-12 on 100 probes/entry; spectrum to 1e-9; tau(256) = {:.4} vs 4 pi^2 = {:.4}",
        tau, four_pi2
    );
}

/// Criterion 2: transform suite (Gaussian closed forms, C^2 trend, K = 2
/// quadrature oracle).
#[test]
fn c02_transform_suite() {
    let window = table_window();
    // Gaussian case: phi'' = 1 and psi_K'' = 1 to 1e-6
    let pz = Potential::quadratic();
    let phi_z = cramer_transform(&pz, &window, &QuadratureSpec::default()).unwrap();
    for &d2 in &phi_z.d2()[2..phi_z.len() - 2] {
        assert!((d2 - 1.0).abs() <= 1e-6, "phi'' deviates: {}", d2);
    }
    for k in [1usize, 4, 32] {
        let t = coarse_potential(&pz, k, &window).unwrap();
        for &d2 in &t.d2()[2..t.len() - 2] {
            assert!((d2 - 1.0).abs() <= 1e-6, "psi_{}'' deviates: {}", k, d2);
        }
    }
    // cos potential: C2 distance monotone non-increasing with 10% slack
    let p = Potential::cos(0.2);
    let phi = cramer_transform(&p, &window, &QuadratureSpec::default()).unwrap();
    let phi_at_mean = phi.eval(0.0).unwrap();
    let mut prev: Option<(f64, f64, f64)> = None;
    let mut last = (0.0, 0.0, 0.0);
    for k in [1usize, 2, 4, 8, 16, 32] {
        let t = coarse_potential(&p, k, &window).unwrap();
        let c_k = t.eval(0.0).unwrap() - phi_at_mean;
        let (mut d0, mut d1, mut d2) = (0.0_f64, 0.0_f64, 0.0_f64);
        for i in 2..t.len() - 2 {
            d0 = d0.max((t.values()[i] - phi.values()[i] - c_k).abs());
            d1 = d1.max((t.d1()[i] - phi.d1()[i]).abs());
            d2 = d2.max((t.d2()[i] - phi.d2()[i]).abs());
        }
        if let Some((p0, p1, p2)) = prev {
            assert!(d0 <= 1.10 * p0 + 1e-12, "C0 trend broken at K = {}: {} vs {}", k, d0, p0);
            assert!(d1 <= 1.10 * p1 + 1e-12, "C1 trend broken at K = {}: {} vs {}", k, d1, p1);
            assert!(d2 <= 1.10 * p2 + 1e-12, "C2 trend broken at K = {}: {} vs {}", k, d2, p2);
        }
        prev = Some((d0, d1, d2));
        last = (d0, d1, d2);
    }
    // K = 2 against direct quadrature at m = 0.3
    let t2 = coarse_potential(&p, 2, &window).unwrap();
    let m = 0.3_f64;
    let l = 14.0;
    let nq = 28001;
    let h = 2.0 * l / (nq as f64 - 1.0);
    let mut s = 0.0;
    for i in 0..nq {
        let x = -l + i as f64 * h;
        let e: f64 = -(p.value(x) + p.value(2.0 * m - x));
        s += e.exp();
    }
    let oracle = -0.5 * (2.0_f64.sqrt() * s * h).ln();
    let got = t2.eval(m).unwrap();
    assert!((got - oracle).abs() <= 1e-6, "K=2 oracle: {} vs {}", got, oracle);
    println!(
        "criterion 2 PASS: Gaussian second derivatives exact to 1e-6; C2 trend monotone (K=32 dist = {:.2e}/{:.2e}/{:.2e}); K=2 quadrature gap {:.2e}",
        last.0, last.1, last.2, (got - oracle).abs()
    );
}

/// Criterion 3: local Gibbs moment bound (Prop. 11(ii)) and the Gaussian
/// closed form.
#[test]
fn c03_local_gibbs_moment_bound() {
    let window = table_window();
    let pairs = [(16usize, 2usize), (64, 4), (256, 8)];
    let mut worst_gauss_gap = 0.0_f64;
    for potential in [Potential::quadratic(), Potential::cos(0.2)] {
        for &(n, m) in &pairs {
            let psik = coarse_potential(&potential, n / m, &window).unwrap();
            let ham =
                twoscale::coarse_grain::CoarseHamiltonian::new(psik, n, m, 0.0).unwrap();
            // a fixed off-center profile on the tangent
            let vals: Vec<f64> = (0..m)
                .map(|j| 0.3 * if j % 2 == 0 { 1.0 } else { -1.0 })
                .collect();
            let eta = MacroProfile::from_values(center(&vals));
            let gibbs = LocalGibbs::new(&ham, eta.clone()).unwrap();
            let bound = m as f64 / (ham.lambda * n as f64);
            // Metropolis channel within 3 standard errors
            let (samples, _) = gibbs.sample(4096, 99 ^ (n as u64), 500).unwrap();
            let (mc, se) =
                w2_to_dirac_samples(&samples, m, eta.values(), 1.0 / m as f64).unwrap();
            assert!(
                mc - 3.0 * se <= bound,
                "moment bound violated at (M, N) = ({}, {}): {} vs {}",
                m,
                n,
                mc,
                bound
            );
            // Gaussian closed form (M-1)/(lambda N) via the exact sampler
            if matches!(potential.delta, twoscale::potentials::DeltaPsi::Zero) {
                let samples = gibbs.sample_gaussian_exact(1 << 18, 1000 + n as u64);
                let (mc, _) =
                    w2_to_dirac_samples(&samples, m, eta.values(), 1.0 / m as f64).unwrap();
                let closed = (m as f64 - 1.0) / (ham.lambda * n as f64);
                let gap = (mc - closed).abs();
                worst_gauss_gap = worst_gauss_gap.max(gap);
                assert!(gap <= 1e-3, "Gaussian closed form at ({}, {}): gap {}", m, n, gap);
            }
        }
    }
    println!(
        "criterion 3 PASS: moment bounds hold within 3 stderr on all six configurations; worst Gaussian closed-form gap {:.2e}",
        worst_gauss_gap
    );
}

/// Criterion 4: Lemma 1 and HWI - equality on Gaussians, inequality on 50
/// randomized instances each.
#[test]
fn c04_lemma1_and_hwi() {
    use rand::{Rng, SeedableRng};
    let spec = GridSpec::new(-12.0_f64, 12.0, 6001).unwrap();
    let gauss = |mean: f64, var: f64| {
        let vals: Vec<f64> = spec
            .points()
            .iter()
            .map(|x| (-(x - mean) * (x - mean) / (2.0 * var)).exp())
            .collect();
        GridDensity::new_1d(spec, vals).unwrap()
    };
    // HWI equality on the Gaussian shift pair
    let mu = gauss(0.0, 1.0);
    let nu = gauss(0.8, 1.0);
    let rep = hwi_check(&mu, &nu, 1.0).unwrap();
    assert!(rep.holds);
    assert!(
        (rep.entropy - rep.rhs).abs() <= 1e-8,
        "HWI equality gap {}",
        (rep.entropy - rep.rhs).abs()
    );
    // Lemma 1 equality on the Gaussian
    let f: Vec<f64> = spec.points().iter().map(|x| 0.5 * x * x).collect();
    let lem = second_moment_lemma_check(&spec, None, &f, 1.0).unwrap();
    assert!(lem.holds && (lem.lhs - lem.rhs).abs() <= 1e-8 * lem.rhs);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(44);
    // 50 randomized log-concave HWI instances: mu with curvature >= 1,
    // nu a shifted/scaled Gaussian; the window is sized so the quartic
    // tilt stays representable at the edges
    let rspec = GridSpec::new(-8.0_f64, 8.0, 4001).unwrap();
    let rgauss = |mean: f64, var: f64| {
        let vals: Vec<f64> = rspec
            .points()
            .iter()
            .map(|x| (-(x - mean) * (x - mean) / (2.0 * var)).exp())
            .collect();
        GridDensity::new_1d(rspec, vals).unwrap()
    };
    for i in 0..50 {
        let a = rng.gen_range(0.0..0.05);
        let mu_vals: Vec<f64> = rspec
            .points()
            .iter()
            .map(|x| (-(0.5 * x * x + a * x * x * x * x)).exp())
            .collect();
        let mu = GridDensity::new_1d(rspec, mu_vals).unwrap();
        let nu = rgauss(rng.gen_range(-0.8..0.8), rng.gen_range(0.5..1.4));
        let rep = hwi_check(&mu, &nu, 1.0).unwrap();
        assert!(
            rep.entropy <= rep.rhs + 1e-8,
            "HWI instance {} violated: {} vs {}",
            i,
            rep.entropy,
            rep.rhs
        );
    }
    // 50 randomized convex Lemma-1 instances with matching lambda
    for i in 0..50 {
        let lam = rng.gen_range(0.5..2.0);
        let a = rng.gen_range(0.0..0.08);
        let f: Vec<f64> =
            rspec.points().iter().map(|x| 0.5 * lam * x * x + a * x.powi(4)).collect();
        let rep = second_moment_lemma_check(&rspec, None, &f, lam).unwrap();
        assert!(rep.lhs <= rep.rhs + 1e-8, "Lemma instance {} violated", i);
    }
    println!("criterion 4 PASS: Gaussian equalities to 1e-8; 50 HWI and 50 Lemma-1 randomized instances hold");
}

/// Criterion 5: hydro solver order, D1 contraction, L4 interpolation.
#[test]
fn c05_hydro_solver() {
    // convergence against the heat oracle at h in {1/256, 1/512, 1/1024}
    let spec = GridSpec::new(-3.0_f64, 3.0, 301).unwrap();
    let grid = spec.points();
    let values: Vec<f64> = grid.iter().map(|m| 0.5 * m * m).collect();
    let d1 = grid.clone();
    let d2 = vec![1.0; grid.len()];
    let phi_quad = twoscale::potentials::TabulatedFunction::new(
        grid.clone(),
        values,
        d1,
        d2,
        "phi quadratic",
    )
    .unwrap();
    let t_end = 0.05;
    let error_at = |g: usize| {
        let zeta0 = HydroField::from_profile(g, |th: f64| {
            0.2 + 0.8 * (std::f64::consts::TAU * th).sin()
        })
        .unwrap();
        let h = 1.0 / g as f64;
        let dt = 0.9 * h * h / 2.0;
        let traj = solve_hydro(&zeta0, &phi_quad, t_end, dt, 1).unwrap();
        let t = *traj.times.last().unwrap();
        let decay = (-4.0 * std::f64::consts::PI.powi(2) * t).exp();
        let mut sup = 0.0_f64;
        for (i, &v) in traj.fields.last().unwrap().values().iter().enumerate() {
            let th = (i as f64 + 0.5) * h;
            sup = sup
                .max((v - 0.2 - 0.8 * decay * (std::f64::consts::TAU * th).sin()).abs());
        }
        sup
    };
    let e256 = error_at(256);
    let e512 = error_at(512);
    let e1024 = error_at(1024);
    let order_a = (e256 / e512).log2();
    let order_b = (e512 / e1024).log2();
    assert!(order_a >= 1.9, "order {} between 1/256 and 1/512", order_a);
    assert!(order_b >= 1.9, "order {} between 1/512 and 1/1024", order_b);

    // D1 contraction and L4 inequality on the heat run and on the cos run
    let p = Potential::cos(0.2);
    let phi_cos = cramer_transform(&p, &table_window(), &QuadratureSpec::default()).unwrap();
    let mut observed_rates = Vec::new();
    for (phi, lambda) in [(&phi_quad, 1.0), (&phi_cos, {
        let (lam, _) = convexity_bounds(&phi_cos);
        lam
    })] {
        let g = 512;
        let zeta0 = HydroField::from_profile(g, |th: f64| {
            0.5 * (std::f64::consts::TAU * th).sin() + 0.2 * (2.0 * std::f64::consts::TAU * th).cos()
        })
        .unwrap();
        let h = 1.0 / g as f64;
        let (_, big) = convexity_bounds(phi);
        let dt = 0.9 * h * h / (2.0 * big);
        let traj = solve_hydro(&zeta0, phi, 0.06, dt, 12).unwrap();
        let frames = regularity_diagnostics(&traj, phi).unwrap();
        // contraction at the paper's conservative rate 2 lambda pi^2
        let observed = check_d1_contraction(&frames, lambda, 0.01, 0.05).unwrap();
        observed_rates.push(observed);
        for f in &frames {
            assert!(f.l4_ratio <= 1.0 + 1e-8, "L4 inequality violated: {}", f.l4_ratio);
        }
    }
    println!(
        "criterion 5 PASS: orders {:.2}/{:.2}; observed D1 rates {:.1} and {:.1} (conservative bounds 19.7 and {:.1}); L4 holds on every frame",
        order_a,
        order_b,
        observed_rates[0],
        observed_rates[1],
        2.0 * convexity_bounds(&phi_cos).0 * std::f64::consts::PI.powi(2),
    );
}

/// Criterion 6: Theta envelope on the Gaussian ladder (oracle channel).
#[test]
fn c06_theta_envelope_gaussian() {
    let cfg = gaussian_ladder_cfg();
    let prepared = prepare(&cfg).unwrap();
    let audit = run_assumption_audit(&cfg, &prepared).unwrap();
    let (results, report) = run_hydrodynamic_limit(&cfg, &prepared, &audit).unwrap();
    for c in &report.checks {
        assert!(c.pass, "failed: {}", c);
    }
    // Xi -> 0 along the ladder (monotone decrease checked in the report;
    // additionally the envelope must dominate Theta pointwise)
    for r in &results {
        for p in &r.theta {
            assert!(p.value <= r.xi, "Theta({}) = {} above Xi = {}", p.t, p.value, r.xi);
        }
    }
    let xis: Vec<f64> = results.iter().map(|r| r.xi).collect();
    assert!(xis.windows(2).all(|w| w[1] < w[0]));
    println!(
        "criterion 6 PASS: sup Theta <= Xi on every rung; Xi ladder = {:.4} > {:.4} > {:.4}",
        xis[0], xis[1], xis[2]
    );
}

/// Criterion 7: hydrodynamic limit trend, oracle channel (strict) and
/// Monte Carlo channel (within 4 stderr).
#[test]
fn c07_hydrodynamic_limit_trend() {
    // oracle channel
    let cfg = gaussian_ladder_cfg();
    let prepared = prepare(&cfg).unwrap();
    let audit = run_assumption_audit(&cfg, &prepared).unwrap();
    let (results, report) = run_hydrodynamic_limit(&cfg, &prepared, &audit).unwrap();
    for c in &report.checks {
        assert!(c.pass, "failed: {}", c);
    }
    let sups: Vec<f64> = results
        .iter()
        .map(|r| r.h1.iter().map(|p| p.value).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    assert!(
        sups.windows(2).all(|w| w[1] < w[0]),
        "oracle channel sup trend not strictly decreasing: {:?}",
        sups
    );

    // Monte Carlo channel
    let cfg_mc = ExperimentConfig {
        potential: Potential::cos(0.2),
        ..Default::default()
    };
    let prepared_mc = prepare(&cfg_mc).unwrap();
    let audit_mc = run_assumption_audit(&cfg_mc, &prepared_mc).unwrap();
    let (results_mc, report_mc) = run_hydrodynamic_limit(&cfg_mc, &prepared_mc, &audit_mc).unwrap();
    for c in &report_mc.checks {
        assert!(c.pass, "failed: {}", c);
    }
    let sups_mc: Vec<(f64, f64)> = results_mc
        .iter()
        .map(|r| {
            r.h1
                .iter()
                .map(|p| (p.value, p.stderr))
                .fold((f64::NEG_INFINITY, 0.0), |acc, v| if v.0 > acc.0 { v } else { acc })
        })
        .collect();
    for w in sups_mc.windows(2) {
        let slack = 4.0 * (w[0].1 * w[0].1 + w[1].1 * w[1].1).sqrt();
        assert!(
            w[1].0 <= w[0].0 + slack,
            "MC channel trend violated: {} vs {} (+{})",
            w[1].0,
            w[0].0,
            slack
        );
    }
    println!(
        "criterion 7 PASS: oracle sup trend {:.5} > {:.5} > {:.5}; MC sup trend {:.5} -> {:.5} -> {:.5} within 4 stderr",
        sups[0], sups[1], sups[2], sups_mc[0].0, sups_mc[1].0, sups_mc[2].0
    );
}

/// Criterion 8: entropy convergence on the Gaussian channel.
#[test]
fn c08_entropy_convergence() {
    let cfg = gaussian_ladder_cfg();
    let prepared = prepare(&cfg).unwrap();
    let audit = run_assumption_audit(&cfg, &prepared).unwrap();
    let (results, report) = run_entropy_convergence(&cfg, &prepared, &audit).unwrap();
    for c in &report.checks {
        assert!(c.pass, "failed: {}", c);
    }
    // report already checks: gap decreasing at t in {0.05, 0.1, 0.2},
    // uniform-gap ratio >= 2, H-theorem and sandwich; surface the numbers
    let window_sup = |r: &twoscale::harness::experiments::EntropyEntryResult| {
        r.times
            .iter()
            .enumerate()
            .filter(|(_, &t)| t >= 0.05)
            .map(|(i, _)| (r.micro_entropy[i] - r.hydro_entropy[i]).abs())
            .fold(0.0_f64, f64::max)
    };
    let first = window_sup(&results[0]);
    let last = window_sup(results.last().unwrap());
    println!(
        "criterion 8 PASS: uniform gap {:.3e} (N=64) vs {:.3e} (N=1024), ratio {:.1} >= 2; H-theorem exact per output step",
        first,
        last,
        first / last
    );
}

/// Criterion 9: N = 2 grid cross-check of the Fokker-Planck solver.
#[test]
fn c09_grid_crosscheck() {
    let cfg_zero = gaussian_ladder_cfg();
    let (entropy_gap, _) = grid_crosscheck(&cfg_zero).unwrap();
    assert!(entropy_gap <= 1e-4, "entropy gap {} vs oracle", entropy_gap);
    let cfg_cos = ExperimentConfig { potential: Potential::cos(0.2), ..Default::default() };
    let (_, mass_err) = grid_crosscheck(&cfg_cos).unwrap();
    assert!(mass_err <= 1e-8, "mass error {}", mass_err);
    println!(
        "criterion 9 PASS: entropy matches the oracle to {:.2e} (tol 1e-4); mass conserved to {:.2e} (tol 1e-8)",
        entropy_gap, mass_err
    );
}

/// Criterion 10: bit-identical outputs across thread counts. The `all`
/// pipeline runs at a reduced configuration (determinism is structural:
/// per-replica streams and ordered reductions are size-independent);
/// set TWOSCALE_ACCEPTANCE_FULL=1 for the full-size ladder.
#[test]
fn c10_determinism_across_threads() {
    let full = std::env::var("TWOSCALE_ACCEPTANCE_FULL").is_ok();
    let make_cfg = |out: std::path::PathBuf| {
        if full {
            ExperimentConfig {
                potential: Potential::cos(0.2),
                out_dir: out,
                experiment_name: "determinism".into(),
                ..Default::default()
            }
        } else {
            ExperimentConfig {
                potential: Potential::cos(0.2),
                ladder: vec![
                    LadderEntry { n_sites: 16, n_blocks: 2 },
                    LadderEntry { n_sites: 64, n_blocks: 8 },
                ],
                t_horizon: 0.1,
                replicas: 128,
                n_outputs: 4,
                dt_sde: 5e-4,
                hydro_cells: 64,
                table_min: -2.5,
                table_max: 2.5,
                table_points: 301,
                out_dir: out,
                experiment_name: "determinism".into(),
                ..Default::default()
            }
        }
    };
    // both runs write to the identical path (sequentially), so the config
    // echo inside the report tree is byte-identical too
    let root = tempfile::tempdir().unwrap();
    let run_with = |threads: usize| {
        let cfg = make_cfg(root.path().to_path_buf());
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| twoscale::harness::run_all(&cfg)).unwrap()
    };
    let list = |root: &std::path::Path| -> Vec<(String, Vec<u8>)> {
        let mut files = Vec::new();
        let dir = root.join("determinism");
        let mut names: Vec<_> = std::fs::read_dir(&dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        for name in names {
            files.push((name.clone(), std::fs::read(dir.join(&name)).unwrap()));
        }
        files
    };
    let f1 = run_with(1);
    let a = list(root.path());
    std::fs::remove_dir_all(root.path().join("determinism")).unwrap();
    let f8 = run_with(8);
    let b = list(root.path());
    assert_eq!(f1, f8, "check outcomes differ across thread counts");
    assert_eq!(a.len(), b.len());
    let mut bytes = 0usize;
    for ((na, ca), (nb, cb)) in a.iter().zip(b.iter()) {
        assert_eq!(na, nb);
        assert_eq!(ca, cb, "file {} differs between 1 and 8 threads", na);
        bytes += ca.len();
    }
    println!(
        "criterion 10 PASS: {} files, {} bytes bit-identical under 1 and 8 threads ({} checks failed in both)",
        a.len(),
        bytes,
        f1
    );
}
