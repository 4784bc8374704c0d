use std::f64::consts::PI;

use proptest::prelude::*;
use qbrown_core::fp_brownian::*;
use qbrown_core::megrid::{DensityMatrix, GeneratorSpec, MomentumLattice};
use qbrown_core::{DsfModel, Error, GasSpec, KernelSpec, Statistics};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const M: f64 = 20.0;

fn mb(z: f64) -> GasSpec {
    GasSpec::new(Statistics::MaxwellBoltzmann, 1.0, 1.0, z, 1.0, 1.0).unwrap()
}

fn unit_kernel() -> KernelSpec {
    KernelSpec::Gaussian {
        t0: 1.0,
        sigma: 1.0,
    }
}

/// Admissible step: half the positivity bound of the momentum scheme.
fn half_cfl(coeffs: &FPCoefficients, grid: &PhaseGrid) -> f64 {
    let h = grid.dp();
    0.5 / (2.0 * coeffs.effective_d_pp() / (h * h)
        + 2.0 * coeffs.effective_gamma() * grid.p_max / h)
}

fn momentum_grid(np: usize) -> PhaseGrid {
    PhaseGrid::momentum_only(np, 10.0 * M.sqrt())
}

#[test]
fn gaussian_kernel_quadrature_matches_closed_form() {
    let g = GasSpec::new(Statistics::MaxwellBoltzmann, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
    let alpha = 0.5 + 1.0 / 8.0;
    let c3 = compute_coefficients(&g, 1.0, &unit_kernel(), 3).unwrap();
    let exact3 = 4.0 * PI.powi(3) / 3.0 / (alpha * alpha);
    assert!(
        (c3.d_pp / exact3 - 1.0).abs() < 1e-8,
        "{} vs {exact3}",
        c3.d_pp
    );
    assert!((c3.d_pp - 105.84).abs() < 0.01);
    let c1 = compute_coefficients(&g, 1.0, &unit_kernel(), 1).unwrap();
    let exact1 = 2.0 * PI * PI / alpha;
    assert!((c1.d_pp / exact1 - 1.0).abs() < 1e-8);
    assert_eq!(c3.gamma / c3.d_pp, 0.5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coefficient_relations_are_exact(
        m in 0.2f64..5.0,
        beta in 0.2f64..5.0,
        z in 0.01f64..0.95,
        mass in 1.0f64..100.0,
        sigma in 0.1f64..10.0,
        t0 in 0.1f64..3.0,
        dim in 1usize..=3,
    ) {
        let kernel = KernelSpec::Gaussian { t0, sigma };
        let base = GasSpec::new(Statistics::MaxwellBoltzmann, m, beta, z, 1.0, 1.0).unwrap();
        let c = compute_coefficients(&base, mass, &kernel, dim).unwrap();
        let r = beta / (4.0 * mass);
        prop_assert!((c.d_xx / (r * r * c.d_pp) - 1.0).abs() < 4.0 * f64::EPSILON);
        prop_assert!((c.gamma / (beta / (2.0 * mass) * c.d_pp) - 1.0).abs() < 4.0 * f64::EPSILON);

        let bose = compute_coefficients(&base.with_statistics(Statistics::Bose), mass, &kernel, dim).unwrap();
        let fermi = compute_coefficients(&base.with_statistics(Statistics::Fermi), mass, &kernel, dim).unwrap();
        prop_assert!(bose.effective_gamma() > c.effective_gamma());
        prop_assert!(c.effective_gamma() > fermi.effective_gamma());
        prop_assert!((bose.effective_gamma() / c.effective_gamma() - 1.0 / (1.0 - z)).abs() < 4.0 * f64::EPSILON / (1.0 - z));
        prop_assert!((fermi.effective_gamma() / c.effective_gamma() - 1.0 / (1.0 + z)).abs() < 4.0 * f64::EPSILON);
    }
}

#[test]
fn contact_kernel_integrates_against_thermal_weight() {
    let g = mb(1.0);
    let c = compute_coefficients(&g, 1.0, &KernelSpec::Contact { t0: 1.0 }, 3).unwrap();
    // ∫₀^∞ q³ e^{−q²/8} dq = 32
    let exact = 2.0 * PI * PI * (4.0 * PI / 3.0) * 32.0;
    assert!((c.d_pp / exact - 1.0).abs() < 1e-8);
}

#[test]
fn closed_form_limits() {
    let c = FPCoefficients::from_d_pp(1.0, 1.0, 2.0, 4.0, 1.0, 3);
    let (p, e) = closed_form_moments(&c, &[1.0, -2.0, 0.5], 7.0, 0.0);
    assert_eq!((p, e), (vec![1.0, -2.0, 0.5], 7.0));
    let half_life = 2f64.ln() / (2.0 * c.gamma);
    let (p, _) = closed_form_moments(&c, &[3.0], 1.0, half_life);
    assert!((p[0] - 1.5).abs() < 1e-14);
    let (p, e) = closed_form_moments(&c, &[3.0], 1.0, 1e4);
    assert!(p[0].abs() < 1e-300 && (e - 0.75).abs() < 1e-15);
}

#[test]
fn canonical_field_is_stationary() {
    let c = compute_coefficients(&mb(0.5), M, &unit_kernel(), 1).unwrap();
    let grid = momentum_grid(256);
    let f0 = WignerField::canonical(grid, WignerMode::MomentumOnly, 1.0, M).unwrap();
    let dt = half_cfl(&c, &grid);
    let steps = (10.0 / (2.0 * c.effective_gamma()) / dt).ceil() as usize;
    let (f, _) = FpSolver::new(c, grid, WignerMode::MomentumOnly, dt)
        .unwrap()
        .run(&f0, steps, 0)
        .unwrap();
    assert!(f.relative_l2(&f0) < 1e-6);
}

#[test]
fn pure_diffusion_variance_grows_linearly() {
    let mut c = FPCoefficients::from_d_pp(0.3, 1.0, 1.0, M, 1.0, 1);
    c.gamma = 0.0;
    c.d_xx = 0.0;
    let grid = PhaseGrid::momentum_only(800, 40.0);
    let f0 = WignerField::gaussian(grid, WignerMode::MomentumOnly, 0.0, 1.0).unwrap();
    let var = |f: &WignerField| 2.0 * M * f.mean_energy(M) - f.mean_momentum().powi(2);
    let dt = half_cfl(&c, &grid);
    let steps = 2000;
    let (f, _) = FpSolver::new(c, grid, WignerMode::MomentumOnly, dt)
        .unwrap()
        .run(&f0, steps, 0)
        .unwrap();
    let growth = var(&f) - var(&f0);
    let expected = 2.0 * c.d_pp * steps as f64 * dt;
    assert!(
        (growth / expected - 1.0).abs() < 1e-10,
        "{growth} vs {expected}"
    );
}

#[test]
fn drifted_gaussian_relaxes_at_closed_form_rates() {
    let c = compute_coefficients(&mb(0.5), M, &unit_kernel(), 1).unwrap();
    let grid = momentum_grid(256);
    let width = M.sqrt();
    let f0 =
        WignerField::gaussian(grid, WignerMode::MomentumOnly, 2.0 * width, 0.5 * width).unwrap();
    let g = c.effective_gamma();
    let dt = half_cfl(&c, &grid);
    let steps = (3.0 / (2.0 * g) / dt).ceil() as usize;
    let (_, moments) = FpSolver::new(c, grid, WignerMode::MomentumOnly, dt)
        .unwrap()
        .run(&f0, steps, steps / 100)
        .unwrap();
    let t: Vec<f64> = moments.iter().map(|m| m.t).collect();
    let p: Vec<f64> = moments.iter().map(|m| m.p).collect();
    let e: Vec<f64> = moments.iter().map(|m| m.energy).collect();
    let rate_p = fit_decay_rate(&t, &p, 0.0, 3.0).unwrap();
    let rate_e = fit_decay_rate(&t, &e, 0.5, 3.0).unwrap();
    assert!(
        (rate_p / (2.0 * g) - 1.0).abs() < 0.01,
        "{rate_p} vs {}",
        2.0 * g
    );
    assert!(
        (rate_e / (4.0 * g) - 1.0).abs() < 0.01,
        "{rate_e} vs {}",
        4.0 * g
    );
    for m in &moments {
        let (cp, _) = closed_form_moments(&c, &[p[0]], e[0], m.t);
        assert!((m.p - cp[0]).abs() < 0.01 * p[0]);
    }
}

#[test]
fn arbitrary_positive_data_converges_to_canonical() {
    let c = compute_coefficients(&mb(0.5), M, &unit_kernel(), 1).unwrap();
    let grid = momentum_grid(128);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise: Vec<f64> = (0..grid.np).map(|_| rng.random_range(0.1..1.0)).collect();
    let f0 = WignerField::from_fn(grid, WignerMode::MomentumOnly, |_, p| {
        let j = ((p + grid.p_max) / grid.dp()) as usize;
        noise[j.min(grid.np - 1)]
    })
    .unwrap();
    let target = WignerField::canonical(grid, WignerMode::MomentumOnly, 1.0, M).unwrap();
    let solver = FpSolver::new(c, grid, WignerMode::MomentumOnly, half_cfl(&c, &grid)).unwrap();
    let chunk = (0.5 / c.effective_gamma() / solver.dt()).ceil() as usize;
    let mut f = f0;
    let mut dist = Vec::new();
    for _ in 0..16 {
        f = solver.run(&f, chunk, 0).unwrap().0;
        dist.push(f.relative_l2(&target));
    }
    for w in dist[2..].windows(2) {
        assert!(w[1] <= w[0], "{dist:?}");
    }
    assert!(*dist.last().unwrap() < 1e-5, "{dist:?}");
}

#[test]
fn oversized_step_is_rejected_with_the_bound() {
    let c = compute_coefficients(&mb(0.5), M, &unit_kernel(), 1).unwrap();
    let grid = momentum_grid(256);
    let dt = 4.0 * half_cfl(&c, &grid);
    match FpSolver::new(c, grid, WignerMode::MomentumOnly, dt) {
        Err(Error::Stability { bound, .. }) => assert!(bound.contains("dt·max")),
        other => panic!("expected a stability error, got {other:?}"),
    }
    let full = PhaseGrid {
        nx: 256,
        length_x: 1.0,
        np: 64,
        p_max: 10.0 * M.sqrt(),
    };
    match FpSolver::new(c, full, WignerMode::FullPhaseSpace, half_cfl(&c, &full)) {
        Err(Error::Stability { bound, .. }) => assert!(bound.contains("streaming")),
        other => panic!("expected a streaming error, got {other:?}"),
    }
}

#[test]
fn phase_space_run_conserves_mass() {
    let c = compute_coefficients(&mb(0.5), M, &unit_kernel(), 1).unwrap();
    let grid = PhaseGrid {
        nx: 64,
        length_x: 200.0,
        np: 64,
        p_max: 8.0 * M.sqrt(),
    };
    let width = M.sqrt();
    let f0 = WignerField::from_fn(grid, WignerMode::FullPhaseSpace, |x, p| {
        (-0.5 * ((x / 20.0).powi(2) + ((p - width) / width).powi(2))).exp()
    })
    .unwrap();
    let dt = half_cfl(&c, &grid).min(0.5 * M * grid.dx() / grid.p_max);
    let (f, moments) = FpSolver::new(c, grid, WignerMode::FullPhaseSpace, dt)
        .unwrap()
        .run(&f0, 400, 50)
        .unwrap();
    for m in &moments {
        assert!((m.mass - 1.0).abs() < 1e-12);
    }
    assert!((f.mass() - 1.0).abs() < 1e-12);
}

#[test]
fn x_uniform_field_matches_momentum_only_run() {
    let c = compute_coefficients(&mb(0.5), M, &unit_kernel(), 1).unwrap();
    let p_max = 8.0 * M.sqrt();
    let full = PhaseGrid {
        nx: 16,
        length_x: 100.0,
        np: 96,
        p_max,
    };
    let reduced = PhaseGrid::momentum_only(96, p_max);
    let dt = half_cfl(&c, &full).min(0.5 * M * full.dx() / p_max);
    let width = M.sqrt();
    let a = WignerField::gaussian(full, WignerMode::FullPhaseSpace, width, width).unwrap();
    let b = WignerField::gaussian(reduced, WignerMode::MomentumOnly, width, width).unwrap();
    let (_, ma) = FpSolver::new(c, full, WignerMode::FullPhaseSpace, dt)
        .unwrap()
        .run(&a, 300, 100)
        .unwrap();
    let (_, mb) = FpSolver::new(c, reduced, WignerMode::MomentumOnly, dt)
        .unwrap()
        .run(&b, 300, 100)
        .unwrap();
    for (x, y) in ma.iter().zip(&mb) {
        assert!((x.p - y.p).abs() < 1e-12 * width);
        assert!((x.energy - y.energy).abs() < 1e-12 * x.energy);
    }
}

fn km_setup(
    sigma: f64,
    t0: f64,
) -> (
    GeneratorSpec,
    FPCoefficients,
    DensityMatrix,
    f64,
    f64,
    usize,
) {
    let gas = mb(0.5);
    let width = M.sqrt();
    let dp = sigma / 8.0;
    let half = (8.0 * width / dp).ceil() as usize;
    let lat = MomentumLattice::new(1, 2 * half, dp, false).unwrap();
    let kernel = KernelSpec::Gaussian { t0, sigma };
    let mut spec = GeneratorSpec::new(
        lat,
        gas,
        kernel,
        DsfModel::BrownianLimitMb { test_mass: M },
        M,
    );
    spec.weight_cutoff = 1e-18;
    let reference =
        compute_coefficients(&gas, M, &KernelSpec::Gaussian { t0: 1.0, sigma }, 1).unwrap();
    let coeffs = compute_coefficients(&gas, M, &kernel, 1).unwrap();
    let norm = spec.build().unwrap().population_norm_estimate(30, 0);
    let samples = 60;
    let t = 3.0 / (2.0 * reference.effective_gamma());
    let steps = ((t * norm / 0.09).ceil().max(1.0) as usize).div_ceil(samples) * samples;
    let rho0 = DensityMatrix::diagonal_gaussian(&lat, &[2.0 * width], width).unwrap();
    (spec, coeffs, rho0, t, t / steps as f64, samples)
}

#[test]
fn master_equation_approaches_fokker_planck_as_kernel_narrows() {
    let thermal = 8f64.sqrt();
    let mut last = f64::INFINITY;
    for div in [2.0, 4.0] {
        let (spec, coeffs, rho0, t, dt, samples) = km_setup(thermal / div, 1.0);
        let r = kramers_moyal_check(&spec, &coeffs, &rho0, t, dt, samples).unwrap();
        let worst = r.momentum_rate_discrepancy.max(r.energy_rate_discrepancy);
        assert!(worst < 0.05, "σ = thermal/{div}: {r:?}");
        assert!(worst < last);
        last = worst;
    }
}

#[test]
fn uncoupled_dynamics_show_no_discrepancy() {
    let (spec, coeffs, rho0, t, dt, samples) = km_setup(8f64.sqrt() / 2.0, 0.0);
    let r = kramers_moyal_check(&spec, &coeffs, &rho0, t, dt, samples).unwrap();
    assert!(r.momentum_discrepancy < 1e-14);
    assert!(r.momentum_rate_discrepancy < 1e-12);
    assert!(r.energy_rate_fit.abs() < 1e-12);
}

#[test]
fn stable_dt_is_the_acceptance_threshold() {
    let c = compute_coefficients(&mb(0.5), M, &unit_kernel(), 1).unwrap();
    let full = PhaseGrid {
        nx: 32,
        length_x: 50.0,
        np: 64,
        p_max: 8.0 * M.sqrt(),
    };
    for (grid, mode) in [
        (momentum_grid(128), WignerMode::MomentumOnly),
        (full, WignerMode::FullPhaseSpace),
    ] {
        let limit = stable_dt(&c, &grid, mode).unwrap();
        assert!(FpSolver::new(c, grid, mode, limit * (1.0 - 1e-12)).is_ok());
        assert!(FpSolver::new(c, grid, mode, limit * 1.01).is_err());
    }
}
