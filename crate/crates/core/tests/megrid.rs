use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use qbrown_core::gas_dsf::{energy_transfer, evaluate_dsf, evaluate_dsf_brownian};
use qbrown_core::linalg::{self, CMatrix};
use qbrown_core::megrid::*;
use qbrown_core::vec3::{norm, sub};
use qbrown_core::{DsfModel, Error, GasSpec, KernelSpec, Kinematics, Statistics};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn gas(statistics: Statistics, z: f64) -> GasSpec {
    GasSpec::new(statistics, 1.0, 1.0, z, 0.7, 1.0).unwrap()
}

fn brownian_spec(lattice: MomentumLattice, m: f64) -> GeneratorSpec {
    GeneratorSpec::new(
        lattice,
        gas(Statistics::MaxwellBoltzmann, 0.5),
        KernelSpec::Gaussian {
            t0: 1.0,
            sigma: 1.0,
        },
        DsfModel::BrownianLimitMb { test_mass: m },
        m,
    )
}

/// Pairwise rate W(p_from → p_to) computed without the generator's channel tables.
fn oracle_rate(spec: &GeneratorSpec, from: &[f64; 3], to: &[f64; 3]) -> f64 {
    let q = sub(to, from);
    let h = spec.gas.hbar;
    let w = 2.0 * PI / h
        * (2.0 * PI * h).powi(3)
        * spec.gas.n
        * spec.lattice.dp.powi(spec.lattice.dim as i32)
        * spec.kernel.weight(norm(&q));
    let s = match spec.model {
        DsfModel::BrownianLimitMb { test_mass } => {
            evaluate_dsf_brownian(&spec.gas, test_mass, &q, from).unwrap()
        }
        model => {
            let e = (to[0] * to[0] + to[1] * to[1] + to[2] * to[2]
                - from[0] * from[0]
                - from[1] * from[1]
                - from[2] * from[2])
                / (2.0 * spec.test_mass);
            evaluate_dsf(&spec.gas, Kinematics::new(norm(&q), e).unwrap(), model).unwrap()
        }
    };
    w * s
}

/// Classical rate equation on an open lattice, summed over all site pairs.
fn oracle_populations(spec: &GeneratorSpec, f: &[f64]) -> Vec<f64> {
    let lat = spec.lattice;
    let n = lat.num_states();
    let ps: Vec<_> = (0..n).map(|i| lat.momentum(i)).collect();
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..n {
                if j != i {
                    acc += oracle_rate(spec, &ps[j], &ps[i]) * f[j];
                    acc -= oracle_rate(spec, &ps[i], &ps[j]) * f[i];
                }
            }
            acc
        })
        .collect()
}

fn random_pops(n: usize, seed: u64) -> Vec<f64> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

#[test]
fn diagonal_action_matches_rate_equation_oracle() {
    let models = [
        (
            gas(Statistics::MaxwellBoltzmann, 0.5),
            DsfModel::MaxwellBoltzmann,
        ),
        (gas(Statistics::Bose, 0.6), DsfModel::BoseLog),
        (gas(Statistics::Fermi, 2.0), DsfModel::FermiLog),
        (gas(Statistics::Fermi, 0.8), DsfModel::FermiArth),
    ];
    for (dim, sites) in [(1, 10), (2, 4)] {
        let lat = MomentumLattice::new(dim, sites, 0.4, false).unwrap();
        for (g, model) in models {
            let spec = GeneratorSpec::new(
                lat,
                g,
                KernelSpec::Gaussian {
                    t0: 0.8,
                    sigma: 0.9,
                },
                model,
                3.0,
            );
            let gen = spec.build().unwrap();
            let f = random_pops(lat.num_states(), 11);
            let rho = DensityMatrix::from_populations(&f).unwrap();
            let out = gen.apply(rho.matrix()).unwrap();
            let oracle = oracle_populations(&spec, &f);
            let scale = oracle.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            for i in 0..f.len() {
                assert!(
                    (out[(i, i)].re - oracle[i]).abs() < 1e-12 * scale,
                    "{model:?} dim {dim} site {i}: {} vs {}",
                    out[(i, i)].re,
                    oracle[i]
                );
            }
            assert!(
                linalg::is_diagonal(&out)
                    || linalg::max_abs(&(out.clone() - CMatrix::from_diagonal(&out.diagonal())))
                        == 0.0
            );
        }
    }
}

#[test]
fn population_path_agrees_with_dense_action() {
    let lat = MomentumLattice::new(1, 12, 0.5, true).unwrap();
    let gen = brownian_spec(lat, 10.0).build().unwrap();
    let f = random_pops(12, 4);
    let dense = gen
        .apply(DensityMatrix::from_populations(&f).unwrap().matrix())
        .unwrap();
    let pops = gen.apply_populations(&f);
    for i in 0..12 {
        assert!(
            (dense[(i, i)].re - pops[i]).abs()
                < 1e-13 * pops.iter().fold(0.0f64, |a, x| a.max(x.abs()))
        );
    }
}

#[test]
fn zero_coupling_leaves_free_commutator() {
    let lat = MomentumLattice::new(1, 8, 0.5, true).unwrap();
    let mut spec = brownian_spec(lat, 2.0);
    spec.kernel = KernelSpec::Contact { t0: 0.0 };
    let gen = spec.build().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rho = linalg::random_density(&mut rng, 8);
    let out = gen.apply(&rho).unwrap();
    let e = gen.energies();
    for i in 0..8 {
        for j in 0..8 {
            let expected = -Complex64::i() * (e[i] - e[j]) * rho[(i, j)];
            assert!((out[(i, j)] - expected).norm() < 1e-15);
        }
    }
    let diag = DensityMatrix::canonical(&lat, 1.0, 2.0).unwrap();
    assert_eq!(linalg::max_abs(&gen.apply(diag.matrix()).unwrap()), 0.0);
}

#[test]
fn trace_and_hermiticity_of_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (dim, sites, wrap) in [
        (1, 8, true),
        (1, 9 + 1, false),
        (2, 4, true),
        (2, 4, false),
        (3, 2, true),
    ] {
        let lat = MomentumLattice::new(dim, sites, 0.6, wrap).unwrap();
        for model in [
            DsfModel::MaxwellBoltzmann,
            DsfModel::BrownianLimitMb { test_mass: 4.0 },
        ] {
            let spec = GeneratorSpec::new(
                lat,
                gas(Statistics::MaxwellBoltzmann, 0.3),
                KernelSpec::Contact { t0: 1.0 },
                model,
                4.0,
            );
            let gen = spec.build().unwrap();
            let rho = linalg::random_density(&mut rng, lat.num_states());
            let out = gen.apply(&rho).unwrap();
            let scale = linalg::max_abs(&out);
            assert!(
                linalg::trace(&out).norm() < 1e-12 * scale.max(1.0),
                "dim {dim} wrap {wrap}"
            );
            assert_eq!(linalg::hermiticity_defect(&out), 0.0);
        }
    }
}

#[test]
fn rejects_bad_inputs() {
    let lat = MomentumLattice::new(1, 8, 0.5, true).unwrap();
    let gen = brownian_spec(lat, 2.0).build().unwrap();
    assert!(matches!(
        gen.apply(&CMatrix::zeros(6, 6)),
        Err(Error::DimensionMismatch {
            expected: 8,
            got: 6
        })
    ));
    let mut m = CMatrix::zeros(8, 8);
    m[(0, 1)] = Complex64::new(1.0, 0.0);
    assert!(matches!(gen.apply(&m), Err(Error::Domain(_))));

    let mut spec = brownian_spec(lat, 2.0);
    spec.model = DsfModel::BrownianLimitMb { test_mass: 3.0 };
    let err = spec.build().unwrap_err();
    assert!(matches!(err, Error::InvalidParameter { ref field, .. } if field == "model.test_mass"));
    let mut spec = brownian_spec(lat, 2.0);
    spec.gas.z = -1.0;
    assert!(
        matches!(spec.build().unwrap_err(), Error::InvalidParameter { ref field, .. } if field == "gas.z")
    );
}

#[test]
fn rates_obey_detailed_balance() {
    let lat = MomentumLattice::new(2, 4, 0.5, false).unwrap();
    let cases = [
        (
            gas(Statistics::MaxwellBoltzmann, 0.4),
            DsfModel::MaxwellBoltzmann,
        ),
        (gas(Statistics::Bose, 0.9), DsfModel::BoseLog),
        (gas(Statistics::Fermi, 5.0), DsfModel::FermiLog),
        (
            gas(Statistics::MaxwellBoltzmann, 0.4),
            DsfModel::BrownianLimitMb { test_mass: 7.0 },
        ),
    ];
    for (g, model) in cases {
        let gen = GeneratorSpec::new(
            lat,
            g,
            KernelSpec::Gaussian {
                t0: 1.0,
                sigma: 1.5,
            },
            model,
            7.0,
        )
        .build()
        .unwrap();
        for p in [[0.3, -1.1, 0.0], [2.0, 0.5, 0.0]] {
            for q in [[0.5, 0.0, 0.0], [-1.0, 1.5, 0.0], [0.25, -0.75, 0.0]] {
                let forward = gen.transition_rate(&q, &p).unwrap();
                let pq = [p[0] + q[0], p[1] + q[1], 0.0];
                let back = gen.transition_rate(&[-q[0], -q[1], 0.0], &pq).unwrap();
                let de = energy_transfer(7.0, &q, &p);
                let expected = (-g.beta * de).exp();
                assert!(
                    ((forward / back) / expected - 1.0).abs() < 1e-10,
                    "{model:?}"
                );
            }
        }
    }
}

#[test]
fn canonical_state_is_stationary() {
    let m = 20.0;
    let open = MomentumLattice::new(1, 64, 0.5, false).unwrap();
    let gen = brownian_spec(open, m).build().unwrap();
    let (res, scale) = stationarity_residual(&gen);
    assert!(res < 1e-10 * scale, "{res} vs {scale}");

    // periodic lattice wide enough that the edge carries no weight
    let wide = MomentumLattice::new(1, 144, 0.5, true).unwrap();
    let gen = brownian_spec(wide, m).build().unwrap();
    let (res, scale) = stationarity_residual(&gen);
    assert!(res < 1e-10 * scale, "{res} vs {scale}");

    let open2 = MomentumLattice::new(2, 10, 1.0, false).unwrap();
    let gen = brownian_spec(open2, 5.0).build().unwrap();
    let (res, scale) = stationarity_residual(&gen);
    assert!(res < 1e-10 * scale);
}

#[test]
fn evolution_edge_cases() {
    let lat = MomentumLattice::new(1, 8, 0.5, true).unwrap();
    let gen = brownian_spec(lat, 2.0).build().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rho0 = DensityMatrix::new(linalg::random_density(&mut rng, 8)).unwrap();
    let run = evolve(&gen, &rho0, &EvolveOptions::new(0.0, 1e-4)).unwrap();
    assert_eq!(run.state, rho0);

    let mut spec = brownian_spec(lat, 2.0);
    spec.kernel = KernelSpec::Contact { t0: 0.0 };
    let free = spec.build().unwrap();
    let diag = DensityMatrix::diagonal_gaussian(&lat, &[0.7], 1.0).unwrap();
    let run = evolve(&free, &diag, &EvolveOptions::new(1.0, 0.01)).unwrap();
    assert_eq!(run.state, diag);

    let err = evolve(&gen, &rho0, &EvolveOptions::new(1.0, 0.5)).unwrap_err();
    assert!(matches!(err, Error::Stability { ref bound, .. } if bound.contains("dt·‖L‖")));
    assert!(evolve(&gen, &rho0, &EvolveOptions::new(1.0, 0.3)).is_err());
    let other = DensityMatrix::canonical(&MomentumLattice::new(1, 6, 0.5, true).unwrap(), 1.0, 2.0)
        .unwrap();
    assert!(matches!(
        evolve(&gen, &other, &EvolveOptions::new(0.1, 1e-4)),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn dense_evolution_keeps_invariants() {
    let lat = MomentumLattice::new(1, 8, 0.5, true).unwrap();
    let gen = brownian_spec(lat, 2.0).build().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let rho0 = DensityMatrix::new(linalg::random_density(&mut rng, 8)).unwrap();
    let dt = 0.05 / gen.norm_estimate(30, 0);
    let run = evolve(
        &gen,
        &rho0,
        &EvolveOptions::new(2000.0 * dt, dt).with_checkpoints(200),
    )
    .unwrap();
    assert!(!run.monitors.population_path);
    assert!(run.monitors.max_trace_drift < 1e-9);
    assert!(run.monitors.max_hermiticity_correction < 1e-11);
    assert!(run.monitors.min_eigenvalue > -1e-8);
    assert_eq!(run.checkpoints.len(), 11);
}

#[test]
fn symmetric_state_keeps_zero_mean_momentum() {
    let lat = MomentumLattice::new(1, 16, 0.5, true).unwrap();
    let gen = brownian_spec(lat, 2.0).build().unwrap();
    let rho0 = DensityMatrix::diagonal_gaussian(&lat, &[0.0], 0.5).unwrap();
    let dt = 0.05 / gen.population_norm_estimate(30, 0);
    let traj = moment_trajectory(&gen, &rho0, &[100.0 * dt, 200.0 * dt], dt).unwrap();
    for m in traj {
        assert!(m.p[0].abs() < 1e-14);
    }
}

#[test]
fn canonical_state_does_not_move() {
    let m = 20.0;
    let lat = MomentumLattice::new(1, 64, 0.5, false).unwrap();
    let gen = brownian_spec(lat, m).build().unwrap();
    let rho0 = DensityMatrix::canonical(&lat, 1.0, m).unwrap();
    let dt = 0.1 / gen.population_norm_estimate(30, 0);
    let run = evolve(&gen, &rho0, &EvolveOptions::new(2000.0 * dt, dt)).unwrap();
    assert!(run.state.trace_distance(&rho0) < 1e-8);
}

#[test]
fn choi_positivity_and_controls() {
    let lat = MomentumLattice::new(1, 8, 0.5, true).unwrap();
    let spec = brownian_spec(lat, 20.0);
    let gen = spec.build().unwrap();
    let identity = choi_min_eigenvalue(&gen, 0.0).unwrap();
    assert!(identity.abs() < 1e-12, "{identity}");
    let dt = 0.01 / superoperator_norm(&gen).unwrap();
    assert!(choi_min_eigenvalue(&gen, dt).unwrap() >= -1e-10);

    let mut bad = spec.clone();
    bad.corruption = Some(Corruption::ScaleCoherentGain { factor: 1.5 });
    assert!(choi_min_eigenvalue(&bad.build().unwrap(), dt).unwrap() < -1e-6);

    // an over-damped anticommutator still gives a CP (but trace-decreasing) map
    let mut damped = spec.clone();
    damped.corruption = Some(Corruption::ScaleAnticommutator { factor: 1.5 });
    let damped = damped.build().unwrap();
    assert!(choi_min_eigenvalue(&damped, dt).unwrap() >= -1e-10);
    let rho = DensityMatrix::canonical(&lat, 1.0, 20.0).unwrap();
    assert!(linalg::trace(&damped.apply(rho.matrix()).unwrap()).re < -1e-3);

    let big = brownian_spec(MomentumLattice::new(1, 18, 0.5, true).unwrap(), 20.0)
        .build()
        .unwrap();
    assert!(matches!(
        choi_min_eigenvalue(&big, dt),
        Err(Error::Resource(_))
    ));
}

#[test]
fn arithmetic_mean_form_breaks_positivity_for_full_mb() {
    let lat = MomentumLattice::new(1, 8, 0.5, true).unwrap();
    let mut spec = GeneratorSpec::new(
        lat,
        gas(Statistics::MaxwellBoltzmann, 0.5),
        KernelSpec::Gaussian {
            t0: 1.0,
            sigma: 1.0,
        },
        DsfModel::MaxwellBoltzmann,
        20.0,
    );
    let dt = 0.01 / superoperator_norm(&spec.build().unwrap()).unwrap();
    spec.factorization = Factorization::ArithmeticMean;
    assert!(choi_min_eigenvalue(&spec.build().unwrap(), dt).unwrap() < -1e-6);
    // the Brownian-limit S factorizes, so both forms coincide there
    let mut b = brownian_spec(lat, 20.0);
    let geo = b.build().unwrap();
    b.factorization = Factorization::ArithmeticMean;
    let ari = b.build().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rho = linalg::random_density(&mut rng, 8);
    let d = geo.apply(&rho).unwrap() - ari.apply(&rho).unwrap();
    assert!(linalg::max_abs(&d) < 1e-12 * linalg::max_abs(&geo.apply(&rho).unwrap()));
}

#[test]
fn superoperator_matches_direct_action() {
    let lat = MomentumLattice::new(1, 6, 0.5, true).unwrap();
    let gen = brownian_spec(lat, 3.0).build().unwrap();
    let s = superoperator(&gen).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rho = linalg::random_density(&mut rng, 6);
    let vec = nalgebra::DVector::from_column_slice(rho.as_slice());
    let out = &s * vec;
    let direct = gen.apply(&rho).unwrap();
    for (a, b) in out.iter().zip(direct.as_slice()) {
        assert!((a - b).norm() < 1e-12);
    }
}

#[test]
fn adjoint_is_hilbert_schmidt_dual() {
    let lat = MomentumLattice::new(1, 8, 0.5, false).unwrap();
    let gen = GeneratorSpec::new(
        lat,
        gas(Statistics::Bose, 0.5),
        KernelSpec::Contact { t0: 1.0 },
        DsfModel::BoseArth,
        2.0,
    )
    .build()
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = linalg::random_hermitian(&mut rng, 8);
    let rho = linalg::random_density(&mut rng, 8);
    let lhs = linalg::trace(&(gen.apply_adjoint(&x) * &rho));
    let rhs = linalg::trace(&(&x * gen.apply(&rho).unwrap()));
    assert!((lhs - rhs).norm() < 1e-12 * rhs.norm().max(1.0));
}

fn lattice_strategy() -> impl Strategy<Value = MomentumLattice> {
    (1usize..=2, 1usize..=4, 0.2f64..1.5, any::<bool>()).prop_map(|(dim, half, dp, wrap)| {
        let sites = if dim == 1 { 4 * half } else { 2 * half.min(3) };
        MomentumLattice::new(dim, sites, dp, wrap).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generator_is_traceless_and_hermitian(
        lat in lattice_strategy(),
        z in 0.05f64..0.9,
        sigma in 0.3f64..3.0,
        mass in 1.0f64..30.0,
        bose in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let (stat, model) = if bose { (Statistics::Bose, DsfModel::BoseLog) } else { (Statistics::Fermi, DsfModel::FermiLog) };
        let g = GasSpec::new(stat, 1.0, 0.8, z, 1.0, 1.0).unwrap();
        let gen = GeneratorSpec::new(lat, g, KernelSpec::Gaussian { t0: 1.0, sigma }, model, mass).build().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = linalg::random_density(&mut rng, lat.num_states());
        let out = gen.apply(&rho).unwrap();
        prop_assert!(linalg::trace(&out).norm() < 1e-12 * linalg::max_abs(&out).max(1.0));
        prop_assert_eq!(linalg::hermiticity_defect(&out), 0.0);
    }

    #[test]
    fn open_lattice_canonical_state_is_stationary(
        sites in 2usize..20,
        dp in 0.1f64..1.0,
        mass in 2.0f64..40.0,
        beta in 0.3f64..3.0,
        sigma in 0.3f64..3.0,
    ) {
        let lat = MomentumLattice::new(1, 2 * sites, dp, false).unwrap();
        let g = GasSpec::new(Statistics::MaxwellBoltzmann, 1.0, beta, 0.5, 1.0, 1.0).unwrap();
        let gen = GeneratorSpec::new(lat, g, KernelSpec::Gaussian { t0: 1.0, sigma }, DsfModel::BrownianLimitMb { test_mass: mass }, mass)
            .build()
            .unwrap();
        let (res, scale) = stationarity_residual(&gen);
        prop_assert!(res <= 1e-10 * scale, "{} vs {}", res, scale);
    }
}
