use proptest::prelude::*;
use qbrown_core::fp_brownian::FPCoefficients;
use qbrown_core::linalg::{self, CMatrix, I};
use qbrown_core::opalg::*;
use qbrown_core::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn coeffs(d_pp: f64, beta: f64, mass: f64, hbar: f64) -> FPCoefficients {
    FPCoefficients::from_d_pp(d_pp, 1.0, beta, mass, hbar, 1)
}

fn form(kind: FormKind, dims: usize, levels: usize) -> GeneratorForm {
    GeneratorForm::new(kind, coeffs(0.8, 1.0, 1.0, 1.0), dims, levels).unwrap()
}

#[test]
fn ladder_algebra_holds_below_truncation() {
    let l = build_ladder(24, 1.3, 2.0, 0.7).unwrap();
    let (aa, xp) = ladder_residuals(&l);
    assert!(aa < 1e-13);
    assert!(xp < 1e-12);
    assert!(linalg::hermiticity_defect(&l.x.matrix) == 0.0);
    assert!(linalg::hermiticity_defect(&l.p.matrix) == 0.0);
    let mut num = linalg::hermitian_eigenvalues(&(&l.adag.matrix * &l.a.matrix));
    num.sort_by(f64::total_cmp);
    for (k, v) in num.iter().enumerate() {
        assert!((v - k as f64).abs() < 1e-12);
    }
    let rebuilt = (&l.x.matrix + &l.p.matrix * (I * (l.lambda * l.lambda / (4.0 * l.hbar))))
        * linalg::c(2f64.sqrt() / l.lambda);
    assert!(linalg::max_abs(&(rebuilt - &l.a.matrix)) < 1e-13);
    assert!((l.lambda - (0.7f64 * 0.7 * 1.3 / 2.0).sqrt()).abs() < 1e-15);
    assert_eq!(l.a.interior_margin, DEFAULT_MARGIN);
}

#[test]
fn small_or_oversized_truncations_are_rejected() {
    assert!(matches!(
        build_ladder(MIN_LEVELS - 1, 1.0, 1.0, 1.0),
        Err(Error::InvalidParameter { .. })
    ));
    let c = coeffs(1.0, 1.0, 1.0, 1.0);
    assert!(matches!(
        GeneratorForm::new(FormKind::DoubleCommutator, c, 2, 25),
        Err(Error::Resource(_))
    ));
    assert!(GeneratorForm::new(FormKind::DoubleCommutator, c, 3, 10).is_err());
}

#[test]
fn inputs_are_checked() {
    let f = form(FormKind::DoubleCommutator, 1, 10);
    assert!(matches!(
        apply_form(&f, &CMatrix::identity(9, 9)),
        Err(Error::DimensionMismatch { .. })
    ));
    let mut bad = CMatrix::zeros(10, 10);
    bad[(0, 1)] = I;
    assert!(apply_form(&f, &bad).is_err());
    assert!(adjoint_apply(&f, &bad).is_err());
    assert!(covariance_check(&f, Transform::Rotate2D { theta: 0.3 }, 1, 0).is_err());
}

#[test]
fn forms_agree_on_the_interior() {
    let f = form(FormKind::DoubleCommutator, 1, 24);
    let r = equivalence_check(&f, 8, 1).unwrap();
    assert!(r.interior_residual < 1e-10, "{r:?}");
    // truncation shows up only outside the interior, and is reported
    assert!(r.leakage.is_finite());
}

#[test]
fn broken_friction_relation_separates_the_forms() {
    let mut c = coeffs(0.8, 1.0, 1.0, 1.0);
    c.gamma *= 1.1;
    let f = GeneratorForm::new(FormKind::DoubleCommutator, c, 1, 24).unwrap();
    assert!(equivalence_check(&f, 4, 1).unwrap().interior_residual > 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn equivalence_and_duality_for_any_consistent_coefficients(
        d_pp in 0.01f64..5.0,
        beta in 0.2f64..5.0,
        mass in 0.5f64..50.0,
        hbar in 0.5f64..2.0,
        stat in 0.5f64..2.0,
        seed in 0u64..1000,
    ) {
        let mut c = coeffs(d_pp, beta, mass, hbar);
        c.stat_factor = stat;
        let dc = GeneratorForm::new(FormKind::DoubleCommutator, c, 1, 16).unwrap();
        let scale = c.effective_d_pp() * (1.0 + mass / (hbar * hbar * beta));
        prop_assert!(equivalence_check(&dc, 2, seed).unwrap().interior_residual < 1e-12 * scale.max(1.0));
        for kind in [FormKind::DoubleCommutator, FormKind::ExplicitLindblad] {
            prop_assert!(duality_gap(&dc.with_form(kind), 2, seed).unwrap() < 1e-11 * scale.max(1.0));
        }
    }
}

#[test]
fn covariance_under_translation_and_rotation() {
    for kind in [FormKind::DoubleCommutator, FormKind::ExplicitLindblad] {
        let f = form(kind, 1, 24);
        assert_eq!(
            covariance_check(&f, Transform::Translate { a: 0.0 }, 3, 2).unwrap(),
            0.0
        );
        assert!(covariance_check(&f, Transform::Translate { a: 3.7 }, 3, 2).unwrap() < 1e-12);
        let f2 = form(kind, 2, 10);
        assert!(
            covariance_check(
                &f2,
                Transform::Rotate2D {
                    theta: std::f64::consts::PI / 5.0
                },
                2,
                2
            )
            .unwrap()
                < 1e-11
        );
    }
}

#[test]
fn adjoint_moment_equations() {
    for kind in [FormKind::DoubleCommutator, FormKind::ExplicitLindblad] {
        let f = form(kind, 1, 24);
        let c = f.coeffs;
        let l = build_ladder(24, c.beta, c.test_mass, c.hbar).unwrap();
        let p = &l.p.matrix;

        let lp = adjoint_apply(&f, p).unwrap() + p * linalg::c(2.0 * c.gamma);
        assert!(interior_max(&f, &lp) < 1e-12 * interior_max(&f, p));

        let energy = p * p * linalg::c(0.5 / c.test_mass);
        let id = CMatrix::identity(24, 24);
        let expected =
            id.clone() * linalg::c(c.d_pp / c.test_mass) - &energy * linalg::c(4.0 * c.gamma);
        let le = adjoint_apply(&f, &energy).unwrap() - &expected;
        assert!(
            interior_max(&f, &le) < 1e-12 * interior_max(&f, &expected),
            "{kind:?}"
        );

        assert!(interior_max(&f, &adjoint_apply(&f, &id).unwrap()) < 1e-13);
    }
}

#[test]
fn dissipator_is_trace_annihilating_on_interior_states() {
    let f = form(FormKind::DoubleCommutator, 1, 24);
    let idx = f.interior();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let small = linalg::random_density(&mut rng, idx.len());
    let mut rho = CMatrix::zeros(24, 24);
    for (i, &a) in idx.iter().enumerate() {
        for (j, &b) in idx.iter().enumerate() {
            rho[(a, b)] = small[(i, j)];
        }
    }
    for kind in [FormKind::DoubleCommutator, FormKind::ExplicitLindblad] {
        let out = apply_form(&f.with_form(kind), &rho).unwrap();
        assert!(linalg::trace(&out).norm() < 1e-12);
    }
    // the double commutators vanish on the identity; only the friction part survives, traceless
    let mixed = CMatrix::identity(24, 24) * linalg::c(1.0 / 24.0);
    let out = apply_form(&f, &mixed).unwrap();
    let ops = f.operators().unwrap();
    let friction = linalg::commutator(&ops[0].0, &ops[0].1) * (I * (-2.0 * f.coeffs.gamma / 24.0));
    assert!(linalg::max_abs(&(out - friction)) < 1e-13);
}

#[test]
fn full_report_meets_the_contracts() {
    let r = verify(&coeffs(0.8, 1.0, 1.0, 1.0), 24, 12, 3, 11).unwrap();
    assert!(r.residual_equivalence < 1e-10);
    assert!(r.residual_equivalence_broken > 1e-3);
    assert!(r.residual_translate < 1e-12);
    assert!(r.residual_rotate < 1e-11);
    assert!(r.duality_gap < 1e-11);
    assert!(r.momentum_decay_residual < 1e-12);
}
