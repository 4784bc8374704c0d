//! Seeded invariant checks for the `verify` command.
//!
//! The report holds only numbers derived from the configuration and the seed,
//! so two runs with the same inputs serialize to identical bytes. Timings go to
//! the manifest instead.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use qbrown_core::fp_brownian::{
    compute_coefficients, fit_decay_rate, kramers_moyal_check, stable_dt, FPCoefficients, FpSolver,
    PhaseGrid, WignerField, WignerMode,
};
use qbrown_core::gas_dsf::{dsf_discrete_oracle, evaluate_dsf, evaluate_dsf_brownian, ModeGrid};
use qbrown_core::megrid::{
    choi_min_eigenvalue, evolve, stationarity_residual, superoperator_norm, Corruption,
    DensityMatrix, EvolveOptions, GeneratorSpec, MomentumLattice,
};
use qbrown_core::{linalg, opalg, DsfModel, GasSpec, KernelSpec, Kinematics, Result, Statistics};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Module, VerifyConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Below,
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">")]
    Above,
    #[serde(rename = ">=")]
    AtLeast,
}

impl Relation {
    fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Relation::Below => value < bound,
            Relation::AtMost => value <= bound,
            Relation::Above => value > bound,
            Relation::AtLeast => value >= bound,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub module: &'static str,
    pub name: &'static str,
    pub value: Option<f64>,
    pub relation: Relation,
    pub bound: f64,
    pub pass: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub seed: u64,
    pub samples: usize,
    pub corrupted_control: bool,
    pub modules: Vec<&'static str>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

struct Recorder<'a> {
    module: &'static str,
    out: &'a mut Vec<Check>,
}

impl Recorder<'_> {
    fn check(&mut self, name: &'static str, relation: Relation, bound: f64, value: Result<f64>) {
        let (value, error) = match value {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let pass = value.is_some_and(|v| relation.holds(v, bound));
        self.out.push(Check {
            module: self.module,
            name,
            value,
            relation,
            bound,
            pass,
            error,
        });
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn dsf(gas: &GasSpec, q: f64, e: f64, model: DsfModel) -> Result<f64> {
    evaluate_dsf(gas, Kinematics::new(q, e)?, model)
}

/// Random gas and kinematics with E within five thermal widths of the peak.
fn sample(rng: &mut ChaCha8Rng, stat: Statistics) -> Result<(GasSpec, f64, f64)> {
    let m = rng.random_range(0.2..5.0);
    let beta = rng.random_range(0.2..5.0);
    let z = match stat {
        Statistics::Bose => rng.random_range(0.0..0.999),
        Statistics::Fermi => rng.random_range(0.0..30.0),
        Statistics::MaxwellBoltzmann => rng.random_range(0.0..5.0),
    };
    let gas = GasSpec::new(stat, m, beta, z, rng.random_range(0.1..10.0), 1.0)?;
    let q: f64 = rng.random_range(0.05..5.0);
    let e = -q * q / (2.0 * m) + rng.random_range(-5.0..5.0) * q / (beta * m).sqrt();
    Ok((gas, q, e))
}

fn mb(z: f64) -> Result<GasSpec> {
    GasSpec::new(Statistics::MaxwellBoltzmann, 1.0, 1.0, z, 1.0, 1.0)
}

fn gas_dsf_checks(r: &mut Recorder, samples: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let forms = (|| {
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let (g, q, e) = sample(&mut rng, Statistics::Bose)?;
            worst = worst.max(rel(
                dsf(&g, q, e, DsfModel::BoseLog)?,
                dsf(&g, q, e, DsfModel::BoseArth)?,
            ));
            let (g, q, e) = sample(&mut rng, Statistics::Fermi)?;
            worst = worst.max(rel(
                dsf(&g, q, e, DsfModel::FermiLog)?,
                dsf(&g, q, e, DsfModel::FermiArth)?,
            ));
        }
        Ok(worst)
    })();
    r.check("log_arth_agreement", Relation::Below, 1e-12, forms);

    let balance = (|| {
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            for stat in [
                Statistics::MaxwellBoltzmann,
                Statistics::Bose,
                Statistics::Fermi,
            ] {
                let (g, q, e) = sample(&mut rng, stat)?;
                let model = DsfModel::for_statistics(stat);
                worst = worst.max(rel(
                    dsf(&g, q, e, model)?,
                    (-g.beta * e).exp() * dsf(&g, q, -e, model)?,
                ));
            }
        }
        Ok(worst)
    })();
    r.check("detailed_balance", Relation::Below, 1e-10, balance);

    let finite = (|| {
        let mut bad = 0usize;
        for _ in 0..samples {
            let (g, _, _) = sample(&mut rng, Statistics::Bose)?;
            let q = rng.random_range(1e-4..50.0);
            let e = rng.random_range(-1e4..1e4);
            for model in [DsfModel::BoseLog, DsfModel::BoseArth] {
                let v = dsf(&g, q, e, model)?;
                if !(v.is_finite() && v >= 0.0) {
                    bad += 1;
                }
            }
        }
        Ok(bad as f64)
    })();
    r.check(
        "non_negative_finite_failures",
        Relation::AtMost,
        0.0,
        finite,
    );

    let deviation = |z: f64| -> Result<f64> {
        let mut w: f64 = 0.0;
        for stat in [Statistics::Bose, Statistics::Fermi] {
            let g = GasSpec::new(stat, 1.0, 1.0, z, 1.0, 1.0)?;
            let reference = g.with_statistics(Statistics::MaxwellBoltzmann);
            for qi in 1..=10 {
                for ei in -10..=10 {
                    let (q, e) = (0.3 * qi as f64, 0.4 * ei as f64);
                    let ratio = dsf(&g, q, e, DsfModel::for_statistics(stat))?
                        / dsf(&reference, q, e, DsfModel::MaxwellBoltzmann)?;
                    w = w.max((ratio - 1.0).abs());
                }
            }
        }
        Ok(w)
    };
    let (a, b) = (deviation(1e-3), deviation(5e-4));
    let halving = match (&a, &b) {
        (Ok(a), Ok(b)) => Ok((b / a - 0.5).abs()),
        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
    };
    r.check("classical_limit_deviation", Relation::Below, 5e-3, a);
    r.check(
        "classical_limit_halving_error",
        Relation::Below,
        0.01,
        halving,
    );

    let factor = (|| {
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let (g, q, e1) = sample(&mut rng, Statistics::MaxwellBoltzmann)?;
            let e2 = -q * q / (2.0 * g.m) + rng.random_range(-5.0..5.0) * q / (g.beta * g.m).sqrt();
            let mid = dsf(&g, q, 0.5 * (e1 + e2), DsfModel::MaxwellBoltzmann)?;
            let geo = (dsf(&g, q, e1, DsfModel::MaxwellBoltzmann)?
                * dsf(&g, q, e2, DsfModel::MaxwellBoltzmann)?)
            .sqrt()
                * (g.beta * g.m * (e1 - e2).powi(2) / (8.0 * q * q)).exp();
            worst = worst.max(rel(mid, geo));
        }
        Ok(worst)
    })();
    r.check("factorization_mb", Relation::Below, 1e-12, factor);

    let brownian = (|| {
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let (g, _, _) = sample(&mut rng, Statistics::MaxwellBoltzmann)?;
            let mass = rng.random_range(1.0..100.0);
            let mut v = |r: f64| {
                [
                    rng.random_range(-r..r),
                    rng.random_range(-r..r),
                    rng.random_range(-r..r),
                ]
            };
            let (q, p1, p2) = (v(3.0), v(10.0), v(10.0));
            let pm = [
                0.5 * (p1[0] + p2[0]),
                0.5 * (p1[1] + p2[1]),
                0.5 * (p1[2] + p2[2]),
            ];
            let lhs = evaluate_dsf_brownian(&g, mass, &q, &pm)?;
            let rhs = (evaluate_dsf_brownian(&g, mass, &q, &p1)?
                * evaluate_dsf_brownian(&g, mass, &q, &p2)?)
            .sqrt();
            worst = worst.max(rel(lhs, rhs));
        }
        Ok(worst)
    })();
    r.check("factorization_brownian", Relation::Below, 1e-12, brownian);

    let oracle = (|| {
        let g = mb(0.5)?;
        let dp = 0.2;
        let grid = ModeGrid { n_per_axis: 48, dp };
        let q = [3.0 * dp, 2.0 * dp, dp];
        let qn = (q.iter().map(|x| x * x).sum::<f64>()).sqrt();
        let p0 = grid.momentum(0);
        let e0 = q.iter().map(|qi| p0 * p0 - (p0 - qi).powi(2)).sum::<f64>() / 2.0;
        let width = 5.0 * dp * dp;
        let (lo, hi) = (-qn * qn / 2.0 - 5.0 * qn, -qn * qn / 2.0 + 5.0 * qn);
        let edges: Vec<f64> = (((lo - e0) / width).floor() as i64
            ..=((hi - e0) / width).ceil() as i64)
            .map(|k| e0 + k as f64 * width - 0.5 * dp * dp)
            .collect();
        let h = dsf_discrete_oracle(&g, grid, &q, &edges)?;
        let total = h.total_weight();
        let mut worst: f64 = 0.0;
        for ((c, a), w) in h.centers().iter().zip(h.averages()).zip(&h.weights) {
            if *w > 0.01 * total {
                worst = worst.max((a / dsf(&g, qn, *c, DsfModel::MaxwellBoltzmann)? - 1.0).abs());
            }
        }
        Ok(worst)
    })();
    r.check("mode_sum_oracle_worst_bin", Relation::Below, 0.05, oracle);
}

const M: f64 = 20.0;

fn brownian_spec(lattice: MomentumLattice) -> Result<GeneratorSpec> {
    Ok(GeneratorSpec::new(
        lattice,
        mb(0.5)?,
        KernelSpec::Gaussian {
            t0: 1.0,
            sigma: 1.0,
        },
        DsfModel::BrownianLimitMb { test_mass: M },
        M,
    ))
}

fn megrid_checks(r: &mut Recorder, seed: u64, corrupted: bool) {
    let small =
        MomentumLattice::new(1, 8, 0.5, true).and_then(|lat| Ok((lat, brownian_spec(lat)?)));
    let (lat, spec) = match small {
        Ok(x) => x,
        Err(e) => {
            r.check("setup", Relation::AtMost, 0.0, Err(e));
            return;
        }
    };
    let run = (|| {
        let gen = spec.build()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho0 = DensityMatrix::new(linalg::random_density(&mut rng, lat.num_states()))?;
        let dt = 0.05 / gen.norm_estimate(30, seed);
        let mut opts = EvolveOptions::new(2000.0 * dt, dt);
        opts.seed = seed;
        Ok(evolve(&gen, &rho0, &opts)?.monitors)
    })();
    let pick = |f: fn(&qbrown_core::megrid::MonitorSummary) -> f64| {
        run.as_ref().map(f).map_err(Clone::clone)
    };
    r.check(
        "trace_drift",
        Relation::Below,
        1e-9,
        pick(|m| m.max_trace_drift),
    );
    r.check(
        "hermiticity_correction",
        Relation::Below,
        1e-11,
        pick(|m| m.max_hermiticity_correction),
    );
    r.check(
        "min_eigenvalue",
        Relation::Above,
        -1e-8,
        pick(|m| m.min_eigenvalue),
    );

    let choi = (|| {
        let mut spec = spec.clone();
        if corrupted {
            spec.corruption = Some(Corruption::ScaleCoherentGain { factor: 1.5 });
        }
        let gen = spec.build()?;
        let dt = 0.01 / superoperator_norm(&gen)?;
        choi_min_eigenvalue(&gen, dt)
    })();
    r.check("choi_min_eigenvalue", Relation::AtLeast, -1e-10, choi);

    let stationary = (|| {
        let gen = brownian_spec(MomentumLattice::new(1, 64, 0.5, false)?)?.build()?;
        let (res, scale) = stationarity_residual(&gen);
        Ok(res / scale)
    })();
    r.check(
        "canonical_stationarity_relative",
        Relation::Below,
        1e-10,
        stationary,
    );
}

fn momentum_dt(c: &FPCoefficients, grid: &PhaseGrid, t: f64) -> Result<(f64, usize)> {
    let limit = 0.5 * stable_dt(c, grid, WignerMode::MomentumOnly)?;
    let steps = (t / limit).ceil() as usize;
    Ok((t / steps as f64, steps))
}

fn km_rate_discrepancy(sigma: f64) -> Result<f64> {
    let gas = mb(0.5)?;
    let width = M.sqrt();
    let dp = sigma / 8.0;
    let half = (8.0 * width / dp).ceil() as usize;
    let lat = MomentumLattice::new(1, 2 * half, dp, false)?;
    let kernel = KernelSpec::Gaussian { t0: 1.0, sigma };
    let mut spec = GeneratorSpec::new(
        lat,
        gas,
        kernel,
        DsfModel::BrownianLimitMb { test_mass: M },
        M,
    );
    spec.weight_cutoff = 1e-18;
    let coeffs = compute_coefficients(&gas, M, &kernel, 1)?;
    let norm = spec.build()?.population_norm_estimate(30, 0);
    let samples = 60;
    let t = 3.0 / (2.0 * coeffs.effective_gamma());
    let steps = ((t * norm / 0.09).ceil() as usize).div_ceil(samples) * samples;
    let rho0 = DensityMatrix::diagonal_gaussian(&lat, &[2.0 * width], width)?;
    let r = kramers_moyal_check(&spec, &coeffs, &rho0, t, t / steps as f64, samples)?;
    Ok(r.momentum_rate_discrepancy.max(r.energy_rate_discrepancy))
}

fn fp_checks(r: &mut Recorder, samples: usize, seed: u64) {
    let closed = (|| {
        let g = GasSpec::new(Statistics::MaxwellBoltzmann, 1.0, 1.0, 1.0, 1.0, 1.0)?;
        let c = compute_coefficients(
            &g,
            1.0,
            &KernelSpec::Gaussian {
                t0: 1.0,
                sigma: 1.0,
            },
            3,
        )?;
        let alpha: f64 = 0.625;
        Ok(rel(c.d_pp, 4.0 * PI.powi(3) / 3.0 / (alpha * alpha)))
    })();
    r.check("gaussian_kernel_closed_form", Relation::Below, 1e-8, closed);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let identities = (|| {
        let (mut ids, mut stats): (f64, f64) = (0.0, 0.0);
        for _ in 0..samples.min(200) {
            let (m, beta, mass) = (
                rng.random_range(0.2..5.0),
                rng.random_range(0.2..5.0),
                rng.random_range(1.0..100.0),
            );
            let z = rng.random_range(0.01..0.95);
            let k = KernelSpec::Gaussian {
                t0: rng.random_range(0.1..3.0),
                sigma: rng.random_range(0.1..10.0),
            };
            let base = GasSpec::new(Statistics::MaxwellBoltzmann, m, beta, z, 1.0, 1.0)?;
            let c = compute_coefficients(&base, mass, &k, 3)?;
            let rr = beta / (4.0 * mass);
            ids = ids
                .max(rel(c.d_xx, rr * rr * c.d_pp))
                .max(rel(c.gamma, beta / (2.0 * mass) * c.d_pp));
            let bose = compute_coefficients(&base.with_statistics(Statistics::Bose), mass, &k, 3)?;
            let fermi =
                compute_coefficients(&base.with_statistics(Statistics::Fermi), mass, &k, 3)?;
            stats = stats
                .max(rel(
                    bose.effective_gamma() / c.effective_gamma(),
                    1.0 / (1.0 - z),
                ))
                .max(rel(
                    fermi.effective_gamma() / c.effective_gamma(),
                    1.0 / (1.0 + z),
                ));
        }
        Ok((ids, stats))
    })();
    let eps = 4.0 * f64::EPSILON;
    r.check(
        "coefficient_identities",
        Relation::Below,
        eps,
        identities.clone().map(|x| x.0),
    );
    r.check(
        "statistics_factor_ratios",
        Relation::Below,
        eps,
        identities.map(|x| x.1),
    );

    let base = (|| {
        let c = compute_coefficients(
            &mb(0.5)?,
            M,
            &KernelSpec::Gaussian {
                t0: 1.0,
                sigma: 1.0,
            },
            1,
        )?;
        Ok((c, PhaseGrid::momentum_only(256, 10.0 * M.sqrt())))
    })();
    let stationary = base.clone().and_then(|(c, grid)| {
        let f0 = WignerField::canonical(grid, WignerMode::MomentumOnly, 1.0, M)?;
        let (dt, steps) = momentum_dt(&c, &grid, 10.0 / (2.0 * c.effective_gamma()))?;
        let (f, _) = FpSolver::new(c, grid, WignerMode::MomentumOnly, dt)?.run(&f0, steps, 0)?;
        Ok(f.relative_l2(&f0))
    });
    r.check("fp_stationarity", Relation::Below, 1e-6, stationary);

    let relax = base.and_then(|(c, grid)| {
        let width = M.sqrt();
        let f0 = WignerField::gaussian(grid, WignerMode::MomentumOnly, 2.0 * width, 0.5 * width)?;
        let g = c.effective_gamma();
        let (dt, steps) = momentum_dt(&c, &grid, 3.0 / (2.0 * g))?;
        let (f, m) =
            FpSolver::new(c, grid, WignerMode::MomentumOnly, dt)?.run(&f0, steps, steps / 100)?;
        let t: Vec<f64> = m.iter().map(|x| x.t).collect();
        let p: Vec<f64> = m.iter().map(|x| x.p).collect();
        let e: Vec<f64> = m.iter().map(|x| x.energy).collect();
        Ok((
            rel(fit_decay_rate(&t, &p, 0.0, 3.0)?, 2.0 * g),
            rel(fit_decay_rate(&t, &e, 0.5, 3.0)?, 4.0 * g),
            (f.mass() - f0.mass()).abs(),
        ))
    });
    r.check(
        "fp_momentum_rate_error",
        Relation::Below,
        0.01,
        relax.clone().map(|x| x.0),
    );
    r.check(
        "fp_energy_rate_error",
        Relation::Below,
        0.01,
        relax.clone().map(|x| x.1),
    );
    r.check("fp_mass_drift", Relation::Below, 1e-8, relax.map(|x| x.2));

    let thermal = 8f64.sqrt();
    let wide = km_rate_discrepancy(thermal / 2.0);
    let narrow = km_rate_discrepancy(thermal / 4.0);
    let shrink = match (&wide, &narrow) {
        (Ok(w), Ok(n)) => Ok(n / w),
        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
    };
    r.check(
        "kramers_moyal_rate_discrepancy",
        Relation::Below,
        0.05,
        narrow,
    );
    r.check("kramers_moyal_halving_ratio", Relation::Below, 1.0, shrink);
}

fn opalg_checks(r: &mut Recorder, samples: usize, seed: u64) {
    let c = FPCoefficients::from_d_pp(0.8, 1.0, 1.0, 1.0, 1.0, 1);
    let report = opalg::verify(&c, 24, 12, samples.clamp(1, 4), seed);
    let pick = |f: fn(&opalg::OpalgReport) -> f64| report.as_ref().map(f).map_err(Clone::clone);
    r.check(
        "ladder_commutator",
        Relation::Below,
        1e-13,
        pick(|x| x.ladder_commutator),
    );
    r.check(
        "position_momentum_commutator",
        Relation::Below,
        1e-12,
        pick(|x| x.position_momentum_commutator),
    );
    r.check(
        "residual_equivalence",
        Relation::Below,
        1e-10,
        pick(|x| x.residual_equivalence),
    );
    r.check(
        "residual_equivalence_broken",
        Relation::Above,
        1e-3,
        pick(|x| x.residual_equivalence_broken),
    );
    r.check(
        "residual_translate",
        Relation::Below,
        1e-12,
        pick(|x| x.residual_translate),
    );
    r.check(
        "residual_rotate",
        Relation::Below,
        1e-11,
        pick(|x| x.residual_rotate),
    );
    r.check(
        "duality_gap",
        Relation::Below,
        1e-11,
        pick(|x| x.duality_gap),
    );
    r.check(
        "momentum_decay_residual",
        Relation::Below,
        1e-12,
        pick(|x| x.momentum_decay_residual),
    );
    // reported, not bounded: truncation effects outside the interior
    r.check(
        "truncation_leakage",
        Relation::AtLeast,
        0.0,
        pick(|x| x.truncation_leakage),
    );
}

/// Run the selected module suites. Returns the report and per-module wall times.
pub fn run_suite(cfg: &VerifyConfig, seed: u64) -> (Report, BTreeMap<String, f64>) {
    let mut modules = cfg.modules.clone();
    modules.sort();
    modules.dedup();
    let mut checks = Vec::new();
    let mut timings = BTreeMap::new();
    for (k, module) in modules.iter().enumerate() {
        let start = Instant::now();
        let sub_seed = seed.wrapping_add(k as u64);
        let mut r = Recorder {
            module: module.name(),
            out: &mut checks,
        };
        match module {
            Module::GasDsf => gas_dsf_checks(&mut r, cfg.samples, sub_seed),
            Module::Megrid => megrid_checks(&mut r, sub_seed, cfg.corrupted_control),
            Module::FpBrownian => fp_checks(&mut r, cfg.samples, sub_seed),
            Module::Opalg => opalg_checks(&mut r, cfg.samples, sub_seed),
        }
        timings.insert(module.name().to_string(), start.elapsed().as_secs_f64());
    }
    let passed = checks.iter().all(|c| c.pass);
    let report = Report {
        seed,
        samples: cfg.samples,
        corrupted_control: cfg.corrupted_control,
        modules: modules.iter().map(|m| m.name()).collect(),
        checks,
        passed,
    };
    (report, timings)
}
