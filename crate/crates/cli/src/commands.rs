//! One function per subcommand. Each writes its artifacts into `ctx.out`.

use qbrown_core::fp_brownian::{
    closed_form_moments, compute_coefficients, stable_dt, FpSolver, WignerField, MASS_BOUND,
};
use qbrown_core::megrid::{
    choi_min_eigenvalue, evolve, superoperator_norm, DensityMatrix, EvolveOptions,
};
use qbrown_core::{GasSpec, KernelSpec, Kinematics};
use serde::Serialize;
use serde_json::json;

use crate::config::*;
use crate::output::{num, write_json, CsvWriter};
use crate::{verify as suite, CliError, RunContext, RunOutput};

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

pub fn dsf_scan(cfg: &DsfScanConfig, ctx: &RunContext) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let models = cfg.models();
    let mut csv = CsvWriter::create(&ctx.out.join("dsf.csv"), &["q", "E", "S", "model"])?;
    let (mut rows, mut s_min, mut s_max) = (0usize, f64::INFINITY, 0.0f64);
    for model in &models {
        for q in cfg.q.values() {
            for e in cfg.energy.values() {
                let kin = Kinematics::new(q, e)?;
                let s = qbrown_core::gas_dsf::evaluate_dsf(&cfg.gas, kin, *model)?;
                if !(s.is_finite() && s >= 0.0) {
                    return Err(CliError::Contract(format!(
                        "S(q = {q}, E = {e}) = {s} for model {} is not a finite non-negative number",
                        model.name()
                    )));
                }
                s_min = s_min.min(s);
                s_max = s_max.max(s);
                rows += 1;
                csv.row(&[num(q), num(e), num(s), model.name().to_string()])?;
            }
        }
    }
    csv.finish()?;
    let names: Vec<&str> = models.iter().map(|m| m.name()).collect();
    write_json(
        &ctx.out.join("dsf.json"),
        &json!({
            "gas": cfg.gas,
            "models": models,
            "q": cfg.q,
            "energy": cfg.energy,
            "rows": rows,
        }),
    )?;
    Ok(RunOutput {
        artifacts: vec!["dsf.csv".into(), "dsf.json".into()],
        monitors: json!({ "rows": rows, "models": names, "min_S": s_min, "max_S": s_max }),
        violation: None,
    })
}

/// (dt, steps) covering `t` with steps no longer than `limit`.
fn step_plan(t: f64, limit: f64) -> (f64, usize) {
    if t == 0.0 {
        return (if limit.is_finite() { limit } else { 1.0 }, 0);
    }
    if !limit.is_finite() {
        return (t, 1);
    }
    let steps = (t / limit).ceil().max(1.0) as usize;
    (t / steps as f64, steps)
}

fn write_state(
    path: &std::path::Path,
    rho: &DensityMatrix,
    diagonal_only: bool,
) -> Result<(), CliError> {
    let mut csv = CsvWriter::create(path, &["row", "col", "re", "im"])?;
    let m = rho.matrix();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if diagonal_only && i != j {
                continue;
            }
            let z = m[(i, j)];
            csv.row(&[i.to_string(), j.to_string(), num(z.re), num(z.im)])?;
        }
    }
    csv.finish()
}

pub fn evolve_me(cfg: &EvolveMeConfig, ctx: &RunContext) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let spec = &cfg.generator;
    let gen = spec.build()?;
    let rho0 = cfg
        .initial
        .build(&spec.lattice, spec.gas.beta, spec.test_mass)?;
    let dt = match cfg.dt {
        Some(dt) => dt,
        None => {
            let norm = if rho0.is_diagonal() {
                gen.population_norm_estimate(30, ctx.seed)
            } else {
                gen.norm_estimate(30, ctx.seed)
            };
            step_plan(cfg.t, cfg.dt_fraction / norm).0
        }
    };
    let mut opts = EvolveOptions::new(cfg.t, dt).with_checkpoints(cfg.checkpoint_stride);
    opts.seed = ctx.seed;
    if cfg.write_states {
        opts = opts.keeping_states();
    }
    let run = evolve(&gen, &rho0, &opts)?;

    let dim = spec.lattice.dim;
    let mut header = vec!["step", "t"];
    header.extend(["p_x", "p_y", "p_z"].iter().take(dim));
    header.extend(["energy", "trace", "min_eigenvalue"]);
    let mut csv = CsvWriter::create(&ctx.out.join("moments.csv"), &header)?;
    let mut artifacts = vec!["moments.csv".to_string()];
    for cp in &run.checkpoints {
        let m = &cp.moments;
        let mut row = vec![cp.step.to_string(), num(m.t)];
        row.extend(m.p.iter().take(dim).map(|x| num(*x)));
        row.extend([num(m.energy), num(m.trace), num(m.min_eigenvalue)]);
        csv.row(&row)?;
        if let Some(state) = &cp.state {
            let name = format!("state_{}.csv", cp.step);
            write_state(&ctx.out.join(&name), state, run.monitors.population_path)?;
            artifacts.push(name);
        }
    }
    csv.finish()?;
    Ok(RunOutput {
        artifacts,
        monitors: json!({ "dt": dt, "lattice_states": gen.dim(), "channels": gen.num_channels(), "evolution": to_value(&run.monitors) }),
        violation: None,
    })
}

fn initial_field(cfg: &EvolveFpConfig) -> Result<WignerField, CliError> {
    let (grid, mode) = (cfg.grid, cfg.mode);
    let field = match cfg.initial {
        FieldState::Canonical => WignerField::canonical(grid, mode, cfg.gas.beta, cfg.test_mass),
        FieldState::Gaussian { p0, width } => WignerField::gaussian(grid, mode, p0, width),
        FieldState::Packet {
            x0,
            x_width,
            p0,
            p_width,
        } => WignerField::from_fn(grid, mode, |x, p| {
            (-0.5 * (((x - x0) / x_width).powi(2) + ((p - p0) / p_width).powi(2))).exp()
        }),
    };
    field.map_err(|e| CliError::from(e.in_block("initial")))
}

fn write_field(path: &std::path::Path, f: &WignerField) -> Result<(), CliError> {
    let mut csv = CsvWriter::create(path, &["x_index", "p_index", "value"])?;
    let np = f.grid.np;
    for (k, v) in f.values.iter().enumerate() {
        csv.row(&[(k / np).to_string(), (k % np).to_string(), num(*v)])?;
    }
    csv.finish()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn evolve_fp(cfg: &EvolveFpConfig, ctx: &RunContext) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let coeffs = compute_coefficients(&cfg.gas, cfg.test_mass, &cfg.kernel, 1)?;
    let f0 = initial_field(cfg)?;
    let limit = stable_dt(&coeffs, &cfg.grid, cfg.mode)?;
    let (dt, steps) = match cfg.dt {
        Some(dt) => {
            let steps = (cfg.t / dt).round();
            if (steps * dt - cfg.t).abs() > 1e-9 * cfg.t.max(dt) {
                return Err(CliError::from(qbrown_core::Error::InvalidParameter {
                    field: "t".into(),
                    reason: format!("must be a whole number of steps dt = {dt}"),
                }));
            }
            (dt, steps as usize)
        }
        None => step_plan(cfg.t, cfg.dt_fraction * limit),
    };
    let solver = FpSolver::new(coeffs, cfg.grid, cfg.mode, dt)?;
    let every = |s: usize| if s == 0 { steps.max(1) } else { s };
    let (moment_every, snapshot_every) = (every(cfg.moment_stride), every(cfg.snapshot_stride));
    let chunk = gcd(moment_every, snapshot_every);

    let mut moments = CsvWriter::create(
        &ctx.out.join("fp_moments.csv"),
        &[
            "step",
            "t",
            "p",
            "energy",
            "mass",
            "p_closed_form",
            "energy_closed_form",
        ],
    )?;
    let mut artifacts = vec!["fp_moments.csv".to_string()];
    let (p0, e0, mass0) = (f0.mean_momentum(), f0.mean_energy(cfg.test_mass), f0.mass());
    let record = |step: usize, f: &WignerField, csv: &mut CsvWriter| -> Result<(), CliError> {
        let t = step as f64 * dt;
        let (pc, ec) = closed_form_moments(&coeffs, &[p0], e0, t);
        csv.row(&[
            step.to_string(),
            num(t),
            num(f.mean_momentum()),
            num(f.mean_energy(cfg.test_mass)),
            num(f.mass()),
            num(pc[0]),
            num(ec),
        ])
    };
    record(0, &f0, &mut moments)?;
    write_field(&ctx.out.join("wigner_0.csv"), &f0)?;
    artifacts.push("wigner_0.csv".into());

    let mut f = f0;
    let mut step = 0;
    let mut max_mass_drift: f64 = 0.0;
    while step < steps {
        let len = chunk.min(steps - step);
        f = solver.run(&f, len, 0)?.0;
        step += len;
        let drift = (f.mass() - mass0).abs();
        max_mass_drift = max_mass_drift.max(drift);
        if drift > MASS_BOUND {
            return Err(CliError::Contract(format!(
                "invariant `mass drift ≤ {MASS_BOUND:e}` violated at step {step}: drift {drift:e}"
            )));
        }
        if step % moment_every == 0 || step == steps {
            record(step, &f, &mut moments)?;
        }
        if step % snapshot_every == 0 || step == steps {
            let name = format!("wigner_{step}.csv");
            write_field(&ctx.out.join(&name), &f)?;
            artifacts.push(name);
        }
    }
    moments.finish()?;
    Ok(RunOutput {
        artifacts,
        monitors: json!({
            "dt": dt,
            "steps": steps,
            "stable_dt": limit,
            "max_mass_drift": max_mass_drift,
            "coefficients": to_value(&coeffs),
        }),
        violation: None,
    })
}

#[derive(Debug, Serialize)]
struct CoeffsReport<'a> {
    #[serde(rename = "D_pp")]
    d_pp: f64,
    #[serde(rename = "D_xx")]
    d_xx: f64,
    gamma: f64,
    stat_factor: f64,
    #[serde(rename = "D_pp_effective")]
    d_pp_effective: f64,
    #[serde(rename = "D_xx_effective")]
    d_xx_effective: f64,
    gamma_effective: f64,
    #[serde(rename = "gamma_over_D_pp")]
    gamma_over_d_pp: f64,
    #[serde(rename = "beta_over_2M")]
    beta_over_2m: f64,
    inputs: CoeffsInputs<'a>,
}

#[derive(Debug, Serialize)]
struct CoeffsInputs<'a> {
    gas: &'a GasSpec,
    kernel: &'a KernelSpec,
    test_mass: f64,
    dim: usize,
}

pub fn coeffs(cfg: &CoeffsConfig, ctx: &RunContext) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let c = compute_coefficients(&cfg.gas, cfg.test_mass, &cfg.kernel, cfg.dim)?;
    let report = CoeffsReport {
        d_pp: c.d_pp,
        d_xx: c.d_xx,
        gamma: c.gamma,
        stat_factor: c.stat_factor,
        d_pp_effective: c.effective_d_pp(),
        d_xx_effective: c.effective_d_xx(),
        gamma_effective: c.effective_gamma(),
        gamma_over_d_pp: c.gamma / c.d_pp,
        beta_over_2m: cfg.gas.beta / (2.0 * cfg.test_mass),
        inputs: CoeffsInputs {
            gas: &cfg.gas,
            kernel: &cfg.kernel,
            test_mass: cfg.test_mass,
            dim: cfg.dim,
        },
    };
    write_json(&ctx.out.join("coeffs.json"), &report)?;
    Ok(RunOutput {
        artifacts: vec!["coeffs.json".into()],
        monitors: json!({ "D_pp": c.d_pp }),
        violation: None,
    })
}

pub fn choi(cfg: &ChoiConfig, ctx: &RunContext) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let gen = cfg.generator.build()?;
    let norm = superoperator_norm(&gen)?;
    let dt = match cfg.dt {
        Some(dt) => dt,
        None if norm > 0.0 => cfg.dt_fraction / norm,
        None => 0.0,
    };
    let min = choi_min_eigenvalue(&gen, dt)?;
    let cp = min >= -cfg.tolerance;
    let report = json!({
        "dt": dt,
        "superoperator_norm": norm,
        "min_eigenvalue": min,
        "tolerance": cfg.tolerance,
        "completely_positive": cp,
        "corruption": cfg.generator.corruption,
    });
    write_json(&ctx.out.join("choi.json"), &report)?;
    Ok(RunOutput {
        artifacts: vec!["choi.json".into()],
        monitors: report,
        violation: (!cp)
            .then(|| format!("Choi minimum eigenvalue {min:e} below −{:e}", cfg.tolerance)),
    })
}

pub fn verify(cfg: &VerifyConfig, ctx: &RunContext) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let (report, timings) = suite::run_suite(cfg, ctx.seed);
    write_json(&ctx.out.join("verify_report.json"), &report)?;
    let failed: Vec<String> = report
        .checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{}.{}", c.module, c.name))
        .collect();
    Ok(RunOutput {
        artifacts: vec!["verify_report.json".into()],
        monitors: json!({ "checks": report.checks, "module_seconds": timings }),
        violation: (!failed.is_empty()).then(|| format!("failed checks: {}", failed.join(", "))),
    })
}
