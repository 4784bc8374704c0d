//! Fixed-step RK4 integration with invariant monitors.
//!
//! Nothing is renormalized: the trace and positivity are only measured, and a
//! violation stops the run with the offending step.

use serde::Serialize;

use super::density::DensityMatrix;
use super::generator::Generator;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::vec3::{norm2, Vec3};

/// Largest admissible dt·‖L‖.
pub const STEP_NORM_BOUND: f64 = 0.1;
/// Largest admissible change of the trace in one step.
pub const STEP_TRACE_BOUND: f64 = 1e-12;
/// Largest admissible total drift of the trace over a run.
pub const RUN_TRACE_BOUND: f64 = 1e-9;
/// Largest admissible symmetrization correction.
pub const HERMITICITY_BOUND: f64 = 1e-11;
/// Smallest admissible eigenvalue at a checkpoint.
pub const POSITIVITY_BOUND: f64 = -1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub t: f64,
    pub dt: f64,
    /// Record moments every `checkpoint_stride` steps (and at the end).
    pub checkpoint_stride: usize,
    /// Keep a copy of the state at every checkpoint.
    pub keep_states: bool,
    /// Power iterations for the ‖L‖ estimate.
    pub norm_iterations: usize,
    pub seed: u64,
}

impl EvolveOptions {
    pub fn new(t: f64, dt: f64) -> Self {
        EvolveOptions {
            t,
            dt,
            checkpoint_stride: 0,
            keep_states: false,
            norm_iterations: 30,
            seed: 0,
        }
    }

    pub fn with_checkpoints(mut self, stride: usize) -> Self {
        self.checkpoint_stride = stride;
        self
    }

    pub fn keeping_states(mut self) -> Self {
        self.keep_states = true;
        self
    }

    fn steps(&self) -> Result<usize> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::param(
                "dt",
                format!("must be finite and > 0, got {}", self.dt),
            ));
        }
        if !(self.t.is_finite() && self.t >= 0.0) {
            return Err(Error::param(
                "t",
                format!("must be finite and >= 0, got {}", self.t),
            ));
        }
        let steps = (self.t / self.dt).round();
        if (steps * self.dt - self.t).abs() > 1e-9 * self.t.max(self.dt) {
            return Err(Error::param(
                "t",
                format!("must be a whole number of steps dt = {}", self.dt),
            ));
        }
        Ok(steps as usize)
    }
}

/// Observables at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub t: f64,
    pub p: Vec3,
    pub energy: f64,
    pub trace: f64,
    /// Smallest eigenvalue of ρ (smallest population on the diagonal path).
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub step: usize,
    pub moments: Moments,
    pub state: Option<DensityMatrix>,
}

/// Worst values seen by each monitor over a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonitorSummary {
    pub steps: usize,
    /// True when the state was diagonal and only populations were integrated.
    pub population_path: bool,
    pub norm_estimate: f64,
    pub dt_times_norm: f64,
    pub max_hermiticity_correction: f64,
    pub max_step_trace_change: f64,
    pub max_trace_drift: f64,
    pub min_eigenvalue: f64,
    /// Largest weight found within 4 thermal widths of the lattice edge.
    pub max_boundary_weight: f64,
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub state: DensityMatrix,
    pub checkpoints: Vec<Checkpoint>,
    pub monitors: MonitorSummary,
}

enum State {
    Dense(CMatrix),
    Populations(Vec<f64>),
}

/// Integrate dρ/dt = L[ρ] from `rho0` for `opts.t`.
pub fn evolve(gen: &Generator, rho0: &DensityMatrix, opts: &EvolveOptions) -> Result<Evolution> {
    if rho0.dim() != gen.dim() {
        return Err(Error::DimensionMismatch {
            expected: gen.dim(),
            got: rho0.dim(),
        });
    }
    let steps = opts.steps()?;
    let population_path = rho0.is_diagonal();
    let norm = if population_path {
        gen.population_norm_estimate(opts.norm_iterations, opts.seed)
    } else {
        gen.norm_estimate(opts.norm_iterations, opts.seed)
    };
    let dt = opts.dt;
    if dt * norm > STEP_NORM_BOUND {
        return Err(Error::Stability {
            bound: format!("dt·‖L‖ ≤ {STEP_NORM_BOUND}"),
            detail: format!("dt = {dt}, ‖L‖ ≈ {norm:.6e}, dt·‖L‖ = {:.4}", dt * norm),
        });
    }

    let boundary = boundary_mask(gen);
    let mut monitors = MonitorSummary {
        steps,
        population_path,
        norm_estimate: norm,
        dt_times_norm: dt * norm,
        max_hermiticity_correction: 0.0,
        max_step_trace_change: 0.0,
        max_trace_drift: 0.0,
        min_eigenvalue: f64::INFINITY,
        max_boundary_weight: 0.0,
    };

    let mut state = if population_path {
        State::Populations(rho0.populations())
    } else {
        State::Dense(rho0.matrix().clone())
    };
    let trace0 = state_trace(&state);
    let mut trace_prev = trace0;
    let mut checkpoints = Vec::new();
    let record = |step: usize,
                  state: &State,
                  monitors: &mut MonitorSummary,
                  out: &mut Vec<Checkpoint>|
     -> Result<()> {
        let moments = moments_of(gen, state, step as f64 * dt);
        monitors.min_eigenvalue = monitors.min_eigenvalue.min(moments.min_eigenvalue);
        if moments.min_eigenvalue < POSITIVITY_BOUND {
            return Err(Error::Invariant {
                invariant: format!("min eigenvalue ≥ {POSITIVITY_BOUND:e}"),
                step,
                detail: format!("min eigenvalue {:e}", moments.min_eigenvalue),
            });
        }
        let state_copy = opts
            .keep_states
            .then(|| DensityMatrix::from_trusted(to_matrix(state)));
        out.push(Checkpoint {
            step,
            moments,
            state: state_copy,
        });
        Ok(())
    };

    let stride = opts.checkpoint_stride;
    record(0, &state, &mut monitors, &mut checkpoints)?;
    for step in 1..=steps {
        match &mut state {
            State::Dense(rho) => {
                let mut next = rk4_dense(gen, rho, dt);
                let corr = linalg::hermitize(&mut next);
                monitors.max_hermiticity_correction = monitors.max_hermiticity_correction.max(corr);
                if corr > HERMITICITY_BOUND {
                    return Err(Error::Invariant {
                        invariant: format!("Hermiticity defect ≤ {HERMITICITY_BOUND:e}"),
                        step,
                        detail: format!("symmetrization correction {corr:e}"),
                    });
                }
                *rho = next;
            }
            State::Populations(f) => *f = rk4_populations(gen, f, dt),
        }
        let tr = state_trace(&state);
        if !tr.is_finite() {
            return Err(Error::Invariant {
                invariant: "finite state".into(),
                step,
                detail: "non-finite trace".into(),
            });
        }
        let change = (tr - trace_prev).abs();
        monitors.max_step_trace_change = monitors.max_step_trace_change.max(change);
        if change > STEP_TRACE_BOUND {
            return Err(Error::Stability {
                bound: format!("trace change per step ≤ {STEP_TRACE_BOUND:e}"),
                detail: format!("step {step}: trace changed by {change:e}"),
            });
        }
        trace_prev = tr;
        let drift = (tr - trace0).abs();
        monitors.max_trace_drift = monitors.max_trace_drift.max(drift);
        if drift > RUN_TRACE_BOUND {
            return Err(Error::Invariant {
                invariant: format!("trace drift ≤ {RUN_TRACE_BOUND:e}"),
                step,
                detail: format!("trace drifted by {drift:e}"),
            });
        }
        monitors.max_boundary_weight = monitors
            .max_boundary_weight
            .max(boundary_weight(&state, &boundary));
        if (stride > 0 && step % stride == 0) || step == steps {
            record(step, &state, &mut monitors, &mut checkpoints)?;
        }
    }
    monitors.max_boundary_weight = monitors
        .max_boundary_weight
        .max(boundary_weight(&state, &boundary));

    Ok(Evolution {
        state: DensityMatrix::from_trusted(to_matrix(&state)),
        checkpoints,
        monitors,
    })
}

/// ⟨p⟩ and ⟨p²/2M⟩ at each time in `t_grid` (ascending, each a multiple of `dt`).
pub fn moment_trajectory(
    gen: &Generator,
    rho0: &DensityMatrix,
    t_grid: &[f64],
    dt: f64,
) -> Result<Vec<Moments>> {
    let mut out = Vec::with_capacity(t_grid.len());
    let mut rho = rho0.clone();
    let mut t_now = 0.0;
    for &t in t_grid {
        if t < t_now {
            return Err(Error::param("t_grid", "must be ascending and non-negative"));
        }
        let mut opts = EvolveOptions::new(t - t_now, dt);
        opts.checkpoint_stride = 0;
        let run = evolve(gen, &rho, &opts)?;
        let mut m = run
            .checkpoints
            .last()
            .map(|c| c.moments)
            .expect("final checkpoint");
        m.t = t;
        out.push(m);
        rho = run.state;
        t_now = t;
    }
    Ok(out)
}

fn rk4_dense(gen: &Generator, rho: &CMatrix, dt: f64) -> CMatrix {
    let h = linalg::c(dt);
    let half = linalg::c(0.5 * dt);
    let k1 = gen.apply_unchecked(rho);
    let k2 = gen.apply_unchecked(&(rho + &k1 * half));
    let k3 = gen.apply_unchecked(&(rho + &k2 * half));
    let k4 = gen.apply_unchecked(&(rho + &k3 * h));
    rho + (k1 + (k2 + k3) * linalg::c(2.0) + k4) * linalg::c(dt / 6.0)
}

fn rk4_populations(gen: &Generator, f: &[f64], dt: f64) -> Vec<f64> {
    let axpy = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + s * y).collect()
    };
    let k1 = gen.apply_populations(f);
    let k2 = gen.apply_populations(&axpy(f, &k1, 0.5 * dt));
    let k3 = gen.apply_populations(&axpy(f, &k2, 0.5 * dt));
    let k4 = gen.apply_populations(&axpy(f, &k3, dt));
    (0..f.len())
        .map(|i| f[i] + dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]))
        .collect()
}

fn state_trace(state: &State) -> f64 {
    match state {
        State::Dense(m) => linalg::trace(m).re,
        State::Populations(f) => f.iter().sum(),
    }
}

fn to_matrix(state: &State) -> CMatrix {
    match state {
        State::Dense(m) => m.clone(),
        State::Populations(f) => {
            let n = f.len();
            let mut m = CMatrix::zeros(n, n);
            for (i, x) in f.iter().enumerate() {
                m[(i, i)] = linalg::c(*x);
            }
            m
        }
    }
}

fn moments_of(gen: &Generator, state: &State, t: f64) -> Moments {
    let (pops, min_eigenvalue): (Vec<f64>, f64) = match state {
        State::Dense(m) => (
            m.diagonal().iter().map(|z| z.re).collect(),
            linalg::min_eigenvalue(m),
        ),
        State::Populations(f) => (f.clone(), f.iter().copied().fold(f64::INFINITY, f64::min)),
    };
    let mass = gen.spec().test_mass;
    let mut p = [0.0; 3];
    let mut energy = 0.0;
    for (w, pm) in pops.iter().zip(gen.momenta()) {
        for a in 0..3 {
            p[a] += w * pm[a];
        }
        energy += w * norm2(pm) / (2.0 * mass);
    }
    Moments {
        t,
        p,
        energy,
        trace: pops.iter().sum(),
        min_eigenvalue,
    }
}

/// Sites with any component within 4 thermal widths √(M/β) of the edge.
fn boundary_mask(gen: &Generator) -> Vec<bool> {
    let lattice = gen.lattice();
    let width = (gen.spec().test_mass / gen.spec().gas.beta).sqrt();
    let inner = lattice.p_max() - 4.0 * width;
    gen.momenta()
        .iter()
        .map(|p| p[..lattice.dim].iter().any(|x| x.abs() > inner))
        .collect()
}

fn boundary_weight(state: &State, mask: &[bool]) -> f64 {
    match state {
        State::Dense(m) => m
            .diagonal()
            .iter()
            .zip(mask)
            .filter(|(_, &b)| b)
            .map(|(z, _)| z.re.abs())
            .sum(),
        State::Populations(f) => f
            .iter()
            .zip(mask)
            .filter(|(_, &b)| b)
            .map(|(x, _)| x.abs())
            .sum(),
    }
}
