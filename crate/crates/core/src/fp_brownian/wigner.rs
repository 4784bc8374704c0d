//! Phase-space Fokker–Planck solver,
//!
//! ```text
//! ∂f/∂t = −(p/M) ∂_x f + D_xx ∂²_x f + D_pp ∂²_p f + 2γ ∂_p(p f)
//! ```
//!
//! Streaming and position diffusion are advanced exactly in Fourier space on
//! a periodic x-grid. The momentum operator uses Scharfetter–Gummel fluxes,
//! for which the sampled Gaussian e^{−βp²/2M} is an exact discrete
//! equilibrium, with zero flux through the momentum boundary and SSP-RK2 in
//! time. The two are combined by Strang splitting.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::coefficients::FPCoefficients;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WignerMode {
    FullPhaseSpace,
    /// No x-dependence: the field is a single momentum distribution.
    MomentumOnly,
}

/// Cell-centred phase-space grid: `nx` periodic points on [0, length_x) and
/// `np` cells covering [−p_max, p_max].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseGrid {
    pub nx: usize,
    pub length_x: f64,
    pub np: usize,
    pub p_max: f64,
}

impl PhaseGrid {
    pub fn momentum_only(np: usize, p_max: f64) -> Self {
        PhaseGrid {
            nx: 1,
            length_x: 1.0,
            np,
            p_max,
        }
    }

    pub fn validate(&self, mode: WignerMode) -> Result<()> {
        if self.np < 3 {
            return Err(Error::param(
                "grid.np",
                format!("must be >= 3, got {}", self.np),
            ));
        }
        if !(self.p_max.is_finite() && self.p_max > 0.0) {
            return Err(Error::param("grid.p_max", "must be finite and > 0"));
        }
        if !(self.length_x.is_finite() && self.length_x > 0.0) {
            return Err(Error::param("grid.length_x", "must be finite and > 0"));
        }
        match mode {
            WignerMode::MomentumOnly if self.nx != 1 => {
                Err(Error::param("grid.nx", "must be 1 in momentum_only mode"))
            }
            WignerMode::FullPhaseSpace if self.nx < 2 => {
                Err(Error::param("grid.nx", "must be >= 2"))
            }
            _ => Ok(()),
        }
    }

    pub fn dp(&self) -> f64 {
        2.0 * self.p_max / self.np as f64
    }

    pub fn dx(&self) -> f64 {
        self.length_x / self.nx as f64
    }

    pub fn p(&self, j: usize) -> f64 {
        -self.p_max + (j as f64 + 0.5) * self.dp()
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    fn cell(&self) -> f64 {
        self.dp() * self.dx()
    }
}

/// Real phase-space field f_W(x, p), stored x-major: `values[ix·np + ip]`.
///
/// The field is not required to be pointwise positive.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerField {
    pub grid: PhaseGrid,
    pub mode: WignerMode,
    pub values: Vec<f64>,
}

impl WignerField {
    /// Sample `f(x, p)` at the grid nodes and normalize to unit mass.
    pub fn from_fn<F: Fn(f64, f64) -> f64>(
        grid: PhaseGrid,
        mode: WignerMode,
        f: F,
    ) -> Result<Self> {
        grid.validate(mode)?;
        let mut values = Vec::with_capacity(grid.nx * grid.np);
        for i in 0..grid.nx {
            for j in 0..grid.np {
                values.push(f(grid.x(i), grid.p(j)));
            }
        }
        let mut field = WignerField { grid, mode, values };
        let mass = field.mass();
        if !(mass.is_finite() && mass != 0.0) {
            return Err(Error::Domain(format!("initial field has mass {mass}")));
        }
        field.values.iter_mut().for_each(|v| *v /= mass);
        Ok(field)
    }

    /// Momentum Gaussian centred on `p0` with standard deviation `width`,
    /// uniform in x.
    pub fn gaussian(grid: PhaseGrid, mode: WignerMode, p0: f64, width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::param("width", "must be finite and > 0"));
        }
        Self::from_fn(grid, mode, |_, p| (-0.5 * ((p - p0) / width).powi(2)).exp())
    }

    /// Discrete equilibrium ∝ e^{−βp²/2M}.
    pub fn canonical(grid: PhaseGrid, mode: WignerMode, beta: f64, test_mass: f64) -> Result<Self> {
        Self::gaussian(grid, mode, 0.0, (test_mass / beta).sqrt())
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell()
    }

    /// Marginal distribution in p.
    pub fn momentum_marginal(&self) -> Vec<f64> {
        let np = self.grid.np;
        let mut out = vec![0.0; np];
        for row in self.values.chunks(np) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v * self.grid.dx();
            }
        }
        out
    }

    pub fn mean_momentum(&self) -> f64 {
        let g = self.grid;
        self.momentum_marginal()
            .iter()
            .enumerate()
            .map(|(j, f)| f * g.p(j))
            .sum::<f64>()
            * g.dp()
    }

    pub fn mean_energy(&self, test_mass: f64) -> f64 {
        let g = self.grid;
        self.momentum_marginal()
            .iter()
            .enumerate()
            .map(|(j, f)| f * g.p(j) * g.p(j))
            .sum::<f64>()
            * g.dp()
            / (2.0 * test_mass)
    }

    /// ‖f − g‖₂ / ‖g‖₂ (discrete).
    pub fn relative_l2(&self, reference: &WignerField) -> f64 {
        let num: f64 = self
            .values
            .iter()
            .zip(&reference.values)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        let den: f64 = reference.values.iter().map(|b| b * b).sum();
        (num / den).sqrt()
    }
}

/// B(x) = x / (e^x − 1).
fn bernoulli(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - 0.5 * x
    } else {
        x / x.exp_m1()
    }
}

/// Per-face rates of the momentum scheme: J_{j+½}/Δp = up[j] f_j − down[j] f_{j+1}.
fn face_rates(coeffs: &FPCoefficients, grid: &PhaseGrid) -> (Vec<f64>, Vec<f64>) {
    let d = coeffs.effective_d_pp();
    let g = coeffs.effective_gamma();
    let h = grid.dp();
    let faces = grid.np - 1;
    let mut up = vec![0.0; faces];
    let mut down = vec![0.0; faces];
    for j in 0..faces {
        let (pl, pr) = (grid.p(j), grid.p(j + 1));
        if d > 0.0 {
            let dv = g / d * (pr * pr - pl * pl);
            up[j] = d / (h * h) * bernoulli(dv);
            down[j] = d / (h * h) * bernoulli(-dv);
        } else {
            // drift velocity −2γp at the face, upwinded
            let v = -2.0 * g * 0.5 * (pl + pr);
            up[j] = v.max(0.0) / h;
            down[j] = (-v).max(0.0) / h;
        }
    }
    (up, down)
}

/// Largest total outflow rate from any cell.
fn worst_outflow(up: &[f64], down: &[f64]) -> f64 {
    let faces = up.len();
    (0..=faces)
        .map(|j| {
            let out_right = if j < faces { up[j] } else { 0.0 };
            let out_left = if j > 0 { down[j - 1] } else { 0.0 };
            out_right + out_left
        })
        .fold(0.0, f64::max)
}

/// Largest step accepted by [`FpSolver::new`] for these inputs.
pub fn stable_dt(coeffs: &FPCoefficients, grid: &PhaseGrid, mode: WignerMode) -> Result<f64> {
    coeffs.validate()?;
    grid.validate(mode)?;
    let (up, down) = face_rates(coeffs, grid);
    let mut limit = 1.0 / worst_outflow(&up, &down);
    if mode == WignerMode::FullPhaseSpace {
        limit = limit.min(coeffs.test_mass * grid.dx() / grid.p_max);
    }
    Ok(limit)
}

/// Moments of a solver run at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FpMoments {
    pub t: f64,
    pub p: f64,
    pub energy: f64,
    pub mass: f64,
}

/// Largest admissible mass drift over a run.
pub const MASS_BOUND: f64 = 1e-8;

/// Stepper for one (coefficients, grid, dt) combination.
#[derive(Debug, Clone)]
pub struct FpSolver {
    coeffs: FPCoefficients,
    grid: PhaseGrid,
    mode: WignerMode,
    dt: f64,
    /// Per-face rates: J_{j+½}/Δp = up[j] f_j − down[j] f_{j+1}.
    up: Vec<f64>,
    down: Vec<f64>,
}

impl FpSolver {
    /// Uses the effective (statistics-scaled) coefficients. Rejects `dt`
    /// above the positivity bound of the momentum step, or above the
    /// streaming CFL bound in phase-space mode.
    pub fn new(coeffs: FPCoefficients, grid: PhaseGrid, mode: WignerMode, dt: f64) -> Result<Self> {
        coeffs.validate()?;
        grid.validate(mode)?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::param(
                "dt",
                format!("must be finite and > 0, got {dt}"),
            ));
        }
        let (up, down) = face_rates(&coeffs, &grid);
        let worst = worst_outflow(&up, &down);
        if dt * worst > 1.0 {
            return Err(Error::Stability {
                bound: "dt·max_j(c⁺_{j+½} + c⁻_{j−½}) ≤ 1 (momentum diffusion and drift)".into(),
                detail: format!("dt = {dt}, bound requires dt ≤ {:.6e}", 1.0 / worst),
            });
        }
        if mode == WignerMode::FullPhaseSpace {
            let courant = grid.p_max / coeffs.test_mass * dt / grid.dx();
            if courant > 1.0 {
                return Err(Error::Stability {
                    bound: "p_max·dt/(M·dx) ≤ 1 (streaming)".into(),
                    detail: format!("Courant number {courant:.4}"),
                });
            }
        }
        Ok(FpSolver {
            coeffs,
            grid,
            mode,
            dt,
            up,
            down,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn collision_rhs(&self, f: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for j in 0..self.up.len() {
            let flux = self.up[j] * f[j] - self.down[j] * f[j + 1];
            out[j] -= flux;
            out[j + 1] += flux;
        }
    }

    /// One Heun step of the momentum operator on a single row.
    fn collision_step(&self, row: &mut [f64]) {
        let n = row.len();
        let dt = self.dt;
        let mut k1 = vec![0.0; n];
        self.collision_rhs(row, &mut k1);
        let stage: Vec<f64> = row.iter().zip(&k1).map(|(f, k)| f + dt * k).collect();
        let mut k2 = vec![0.0; n];
        self.collision_rhs(&stage, &mut k2);
        for j in 0..n {
            row[j] = 0.5 * (row[j] + stage[j] + dt * k2[j]);
        }
    }

    /// Exact x-step over `tau`: f̂(k, p) ← f̂(k, p)·exp((−ikp/M − D_xx k²)τ).
    fn stream(&self, values: &mut [f64], tau: f64, planner: &mut FftPlanner<f64>) {
        let (nx, np) = (self.grid.nx, self.grid.np);
        let fwd = planner.plan_fft_forward(nx);
        let inv = planner.plan_fft_inverse(nx);
        let dxx = self.coeffs.effective_d_xx();
        let m = self.coeffs.test_mass;
        let two_pi_over_l = 2.0 * std::f64::consts::PI / self.grid.length_x;
        let mut columns: Vec<Vec<Complex64>> = (0..np)
            .map(|j| {
                (0..nx)
                    .map(|i| Complex64::new(values[i * np + j], 0.0))
                    .collect()
            })
            .collect();
        columns.par_iter_mut().enumerate().for_each(|(j, col)| {
            let p = self.grid.p(j);
            fwd.process(col);
            for (idx, z) in col.iter_mut().enumerate() {
                // signed wavenumber; taking the real part below averages the
                // two signs of the Nyquist mode
                let k = if 2 * idx < nx {
                    idx as f64
                } else {
                    idx as f64 - nx as f64
                } * two_pi_over_l;
                let phase = Complex64::new(-dxx * k * k * tau, -k * p / m * tau);
                *z *= phase.exp();
            }
            inv.process(col);
        });
        let scale = 1.0 / nx as f64;
        for (j, col) in columns.iter().enumerate() {
            for i in 0..nx {
                values[i * np + j] = col[i].re * scale;
            }
        }
    }

    /// Advance `steps` steps. Returns the new field and the moments after each
    /// `stride` steps (and at the start and the end).
    pub fn run(
        &self,
        f0: &WignerField,
        steps: usize,
        stride: usize,
    ) -> Result<(WignerField, Vec<FpMoments>)> {
        if f0.grid != self.grid || f0.mode != self.mode {
            return Err(Error::Domain(
                "field grid or mode differs from the solver's".into(),
            ));
        }
        let m = self.coeffs.test_mass;
        let mut f = f0.clone();
        let mass0 = f.mass();
        let snapshot = |f: &WignerField, step: usize| FpMoments {
            t: step as f64 * self.dt,
            p: f.mean_momentum(),
            energy: f.mean_energy(m),
            mass: f.mass(),
        };
        let mut out = vec![snapshot(&f, 0)];
        let mut planner = FftPlanner::new();
        let np = self.grid.np;
        for step in 1..=steps {
            let full = self.mode == WignerMode::FullPhaseSpace;
            if full {
                self.stream(&mut f.values, 0.5 * self.dt, &mut planner);
            }
            f.values
                .par_chunks_mut(np)
                .for_each(|row| self.collision_step(row));
            if full {
                self.stream(&mut f.values, 0.5 * self.dt, &mut planner);
            }
            let mass = f.mass();
            if !mass.is_finite() || (mass - mass0).abs() > MASS_BOUND {
                return Err(Error::Invariant {
                    invariant: format!("mass drift ≤ {MASS_BOUND:e}"),
                    step,
                    detail: format!("mass {mass} (initial {mass0})"),
                });
            }
            if (stride > 0 && step % stride == 0) || step == steps {
                out.push(snapshot(&f, step));
            }
        }
        Ok((f, out))
    }
}

/// Advance `f0` to time `t` (a whole number of steps `dt`).
pub fn evolve_wigner(
    coeffs: &FPCoefficients,
    f0: &WignerField,
    t: f64,
    dt: f64,
) -> Result<WignerField> {
    let solver = FpSolver::new(*coeffs, f0.grid, f0.mode, dt)?;
    let steps = whole_steps(t, dt)?;
    Ok(solver.run(f0, steps, 0)?.0)
}

pub(crate) fn whole_steps(t: f64, dt: f64) -> Result<usize> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::param(
            "t",
            format!("must be finite and >= 0, got {t}"),
        ));
    }
    let steps = (t / dt).round();
    if (steps * dt - t).abs() > 1e-9 * t.max(dt) {
        return Err(Error::param(
            "t",
            format!("must be a whole number of steps dt = {dt}"),
        ));
    }
    Ok(steps as usize)
}
