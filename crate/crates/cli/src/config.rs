//! Per-command JSON configuration documents.

use std::path::PathBuf;

use qbrown_core::fp_brownian::{PhaseGrid, WignerMode};
use qbrown_core::megrid::{DensityMatrix, GeneratorSpec, MomentumLattice};
use qbrown_core::{DsfModel, Error, GasSpec, KernelSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

fn invalid(field: &str, reason: impl Into<String>) -> CliError {
    CliError::from(Error::InvalidParameter {
        field: field.into(),
        reason: reason.into(),
    })
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite and > 0, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite and >= 0, got {v}")))
    }
}

/// Evenly spaced values, both ends included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Axis {
    fn validate(&self, name: &str) -> Result<(), CliError> {
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(invalid(&format!("{name}.min"), "bounds must be finite"));
        }
        if self.points == 0 {
            return Err(invalid(&format!("{name}.points"), "must be >= 1"));
        }
        if self.max < self.min {
            return Err(invalid(
                &format!("{name}.max"),
                format!("must be >= min = {}", self.min),
            ));
        }
        if self.points == 1 && self.max != self.min {
            return Err(invalid(
                &format!("{name}.points"),
                "a range needs at least 2 points",
            ));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| self.min + i as f64 * step)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DsfScanConfig {
    pub gas: GasSpec,
    /// Closed forms to tabulate; defaults to the log form of the gas statistics.
    #[serde(default)]
    pub models: Vec<DsfModel>,
    pub q: Axis,
    pub energy: Axis,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl DsfScanConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.gas
            .validate()
            .map_err(|e| CliError::from(e.in_block("gas")))?;
        self.q.validate("q")?;
        self.energy.validate("energy")?;
        if self.q.min <= 0.0 {
            return Err(invalid(
                "q.min",
                format!("momentum transfer must be > 0, got {}", self.q.min),
            ));
        }
        for (i, m) in self.models.iter().enumerate() {
            m.check_against(&self.gas)
                .map_err(|e| invalid(&format!("models[{i}]"), e.to_string()))?;
        }
        Ok(())
    }

    pub fn models(&self) -> Vec<DsfModel> {
        if self.models.is_empty() {
            vec![DsfModel::for_statistics(self.gas.statistics)]
        } else {
            self.models.clone()
        }
    }
}

/// Initial lattice state for `evolve-me`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LatticeState {
    /// Normalized e^{−βp²/2M} populations.
    Canonical,
    /// Diagonal Gaussian populations centred on `p0`.
    Gaussian { p0: Vec<f64>, width: f64 },
    /// Pure momentum eigenstate at the site nearest `p0`.
    Pure { p0: Vec<f64> },
    /// Equal-weight coherent superposition of the sites nearest `p0` and `p1`.
    Superposition { p0: Vec<f64>, p1: Vec<f64> },
}

impl LatticeState {
    pub fn build(
        &self,
        lattice: &MomentumLattice,
        beta: f64,
        test_mass: f64,
    ) -> Result<DensityMatrix, CliError> {
        let check = |name: &str, p: &[f64]| {
            if p.len() != lattice.dim {
                Err(invalid(
                    &format!("initial.{name}"),
                    format!("needs {} components, got {}", lattice.dim, p.len()),
                ))
            } else {
                Ok(())
            }
        };
        let block = |e: Error| CliError::from(e.in_block("initial"));
        match self {
            LatticeState::Canonical => {
                DensityMatrix::canonical(lattice, beta, test_mass).map_err(block)
            }
            LatticeState::Gaussian { p0, width } => {
                check("p0", p0)?;
                DensityMatrix::diagonal_gaussian(lattice, p0, *width).map_err(block)
            }
            LatticeState::Pure { p0 } => {
                check("p0", p0)?;
                DensityMatrix::pure_momentum(lattice, p0).map_err(block)
            }
            LatticeState::Superposition { p0, p1 } => {
                check("p0", p0)?;
                check("p1", p1)?;
                let a = lattice.nearest_site(p0);
                let b = lattice.nearest_site(p1);
                if a == b {
                    return Err(invalid(
                        "initial.p1",
                        "lands on the same lattice site as p0",
                    ));
                }
                let n = lattice.num_states();
                let mut m = qbrown_core::linalg::CMatrix::zeros(n, n);
                for i in [a, b] {
                    for j in [a, b] {
                        m[(i, j)] = qbrown_core::linalg::c(0.5);
                    }
                }
                DensityMatrix::new(m).map_err(block)
            }
        }
    }
}

fn default_dt_fraction() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveMeConfig {
    pub generator: GeneratorSpec,
    pub initial: LatticeState,
    pub t: f64,
    /// Time step. When absent, dt = dt_fraction/‖L‖ rounded down to a whole number of steps.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_dt_fraction")]
    pub dt_fraction: f64,
    /// Record moments (and states) every this many steps; 0 records only the ends.
    #[serde(default)]
    pub checkpoint_stride: usize,
    #[serde(default = "yes")]
    pub write_states: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn yes() -> bool {
    true
}

impl EvolveMeConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.generator
            .validate()
            .map_err(|e| CliError::from(e.in_block("generator")))?;
        non_negative("t", self.t)?;
        if let Some(dt) = self.dt {
            positive("dt", dt)?;
        }
        if !(self.dt_fraction > 0.0 && self.dt_fraction <= 0.1) {
            return Err(invalid(
                "dt_fraction",
                format!("must lie in (0, 0.1], got {}", self.dt_fraction),
            ));
        }
        Ok(())
    }
}

/// Initial Wigner field for `evolve-fp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldState {
    Canonical,
    /// Momentum Gaussian, uniform in x.
    Gaussian {
        p0: f64,
        width: f64,
    },
    /// Gaussian in both x and p.
    Packet {
        x0: f64,
        x_width: f64,
        p0: f64,
        p_width: f64,
    },
}

fn momentum_only() -> WignerMode {
    WignerMode::MomentumOnly
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveFpConfig {
    pub gas: GasSpec,
    pub kernel: KernelSpec,
    pub test_mass: f64,
    pub grid: PhaseGrid,
    #[serde(default = "momentum_only")]
    pub mode: WignerMode,
    pub initial: FieldState,
    pub t: f64,
    /// Time step. When absent, dt_fraction times the largest stable step.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "half")]
    pub dt_fraction: f64,
    /// Moments every this many steps; 0 records only the ends.
    #[serde(default)]
    pub moment_stride: usize,
    /// Field snapshots every this many steps; 0 writes only the ends.
    #[serde(default)]
    pub snapshot_stride: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl EvolveFpConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.gas
            .validate()
            .map_err(|e| CliError::from(e.in_block("gas")))?;
        self.kernel
            .validate()
            .map_err(|e| CliError::from(e.in_block("kernel")))?;
        positive("test_mass", self.test_mass)?;
        self.grid.validate(self.mode)?;
        non_negative("t", self.t)?;
        if let Some(dt) = self.dt {
            positive("dt", dt)?;
        }
        if !(self.dt_fraction > 0.0 && self.dt_fraction <= 1.0) {
            return Err(invalid(
                "dt_fraction",
                format!("must lie in (0, 1], got {}", self.dt_fraction),
            ));
        }
        match self.initial {
            FieldState::Canonical => Ok(()),
            FieldState::Gaussian { width, .. } => positive("initial.width", width),
            FieldState::Packet {
                x_width, p_width, ..
            } => {
                positive("initial.x_width", x_width)?;
                positive("initial.p_width", p_width)
            }
        }
    }
}

fn three() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffsConfig {
    pub gas: GasSpec,
    pub kernel: KernelSpec,
    pub test_mass: f64,
    #[serde(default = "three")]
    pub dim: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl CoeffsConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.gas
            .validate()
            .map_err(|e| CliError::from(e.in_block("gas")))?;
        self.kernel
            .validate()
            .map_err(|e| CliError::from(e.in_block("kernel")))?;
        positive("test_mass", self.test_mass)?;
        if !(1..=3).contains(&self.dim) {
            return Err(invalid(
                "dim",
                format!("must be 1, 2 or 3, got {}", self.dim),
            ));
        }
        Ok(())
    }
}

fn choi_fraction() -> f64 {
    0.01
}

fn choi_tolerance() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChoiConfig {
    pub generator: GeneratorSpec,
    /// Step of the channel exp(dt·L). When absent, dt_fraction/‖L‖ (spectral norm).
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "choi_fraction")]
    pub dt_fraction: f64,
    /// The map counts as completely positive when the minimum eigenvalue is ≥ −tolerance.
    #[serde(default = "choi_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl ChoiConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.generator
            .validate()
            .map_err(|e| CliError::from(e.in_block("generator")))?;
        if let Some(dt) = self.dt {
            non_negative("dt", dt)?;
        }
        positive("dt_fraction", self.dt_fraction)?;
        non_negative("tolerance", self.tolerance)
    }
}

/// Module suites available to `verify`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Module {
    GasDsf,
    Megrid,
    FpBrownian,
    Opalg,
}

impl Module {
    pub const ALL: [Module; 4] = [
        Module::GasDsf,
        Module::Megrid,
        Module::FpBrownian,
        Module::Opalg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Module::GasDsf => "gas_dsf",
            Module::Megrid => "megrid",
            Module::FpBrownian => "fp_brownian",
            Module::Opalg => "opalg",
        }
    }
}

fn all_modules() -> Vec<Module> {
    Module::ALL.to_vec()
}

fn default_samples() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "all_modules")]
    pub modules: Vec<Module>,
    /// Random samples per property check.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Run the Choi check on a deliberately corrupted generator.
    #[serde(default)]
    pub corrupted_control: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.modules.is_empty() {
            return Err(invalid("modules", "selection must not be empty"));
        }
        if self.samples == 0 {
            return Err(invalid("samples", "must be >= 1"));
        }
        Ok(())
    }
}
