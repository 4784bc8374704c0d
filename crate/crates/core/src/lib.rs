//! Test-particle dynamics in an ideal quantum gas.
//!
//! * [`gas_dsf`]: dynamic structure factors of ideal MB/Bose/Fermi gases.
//! * [`megrid`]: the collisional master equation on a momentum lattice.
//! * [`fp_brownian`]: Brownian-limit transport coefficients and Fokker-Planck dynamics.
//! * [`opalg`]: truncated ladder-operator algebra for the quantum Brownian generator.

pub mod error;
pub mod fp_brownian;
pub mod gas_dsf;
pub mod kernel;
pub mod linalg;
pub mod megrid;
pub mod opalg;
pub mod vec3;

pub use error::{Error, Result};
pub use gas_dsf::{DsfModel, GasSpec, Kinematics, Statistics};
pub use kernel::KernelSpec;

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
