//! Collisional master equation for a probe on a discrete momentum lattice.

pub mod choi;
pub mod density;
pub mod evolve;
pub mod generator;
pub mod lattice;

pub use choi::{choi_matrix, choi_min_eigenvalue, superoperator, superoperator_norm};
pub use density::DensityMatrix;
pub use evolve::{evolve, moment_trajectory, Evolution, EvolveOptions, Moments, MonitorSummary};
pub use generator::{Corruption, Factorization, Generator, GeneratorSpec};
pub use lattice::MomentumLattice;

use crate::error::Result;
use crate::linalg::CMatrix;

/// dρ/dt for the lattice generator described by `spec`.
pub fn apply_generator(spec: &GeneratorSpec, rho: &DensityMatrix) -> Result<CMatrix> {
    spec.build()?.apply(rho.matrix())
}

/// ‖L[ρ_c]‖₁ for the canonical populations, divided by the total jump rate
/// Σ_j Γ_j ρ_c,j so that the result is a relative residual.
pub fn stationarity_residual(gen: &Generator) -> (f64, f64) {
    let w = gen.canonical_populations();
    let out = gen.apply_populations(&w);
    let residual: f64 = out.iter().map(|x| x.abs()).sum();
    let scale: f64 = gen.loss_rates().iter().zip(&w).map(|(g, x)| g * x).sum();
    (residual, scale)
}
