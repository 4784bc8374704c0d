//! Brownian limit: transport coefficients and Fokker–Planck dynamics.

pub mod coefficients;
pub mod kramers;
pub mod quadrature;
pub mod wigner;

pub use coefficients::{
    closed_form_moments, compute_coefficients, statistics_factor, FPCoefficients,
};
pub use kramers::{fit_decay_rate, kramers_moyal_check, KramersMoyalReport};
pub use quadrature::Quadrature;
pub use wigner::{
    evolve_wigner, stable_dt, FpMoments, FpSolver, PhaseGrid, WignerField, WignerMode, MASS_BOUND,
};
