use num_complex::Complex64;

use super::lattice::MomentumLattice;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::vec3::{norm2, sub, Vec3};

/// Probe density matrix in the momentum basis of a lattice.
///
/// Construction checks Hermiticity and unit trace to 1e-12 and a minimum
/// eigenvalue of at least −1e-10.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: CMatrix,
}

pub const HERMITICITY_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const POSITIVITY_TOL: f64 = 1e-10;

impl DensityMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                got: entries.ncols(),
            });
        }
        let defect = linalg::hermiticity_defect(&entries);
        if defect > HERMITICITY_TOL {
            return Err(Error::Domain(format!(
                "density matrix not Hermitian (defect {defect:e})"
            )));
        }
        let tr = linalg::trace(&entries);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::Domain(format!(
                "density matrix trace is {tr}, expected 1"
            )));
        }
        let min_ev = if linalg::is_diagonal(&entries) {
            entries
                .diagonal()
                .iter()
                .map(|z| z.re)
                .fold(f64::INFINITY, f64::min)
        } else {
            linalg::min_eigenvalue(&entries)
        };
        if min_ev < -POSITIVITY_TOL {
            return Err(Error::Domain(format!(
                "density matrix has eigenvalue {min_ev:e}"
            )));
        }
        Ok(DensityMatrix { entries })
    }

    /// Diagonal state from site populations, which are normalized here.
    pub fn from_populations(populations: &[f64]) -> Result<Self> {
        if populations.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(Error::Domain(
                "populations must be finite and non-negative".into(),
            ));
        }
        let total: f64 = populations.iter().sum();
        if total <= 0.0 {
            return Err(Error::Domain("populations sum to zero".into()));
        }
        let n = populations.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, x) in populations.iter().enumerate() {
            m[(i, i)] = linalg::c(x / total);
        }
        Self::new(m)
    }

    /// Diagonal Gaussian populations ∝ exp(−|p − p0|²/2w²).
    pub fn diagonal_gaussian(lattice: &MomentumLattice, p0: &[f64], width: f64) -> Result<Self> {
        lattice.validate()?;
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::param(
                "width",
                format!("must be finite and > 0, got {width}"),
            ));
        }
        let center = embed_checked(lattice, p0)?;
        let pops: Vec<f64> = (0..lattice.num_states())
            .map(|i| (-norm2(&sub(&lattice.momentum(i), &center)) / (2.0 * width * width)).exp())
            .collect();
        Self::from_populations(&pops)
    }

    /// |p⟩⟨p| at the lattice site nearest to `p0`.
    pub fn pure_momentum(lattice: &MomentumLattice, p0: &[f64]) -> Result<Self> {
        lattice.validate()?;
        embed_checked(lattice, p0)?;
        let n = lattice.num_states();
        let mut m = CMatrix::zeros(n, n);
        let i = lattice.nearest_site(p0);
        m[(i, i)] = linalg::c(1.0);
        Self::new(m)
    }

    /// Canonical state ∝ exp(−βp²/2M).
    pub fn canonical(lattice: &MomentumLattice, beta: f64, test_mass: f64) -> Result<Self> {
        lattice.validate()?;
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::param("beta", "must be finite and > 0"));
        }
        if !(test_mass.is_finite() && test_mass > 0.0) {
            return Err(Error::param("test_mass", "must be finite and > 0"));
        }
        Self::diagonal_gaussian(lattice, &[0.0; 3][..lattice.dim], (test_mass / beta).sqrt())
    }

    pub(crate) fn from_trusted(entries: CMatrix) -> Self {
        DensityMatrix { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }

    pub fn populations(&self) -> Vec<f64> {
        self.entries.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        linalg::is_diagonal(&self.entries)
    }

    pub fn trace(&self) -> Complex64 {
        linalg::trace(&self.entries)
    }

    /// ½‖ρ − σ‖₁
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        0.5 * linalg::trace_norm(&(&self.entries - &other.entries))
    }

    /// ⟨p⟩ on the given lattice.
    pub fn mean_momentum(&self, lattice: &MomentumLattice) -> Vec3 {
        let mut out = [0.0; 3];
        for (i, z) in self.entries.diagonal().iter().enumerate() {
            let p = lattice.momentum(i);
            for a in 0..3 {
                out[a] += z.re * p[a];
            }
        }
        out
    }

    /// ⟨p²/2M⟩ on the given lattice.
    pub fn mean_energy(&self, lattice: &MomentumLattice, test_mass: f64) -> f64 {
        self.entries
            .diagonal()
            .iter()
            .enumerate()
            .map(|(i, z)| z.re * norm2(&lattice.momentum(i)) / (2.0 * test_mass))
            .sum()
    }
}

fn embed_checked(lattice: &MomentumLattice, p0: &[f64]) -> Result<Vec3> {
    if p0.len() != lattice.dim {
        return Err(Error::DimensionMismatch {
            expected: lattice.dim,
            got: p0.len(),
        });
    }
    if p0.iter().any(|x| !x.is_finite()) {
        return Err(Error::param("p0", "must be finite"));
    }
    Ok(crate::vec3::embed(p0))
}
