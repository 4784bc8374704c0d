//! Dense superoperator and Choi-matrix positivity test.

use num_complex::Complex64;

use super::generator::Generator;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

/// Largest lattice handled by the dense routines.
pub const MAX_DENSE_STATES: usize = 16;

fn check_size(gen: &Generator) -> Result<usize> {
    let n = gen.dim();
    if n > MAX_DENSE_STATES {
        return Err(Error::Resource(format!(
            "{n} lattice states; dense superoperator work is limited to {MAX_DENSE_STATES}"
        )));
    }
    Ok(n)
}

/// Matrix of L acting on column-stacked vec(ρ), vec(ρ)[i + n·j] = ρ_ij.
pub fn superoperator(gen: &Generator) -> Result<CMatrix> {
    let n = check_size(gen)?;
    let mut s = CMatrix::zeros(n * n, n * n);
    let mut basis = CMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            basis[(i, j)] = linalg::c(1.0);
            let image = gen.apply_unchecked(&basis);
            basis[(i, j)] = Complex64::new(0.0, 0.0);
            for (r, z) in image.iter().enumerate() {
                s[(r, i + n * j)] = *z;
            }
        }
    }
    Ok(s)
}

/// Spectral norm of the superoperator.
pub fn superoperator_norm(gen: &Generator) -> Result<f64> {
    let s = superoperator(gen)?;
    Ok(s.singular_values().iter().copied().fold(0.0, f64::max))
}

/// Choi matrix Σ_ij E_ij ⊗ Φ(E_ij) of the channel Φ = exp(dt·L).
pub fn choi_matrix(gen: &Generator, dt: f64) -> Result<CMatrix> {
    if !(dt.is_finite() && dt >= 0.0) {
        return Err(Error::param(
            "dt",
            format!("must be finite and >= 0, got {dt}"),
        ));
    }
    let n = check_size(gen)?;
    let generator = superoperator(gen)? * linalg::c(dt);
    // the Padé scaling step of `exp` is undefined for the zero matrix
    let phi = if linalg::max_abs(&generator) == 0.0 {
        CMatrix::identity(n * n, n * n)
    } else {
        generator.exp()
    };
    Ok(CMatrix::from_fn(n * n, n * n, |row, col| {
        let (i, k) = (row / n, row % n);
        let (j, l) = (col / n, col % n);
        phi[(k + n * l, i + n * j)]
    }))
}

/// Smallest eigenvalue of the Choi matrix of exp(dt·L). Non-negative (up to
/// rounding) exactly when the step map is completely positive.
pub fn choi_min_eigenvalue(gen: &Generator, dt: f64) -> Result<f64> {
    Ok(linalg::min_eigenvalue(&choi_matrix(gen, dt)?))
}
