//! Fourier trace of the two-body scattering amplitude, |t̃(q)|².

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Isotropic interaction kernel. Only the modulus of the momentum transfer enters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// Zero-range interaction, |t̃|² = t0².
    Contact { t0: f64 },
    /// |t̃(q)|² = t0² exp(−q²/2σ²).
    Gaussian { t0: f64, sigma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Contact { t0 } => check_amplitude(t0),
            KernelSpec::Gaussian { t0, sigma } => {
                check_amplitude(t0)?;
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(Error::param(
                        "sigma",
                        format!("must be finite and > 0, got {sigma}"),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn amplitude(&self) -> f64 {
        match *self {
            KernelSpec::Contact { t0 } | KernelSpec::Gaussian { t0, .. } => t0,
        }
    }

    /// |t̃(q)|² at momentum-transfer modulus `q`.
    pub fn weight(&self, q: f64) -> f64 {
        match *self {
            KernelSpec::Contact { t0 } => t0 * t0,
            KernelSpec::Gaussian { t0, sigma } => t0 * t0 * (-0.5 * (q / sigma).powi(2)).exp(),
        }
    }
}

fn check_amplitude(t0: f64) -> Result<()> {
    if !t0.is_finite() {
        return Err(Error::param("t0", format!("must be finite, got {t0}")));
    }
    Ok(())
}
