use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::quadrature::Quadrature;
use crate::error::{Error, Result};
use crate::gas_dsf::{GasSpec, Statistics};
use crate::kernel::KernelSpec;

/// Brownian-limit transport coefficients.
///
/// `d_pp`, `d_xx` and `gamma` are the Maxwell–Boltzmann values; the
/// quantum-statistics factor is kept separate and applied jointly by the
/// `effective_*` accessors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FPCoefficients {
    pub d_pp: f64,
    pub d_xx: f64,
    pub gamma: f64,
    pub stat_factor: f64,
    pub beta: f64,
    pub test_mass: f64,
    pub hbar: f64,
    /// Spatial dimension the coefficients refer to.
    pub dim: usize,
}

impl FPCoefficients {
    /// Consistent coefficients from a momentum-diffusion constant.
    pub fn from_d_pp(
        d_pp: f64,
        stat_factor: f64,
        beta: f64,
        test_mass: f64,
        hbar: f64,
        dim: usize,
    ) -> Self {
        let r = beta * hbar / (4.0 * test_mass);
        FPCoefficients {
            d_pp,
            d_xx: r * r * d_pp,
            gamma: beta / (2.0 * test_mass) * d_pp,
            stat_factor,
            beta,
            test_mass,
            hbar,
            dim,
        }
    }

    pub fn effective_d_pp(&self) -> f64 {
        self.stat_factor * self.d_pp
    }

    pub fn effective_d_xx(&self) -> f64 {
        self.stat_factor * self.d_xx
    }

    pub fn effective_gamma(&self) -> f64 {
        self.stat_factor * self.gamma
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("d_pp", self.d_pp),
            ("d_xx", self.d_xx),
            ("gamma", self.gamma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(
                    name,
                    format!("must be finite and >= 0, got {v}"),
                ));
            }
        }
        for (name, v) in [
            ("stat_factor", self.stat_factor),
            ("beta", self.beta),
            ("test_mass", self.test_mass),
            ("hbar", self.hbar),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(
                    name,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        if !(1..=3).contains(&self.dim) {
            return Err(Error::param(
                "dim",
                format!("must be 1, 2 or 3, got {}", self.dim),
            ));
        }
        Ok(())
    }
}

/// 1, 1/(1 − z) or 1/(1 + z).
pub fn statistics_factor(gas: &GasSpec) -> f64 {
    match gas.statistics {
        Statistics::MaxwellBoltzmann => 1.0,
        Statistics::Bose => 1.0 / (1.0 - gas.z),
        Statistics::Fermi => 1.0 / (1.0 + gas.z),
    }
}

/// Surface area of the unit sphere in `dim` dimensions (1, 2, 3).
fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    }
}

/// D_pp = z·2π²m²/(βħ) · (1/d) ∫ d^dq |t̃(q)|² |q| e^{−βq²/8m}, with D_xx and γ
/// fixed by D_xx = (βħ/4M)² D_pp and γ = (β/2M) D_pp.
pub fn compute_coefficients(
    gas: &GasSpec,
    test_mass: f64,
    kernel: &KernelSpec,
    dim: usize,
) -> Result<FPCoefficients> {
    gas.validate().map_err(|e| e.in_block("gas"))?;
    kernel.validate().map_err(|e| e.in_block("kernel"))?;
    if !(test_mass.is_finite() && test_mass > 0.0) {
        return Err(Error::param(
            "test_mass",
            format!("must be finite and > 0, got {test_mass}"),
        ));
    }
    if !(1..=3).contains(&dim) {
        return Err(Error::param("dim", format!("must be 1, 2 or 3, got {dim}")));
    }
    let (m, beta) = (gas.m, gas.beta);
    let thermal = (8.0 * m / beta).sqrt();
    let scale = match *kernel {
        KernelSpec::Gaussian { sigma, .. } => thermal.min(sigma),
        KernelSpec::Contact { .. } => thermal,
    };
    let radial = Quadrature::default().integrate_half_line(
        |q| kernel.weight(q) * q.powi(dim as i32) * (-beta * q * q / (8.0 * m)).exp(),
        scale,
    )?;
    let angular = sphere_area(dim) / dim as f64;
    let d_pp = gas.z * 2.0 * PI * PI * m * m / (beta * gas.hbar) * angular * radial;
    let coeffs =
        FPCoefficients::from_d_pp(d_pp, statistics_factor(gas), beta, test_mass, gas.hbar, dim);
    coeffs.validate()?;
    Ok(coeffs)
}

/// (⟨p⟩(t), ⟨E⟩(t)) from the moment equations dp/dt = −2γp and
/// dE/dt = −4γ(E − d/2β), using the effective friction.
pub fn closed_form_moments(
    coeffs: &FPCoefficients,
    p0: &[f64],
    e0: f64,
    t: f64,
) -> (Vec<f64>, f64) {
    let g = coeffs.effective_gamma();
    let decay = (-2.0 * g * t).exp();
    let e_inf = coeffs.dim as f64 / (2.0 * coeffs.beta);
    let p = p0.iter().map(|x| x * decay).collect();
    (p, e_inf + (e0 - e_inf) * (-4.0 * g * t).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gas(statistics: Statistics, z: f64) -> GasSpec {
        GasSpec::new(statistics, 1.0, 1.0, z, 1.0, 1.0).unwrap()
    }

    #[test]
    fn gaussian_kernel_closed_form_3d() {
        let k = KernelSpec::Gaussian {
            t0: 1.0,
            sigma: 1.0,
        };
        let c = compute_coefficients(&gas(Statistics::MaxwellBoltzmann, 1.0), 1.0, &k, 3).unwrap();
        let alpha: f64 = 0.625;
        let exact = 4.0 * PI.powi(3) / 3.0 / (alpha * alpha);
        assert!(
            (c.d_pp / exact - 1.0).abs() < 1e-10,
            "{} vs {exact}",
            c.d_pp
        );
        assert!((c.d_pp - 105.84).abs() < 0.01);
    }

    #[test]
    fn gaussian_kernel_closed_form_1d() {
        // (1/1)·2∫q e^{−αq²} = 1/α
        let k = KernelSpec::Gaussian {
            t0: 0.7,
            sigma: 0.3,
        };
        let g = gas(Statistics::MaxwellBoltzmann, 0.4);
        let c = compute_coefficients(&g, 5.0, &k, 1).unwrap();
        let alpha = 0.5 / 0.09 + 1.0 / 8.0;
        let exact = 0.4 * 2.0 * PI * PI * 0.49 / alpha;
        assert!((c.d_pp / exact - 1.0).abs() < 1e-10);
    }

    #[test]
    fn friction_over_diffusion() {
        let k = KernelSpec::Contact { t0: 2.0 };
        let c = compute_coefficients(&gas(Statistics::MaxwellBoltzmann, 0.3), 1.0, &k, 3).unwrap();
        assert_eq!(c.gamma / c.d_pp, 0.5);
    }

    #[test]
    fn moments_limits() {
        let c = FPCoefficients::from_d_pp(2.0, 1.0, 1.0, 1.0, 1.0, 3);
        let (p, e) = closed_form_moments(&c, &[1.0, -2.0, 0.5], 4.0, 0.0);
        assert_eq!((p, e), (vec![1.0, -2.0, 0.5], 4.0));
        let (p, e) = closed_form_moments(&c, &[1.0, 0.0, 0.0], 4.0, 1e4);
        assert_eq!(p[0], 0.0);
        assert!((e - 1.5).abs() < 1e-15);
        let half = std::f64::consts::LN_2 / (2.0 * c.gamma);
        let (p, _) = closed_form_moments(&c, &[1.0], 0.0, half);
        assert!((p[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let k = KernelSpec::Contact { t0: 1.0 };
        let g = gas(Statistics::MaxwellBoltzmann, 0.3);
        assert!(compute_coefficients(&g, 0.0, &k, 3).is_err());
        assert!(compute_coefficients(&g, 1.0, &k, 4).is_err());
    }
}
