//! Side-by-side comparison of the lattice master equation and the
//! Fokker–Planck moment laws.

use serde::Serialize;

use super::coefficients::{closed_form_moments, FPCoefficients};
use crate::error::{Error, Result};
use crate::megrid::{moment_trajectory, DensityMatrix, GeneratorSpec};
use crate::vec3::dot;

/// Least-squares slope of −ln|v − asymptote| against t, restricted to the
/// leading samples that stay above e^{−e_folds} of the initial deviation.
pub fn fit_decay_rate(times: &[f64], values: &[f64], asymptote: f64, e_folds: f64) -> Result<f64> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            got: values.len(),
        });
    }
    let dev0 = values.first().map(|v| (v - asymptote).abs()).unwrap_or(0.0);
    if dev0 == 0.0 {
        return Ok(0.0);
    }
    let floor = dev0 * (-e_folds).exp();
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .map(|(t, v)| (*t, (v - asymptote).abs()))
        .take_while(|(_, d)| *d >= floor && *d > 0.0)
        .map(|(t, d)| (t, d.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Domain(format!(
            "only {} samples inside the fit window",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let (st, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mt, my) = (st / n, sy / n);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |a, p| {
        (a.0 + (p.0 - mt) * (p.1 - my), a.1 + (p.0 - mt).powi(2))
    });
    Ok(-sxy / sxx)
}

fn relative(measured: f64, predicted: f64) -> f64 {
    if predicted == 0.0 {
        measured.abs()
    } else {
        (measured - predicted).abs() / predicted.abs()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KramersMoyalReport {
    pub times: Vec<f64>,
    /// Master-equation ⟨p⟩ projected on the initial drift direction.
    pub me_momentum: Vec<f64>,
    pub me_energy: Vec<f64>,
    pub fp_momentum: Vec<f64>,
    pub fp_energy: Vec<f64>,
    /// max_t |⟨p⟩_ME − ⟨p⟩_FP| / |⟨p⟩(0)|
    pub momentum_discrepancy: f64,
    /// max_t |⟨E⟩_ME − ⟨E⟩_FP| / |⟨E⟩(0) − d/2β|
    pub energy_discrepancy: f64,
    pub momentum_rate_fit: f64,
    pub momentum_rate_predicted: f64,
    pub energy_rate_fit: f64,
    pub energy_rate_predicted: f64,
    pub momentum_rate_discrepancy: f64,
    pub energy_rate_discrepancy: f64,
}

/// Evolve `rho0` under the lattice generator on `samples + 1` equally spaced
/// times in [0, t] and compare with the closed-form moment laws of `coeffs`.
/// Rates are fitted over three e-folds.
pub fn kramers_moyal_check(
    spec: &GeneratorSpec,
    coeffs: &FPCoefficients,
    rho0: &DensityMatrix,
    t: f64,
    dt: f64,
    samples: usize,
) -> Result<KramersMoyalReport> {
    coeffs.validate()?;
    if coeffs.dim != spec.lattice.dim {
        return Err(Error::DimensionMismatch {
            expected: spec.lattice.dim,
            got: coeffs.dim,
        });
    }
    if samples < 3 {
        return Err(Error::param("samples", "must be >= 3"));
    }
    let steps = (t / dt).round() as usize;
    if !steps.is_multiple_of(samples) {
        return Err(Error::param(
            "samples",
            format!("must divide the {steps} steps"),
        ));
    }
    let gen = spec.build()?;
    let stride = steps / samples;
    let grid: Vec<f64> = (0..=samples).map(|k| (k * stride) as f64 * dt).collect();
    let traj = moment_trajectory(&gen, rho0, &grid, dt)?;

    let p0 = traj[0].p;
    let p0_norm = dot(&p0, &p0).sqrt();
    let axis = if p0_norm > 0.0 {
        [p0[0] / p0_norm, p0[1] / p0_norm, p0[2] / p0_norm]
    } else {
        [1.0, 0.0, 0.0]
    };
    let e0 = traj[0].energy;
    let e_inf = coeffs.dim as f64 / (2.0 * coeffs.beta);
    let me_momentum: Vec<f64> = traj.iter().map(|m| dot(&m.p, &axis)).collect();
    let me_energy: Vec<f64> = traj.iter().map(|m| m.energy).collect();
    let (fp_momentum, fp_energy): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .map(|&s| {
            let (p, e) = closed_form_moments(coeffs, &[p0_norm], e0, s);
            (p[0], e)
        })
        .unzip();

    let scale_p = p0_norm.max(f64::MIN_POSITIVE);
    let scale_e = (e0 - e_inf).abs().max(f64::MIN_POSITIVE);
    let momentum_discrepancy = me_momentum
        .iter()
        .zip(&fp_momentum)
        .map(|(a, b)| (a - b).abs() / scale_p)
        .fold(0.0, f64::max);
    let energy_discrepancy = me_energy
        .iter()
        .zip(&fp_energy)
        .map(|(a, b)| (a - b).abs() / scale_e)
        .fold(0.0, f64::max);

    let g = coeffs.effective_gamma();
    let momentum_rate_fit = fit_decay_rate(&grid, &me_momentum, 0.0, 3.0)?;
    let energy_rate_fit = fit_decay_rate(&grid, &me_energy, e_inf, 3.0)?;
    Ok(KramersMoyalReport {
        times: grid,
        me_momentum,
        me_energy,
        fp_momentum,
        fp_energy,
        momentum_discrepancy,
        energy_discrepancy,
        momentum_rate_fit,
        momentum_rate_predicted: 2.0 * g,
        energy_rate_fit,
        energy_rate_predicted: 4.0 * g,
        momentum_rate_discrepancy: relative(momentum_rate_fit, 2.0 * g),
        energy_rate_discrepancy: relative(energy_rate_fit, 4.0 * g),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_exponential() {
        let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let v: Vec<f64> = t.iter().map(|s| 2.0 + 3.0 * (-0.7 * s).exp()).collect();
        let r = fit_decay_rate(&t, &v, 2.0, 3.0).unwrap();
        assert!((r - 0.7).abs() < 1e-12);
    }

    #[test]
    fn fit_of_constant_is_zero() {
        let t = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(fit_decay_rate(&t, &[1.0; 4], 1.0, 3.0).unwrap(), 0.0);
    }
}
