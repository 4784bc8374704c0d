//! Adaptive Gauss–Kronrod (7/15) quadrature.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Integral estimate and error bound on one interval.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let pair = f(c - x) + f(c + x);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            max_intervals: 2000,
        }
    }
}

impl Quadrature {
    /// ∫_a^b f by global adaptive bisection of the worst interval.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<f64> {
        let (v, e) = gk15(&f, a, b);
        let mut parts = vec![(a, b, v, e)];
        loop {
            let total: f64 = parts.iter().map(|p| p.2).sum();
            let err: f64 = parts.iter().map(|p| p.3).sum();
            if !total.is_finite() {
                return Err(Error::Quadrature("integrand is not finite".into()));
            }
            if err <= self.abs_tol.max(self.rel_tol * total.abs()) {
                return Ok(total);
            }
            if parts.len() >= self.max_intervals {
                return Err(Error::Quadrature(format!(
                    "error estimate {err:e} above tolerance after {} intervals",
                    parts.len()
                )));
            }
            let worst = parts
                .iter()
                .enumerate()
                .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
                .map(|(i, _)| i)
                .unwrap_or(0);
            let (lo, hi, _, _) = parts.swap_remove(worst);
            let mid = 0.5 * (lo + hi);
            let (v1, e1) = gk15(&f, lo, mid);
            let (v2, e2) = gk15(&f, mid, hi);
            parts.push((lo, mid, v1, e1));
            parts.push((mid, hi, v2, e2));
        }
    }

    /// ∫_0^∞ f via q = s·u/(1 − u), u ∈ [0, 1). `scale` should be the width
    /// over which f varies.
    pub fn integrate_half_line<F: Fn(f64) -> f64>(&self, f: F, scale: f64) -> Result<f64> {
        self.integrate(
            |u| {
                if u >= 1.0 {
                    return 0.0;
                }
                let q = scale * u / (1.0 - u);
                let jac = scale / ((1.0 - u) * (1.0 - u));
                let v = f(q) * jac;
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            },
            0.0,
            1.0,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = Quadrature::default()
            .integrate(|x| x.powi(5) - 2.0 * x, 0.0, 2.0)
            .unwrap();
        assert!((v - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn gaussian_moments_on_half_line() {
        let q = Quadrature::default();
        let a: f64 = 0.625;
        let v = q
            .integrate_half_line(|x| x.powi(3) * (-a * x * x).exp(), 1.0)
            .unwrap();
        assert!((v / (0.5 / (a * a)) - 1.0).abs() < 1e-12);
        let v = q.integrate_half_line(|x| (-x * x).exp(), 1.0).unwrap();
        assert!((v / (0.5 * std::f64::consts::PI.sqrt()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_integrable_reports() {
        let q = Quadrature {
            max_intervals: 50,
            ..Default::default()
        };
        assert!(matches!(
            q.integrate_half_line(|_| 1.0, 1.0),
            Err(Error::Quadrature(_))
        ));
    }
}
