//! Dynamic structure factor S(q, E) of ideal Maxwell-Boltzmann, Bose and
//! Fermi gases, plus the discrete mode-sum it descends from and the
//! double-differential cross-section built on it.
//!
//! Conventions: `E` is the energy gained by the probe, `q` the momentum it
//! gains. Every closed form carries the common prefactor
//!
//! ```text
//! P(q) = 2π m² / (n β q (2πħ)³)
//! ```
//!
//! and detailed balance reads S(q, E) = e^{−βE} S(q, −E).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::vec3::{dot, norm, norm2, sub, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistics {
    MaxwellBoltzmann,
    Bose,
    Fermi,
}

impl Statistics {
    /// +1 for Bose, −1 for Fermi, 0 for Maxwell-Boltzmann: the sign in 1 ± ⟨n⟩.
    pub fn sign(self) -> f64 {
        match self {
            Statistics::MaxwellBoltzmann => 0.0,
            Statistics::Bose => 1.0,
            Statistics::Fermi => -1.0,
        }
    }
}

fn default_hbar() -> f64 {
    1.0
}

/// Thermodynamic state of the host gas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasSpec {
    pub statistics: Statistics,
    /// Mass of a gas particle.
    pub m: f64,
    /// Inverse temperature.
    pub beta: f64,
    /// Fugacity e^{βμ}.
    pub z: f64,
    /// Number density.
    pub n: f64,
    #[serde(default = "default_hbar")]
    pub hbar: f64,
}

impl GasSpec {
    pub fn new(
        statistics: Statistics,
        m: f64,
        beta: f64,
        z: f64,
        n: f64,
        hbar: f64,
    ) -> Result<Self> {
        let gas = GasSpec {
            statistics,
            m,
            beta,
            z,
            n,
            hbar,
        };
        gas.validate()?;
        Ok(gas)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("m", self.m),
            ("beta", self.beta),
            ("n", self.n),
            ("hbar", self.hbar),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(
                    field,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        if !(self.z.is_finite() && self.z >= 0.0) {
            return Err(Error::param(
                "z",
                format!("fugacity must be finite and >= 0, got {}", self.z),
            ));
        }
        if self.statistics == Statistics::Bose && self.z >= 1.0 {
            return Err(Error::param(
                "z",
                format!("Bose statistics requires 0 <= z < 1, got {}", self.z),
            ));
        }
        Ok(())
    }

    /// Same gas with different statistics (used for classical-limit comparisons).
    pub fn with_statistics(self, statistics: Statistics) -> Self {
        GasSpec { statistics, ..self }
    }

    /// Ideal-gas mean occupation of a single-particle mode with momentum² = `p2`.
    pub fn occupation(&self, p2: f64) -> f64 {
        let x = self.z * (-self.beta * p2 / (2.0 * self.m)).exp();
        match self.statistics {
            Statistics::MaxwellBoltzmann => x,
            Statistics::Bose => x / (1.0 - x),
            Statistics::Fermi => x / (1.0 + x),
        }
    }

    /// P(q) = 2π m² / (n β q (2πħ)³).
    pub fn prefactor(&self, q: f64) -> f64 {
        2.0 * PI * self.m * self.m / (self.n * self.beta * q * (2.0 * PI * self.hbar).powi(3))
    }
}

/// Momentum-transfer modulus and energy transfer for one collision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub q: f64,
    pub e: f64,
}

impl Kinematics {
    pub fn new(q: f64, e: f64) -> Result<Self> {
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::Domain(format!(
                "momentum transfer must be > 0, got q = {q}"
            )));
        }
        if !e.is_finite() {
            return Err(Error::Domain(format!(
                "energy transfer must be finite, got E = {e}"
            )));
        }
        Ok(Kinematics { q, e })
    }
}

/// Which closed form of S(q, E) to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum DsfModel {
    MaxwellBoltzmann,
    BoseLog,
    FermiLog,
    BoseArth,
    FermiArth,
    /// Heavy-probe limit of the Maxwell-Boltzmann form; exactly factorizing.
    BrownianLimitMb {
        test_mass: f64,
    },
}

impl DsfModel {
    pub fn name(&self) -> &'static str {
        match self {
            DsfModel::MaxwellBoltzmann => "mb",
            DsfModel::BoseLog => "bose_log",
            DsfModel::FermiLog => "fermi_log",
            DsfModel::BoseArth => "bose_arth",
            DsfModel::FermiArth => "fermi_arth",
            DsfModel::BrownianLimitMb { .. } => "brownian_limit_mb",
        }
    }

    pub fn statistics(&self) -> Statistics {
        match self {
            DsfModel::MaxwellBoltzmann | DsfModel::BrownianLimitMb { .. } => {
                Statistics::MaxwellBoltzmann
            }
            DsfModel::BoseLog | DsfModel::BoseArth => Statistics::Bose,
            DsfModel::FermiLog | DsfModel::FermiArth => Statistics::Fermi,
        }
    }

    /// The log form matching a gas's statistics.
    pub fn for_statistics(statistics: Statistics) -> Self {
        match statistics {
            Statistics::MaxwellBoltzmann => DsfModel::MaxwellBoltzmann,
            Statistics::Bose => DsfModel::BoseLog,
            Statistics::Fermi => DsfModel::FermiLog,
        }
    }

    pub fn check_against(&self, gas: &GasSpec) -> Result<()> {
        if self.statistics() != gas.statistics {
            return Err(Error::Domain(format!(
                "model `{}` requires {:?} statistics, gas has {:?}",
                self.name(),
                self.statistics(),
                gas.statistics
            )));
        }
        if let DsfModel::BrownianLimitMb { test_mass } = *self {
            if !(test_mass.is_finite() && test_mass > 0.0) {
                return Err(Error::param(
                    "test_mass",
                    format!("must be finite and > 0, got {test_mass}"),
                ));
            }
        }
        Ok(())
    }
}

/// Exponents A± = βm (E ± q²/2m)² / (2q²) shared by all forms.
#[inline]
fn gaussian_exponents(gas: &GasSpec, q: f64, e: f64) -> (f64, f64) {
    let recoil = q * q / (2.0 * gas.m);
    let c = gas.beta * gas.m / (2.0 * q * q);
    (c * (e + recoil).powi(2), c * (e - recoil).powi(2))
}

/// wb − wa where wa = z e^{−A+}, wb = z e^{−A−} = wa e^{βE}; accurate near E = 0.
#[inline]
fn occupation_difference(wa: f64, wb: f64, beta_e: f64) -> f64 {
    if beta_e.abs() < 1.0 {
        -wb * (-beta_e).exp_m1()
    } else {
        wb - wa
    }
}

/// ln(1 + y) / y, continuous through y = 0.
fn log1p_ratio(y: f64) -> f64 {
    if y.abs() < 1e-5 {
        1.0 - y * (0.5 - y * (1.0 / 3.0 - 0.25 * y))
    } else {
        y.ln_1p() / y
    }
}

/// artanh(x) / x, continuous through x = 0.
fn atanh_ratio(x: f64) -> f64 {
    if x.abs() < 1e-5 {
        let x2 = x * x;
        1.0 + x2 * (1.0 / 3.0 + 0.2 * x2)
    } else {
        x.atanh() / x
    }
}

fn dsf_mb(gas: &GasSpec, q: f64, e: f64) -> f64 {
    let (a_plus, _) = gaussian_exponents(gas, q, e);
    gas.prefactor(q) * gas.z * (-a_plus).exp()
}

/// Log form:  S = ∓P/(1 − e^{βE}) · ln[(1 ∓ z e^{−A+}) / (1 ∓ z e^{−A−})].
///
/// Rewritten as S = P · wa/(1 − s·wb) · ln(1+y)/y with
/// y = s(wb − wa)/(1 − s·wb), which removes the pole at E = 0 analytically
/// (the E → 0 limit is P·u/(1 − s·u), u = z e^{−βq²/8m}) and never forms e^{βE}.
fn dsf_log(gas: &GasSpec, q: f64, e: f64, s: f64) -> f64 {
    let (a_plus, a_minus) = gaussian_exponents(gas, q, e);
    let wa = gas.z * (-a_plus).exp();
    let wb = gas.z * (-a_minus).exp();
    let denom = 1.0 - s * wb;
    let y = s * occupation_difference(wa, wb, gas.beta * e) / denom;
    gas.prefactor(q) * wa / denom * log1p_ratio(y)
}

/// Arth form:  S = ±P e^{−βE/2}/sinh(βE/2) · artanh[±u sinh(βE/2) / (1 ∓ u cosh(βE/2))],
/// u = z e^{−βq²/8m} e^{−βmE²/2q²}.
///
/// The products u·e^{±βE/2}, u·sinh and u·cosh are assembled from z e^{−A±}
/// so that no hyperbolic function of βE is ever formed.
fn dsf_arth(gas: &GasSpec, q: f64, e: f64, s: f64) -> Result<f64> {
    let (a_plus, a_minus) = gaussian_exponents(gas, q, e);
    let wa = gas.z * (-a_plus).exp(); // u e^{−βE/2}
    let wb = gas.z * (-a_minus).exp(); // u e^{+βE/2}
    let u_cosh = 0.5 * (wa + wb);
    let u_sinh = 0.5 * occupation_difference(wa, wb, gas.beta * e);
    let denom = 1.0 - s * u_cosh;
    let x = s * u_sinh / denom;
    if !(x.abs() < 1.0) || denom <= 0.0 {
        return Err(Error::Domain(format!("arth argument {x} outside (−1, 1)")));
    }
    Ok(gas.prefactor(q) * wa / denom * atanh_ratio(x))
}

/// Heavy-probe form at scalar energy transfer:
/// S∞ = P z e^{−βq²/8m} e^{−βE/2}.
fn dsf_brownian_energy(gas: &GasSpec, q: f64, e: f64) -> f64 {
    let log_s =
        gas.prefactor(q).ln() + gas.z.ln() - gas.beta * q * q / (8.0 * gas.m) - 0.5 * gas.beta * e;
    log_s.exp()
}

/// S(q, E) for already-validated inputs. A domain failure of the arth form
/// yields NaN, which downstream invariant monitors report.
pub(crate) fn dsf_unchecked(gas: &GasSpec, q: f64, e: f64, model: DsfModel) -> f64 {
    match model {
        DsfModel::MaxwellBoltzmann => dsf_mb(gas, q, e),
        DsfModel::BoseLog => dsf_log(gas, q, e, 1.0),
        DsfModel::FermiLog => dsf_log(gas, q, e, -1.0),
        DsfModel::BoseArth => dsf_arth(gas, q, e, 1.0).unwrap_or(f64::NAN),
        DsfModel::FermiArth => dsf_arth(gas, q, e, -1.0).unwrap_or(f64::NAN),
        DsfModel::BrownianLimitMb { .. } => dsf_brownian_energy(gas, q, e),
    }
}

/// Evaluate S(q, E) in the requested closed form.
pub fn evaluate_dsf(gas: &GasSpec, kin: Kinematics, model: DsfModel) -> Result<f64> {
    gas.validate()?;
    model.check_against(gas)?;
    let Kinematics { q, e } = Kinematics::new(kin.q, kin.e)?;
    let s = match model {
        DsfModel::MaxwellBoltzmann => dsf_mb(gas, q, e),
        DsfModel::BoseLog => dsf_log(gas, q, e, 1.0),
        DsfModel::FermiLog => dsf_log(gas, q, e, -1.0),
        DsfModel::BoseArth => dsf_arth(gas, q, e, 1.0)?,
        DsfModel::FermiArth => dsf_arth(gas, q, e, -1.0)?,
        DsfModel::BrownianLimitMb { .. } => dsf_brownian_energy(gas, q, e),
    };
    debug_assert!(!s.is_nan());
    Ok(s)
}

fn check_brownian_inputs(gas: &GasSpec, test_mass: f64, q: &Vec3) -> Result<f64> {
    gas.validate()?;
    if gas.statistics != Statistics::MaxwellBoltzmann {
        return Err(Error::Domain(
            "heavy-probe form requires Maxwell-Boltzmann statistics".into(),
        ));
    }
    if !(test_mass.is_finite() && test_mass > 0.0) {
        return Err(Error::param(
            "test_mass",
            format!("must be finite and > 0, got {test_mass}"),
        ));
    }
    let qn = norm(q);
    if !(qn > 0.0) || !qn.is_finite() {
        return Err(Error::Domain(format!(
            "momentum transfer must be nonzero, got |q| = {qn}"
        )));
    }
    Ok(qn)
}

/// Heavy-probe structure factor as a function of the probe momentum `p`:
///
/// S∞(q, p) = P z e^{−β(1+2α)q²/8m} e^{−β q·p/2M},   α = m/M.
pub fn evaluate_dsf_brownian(gas: &GasSpec, test_mass: f64, q: &Vec3, p: &Vec3) -> Result<f64> {
    let qn = check_brownian_inputs(gas, test_mass, q)?;
    let alpha = gas.m / test_mass;
    let log_s = gas.prefactor(qn).ln() + gas.z.ln()
        - gas.beta * (1.0 + 2.0 * alpha) * qn * qn / (8.0 * gas.m)
        - gas.beta * dot(q, p) / (2.0 * test_mass);
    Ok(log_s.exp())
}

/// Same as [`evaluate_dsf_brownian`] with the recoil correction 2α dropped from
/// the Gaussian exponent.
pub fn evaluate_dsf_brownian_leading(
    gas: &GasSpec,
    test_mass: f64,
    q: &Vec3,
    p: &Vec3,
) -> Result<f64> {
    let qn = check_brownian_inputs(gas, test_mass, q)?;
    let log_s = gas.prefactor(qn).ln() + gas.z.ln()
        - gas.beta * qn * qn / (8.0 * gas.m)
        - gas.beta * dot(q, p) / (2.0 * test_mass);
    Ok(log_s.exp())
}

/// Energy gained by a probe of mass `test_mass` and momentum `p` absorbing `q`:
/// ΔE_q(p) = q²/2M + q·p/M.
#[inline]
pub fn energy_transfer(test_mass: f64, q: &Vec3, p: &Vec3) -> f64 {
    (norm2(q) + 2.0 * dot(q, p)) / (2.0 * test_mass)
}

/// Cubic lattice of gas modes, `n_per_axis` sites per axis at spacing `dp`,
/// centred so that the lattice is symmetric about p = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeGrid {
    pub n_per_axis: usize,
    pub dp: f64,
}

impl ModeGrid {
    pub fn momentum(&self, i: usize) -> f64 {
        (i as f64 - 0.5 * (self.n_per_axis as f64 - 1.0)) * self.dp
    }

    /// Quantization volume V = (2πħ/Δp)³.
    pub fn volume(&self, hbar: f64) -> f64 {
        (2.0 * PI * hbar / self.dp).powi(3)
    }
}

/// Spectral weight binned over an energy partition.
#[derive(Debug, Clone, PartialEq)]
pub struct DsfHistogram {
    pub edges: Vec<f64>,
    /// Integrated weight ∫_bin S dE per bin.
    pub weights: Vec<f64>,
}

impl DsfHistogram {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Bin-averaged S, i.e. weight / bin width.
    pub fn averages(&self) -> Vec<f64> {
        self.edges
            .windows(2)
            .zip(&self.weights)
            .map(|(w, x)| x / (w[1] - w[0]))
            .collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Brute-force mode sum for the ideal gas:
///
/// S(q, E) = (1/N) Σ_μ δ(E − ε_μ) ⟨n_μ⟩ (1 ± ⟨n_{μ−q}⟩),
///
/// where a gas particle scattered from p_μ to p_μ − q hands the probe
/// ε_μ = (p_μ² − (p_μ − q)²)/2m. N = nV with V the box volume implied by the
/// grid spacing. The forward (q = 0) term is never included.
pub fn dsf_discrete_oracle(
    gas: &GasSpec,
    grid: ModeGrid,
    q: &Vec3,
    energy_edges: &[f64],
) -> Result<DsfHistogram> {
    gas.validate()?;
    if grid.n_per_axis == 0 || !(grid.dp > 0.0) {
        return Err(Error::param("grid", "needs at least one site and dp > 0"));
    }
    if energy_edges.len() < 2 || energy_edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param(
            "energy_edges",
            "need at least two strictly increasing edges",
        ));
    }
    for (axis, &c) in q.iter().enumerate() {
        let k = c / grid.dp;
        if (k - k.round()).abs() > 1e-9 {
            return Err(Error::Domain(format!(
                "q[{axis}] = {c} is not a multiple of the grid spacing {}",
                grid.dp
            )));
        }
    }
    if norm2(q) == 0.0 {
        return Err(Error::Domain("forward term q = 0 is excluded".into()));
    }

    let sign = gas.statistics.sign();
    let inv_n_total = 1.0 / (gas.n * grid.volume(gas.hbar));
    let n = grid.n_per_axis;
    let lo = energy_edges[0];
    let hi = energy_edges[energy_edges.len() - 1];
    let mut weights = vec![0.0; energy_edges.len() - 1];

    let axis: Vec<f64> = (0..n).map(|i| grid.momentum(i)).collect();
    for &px in &axis {
        for &py in &axis {
            for &pz in &axis {
                let p = [px, py, pz];
                let occ = gas.occupation(norm2(&p));
                if occ == 0.0 {
                    continue;
                }
                let p_out = sub(&p, q);
                let block = 1.0 + sign * gas.occupation(norm2(&p_out));
                let e = (norm2(&p) - norm2(&p_out)) / (2.0 * gas.m);
                if e < lo || e >= hi {
                    continue;
                }
                let bin = energy_edges.partition_point(|&edge| edge <= e) - 1;
                weights[bin] += occ * block * inv_n_total;
            }
        }
    }
    Ok(DsfHistogram {
        edges: energy_edges.to_vec(),
        weights,
    })
}

/// Double-differential cross-section per target particle,
///
/// d²σ/dΩ dE = (2πħ)⁶ (M/2πħ²)² (p'/p) |t̃(q)|² S(q, E),
///
/// for a probe of mass `test_mass` scattered from `p_in` to `p_out`. The gas
/// statistics select the log form (or the MB form).
pub fn cross_section(
    gas: &GasSpec,
    kernel: &KernelSpec,
    test_mass: f64,
    p_in: &Vec3,
    p_out: &Vec3,
) -> Result<f64> {
    kernel.validate()?;
    if !(test_mass.is_finite() && test_mass > 0.0) {
        return Err(Error::param(
            "test_mass",
            format!("must be finite and > 0, got {test_mass}"),
        ));
    }
    let p = norm(p_in);
    if p == 0.0 {
        return Err(Error::Domain("incident momentum must be nonzero".into()));
    }
    let q_vec = sub(p_out, p_in);
    let q = norm(&q_vec);
    let p_prime = norm(p_out);
    let e = (p_prime * p_prime - p * p) / (2.0 * test_mass);
    let s = evaluate_dsf(
        gas,
        Kinematics::new(q, e)?,
        DsfModel::for_statistics(gas.statistics),
    )?;
    let h = gas.hbar;
    let pre = (2.0 * PI * h).powi(6) * (test_mass / (2.0 * PI * h * h)).powi(2);
    Ok(pre * (p_prime / p) * kernel.weight(q) * s)
}
