//! Momentum-lattice form of the collisional generator
//!
//! ```text
//! L[ρ] = −(i/ħ)[p²/2M, ρ]
//!        + Σ_{q≠0} w(q) [ e^{iq·x/ħ} √S(q,p) ρ √S(q,p) e^{−iq·x/ħ} − ½{S(q,p), ρ} ]
//! ```
//!
//! with w(q) = (2π/ħ)(2πħ)³ n Δp^dim |t̃(q)|². In the momentum basis
//! e^{iq·x/ħ}|p⟩ = |p+q⟩, so each q is a jump operator that moves site j to
//! its shifted site with amplitude √(w S(q, p_j)).

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lattice::MomentumLattice;
use crate::error::{Error, Result};
use crate::gas_dsf::{
    dsf_unchecked, energy_transfer, evaluate_dsf, evaluate_dsf_brownian, DsfModel, GasSpec,
    Kinematics,
};
use crate::kernel::KernelSpec;
use crate::linalg::{self, CMatrix, I};
use crate::vec3::{norm, Vec3};

const NO_SOURCE: u32 = u32::MAX;

/// How the gain term pairs the structure factor across the two indices of ρ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factorization {
    /// √S(q,p) ρ_{pp'} √S(q,p'): manifestly of Lindblad form.
    #[default]
    Geometric,
    /// S(q, (ΔE_q(p) + ΔE_q(p'))/2) ρ_{pp'}: the unfactorized generator.
    ArithmeticMean,
}

/// Deliberate damage to the generator, for negative controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Corruption {
    /// Multiply the −½{S, ρ} term.
    ScaleAnticommutator { factor: f64 },
    /// Multiply the jump (gain) term.
    ScaleGain { factor: f64 },
    /// Multiply only the off-diagonal entries of the jump term, so the
    /// rate equation for populations is untouched.
    ScaleCoherentGain { factor: f64 },
}

/// Everything needed to assemble the lattice generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub lattice: MomentumLattice,
    pub gas: GasSpec,
    pub kernel: KernelSpec,
    pub model: DsfModel,
    /// Probe mass M.
    pub test_mass: f64,
    #[serde(default)]
    pub factorization: Factorization,
    /// Channels with w(q) below `weight_cutoff · max w` are dropped. Zero keeps
    /// every channel.
    #[serde(default)]
    pub weight_cutoff: f64,
    #[serde(default)]
    pub corruption: Option<Corruption>,
}

impl GeneratorSpec {
    pub fn new(
        lattice: MomentumLattice,
        gas: GasSpec,
        kernel: KernelSpec,
        model: DsfModel,
        test_mass: f64,
    ) -> Self {
        GeneratorSpec {
            lattice,
            gas,
            kernel,
            model,
            test_mass,
            factorization: Factorization::Geometric,
            weight_cutoff: 0.0,
            corruption: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice.validate().map_err(|e| e.in_block("lattice"))?;
        self.gas.validate().map_err(|e| e.in_block("gas"))?;
        self.kernel.validate().map_err(|e| e.in_block("kernel"))?;
        if !(self.test_mass.is_finite() && self.test_mass > 0.0) {
            return Err(Error::param(
                "test_mass",
                format!("must be finite and > 0, got {}", self.test_mass),
            ));
        }
        self.model
            .check_against(&self.gas)
            .map_err(|e| e.in_block("model"))?;
        if let DsfModel::BrownianLimitMb { test_mass } = self.model {
            if test_mass != self.test_mass {
                return Err(Error::param(
                    "model.test_mass",
                    format!("must equal test_mass = {}, got {test_mass}", self.test_mass),
                ));
            }
        }
        if !(self.weight_cutoff.is_finite() && (0.0..1.0).contains(&self.weight_cutoff)) {
            return Err(Error::param("weight_cutoff", "must lie in [0, 1)"));
        }
        Ok(())
    }

    /// (2π/ħ)(2πħ)³ n Δp^dim: converts the q-integral into the lattice sum.
    pub fn coupling(&self) -> f64 {
        let h = self.gas.hbar;
        2.0 * PI / h
            * (2.0 * PI * h).powi(3)
            * self.gas.n
            * self.lattice.dp.powi(self.lattice.dim as i32)
    }

    pub fn build(&self) -> Result<Generator> {
        Generator::new(self.clone())
    }
}

/// One jump operator, stored by destination site.
#[derive(Debug, Clone)]
struct Channel {
    q: Vec3,
    weight: f64,
    /// Source site feeding each destination, or `NO_SOURCE`.
    src: Vec<u32>,
    /// √(w S(q, p_src)) indexed by destination.
    amp: Vec<f64>,
    /// ΔE_q(p_src) indexed by destination.
    e_src: Vec<f64>,
}

/// Assembled, immutable generator. Cheap to share across threads.
#[derive(Debug, Clone)]
pub struct Generator {
    spec: GeneratorSpec,
    n: usize,
    momenta: Vec<Vec3>,
    energies: Vec<f64>,
    channels: Vec<Channel>,
    /// Γ_j = Σ_q w S(q, p_j) over the jumps available from site j.
    loss: Vec<f64>,
    gain_scale: f64,
    loss_scale: f64,
    coherence_scale: f64,
}

impl Generator {
    pub fn new(spec: GeneratorSpec) -> Result<Self> {
        spec.validate()?;
        let lattice = spec.lattice;
        let n = lattice.num_states();
        if n >= NO_SOURCE as usize {
            return Err(Error::Resource(format!("{n} lattice sites")));
        }
        let momenta: Vec<Vec3> = (0..n).map(|i| lattice.momentum(i)).collect();
        let energies: Vec<f64> = momenta
            .iter()
            .map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) / (2.0 * spec.test_mass))
            .collect();

        let coupling = spec.coupling();
        let shifts = lattice.shifts();
        let w_max = shifts
            .iter()
            .map(|s| coupling * spec.kernel.weight(norm(&s.q)))
            .fold(0.0, f64::max);

        let mut channels = Vec::new();
        let mut loss = vec![0.0; n];
        for shift in shifts {
            let weight = coupling * spec.kernel.weight(norm(&shift.q));
            if weight == 0.0 || weight < spec.weight_cutoff * w_max {
                continue;
            }
            let mut src = vec![NO_SOURCE; n];
            let mut amp = vec![0.0; n];
            let mut e_src = vec![0.0; n];
            for j in 0..n {
                let Some(dest) = lattice.target(j, &shift.k) else {
                    continue;
                };
                let rate = weight * structure_factor(&spec, &shift.q, &momenta[j])?;
                src[dest] = j as u32;
                amp[dest] = rate.sqrt();
                e_src[dest] = energy_transfer(spec.test_mass, &shift.q, &momenta[j]);
                loss[j] += rate;
            }
            channels.push(Channel {
                q: shift.q,
                weight,
                src,
                amp,
                e_src,
            });
        }

        let (gain_scale, loss_scale, coherence_scale) = match spec.corruption {
            None => (1.0, 1.0, 1.0),
            Some(Corruption::ScaleAnticommutator { factor }) => (1.0, factor, 1.0),
            Some(Corruption::ScaleGain { factor }) => (factor, 1.0, 1.0),
            Some(Corruption::ScaleCoherentGain { factor }) => (1.0, 1.0, factor),
        };
        Ok(Generator {
            spec,
            n,
            momenta,
            energies,
            channels,
            loss,
            gain_scale,
            loss_scale,
            coherence_scale,
        })
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    pub fn lattice(&self) -> &MomentumLattice {
        &self.spec.lattice
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn momenta(&self) -> &[Vec3] {
        &self.momenta
    }

    /// Kinetic energies p²/2M per site.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Total outgoing rate Γ_j per site.
    pub fn loss_rates(&self) -> &[f64] {
        &self.loss
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// W(q, p) = w(q) S(q, ΔE_q(p)) for an arbitrary (q, p) pair.
    pub fn transition_rate(&self, q: &Vec3, p: &Vec3) -> Result<f64> {
        let w = self.spec.coupling() * self.spec.kernel.weight(norm(q));
        Ok(w * structure_factor(&self.spec, q, p)?)
    }

    /// Normalized canonical populations ∝ e^{−βp²/2M}.
    pub fn canonical_populations(&self) -> Vec<f64> {
        let beta = self.spec.gas.beta;
        let e_min = self.energies.iter().copied().fold(f64::INFINITY, f64::min);
        let raw: Vec<f64> = self
            .energies
            .iter()
            .map(|e| (-beta * (e - e_min)).exp())
            .collect();
        let z: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / z).collect()
    }

    /// L[ρ] for a Hermitian ρ on this lattice.
    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        if rho.nrows() != self.n || rho.ncols() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: rho.nrows(),
            });
        }
        let defect = linalg::hermiticity_defect(rho);
        if defect > 1e-10 * linalg::max_abs(rho).max(1.0) {
            return Err(Error::Domain(format!(
                "input is not Hermitian (defect {defect:e})"
            )));
        }
        Ok(self.apply_unchecked(rho))
    }

    /// L[X] for any complex matrix of the right size; the map is linear so
    /// this is also how the superoperator is tabulated.
    pub(crate) fn apply_unchecked(&self, rho: &CMatrix) -> CMatrix {
        let n = self.n;
        let hbar = self.spec.gas.hbar;
        let rm: Vec<Complex64> = rho.transpose().as_slice().to_vec();
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let e_i = self.energies[i];
            let g_i = self.loss[i];
            for (j, slot) in row.iter_mut().enumerate() {
                let coeff = -I * ((e_i - self.energies[j]) / hbar)
                    - 0.5 * self.loss_scale * (g_i + self.loss[j]);
                *slot = coeff * rm[i * n + j];
            }
            for ch in &self.channels {
                let si = ch.src[i];
                if si == NO_SOURCE {
                    continue;
                }
                let src_row = &rm[si as usize * n..(si as usize + 1) * n];
                match self.spec.factorization {
                    Factorization::Geometric => {
                        let scale = self.gain_scale * self.coherence_scale;
                        let a_i = ch.amp[i];
                        for (j, slot) in row.iter_mut().enumerate() {
                            let sj = ch.src[j];
                            if sj != NO_SOURCE && j != i {
                                *slot += (scale * (a_i * ch.amp[j])) * src_row[sj as usize];
                            }
                        }
                        row[i] += (self.gain_scale * ch.amp[i] * ch.amp[i]) * src_row[si as usize];
                    }
                    Factorization::ArithmeticMean => {
                        for (j, slot) in row.iter_mut().enumerate() {
                            let sj = ch.src[j];
                            if sj != NO_SOURCE {
                                let coeff = self.gain_scale
                                    * self.pair_scale(i, j)
                                    * self.mean_rate(ch, i, j);
                                *slot += coeff * src_row[sj as usize];
                            }
                        }
                    }
                }
            }
        });
        CMatrix::from_row_slice(n, n, &out)
    }

    fn pair_scale(&self, i: usize, j: usize) -> f64 {
        if i == j {
            1.0
        } else {
            self.coherence_scale
        }
    }

    /// w S(q, (ΔE(src i) + ΔE(src j))/2).
    fn mean_rate(&self, ch: &Channel, i: usize, j: usize) -> f64 {
        if i == j {
            return ch.amp[i] * ch.amp[i];
        }
        let e = 0.5 * (ch.e_src[i] + ch.e_src[j]);
        ch.weight * dsf_unchecked(&self.spec.gas, norm(&ch.q), e, self.spec.model)
    }

    /// Hilbert-Schmidt adjoint L†[X] (Heisenberg picture).
    pub fn apply_adjoint(&self, x: &CMatrix) -> CMatrix {
        let n = self.n;
        let hbar = self.spec.gas.hbar;
        let mut out = CMatrix::from_fn(n, n, |i, j| {
            let coeff = I * ((self.energies[i] - self.energies[j]) / hbar)
                - 0.5 * self.loss_scale * (self.loss[i] + self.loss[j]);
            coeff * x[(i, j)]
        });
        for ch in &self.channels {
            for j in 0..n {
                let sj = ch.src[j];
                if sj == NO_SOURCE {
                    continue;
                }
                for i in 0..n {
                    let si = ch.src[i];
                    if si == NO_SOURCE {
                        continue;
                    }
                    let coeff = match self.spec.factorization {
                        Factorization::Geometric => ch.amp[i] * ch.amp[j],
                        Factorization::ArithmeticMean => self.mean_rate(ch, i, j),
                    };
                    out[(si as usize, sj as usize)] +=
                        (self.gain_scale * self.pair_scale(i, j) * coeff) * x[(i, j)];
                }
            }
        }
        out
    }

    /// Rate equation for the diagonal: the generator maps diagonal matrices
    /// to diagonal matrices, and on them it reduces to
    /// ḟ_i = Σ_q W(q, p_i − q) f(p_i − q) − Γ_i f_i.
    pub fn apply_populations(&self, f: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = f
            .iter()
            .zip(&self.loss)
            .map(|(x, g)| -self.loss_scale * g * x)
            .collect();
        for ch in &self.channels {
            for (i, slot) in out.iter_mut().enumerate() {
                let si = ch.src[i];
                if si != NO_SOURCE {
                    *slot += self.gain_scale * ch.amp[i] * ch.amp[i] * f[si as usize];
                }
            }
        }
        out
    }

    fn apply_populations_adjoint(&self, g: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = g
            .iter()
            .zip(&self.loss)
            .map(|(x, l)| -self.loss_scale * l * x)
            .collect();
        for ch in &self.channels {
            for (i, gi) in g.iter().enumerate() {
                let si = ch.src[i];
                if si != NO_SOURCE {
                    out[si as usize] += self.gain_scale * ch.amp[i] * ch.amp[i] * gi;
                }
            }
        }
        out
    }

    /// Power-iteration estimate of the operator 2-norm of L on matrices
    /// (Frobenius inner product).
    pub fn norm_estimate(&self, iterations: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = linalg::random_hermitian(&mut rng, self.n);
        let mut estimate = 0.0;
        for _ in 0..iterations {
            let fro = x.norm();
            if fro == 0.0 {
                return 0.0;
            }
            x /= linalg::c(fro);
            let y = self.apply_unchecked(&x);
            estimate = y.norm();
            x = self.apply_adjoint(&y);
        }
        estimate
    }

    /// Same estimate restricted to diagonal states.
    pub fn population_norm_estimate(&self, iterations: usize, seed: u64) -> f64 {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x: Vec<f64> = (0..self.n).map(|_| rng.random_range(0.5..1.5)).collect();
        let mut estimate = 0.0;
        for _ in 0..iterations {
            let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nrm == 0.0 {
                return 0.0;
            }
            x.iter_mut().for_each(|v| *v /= nrm);
            let y = self.apply_populations(&x);
            estimate = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            x = self.apply_populations_adjoint(&y);
        }
        estimate
    }
}

/// S(q, ΔE_q(p)) under the configured model.
fn structure_factor(spec: &GeneratorSpec, q: &Vec3, p: &Vec3) -> Result<f64> {
    match spec.model {
        DsfModel::BrownianLimitMb { test_mass } => {
            evaluate_dsf_brownian(&spec.gas, test_mass, q, p)
        }
        model => {
            let e = energy_transfer(spec.test_mass, q, p);
            evaluate_dsf(&spec.gas, Kinematics::new(norm(q), e)?, model)
        }
    }
}
