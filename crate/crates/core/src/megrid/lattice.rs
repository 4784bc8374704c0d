use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::Vec3;

fn default_wrap() -> bool {
    true
}

/// Cubic momentum lattice for the probe, symmetric about p = 0.
///
/// Sites sit at half-integer multiples of `dp` (there is no p = 0 site for an
/// even count), so every momentum transfer is an integer multiple of `dp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentumLattice {
    pub dim: usize,
    /// Sites per axis (even).
    pub sites: usize,
    pub dp: f64,
    /// Periodic momentum shifts. When false, jumps leaving the lattice are
    /// removed from both the gain and the loss term.
    #[serde(default = "default_wrap")]
    pub wrap: bool,
}

/// Integer shift on the lattice and the momentum it transfers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shift {
    pub k: [i64; 3],
    pub q: Vec3,
}

impl MomentumLattice {
    pub fn new(dim: usize, sites: usize, dp: f64, wrap: bool) -> Result<Self> {
        let lattice = MomentumLattice {
            dim,
            sites,
            dp,
            wrap,
        };
        lattice.validate()?;
        Ok(lattice)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::param(
                "dim",
                format!("must be 1, 2 or 3, got {}", self.dim),
            ));
        }
        if self.sites < 2 || !self.sites.is_multiple_of(2) {
            return Err(Error::param(
                "sites",
                format!("must be even and >= 2, got {}", self.sites),
            ));
        }
        if !(self.dp.is_finite() && self.dp > 0.0) {
            return Err(Error::param(
                "dp",
                format!("must be finite and > 0, got {}", self.dp),
            ));
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.sites.pow(self.dim as u32)
    }

    pub fn axis_momentum(&self, i: usize) -> f64 {
        (i as f64 - 0.5 * (self.sites as f64 - 1.0)) * self.dp
    }

    /// Largest momentum component on the lattice.
    pub fn p_max(&self) -> f64 {
        self.axis_momentum(self.sites - 1)
    }

    pub fn coords(&self, mut index: usize) -> [usize; 3] {
        let mut c = [0; 3];
        for slot in c.iter_mut().take(self.dim) {
            *slot = index % self.sites;
            index /= self.sites;
        }
        c
    }

    pub fn index(&self, coords: [usize; 3]) -> usize {
        let mut idx = 0;
        for a in (0..self.dim).rev() {
            idx = idx * self.sites + coords[a];
        }
        idx
    }

    pub fn momentum(&self, index: usize) -> Vec3 {
        let c = self.coords(index);
        let mut p = [0.0; 3];
        for a in 0..self.dim {
            p[a] = self.axis_momentum(c[a]);
        }
        p
    }

    /// Site nearest to a momentum (components beyond `dim` ignored).
    pub fn nearest_site(&self, p: &[f64]) -> usize {
        let mut c = [0; 3];
        for a in 0..self.dim {
            let x = p.get(a).copied().unwrap_or(0.0) / self.dp + 0.5 * (self.sites as f64 - 1.0);
            c[a] = x.round().clamp(0.0, (self.sites - 1) as f64) as usize;
        }
        self.index(c)
    }

    /// All nonzero shifts: k ∈ [−n/2, n/2] per axis with wrap (the two ends
    /// are the same permutation but carry different q), k ∈ [−(n−1), n−1]
    /// without.
    pub fn shifts(&self) -> Vec<Shift> {
        let n = self.sites as i64;
        let (lo, hi) = if self.wrap {
            (-n / 2, n / 2)
        } else {
            (-(n - 1), n - 1)
        };
        let range = |a: usize| if a < self.dim { lo..=hi } else { 0..=0 };
        let mut out = Vec::new();
        for kz in range(2) {
            for ky in range(1) {
                for kx in range(0) {
                    if kx == 0 && ky == 0 && kz == 0 {
                        continue;
                    }
                    let k = [kx, ky, kz];
                    let q = [
                        kx as f64 * self.dp,
                        ky as f64 * self.dp,
                        kz as f64 * self.dp,
                    ];
                    out.push(Shift { k, q });
                }
            }
        }
        out
    }

    /// Destination of `index` under shift `k`, or `None` if it leaves a
    /// non-periodic lattice.
    pub fn target(&self, index: usize, k: &[i64; 3]) -> Option<usize> {
        let n = self.sites as i64;
        let mut c = self.coords(index);
        for a in 0..self.dim {
            let x = c[a] as i64 + k[a];
            let x = if self.wrap {
                x.rem_euclid(n)
            } else if (0..n).contains(&x) {
                x
            } else {
                return None;
            };
            c[a] = x as usize;
        }
        Some(self.index(c))
    }
}
