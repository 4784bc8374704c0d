//! Dense complex-matrix helpers shared by the lattice and ladder-operator code.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

pub type CMatrix = DMatrix<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// max |m − m†|
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Replace `m` by (m + m†)/2 and return the largest entry change.
pub fn hermitize(m: &mut CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            worst = worst.max((avg - m[(i, j)]).norm());
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
    worst
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Eigenvalues of a Hermitian matrix in ascending order.
///
/// The QR iteration occasionally produces NaN on exactly sparse inputs
/// (for instance the rank-one Choi matrix of the identity channel); in that
/// case the spectrum is recomputed for m + s·I and shifted back.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut h = m.clone();
    hermitize(&mut h);
    let mut ev = raw_eigenvalues(&h);
    if ev.iter().any(|x| x.is_nan()) {
        let n = h.nrows();
        let shift = max_abs(&h).max(f64::MIN_POSITIVE) * 0.5 * (n as f64).sqrt();
        for s in [shift, -shift, 3.0 * shift] {
            let mut shifted = h.clone();
            for i in 0..n {
                shifted[(i, i)] += c(s);
            }
            ev = raw_eigenvalues(&shifted)
                .into_iter()
                .map(|x| x - s)
                .collect();
            if !ev.iter().any(|x| x.is_nan()) {
                break;
            }
        }
    }
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

fn raw_eigenvalues(h: &CMatrix) -> Vec<f64> {
    h.clone().symmetric_eigenvalues().iter().copied().collect()
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// Trace norm Σ|λ| of a Hermitian matrix.
pub fn trace_norm(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).iter().map(|x| x.abs()).sum()
}

pub fn is_diagonal(m: &CMatrix) -> bool {
    let n = m.nrows();
    (0..n).all(|j| (0..n).all(|i| i == j || m[(i, j)] == Complex64::new(0.0, 0.0)))
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Hermitian matrix with independent standard-normal-ish entries.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let mut m = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    hermitize(&mut m);
    m
}

/// Random positive unit-trace matrix G G† / Tr(G G†).
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let mut rho = &g * g.adjoint();
    let tr = trace(&rho).re;
    rho /= c(tr);
    hermitize(&mut rho);
    rho
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_density_is_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_density(&mut rng, 6);
        assert!(hermiticity_defect(&rho) == 0.0);
        assert!((trace(&rho).re - 1.0).abs() < 1e-14);
        assert!(min_eigenvalue(&rho) > -1e-14);
        assert!((trace_norm(&rho) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_one_projector_spectrum() {
        let n = 8;
        let m = CMatrix::from_fn(n * n, n * n, |r, k| {
            if r % (n + 1) == 0 && k % (n + 1) == 0 {
                c(1.0)
            } else {
                c(0.0)
            }
        });
        let ev = hermitian_eigenvalues(&m);
        assert!(ev.iter().all(|x| x.is_finite()));
        assert!((ev[n * n - 1] - n as f64).abs() < 1e-12);
        assert!(ev[..n * n - 1].iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn hermitize_reports_correction() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = c(1.0);
        let corr = hermitize(&mut m);
        assert_eq!(corr, 0.5);
        assert_eq!(hermiticity_defect(&m), 0.0);
    }
}
