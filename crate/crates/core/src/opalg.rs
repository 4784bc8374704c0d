//! Truncated ladder-operator algebra for the quantum Brownian generator.
//!
//! Position and momentum are represented in a number basis of size N,
//!
//! ```text
//! X = λ(a + a†)/(2√2),   P = i(√2ħ/λ)(a† − a),   λ = √(ħ²β/M),
//! ```
//!
//! so that a = (√2/λ)(X + iλ²P/4ħ). Truncation spoils the algebra only in the
//! top levels, so identities are checked on an interior block.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fp_brownian::FPCoefficients;
use crate::linalg::{self, anticommutator, c, commutator, CMatrix, I};

pub const MIN_LEVELS: usize = 8;
pub const DEFAULT_MARGIN: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorLabel {
    X,
    P,
    A,
    ADag,
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedOperator {
    pub matrix: CMatrix,
    pub label: OperatorLabel,
    /// Top levels excluded from identity checks.
    pub interior_margin: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ladder {
    pub x: TruncatedOperator,
    pub p: TruncatedOperator,
    pub a: TruncatedOperator,
    pub adag: TruncatedOperator,
    pub lambda: f64,
    pub hbar: f64,
}

impl Ladder {
    pub fn levels(&self) -> usize {
        self.a.matrix.nrows()
    }
}

/// X, P, a, a† on `n` levels.
pub fn build_ladder(n: usize, beta: f64, test_mass: f64, hbar: f64) -> Result<Ladder> {
    if n < MIN_LEVELS {
        return Err(Error::param(
            "n",
            format!("must be >= {MIN_LEVELS}, got {n}"),
        ));
    }
    for (name, v) in [("beta", beta), ("test_mass", test_mass), ("hbar", hbar)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::param(
                name,
                format!("must be finite and > 0, got {v}"),
            ));
        }
    }
    let lambda = (hbar * hbar * beta / test_mass).sqrt();
    let mut a = CMatrix::zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = c((k as f64).sqrt());
    }
    let adag = a.adjoint();
    let x = (&a + &adag) * c(lambda / (2.0 * std::f64::consts::SQRT_2));
    let p = (&adag - &a) * (I * (std::f64::consts::SQRT_2 * hbar / lambda));
    let op = |matrix, label| TruncatedOperator {
        matrix,
        label,
        interior_margin: DEFAULT_MARGIN,
    };
    Ok(Ladder {
        x: op(x, OperatorLabel::X),
        p: op(p, OperatorLabel::P),
        a: op(a, OperatorLabel::A),
        adag: op(adag, OperatorLabel::ADag),
        lambda,
        hbar,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormKind {
    /// −(D_pp/ħ²)[X,[X,ρ]] − (D_xx/ħ²)[P,[P,ρ]] − (iγ/ħ)[X,{P,ρ}]
    DoubleCommutator,
    /// (D_pp λ²/ħ²)(aρa† − ½{a†a,ρ}) − (D_pp λ²/4ħ²)[a² − a†², ρ]
    ExplicitLindblad,
}

/// One of the two generator forms on `dims` Cartesian directions, each
/// truncated to `levels`. Uses the effective coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorForm {
    pub form: FormKind,
    pub coeffs: FPCoefficients,
    pub dims: usize,
    pub levels: usize,
    pub margin: usize,
}

impl GeneratorForm {
    pub fn new(form: FormKind, coeffs: FPCoefficients, dims: usize, levels: usize) -> Result<Self> {
        coeffs.validate()?;
        if !(1..=2).contains(&dims) {
            return Err(Error::param("dims", format!("must be 1 or 2, got {dims}")));
        }
        if levels < MIN_LEVELS {
            return Err(Error::param(
                "levels",
                format!("must be >= {MIN_LEVELS}, got {levels}"),
            ));
        }
        if dims == 2 && levels > 24 {
            return Err(Error::Resource(format!(
                "{levels} levels per direction in 2D; limit is 24"
            )));
        }
        Ok(GeneratorForm {
            form,
            coeffs,
            dims,
            levels,
            margin: DEFAULT_MARGIN,
        })
    }

    pub fn with_form(&self, form: FormKind) -> Self {
        GeneratorForm {
            form,
            ..self.clone()
        }
    }

    pub fn size(&self) -> usize {
        self.levels.pow(self.dims as u32)
    }

    /// Per-direction (X_i, P_i) on the tensor-product space.
    pub fn operators(&self) -> Result<Vec<(CMatrix, CMatrix)>> {
        let c = &self.coeffs;
        let ladder = build_ladder(self.levels, c.beta, c.test_mass, c.hbar)?;
        let (x, p) = (ladder.x.matrix, ladder.p.matrix);
        if self.dims == 1 {
            return Ok(vec![(x, p)]);
        }
        let id = CMatrix::identity(self.levels, self.levels);
        Ok(vec![
            (linalg::kron(&x, &id), linalg::kron(&p, &id)),
            (linalg::kron(&id, &x), linalg::kron(&id, &p)),
        ])
    }

    /// Indices of basis states with every direction below `levels − 2·margin`.
    pub fn interior(&self) -> Vec<usize> {
        let keep = self.levels.saturating_sub(2 * self.margin);
        (0..self.size())
            .filter(|&idx| {
                let mut rest = idx;
                (0..self.dims).all(|_| {
                    let level = rest % self.levels;
                    rest /= self.levels;
                    level < keep
                })
            })
            .collect()
    }

    fn check(&self, m: &CMatrix) -> Result<()> {
        if m.nrows() != self.size() || m.ncols() != self.size() {
            return Err(Error::DimensionMismatch {
                expected: self.size(),
                got: m.nrows(),
            });
        }
        Ok(())
    }
}

fn lambda(coeffs: &FPCoefficients) -> f64 {
    (coeffs.hbar * coeffs.hbar * coeffs.beta / coeffs.test_mass).sqrt()
}

fn lower(coeffs: &FPCoefficients, x: &CMatrix, p: &CMatrix) -> CMatrix {
    let l = lambda(coeffs);
    (x + p * (I * (l * l / (4.0 * coeffs.hbar)))) * c(std::f64::consts::SQRT_2 / l)
}

/// Dissipative action with explicitly supplied (X_i, P_i).
fn apply_with(
    form: FormKind,
    coeffs: &FPCoefficients,
    ops: &[(CMatrix, CMatrix)],
    rho: &CMatrix,
) -> CMatrix {
    let h = coeffs.hbar;
    let d = coeffs.effective_d_pp();
    let mut out = CMatrix::zeros(rho.nrows(), rho.ncols());
    for (x, p) in ops {
        match form {
            FormKind::DoubleCommutator => {
                out -= commutator(x, &commutator(x, rho)) * c(d / (h * h));
                out -= commutator(p, &commutator(p, rho)) * c(coeffs.effective_d_xx() / (h * h));
                out -=
                    commutator(x, &anticommutator(p, rho)) * (I * (coeffs.effective_gamma() / h));
            }
            FormKind::ExplicitLindblad => {
                let l2 = lambda(coeffs).powi(2);
                let a = lower(coeffs, x, p);
                let ad = a.adjoint();
                let ada = &ad * &a;
                let jump = &a * rho * &ad - anticommutator(&ada, rho) * c(0.5);
                out += jump * c(d * l2 / (h * h));
                let sq = &a * &a - &ad * &ad;
                out -= commutator(&sq, rho) * c(d * l2 / (4.0 * h * h));
            }
        }
    }
    out
}

/// Heisenberg-picture action with explicitly supplied (X_i, P_i).
fn adjoint_with(
    form: FormKind,
    coeffs: &FPCoefficients,
    ops: &[(CMatrix, CMatrix)],
    obs: &CMatrix,
) -> CMatrix {
    let h = coeffs.hbar;
    let d = coeffs.effective_d_pp();
    let mut out = CMatrix::zeros(obs.nrows(), obs.ncols());
    for (x, p) in ops {
        match form {
            FormKind::DoubleCommutator => {
                out -= commutator(x, &commutator(x, obs)) * c(d / (h * h));
                out -= commutator(p, &commutator(p, obs)) * c(coeffs.effective_d_xx() / (h * h));
                out +=
                    anticommutator(p, &commutator(x, obs)) * (I * (coeffs.effective_gamma() / h));
            }
            FormKind::ExplicitLindblad => {
                let l2 = lambda(coeffs).powi(2);
                let a = lower(coeffs, x, p);
                let ad = a.adjoint();
                let ada = &ad * &a;
                let jump = &ad * obs * &a - anticommutator(&ada, obs) * c(0.5);
                out += jump * c(d * l2 / (h * h));
                let sq = &a * &a - &ad * &ad;
                out += commutator(&sq, obs) * c(d * l2 / (4.0 * h * h));
            }
        }
    }
    out
}

/// Dissipative part L[ρ] (the free commutator is not included).
pub fn apply_form(form: &GeneratorForm, rho: &CMatrix) -> Result<CMatrix> {
    form.check(rho)?;
    if linalg::hermiticity_defect(rho) > 1e-12 * linalg::max_abs(rho).max(1.0) {
        return Err(Error::Domain("rho is not Hermitian".into()));
    }
    Ok(apply_with(form.form, &form.coeffs, &form.operators()?, rho))
}

/// Heisenberg-picture generator L′[A] with Tr(L′[A]ρ) = Tr(A L[ρ]).
pub fn adjoint_apply(form: &GeneratorForm, obs: &CMatrix) -> Result<CMatrix> {
    form.check(obs)?;
    if linalg::hermiticity_defect(obs) > 1e-12 * linalg::max_abs(obs).max(1.0) {
        return Err(Error::Domain("observable is not Hermitian".into()));
    }
    Ok(adjoint_with(
        form.form,
        &form.coeffs,
        &form.operators()?,
        obs,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    /// X_i → X_i + a in every direction.
    Translate { a: f64 },
    /// (X_1, X_2) and (P_1, P_2) rotated by θ.
    Rotate2D { theta: f64 },
}

fn transformed(ops: &[(CMatrix, CMatrix)], t: Transform) -> Result<Vec<(CMatrix, CMatrix)>> {
    match t {
        Transform::Translate { a } => Ok(ops
            .iter()
            .map(|(x, p)| {
                let shift = CMatrix::identity(x.nrows(), x.ncols()) * c(a);
                (x + shift, p.clone())
            })
            .collect()),
        Transform::Rotate2D { theta } => {
            if ops.len() != 2 {
                return Err(Error::param("transform", "rotation needs dims = 2"));
            }
            let (cs, sn) = (c(theta.cos()), c(theta.sin()));
            let rot = |u: &CMatrix, v: &CMatrix| (u * cs - v * sn, u * sn + v * cs);
            let (x1, x2) = rot(&ops[0].0, &ops[1].0);
            let (p1, p2) = rot(&ops[0].1, &ops[1].1);
            Ok(vec![(x1, p1), (x2, p2)])
        }
    }
}

fn restrict(m: &CMatrix, idx: &[usize]) -> CMatrix {
    CMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

/// Entries of `m` outside the interior block.
fn outside_max(m: &CMatrix, idx: &[usize]) -> f64 {
    let mut inside = vec![false; m.nrows()];
    idx.iter().for_each(|&i| inside[i] = true);
    let mut worst: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !(inside[i] && inside[j]) {
                worst = worst.max(m[(i, j)].norm());
            }
        }
    }
    worst
}

/// max over random Hermitian ρ of ‖L_T[ρ] − L[ρ]‖_max / ‖ρ‖_max.
pub fn covariance_check(
    form: &GeneratorForm,
    transform: Transform,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if let Transform::Rotate2D { .. } = transform {
        if form.dims != 2 {
            return Err(Error::param("transform", "rotation needs dims = 2"));
        }
    }
    let ops = form.operators()?;
    let ops_t = transformed(&ops, transform)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let rho = linalg::random_hermitian(&mut rng, form.size());
        let diff = apply_with(form.form, &form.coeffs, &ops_t, &rho)
            - apply_with(form.form, &form.coeffs, &ops, &rho);
        worst = worst.max(linalg::max_abs(&diff) / linalg::max_abs(&rho));
    }
    Ok(worst)
}

/// Residuals of the two generator forms against each other.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivalenceReport {
    /// max over samples of ‖L_dc − L_lind‖_max / ‖ρ‖_max on the interior.
    pub interior_residual: f64,
    /// Same, outside the interior (truncation leakage).
    pub leakage: f64,
}

pub fn equivalence_check(
    form: &GeneratorForm,
    samples: usize,
    seed: u64,
) -> Result<EquivalenceReport> {
    let ops = form.operators()?;
    let idx = form.interior();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = EquivalenceReport {
        interior_residual: 0.0,
        leakage: 0.0,
    };
    for _ in 0..samples {
        let rho = linalg::random_hermitian(&mut rng, form.size());
        let scale = linalg::max_abs(&rho);
        let diff = apply_with(FormKind::DoubleCommutator, &form.coeffs, &ops, &rho)
            - apply_with(FormKind::ExplicitLindblad, &form.coeffs, &ops, &rho);
        report.interior_residual = report
            .interior_residual
            .max(linalg::max_abs(&restrict(&diff, &idx)) / scale);
        report.leakage = report.leakage.max(outside_max(&diff, &idx) / scale);
    }
    Ok(report)
}

/// max |Tr(L′[A]ρ) − Tr(A L[ρ])| / (‖A‖_max ‖ρ‖_max) over random Hermitian A, ρ
/// supported on the interior.
pub fn duality_gap(form: &GeneratorForm, samples: usize, seed: u64) -> Result<f64> {
    let ops = form.operators()?;
    let idx = form.interior();
    let n = form.size();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let embed = |small: CMatrix| {
        let mut big = CMatrix::zeros(n, n);
        for (i, &ii) in idx.iter().enumerate() {
            for (j, &jj) in idx.iter().enumerate() {
                big[(ii, jj)] = small[(i, j)];
            }
        }
        big
    };
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let a = embed(linalg::random_hermitian(&mut rng, idx.len()));
        let rho = embed(linalg::random_hermitian(&mut rng, idx.len()));
        let lhs = linalg::trace(&(adjoint_with(form.form, &form.coeffs, &ops, &a) * &rho));
        let rhs = linalg::trace(&(&a * apply_with(form.form, &form.coeffs, &ops, &rho)));
        worst = worst.max((lhs - rhs).norm() / (linalg::max_abs(&a) * linalg::max_abs(&rho)));
    }
    Ok(worst)
}

/// ‖m‖_max restricted to the interior indices.
pub fn interior_max(form: &GeneratorForm, m: &CMatrix) -> f64 {
    linalg::max_abs(&restrict(m, &form.interior()))
}

/// Ladder identities on the interior: ([a,a†] − I, [X,P] − iħ).
pub fn ladder_residuals(ladder: &Ladder) -> (f64, f64) {
    let n = ladder.levels();
    let keep: Vec<usize> = (0..n - ladder.a.interior_margin).collect();
    let id = CMatrix::identity(n, n);
    let ca = commutator(&ladder.a.matrix, &ladder.adag.matrix) - &id;
    let cxp = commutator(&ladder.x.matrix, &ladder.p.matrix) - id * (I * ladder.hbar);
    (
        linalg::max_abs(&restrict(&ca, &keep)),
        linalg::max_abs(&restrict(&cxp, &keep)),
    )
}

/// Full report for the verification harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OpalgReport {
    pub ladder_commutator: f64,
    pub position_momentum_commutator: f64,
    pub residual_equivalence: f64,
    pub residual_equivalence_broken: f64,
    pub residual_translate: f64,
    pub residual_rotate: f64,
    pub duality_gap: f64,
    pub truncation_leakage: f64,
    pub momentum_decay_residual: f64,
}

/// Run every check on one set of coefficients: 1D with `levels`, rotation in
/// 2D with `levels_2d` per direction.
pub fn verify(
    coeffs: &FPCoefficients,
    levels: usize,
    levels_2d: usize,
    samples: usize,
    seed: u64,
) -> Result<OpalgReport> {
    let ladder = build_ladder(levels, coeffs.beta, coeffs.test_mass, coeffs.hbar)?;
    let (ladder_commutator, position_momentum_commutator) = ladder_residuals(&ladder);
    let dc = GeneratorForm::new(FormKind::DoubleCommutator, *coeffs, 1, levels)?;
    let eq = equivalence_check(&dc, samples, seed)?;
    let mut broken = *coeffs;
    broken.gamma *= 1.1;
    let eq_broken = equivalence_check(
        &GeneratorForm::new(FormKind::DoubleCommutator, broken, 1, levels)?,
        samples,
        seed,
    )?;
    let translate = covariance_check(&dc, Transform::Translate { a: 3.7 }, samples, seed)?.max(
        covariance_check(
            &dc.with_form(FormKind::ExplicitLindblad),
            Transform::Translate { a: 3.7 },
            samples,
            seed,
        )?,
    );
    let dc2 = GeneratorForm::new(FormKind::DoubleCommutator, *coeffs, 2, levels_2d)?;
    let theta = std::f64::consts::PI / 5.0;
    let rotate = covariance_check(&dc2, Transform::Rotate2D { theta }, samples.min(3), seed)?.max(
        covariance_check(
            &dc2.with_form(FormKind::ExplicitLindblad),
            Transform::Rotate2D { theta },
            samples.min(3),
            seed,
        )?,
    );
    let gap = duality_gap(&dc, samples, seed)?.max(duality_gap(
        &dc.with_form(FormKind::ExplicitLindblad),
        samples,
        seed,
    )?);
    let p = &ladder.p.matrix;
    let lp = adjoint_apply(&dc, p)? + p * c(2.0 * coeffs.effective_gamma());
    Ok(OpalgReport {
        ladder_commutator,
        position_momentum_commutator,
        residual_equivalence: eq.interior_residual,
        residual_equivalence_broken: eq_broken.interior_residual,
        residual_translate: translate,
        residual_rotate: rotate,
        duality_gap: gap,
        truncation_leakage: eq.leakage,
        momentum_decay_residual: interior_max(&dc, &lp) / interior_max(&dc, p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn ground_state_and_spectrum() {
        let l = build_ladder(10, 1.0, 2.0, 1.0).unwrap();
        let n = &l.adag.matrix * &l.a.matrix;
        assert_eq!(n[(0, 0)], Complex64::new(0.0, 0.0));
        for k in 0..10 {
            assert!((n[(k, k)].re - k as f64).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_small_truncation() {
        assert!(build_ladder(7, 1.0, 1.0, 1.0).is_err());
    }
}
