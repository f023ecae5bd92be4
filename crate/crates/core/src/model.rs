//! The normalized drift/diffusion pair `(C, D)` and its spectral data.
//!
//! A valid model satisfies, with `d = dim`:
//! - (A) `D` diagonal, positive semi-definite, `1 ≤ rank(D) ≤ d`;
//! - (normalized) `D = (C + Cᵀ)/2` entrywise within 1e-12;
//! - (B) every eigenvalue of `C` has strictly positive real part;
//! - (C) the largest `Cᵀ`-invariant subspace inside `ker(D)` is `{0}`.
//!
//! Condition (C) is decided by the fixed-point iteration
//! `K₀ = ker(D)`, `K_{i+1} = K_i ∩ (Cᵀ)⁻¹(K_i)`, which terminates in at most
//! `d` steps; the equivalent Kalman-rank formulation is exposed as a
//! redundant cross-check.

use crate::linalg::{
    self, complex_nullity, eigenvalues_with_multiplicity, intersect_subspaces, nullspace,
    preimage, spectral_norm, RANK_TOL,
};
use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Entrywise tolerance for "D is diagonal" and for `D = (C + Cᵀ)/2`.
pub const NORMALIZED_TOL: f64 = 1e-12;
/// Real parts at or below this cannot be certified positive (condition (B)).
pub const STABILITY_TOL: f64 = 1e-12;
/// Eigenvalues within this of `μ` are treated as attaining the spectral gap.
pub const MU_TIE_TOL: f64 = 1e-9;
/// Singular-value tolerance of the Jordan-staircase rank decisions.
pub const STAIRCASE_TOL: f64 = 1e-8;

/// Which validation condition a diagnostic refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    A,
    B,
    C,
    #[serde(rename = "normalized")]
    Normalized,
}

/// One violated condition with a human-readable diagnostic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    pub condition: Condition,
    pub detail: String,
}

#[derive(Debug, Error)]
pub enum ValidateError {
    /// Shape or non-finite-entry problems: the input is not even a candidate.
    #[error("input error: {0}")]
    Input(String),
    /// The candidate is well-formed but violates the model conditions.
    #[error("model invalid: {} condition(s) violated", .0.len())]
    Invalid(Vec<Violation>),
}

/// A validated normalized model. Construction goes through [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    dim: usize,
    drift: DMatrix<f64>,
    diffusion: DMatrix<f64>,
}

/// Eigenvalues of `C` with algebraic multiplicities, the spectral gap
/// `μ = min Re λ`, and the defect `n` (largest Jordan-block size minus one
/// among eigenvalues attaining `μ`).
#[derive(Debug, Clone)]
pub struct SpectralSummary {
    pub eigenvalues: Vec<(Complex<f64>, usize)>,
    pub mu: f64,
    pub defect: usize,
}

impl SpectralSummary {
    /// The eigenvalue multiset flattened to `d` entries.
    pub fn eigenvalue_list(&self) -> Vec<Complex<f64>> {
        let mut out = Vec::new();
        for (z, m) in &self.eigenvalues {
            for _ in 0..*m {
                out.push(*z);
            }
        }
        out
    }
}

impl ModelSpec {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn drift(&self) -> &DMatrix<f64> {
        &self.drift
    }

    pub fn diffusion(&self) -> &DMatrix<f64> {
        &self.diffusion
    }

    /// Rank of the diagonal diffusion matrix.
    pub fn diffusion_rank(&self) -> usize {
        (0..self.dim)
            .filter(|&i| self.diffusion[(i, i)] > RANK_TOL)
            .count()
    }

    /// FNV-1a hash of the exact bit patterns of `(d, C, D)`, as hex. Used to
    /// tag serialized reports with the model they came from.
    pub fn content_hash(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        eat(&(self.dim as u64).to_le_bytes());
        for m in [&self.drift, &self.diffusion] {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    eat(&m[(i, j)].to_bits().to_le_bytes());
                }
            }
        }
        format!("{h:016x}")
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            d: self.dim,
            c: matrix_rows(&self.drift),
            diff: matrix_rows(&self.diffusion),
        };
        serde_json::to_string_pretty(&file).expect("serialization cannot fail")
    }
}

/// The JSON interchange form `{"d": int, "C": [[..]], "D": [[..]]}`.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub d: usize,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub diff: Vec<Vec<f64>>,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn rows_to_matrix(rows: &[Vec<f64>], d: usize, name: &str) -> Result<DMatrix<f64>, String> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(format!("{name} must be a {d}×{d} row-major matrix"));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

/// Parses the model interchange JSON into the raw `(C, D)` pair.
pub fn matrices_from_json(s: &str) -> Result<(DMatrix<f64>, DMatrix<f64>), String> {
    let file: ModelFile = serde_json::from_str(s).map_err(|e| format!("malformed model JSON: {e}"))?;
    if file.d == 0 {
        return Err("dimension must be at least 1".into());
    }
    let c = rows_to_matrix(&file.c, file.d, "C")?;
    let dm = rows_to_matrix(&file.diff, file.d, "D")?;
    Ok((c, dm))
}

fn fmt_complex(z: Complex<f64>) -> String {
    if z.im == 0.0 {
        format!("{:.12}", z.re)
    } else {
        format!("{:.12}{:+.12}i", z.re, z.im)
    }
}

/// Validates a drift/diffusion pair against conditions (A)–(C) and the
/// normalized form, returning either the model or every violated condition
/// with a diagnostic.
pub fn validate(c: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<ModelSpec, ValidateError> {
    if c.nrows() != c.ncols() || d.nrows() != d.ncols() {
        return Err(ValidateError::Input("C and D must be square".into()));
    }
    if c.nrows() != d.nrows() {
        return Err(ValidateError::Input(format!(
            "shape mismatch: C is {}×{}, D is {}×{}",
            c.nrows(),
            c.ncols(),
            d.nrows(),
            d.ncols()
        )));
    }
    if c.nrows() == 0 {
        return Err(ValidateError::Input("dimension must be at least 1".into()));
    }
    if c.iter().chain(d.iter()).any(|x| !x.is_finite()) {
        return Err(ValidateError::Input("matrix entries must be finite".into()));
    }
    let n = c.nrows();
    let mut violations = Vec::new();

    // (A): diagonal, nonnegative, 1 ≤ rank ≤ d.
    let mut max_offdiag = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                max_offdiag = max_offdiag.max(d[(i, j)].abs());
            }
        }
    }
    if max_offdiag > NORMALIZED_TOL {
        violations.push(Violation {
            condition: Condition::A,
            detail: format!("D is not diagonal: largest off-diagonal entry {max_offdiag:e}"),
        });
    }
    let negatives: Vec<usize> = (0..n).filter(|&i| d[(i, i)] < -NORMALIZED_TOL).collect();
    if !negatives.is_empty() {
        violations.push(Violation {
            condition: Condition::A,
            detail: format!("D has negative diagonal entries at indices {negatives:?}"),
        });
    }
    let rank = (0..n).filter(|&i| d[(i, i)] > RANK_TOL).count();
    if rank == 0 {
        violations.push(Violation {
            condition: Condition::A,
            detail: "rank(D) = 0: the diffusion vanishes identically".into(),
        });
    }

    // normalized form: D = (C + Cᵀ)/2.
    let sym = (c + c.transpose()) * 0.5;
    let dev = (&sym - d).amax();
    if dev > NORMALIZED_TOL {
        violations.push(Violation {
            condition: Condition::Normalized,
            detail: format!("D differs from (C + Cᵀ)/2 by {dev:e} (entrywise max)"),
        });
    }

    // (B): positive stability.
    let eigs = eigenvalues_with_multiplicity(c);
    for (z, m) in &eigs {
        if z.re <= STABILITY_TOL {
            violations.push(Violation {
                condition: Condition::B,
                detail: format!(
                    "eigenvalue {} (multiplicity {}) does not have strictly positive real part",
                    fmt_complex(*z),
                    m
                ),
            });
        }
    }

    // (C): no Cᵀ-invariant subspace inside ker(D), by fixed-point iteration.
    let invariant = invariant_kernel_subspace(c, d);
    if invariant.ncols() > 0 {
        let basis: Vec<String> = (0..invariant.ncols())
            .map(|j| {
                let col: Vec<String> = (0..n).map(|i| format!("{:.6}", invariant[(i, j)])).collect();
                format!("[{}]", col.join(", "))
            })
            .collect();
        violations.push(Violation {
            condition: Condition::C,
            detail: format!(
                "ker(D) contains a Cᵀ-invariant subspace of dimension {}; basis: {}",
                invariant.ncols(),
                basis.join(", ")
            ),
        });
    }

    if violations.is_empty() {
        Ok(ModelSpec {
            dim: n,
            drift: c.clone(),
            diffusion: d.clone(),
        })
    } else {
        Err(ValidateError::Invalid(violations))
    }
}

/// The limit of `K₀ = ker(D)`, `K_{i+1} = K_i ∩ (Cᵀ)⁻¹(K_i)` — the largest
/// `Cᵀ`-invariant subspace contained in `ker(D)`, as orthonormal columns.
/// Dimensions strictly decrease until fixed, so at most `d` steps run.
fn invariant_kernel_subspace(c: &DMatrix<f64>, d: &DMatrix<f64>) -> DMatrix<f64> {
    let n = c.nrows();
    let ct = c.transpose();
    let mut k = nullspace(d, RANK_TOL);
    for _ in 0..n {
        if k.ncols() == 0 {
            break;
        }
        let pre = preimage(&ct, &k, RANK_TOL);
        let next = intersect_subspaces(&k, &pre, RANK_TOL);
        if next.ncols() == k.ncols() {
            return next;
        }
        k = next;
    }
    k
}

/// Kalman-rank formulation of condition (C):
/// `rank [√D, Cᵀ√D, …, (Cᵀ)^{d−1}√D] = d`. Implemented as a redundant
/// cross-check of the invariant-subspace iteration.
pub fn kalman_condition_holds(c: &DMatrix<f64>, d: &DMatrix<f64>) -> bool {
    let n = c.nrows();
    let sqrt_d = DMatrix::from_fn(n, n, |i, j| if i == j { d[(i, i)].max(0.0).sqrt() } else { 0.0 });
    let ct = c.transpose();
    let mut block = sqrt_d.clone();
    let mut kalman = DMatrix::<f64>::zeros(n, n * n);
    for k in 0..n {
        kalman.view_mut((0, k * n), (n, n)).copy_from(&block);
        block = &ct * &block;
    }
    linalg::rank_with_tol(&kalman, RANK_TOL) == n
}

/// Eigenvalues with multiplicities, the spectral gap `μ`, and the defect `n`.
pub fn spectral_summary(model: &ModelSpec) -> SpectralSummary {
    let eigenvalues = eigenvalues_with_multiplicity(model.drift());
    summary_from_eigenvalues(model.drift(), eigenvalues)
}

fn summary_from_eigenvalues(
    c: &DMatrix<f64>,
    eigenvalues: Vec<(Complex<f64>, usize)>,
) -> SpectralSummary {
    let mu = eigenvalues
        .iter()
        .map(|(z, _)| z.re)
        .fold(f64::INFINITY, f64::min);
    let mut defect = 0usize;
    for (z, mult) in &eigenvalues {
        if (z.re - mu).abs() > MU_TIE_TOL || *mult == 1 {
            continue;
        }
        defect = defect.max(largest_jordan_block(c, *z, *mult) - 1);
    }
    SpectralSummary {
        eigenvalues,
        mu,
        defect,
    }
}

/// Largest Jordan-block size of `λ` from the nullity staircase of
/// `(C − λI)^k`: the block size is the smallest `k` at which the nullity
/// stops growing.
fn largest_jordan_block(c: &DMatrix<f64>, lambda: Complex<f64>, mult: usize) -> usize {
    let n = c.nrows();
    let shifted = DMatrix::from_fn(n, n, |i, j| {
        Complex::new(c[(i, j)], 0.0) - if i == j { lambda } else { Complex::new(0.0, 0.0) }
    });
    let mut power = shifted.clone();
    let mut prev = 0usize;
    for k in 1..=mult {
        let nullity = complex_nullity(&power, STAIRCASE_TOL);
        if nullity == prev {
            return k - 1;
        }
        if nullity >= mult || k == mult {
            return k;
        }
        prev = nullity;
        power = &power * &shifted;
    }
    mult
}

/// `e^{-A t}` via the Padé scaling-and-squaring kernel.
pub fn matrix_exponential(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    assert!(t >= 0.0, "time must be nonnegative");
    linalg::expm(&(a * (-t)))
}

/// The propagator norm `‖e^{-Ct}‖₂` (largest singular value).
pub fn exp_norm(model: &ModelSpec, t: f64) -> f64 {
    spectral_norm(&matrix_exponential(model.drift(), t))
}

/// The decay envelope `C_m (1+t)^{2nm} e^{-2mμt}` with `μ, n` from the
/// spectral summary.
pub fn envelope(model: &ModelSpec, m: u32, t: f64, cm: f64) -> f64 {
    assert!(m >= 1 && t >= 0.0 && cm > 0.0);
    let summary = spectral_summary(model);
    envelope_from_summary(&summary, m, t, cm)
}

pub fn envelope_from_summary(summary: &SpectralSummary, m: u32, t: f64, cm: f64) -> f64 {
    let nm = summary.defect as f64 * m as f64;
    cm * (1.0 + t).powf(2.0 * nm) * (-2.0 * m as f64 * summary.mu * t).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    pub fn ou_2d() -> (DMatrix<f64>, DMatrix<f64>) {
        (DMatrix::identity(2, 2), DMatrix::identity(2, 2))
    }

    pub fn kinetic() -> (DMatrix<f64>, DMatrix<f64>) {
        (dmatrix![0.0, -1.0; 1.0, 1.0], dmatrix![0.0, 0.0; 0.0, 1.0])
    }

    pub fn defective() -> (DMatrix<f64>, DMatrix<f64>) {
        (dmatrix![1.0, 0.5; -0.5, 0.0], dmatrix![1.0, 0.0; 0.0, 0.0])
    }

    #[test]
    fn validates_identity_model() {
        let (c, d) = ou_2d();
        let model = validate(&c, &d).unwrap();
        assert_eq!(model.diffusion_rank(), 2);
    }

    #[test]
    fn validates_kinetic_model() {
        // C_s = diag(0,1) = D; ker D = span(e₁); Cᵀe₁ = (0,−1)ᵀ ∉ span(e₁).
        let (c, d) = kinetic();
        let model = validate(&c, &d).unwrap();
        assert_eq!(model.diffusion_rank(), 1);
    }

    #[test]
    fn rejects_invariant_kernel() {
        // C = diag(1,1), D = diag(0,1): span(e₁) ⊆ ker D is Cᵀ-invariant.
        let c = DMatrix::identity(2, 2);
        let d = dmatrix![0.0, 0.0; 0.0, 1.0];
        match validate(&c, &d) {
            Err(ValidateError::Invalid(v)) => {
                // condition (C) fails; the pair is also not in normalized form
                // since (C + Cᵀ)/2 = I ≠ D, and both must be reported.
                assert!(v.iter().any(|x| x.condition == Condition::C));
                assert!(v.iter().any(|x| x.condition == Condition::Normalized));
                assert_eq!(v.len(), 2);
            }
            other => panic!("expected condition (C) violation, got {other:?}"),
        }
    }

    #[test]
    fn rejects_unstable_drift() {
        let c = dmatrix![1.0, 0.0; 0.0, -1.0];
        let d = dmatrix![1.0, 0.0; 0.0, -1.0];
        match validate(&c, &d) {
            Err(ValidateError::Invalid(v)) => {
                assert!(v.iter().any(|x| x.condition == Condition::B));
                assert!(v.iter().any(|x| x.condition == Condition::A));
            }
            other => panic!("expected violations, got {other:?}"),
        }
    }

    #[test]
    fn rejects_non_normalized() {
        let c = dmatrix![1.0, 1.0; 0.0, 1.0];
        let d = DMatrix::identity(2, 2);
        match validate(&c, &d) {
            Err(ValidateError::Invalid(v)) => {
                assert!(v.iter().any(|x| x.condition == Condition::Normalized));
            }
            other => panic!("expected normalized-form violation, got {other:?}"),
        }
    }

    #[test]
    fn input_errors() {
        let c = DMatrix::<f64>::zeros(2, 3);
        assert!(matches!(
            validate(&c, &DMatrix::zeros(2, 2)),
            Err(ValidateError::Input(_))
        ));
        let mut c = DMatrix::<f64>::identity(2, 2);
        c[(0, 0)] = f64::NAN;
        assert!(matches!(
            validate(&c, &DMatrix::identity(2, 2)),
            Err(ValidateError::Input(_))
        ));
    }

    #[test]
    fn kalman_cross_check_agrees() {
        // Two independent formulations of condition (C) agree on all models.
        let cases: Vec<(DMatrix<f64>, DMatrix<f64>, bool)> = vec![
            (ou_2d().0, ou_2d().1, true),
            (kinetic().0, kinetic().1, true),
            (defective().0, defective().1, true),
            (DMatrix::identity(2, 2), dmatrix![0.0, 0.0; 0.0, 1.0], false),
        ];
        for (c, d, expect) in cases {
            assert_eq!(kalman_condition_holds(&c, &d), expect);
            let iteration_holds = invariant_kernel_subspace(&c, &d).ncols() == 0;
            assert_eq!(iteration_holds, expect);
        }
    }

    #[test]
    fn spectral_summaries() {
        // identity: λ = 1 twice, semisimple
        let model = validate(&ou_2d().0, &ou_2d().1).unwrap();
        let s = spectral_summary(&model);
        assert!((s.mu - 1.0).abs() < 1e-12);
        assert_eq!(s.defect, 0);
        assert_eq!(s.eigenvalue_list().len(), 2);

        // kinetic: λ = 1/2 ± i√3/2 (characteristic polynomial λ² − λ + 1)
        let (c, d) = kinetic();
        let model = validate(&c, &d).unwrap();
        let s = spectral_summary(&model);
        assert!((s.mu - 0.5).abs() < 1e-13);
        assert_eq!(s.defect, 0);
        let im: f64 = 3f64.sqrt() / 2.0;
        let list = s.eigenvalue_list();
        assert!(list.iter().any(|z| (z - Complex::new(0.5, im)).norm() < 1e-12));
        assert!(list.iter().any(|z| (z - Complex::new(0.5, -im)).norm() < 1e-12));

        // defective: λ = 1/2 double with one Jordan block, n = 1
        let (c, d) = defective();
        let model = validate(&c, &d).unwrap();
        let s = spectral_summary(&model);
        assert!((s.mu - 0.5).abs() < 1e-12);
        assert_eq!(s.defect, 1);
        assert_eq!(s.eigenvalues.len(), 1);
        assert_eq!(s.eigenvalues[0].1, 2);
    }

    #[test]
    fn matrix_exponential_examples() {
        let id = DMatrix::<f64>::identity(2, 2);
        let e = matrix_exponential(&id, 1.0);
        assert!((e[(0, 0)] - (-1.0f64).exp()).abs() < 1e-15);
        let a = dmatrix![0.0, -1.0; 1.0, 1.0];
        assert_eq!(matrix_exponential(&a, 0.0), DMatrix::identity(2, 2));
    }

    #[test]
    fn exp_norm_examples() {
        let model = validate(&ou_2d().0, &ou_2d().1).unwrap();
        assert!((exp_norm(&model, 2.0) - (-2.0f64).exp()).abs() < 1e-14);
        assert!((exp_norm(&model, 0.0) - 1.0).abs() < 1e-14);

        // kinetic model at t = 1: cross-check against random unit directions
        let (c, d) = kinetic();
        let model = validate(&c, &d).unwrap();
        let norm = exp_norm(&model, 1.0);
        let e = matrix_exponential(model.drift(), 1.0);
        let mut best = 0.0f64;
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            // splitmix64, mapped to [0,1)
            state = state.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            (z ^ (z >> 31)) as f64 / u64::MAX as f64
        };
        for _ in 0..10_000 {
            let theta = 2.0 * std::f64::consts::PI * next();
            let x = nalgebra::dvector![theta.cos(), theta.sin()];
            best = best.max((&e * x).norm());
        }
        assert!(best <= norm * (1.0 + 1e-12));
        assert!(best >= norm * (1.0 - 1e-4));
    }

    #[test]
    fn exp_norm_monotone_and_bounded() {
        for (c, d) in [ou_2d(), kinetic(), defective()] {
            let model = validate(&c, &d).unwrap();
            let mut prev = 1.0f64 + 1e-12;
            let c_norm = spectral_norm(model.drift());
            for k in 0..=100 {
                let t = 0.1 * k as f64;
                let v = exp_norm(&model, t);
                assert!(v <= prev + 1e-11, "exp_norm increased at t={t}");
                assert!(v <= 1.0 + 1e-12);
                assert!(v >= (-c_norm * t).exp() * (1.0 - 1e-9));
                prev = v;
            }
        }
    }

    #[test]
    fn envelope_examples() {
        let model = validate(&ou_2d().0, &ou_2d().1).unwrap();
        assert!((envelope(&model, 1, 1.0, 1.0) - (-2.0f64).exp()).abs() < 1e-14);

        let (c, d) = defective();
        let model = validate(&c, &d).unwrap();
        assert!((envelope(&model, 1, 0.0, 1.0) - 1.0).abs() < 1e-14);
        // m = 2, t = 1: (1+1)^{2·1·2} e^{-2·2·(1/2)·1} = 16 e^{-2}
        assert!((envelope(&model, 2, 1.0, 1.0) - 16.0 * (-2.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn json_roundtrip_and_hash() {
        let (c, d) = kinetic();
        let model = validate(&c, &d).unwrap();
        let json = model.to_json();
        let (c2, d2) = matrices_from_json(&json).unwrap();
        let model2 = validate(&c2, &d2).unwrap();
        assert_eq!(model, model2);
        assert_eq!(model.content_hash(), model2.content_hash());
        assert!(matrices_from_json("{\"d\": 2, \"C\": [[1]]}").is_err());
        assert!(matrices_from_json("{").is_err());
    }
}
