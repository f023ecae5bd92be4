//! Exact multi-index Hermite calculus for the standard Gaussian equilibrium.
//!
//! The basis functions are `h_α = (−1)^{|α|} ∂^α f_∞ = H_α f_∞`, with
//! `⟨h_α, h_β⟩_{L²(f_∞⁻¹)} = α! δ_{αβ}`. `H_α` factors into monic univariate
//! (probabilists') Hermite polynomials and has integer coefficients, so every
//! basis conversion here is exact; floating point enters only through the
//! stored coefficient values and point evaluation.

use crate::poly::{rational_from_f64, rational_to_f64, RatPoly};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

/// Coefficients with absolute value at or below this are not stored.
pub const PRUNE_TOL: f64 = 1e-15;

/// A multi-index `α ∈ ℕ₀^d`. Ordered by total order first, then reverse
/// lexicographically, which makes the natural sort order coincide with the
/// graded basis ordering used throughout (`(2,0) < (1,1) < (0,2)`).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        MultiIndex(entries)
    }

    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    /// The unit index `e_j`.
    pub fn unit(dim: usize, j: usize) -> Self {
        assert!(j < dim);
        let mut e = vec![0; dim];
        e[j] = 1;
        MultiIndex(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    /// The order `|α| = Σ αᵢ`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `α! = Π αᵢ!` as `f64` (exact for the orders in scope: 20! < 2⁵³).
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&a| (1..=a as u64).map(|k| k as f64).product::<f64>())
            .product()
    }

    /// `α!` as an exact integer.
    pub fn factorial_big(&self) -> BigInt {
        let mut acc = BigInt::one();
        for &a in &self.0 {
            for k in 1..=a as u64 {
                acc *= BigInt::from(k);
            }
        }
        acc
    }

    /// `α + e_j`.
    pub fn raised(&self, j: usize) -> MultiIndex {
        let mut e = self.0.clone();
        e[j] += 1;
        MultiIndex(e)
    }

    /// `α − e_j`, if `α_j ≥ 1`.
    pub fn lowered(&self, j: usize) -> Option<MultiIndex> {
        if self.0[j] == 0 {
            return None;
        }
        let mut e = self.0.clone();
        e[j] -= 1;
        Some(MultiIndex(e))
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order()
            .cmp(&other.order())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "α{:?}", self.0)
    }
}

/// All multi-indices of dimension `d` and order `m`, in graded lexicographic
/// order (leading coordinate descending). The result has
/// `binomial(m+d−1, d−1)` entries and is the canonical basis ordering of
/// `V_m` used by the generator blocks.
pub fn enumerate_indices(d: usize, m: u32) -> Vec<MultiIndex> {
    assert!(d >= 1);
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(d);
    fill(d, m, &mut prefix, &mut out);
    out
}

fn fill(d: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if prefix.len() == d - 1 {
        prefix.push(remaining);
        out.push(MultiIndex::new(prefix.clone()));
        prefix.pop();
        return;
    }
    for k in (0..=remaining).rev() {
        prefix.push(k);
        fill(d, remaining - k, prefix, out);
        prefix.pop();
    }
}

/// A Hermite polynomial `H_α` with exact coefficients (they are integers for
/// the standard Gaussian normalization) together with its index.
#[derive(Clone, Debug)]
pub struct HermitePolynomial {
    alpha: MultiIndex,
    poly: RatPoly,
}

impl HermitePolynomial {
    pub fn alpha(&self) -> &MultiIndex {
        &self.alpha
    }

    pub fn poly(&self) -> &RatPoly {
        &self.poly
    }

    /// Degree equals `|α|`.
    pub fn degree(&self) -> u32 {
        self.alpha.order()
    }
}

/// Builds `H_α` by symbolic differentiation of the Gaussian: starting from
/// `H_0 = 1`, each application of `P ↦ x_j P − ∂_j P` realizes one more
/// derivative in `(−1)^{|α|} ∂^α f_∞ = H_α f_∞`.
pub fn hermite_polynomial(alpha: &MultiIndex) -> HermitePolynomial {
    let d = alpha.dim();
    let mut p = RatPoly::one(d);
    for j in 0..d {
        for _ in 0..alpha.entries()[j] {
            p = p.mul_var(j).sub(&p.partial(j));
        }
    }
    HermitePolynomial {
        alpha: alpha.clone(),
        poly: p,
    }
}

/// `⟨h_α, h_β⟩_{L²(f_∞⁻¹)} = α! δ_{αβ}`.
pub fn inner_product(alpha: &MultiIndex, beta: &MultiIndex) -> f64 {
    assert_eq!(alpha.dim(), beta.dim(), "dimension mismatch");
    if alpha == beta {
        alpha.factorial()
    } else {
        0.0
    }
}

/// One serialized coefficient entry; the interchange format is a JSON list
/// of these, with the dimension inferred from the `alpha` lengths.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoeffEntry {
    pub alpha: Vec<u32>,
    pub value: f64,
}

/// Sparse Hermite coefficients of a function `f = Σ d_α h_α` in
/// `L²(ℝ^d, f_∞⁻¹)`. Entries with `|d_α| ≤ 1e-15` are pruned.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffVector {
    dim: usize,
    coeffs: BTreeMap<MultiIndex, f64>,
}

impl CoeffVector {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1);
        CoeffVector {
            dim,
            coeffs: BTreeMap::new(),
        }
    }

    /// The coefficient vector of the equilibrium `f_∞` (d₀ = 1).
    pub fn equilibrium(dim: usize) -> Self {
        let mut f = Self::new(dim);
        f.set(MultiIndex::zero(dim), 1.0);
        f
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn set(&mut self, alpha: MultiIndex, value: f64) {
        assert_eq!(alpha.dim(), self.dim, "index dimension mismatch");
        assert!(value.is_finite(), "coefficient must be finite");
        if value.abs() <= PRUNE_TOL {
            self.coeffs.remove(&alpha);
        } else {
            self.coeffs.insert(alpha, value);
        }
    }

    pub fn add_to(&mut self, alpha: MultiIndex, delta: f64) {
        let v = self.get(&alpha) + delta;
        self.set(alpha, v);
    }

    pub fn get(&self, alpha: &MultiIndex) -> f64 {
        self.coeffs.get(alpha).copied().unwrap_or(0.0)
    }

    /// The mass coefficient `d₀`.
    pub fn mass(&self) -> f64 {
        self.get(&MultiIndex::zero(self.dim))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.coeffs.iter().map(|(a, &v)| (a, v))
    }

    pub fn support_size(&self) -> usize {
        self.coeffs.len()
    }

    /// Largest stored order (0 for an empty vector).
    pub fn max_order(&self) -> u32 {
        self.coeffs.keys().map(MultiIndex::order).max().unwrap_or(0)
    }

    /// The α!-weighted squared norm `Σ α! d_α²`.
    pub fn weighted_norm_sq(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|(a, v)| a.factorial() * v * v)
            .sum()
    }

    /// `Σ α! d_α²` restricted to `|α| = m`.
    pub fn weighted_norm_sq_order(&self, m: u32) -> f64 {
        self.coeffs
            .iter()
            .filter(|(a, _)| a.order() == m)
            .map(|(a, v)| a.factorial() * v * v)
            .sum()
    }

    pub fn scale(&mut self, s: f64) {
        let keys: Vec<_> = self.coeffs.keys().cloned().collect();
        for k in keys {
            let v = self.coeffs[&k] * s;
            self.set(k, v);
        }
    }

    pub fn add_scaled(&mut self, other: &CoeffVector, s: f64) {
        assert_eq!(self.dim, other.dim);
        for (a, v) in other.iter() {
            self.add_to(a.clone(), s * v);
        }
    }

    /// Extracts the order-`m` coefficients as a dense vector in `basis` order.
    pub fn block_vector(&self, basis: &[MultiIndex]) -> nalgebra::DVector<f64> {
        nalgebra::DVector::from_iterator(basis.len(), basis.iter().map(|a| self.get(a)))
    }

    /// Overwrites the order-`m` coefficients from a dense vector in `basis` order.
    pub fn set_block(&mut self, basis: &[MultiIndex], values: &nalgebra::DVector<f64>) {
        assert_eq!(basis.len(), values.len());
        for (a, &v) in basis.iter().zip(values.iter()) {
            self.set(a.clone(), v);
        }
    }

    pub fn to_entries(&self) -> Vec<CoeffEntry> {
        self.coeffs
            .iter()
            .map(|(a, &v)| CoeffEntry {
                alpha: a.entries().to_vec(),
                value: v,
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_entries()).expect("serialization cannot fail")
    }

    /// Parses the interchange format, requiring a uniform dimension.
    pub fn from_entries(entries: &[CoeffEntry]) -> Result<Self, String> {
        let dim = match entries.first() {
            Some(e) => e.alpha.len(),
            None => return Err("empty coefficient list: dimension cannot be inferred".into()),
        };
        if dim == 0 {
            return Err("zero-length multi-index".into());
        }
        let mut out = CoeffVector::new(dim);
        for e in entries {
            if e.alpha.len() != dim {
                return Err(format!(
                    "non-uniform dimension: expected {}, found index {:?}",
                    dim, e.alpha
                ));
            }
            if !e.value.is_finite() {
                return Err(format!("non-finite coefficient at {:?}", e.alpha));
            }
            out.add_to(MultiIndex::new(e.alpha.clone()), e.value);
        }
        Ok(out)
    }

    pub fn from_json(s: &str) -> Result<Self, String> {
        let entries: Vec<CoeffEntry> =
            serde_json::from_str(s).map_err(|e| format!("malformed coefficient JSON: {e}"))?;
        Self::from_entries(&entries)
    }
}

/// Exact-rational coefficient map, used internally by the generator
/// construction and by exactness tests.
#[derive(Clone, Debug, Default)]
pub struct RationalCoeffs {
    pub coeffs: BTreeMap<MultiIndex, BigRational>,
}

impl RationalCoeffs {
    pub fn to_coeff_vector(&self, dim: usize) -> CoeffVector {
        let mut out = CoeffVector::new(dim);
        for (a, c) in &self.coeffs {
            out.set(a.clone(), rational_to_f64(c));
        }
        out
    }
}

/// Exact change of basis from monomials to Hermite coefficients: returns `d`
/// with `Σ d_α H_α = p` exactly. Triangular elimination against the monic
/// leading monomial `x^α` of `H_α`.
pub fn expand_exact(p: &RatPoly) -> RationalCoeffs {
    let mut work = p.clone();
    let mut out = RationalCoeffs::default();
    while let Some((expts, c)) = work.pop_max_degree_term() {
        let alpha = MultiIndex::new(expts);
        let h = hermite_polynomial(&alpha);
        // pop removed the x^α term already; subtract the rest of c·H_α.
        let mut tail = h.poly.scale(&c);
        tail.add_term(alpha.entries().to_vec(), -c.clone());
        work.sub_assign(&tail);
        out.coeffs.insert(alpha, c);
    }
    out
}

/// Expansion of a polynomial-times-Gaussian `P·f_∞` in the Hermite basis,
/// with `f64` output coefficients. The underlying change of basis is exact.
pub fn expand(p: &RatPoly) -> CoeffVector {
    expand_exact(p).to_coeff_vector(p.dim())
}

/// Rebuilds the polynomial `Σ d_α H_α` from exact coefficients.
pub fn hermite_combination(coeffs: &RationalCoeffs, dim: usize) -> RatPoly {
    let mut p = RatPoly::zero(dim);
    for (alpha, c) in &coeffs.coeffs {
        p.add_assign(&hermite_polynomial(alpha).poly.scale(c));
    }
    p
}

/// Same combination with `f64` coefficients, for evaluation-side oracles.
pub fn hermite_combination_f64(f: &CoeffVector) -> RatPoly {
    let mut p = RatPoly::zero(f.dim());
    for (alpha, v) in f.iter() {
        p.add_assign(&hermite_polynomial(alpha).poly.scale(&rational_from_f64(v)));
    }
    p
}

/// Coefficients of `∂_j f + x_j f` (the numerator of the flux component
/// `J_j / f_∞`): the entry at `α` is `(α_j + 1) d_{α+e_j}`, i.e. every stored
/// `β` with `β_j ≥ 1` contributes `β_j d_β` at `β − e_j`.
pub fn gradient_shift(f: &CoeffVector, j: usize) -> CoeffVector {
    assert!(j < f.dim(), "coordinate out of range");
    let mut out = CoeffVector::new(f.dim());
    for (beta, v) in f.iter() {
        if let Some(alpha) = beta.lowered(j) {
            out.set(alpha, beta.entries()[j] as f64 * v);
        }
    }
    out
}

/// Evaluates `f(x) = Σ d_α H_α(x) f_∞(x)` with
/// `f_∞(x) = (2π)^{−d/2} e^{−|x|²/2}`. Univariate Hermite values come from
/// the monic recurrence `He_{k+1} = x He_k − k He_{k−1}`.
pub fn reconstruct(f: &CoeffVector, x: &[f64]) -> f64 {
    assert_eq!(x.len(), f.dim(), "point dimension mismatch");
    let d = f.dim();
    let max_deg = f
        .iter()
        .map(|(a, _)| a.entries().iter().copied().max().unwrap_or(0))
        .max()
        .unwrap_or(0) as usize;
    // he_vals[i][k] = He_k(x_i)
    let mut he_vals = vec![vec![0.0; max_deg + 1]; d];
    for i in 0..d {
        he_vals[i][0] = 1.0;
        if max_deg >= 1 {
            he_vals[i][1] = x[i];
        }
        for k in 1..max_deg {
            he_vals[i][k + 1] = x[i] * he_vals[i][k] - k as f64 * he_vals[i][k - 1];
        }
    }
    let mut poly_part = 0.0;
    for (alpha, v) in f.iter() {
        let mut h = 1.0;
        for (i, &ai) in alpha.entries().iter().enumerate() {
            h *= he_vals[i][ai as usize];
        }
        poly_part += v * h;
    }
    let norm_sq: f64 = x.iter().map(|xi| xi * xi).sum();
    let gaussian = (2.0 * std::f64::consts::PI).powf(-(d as f64) / 2.0) * (-norm_sq / 2.0).exp();
    poly_part * gaussian
}

/// Exactness check used by tests: true iff `Σ d_α H_α` has every coefficient
/// of `p` reproduced exactly.
pub fn reproduces_exactly(coeffs: &RationalCoeffs, p: &RatPoly) -> bool {
    hermite_combination(coeffs, p.dim()).sub(p).is_zero()
}
