//! Multivariate polynomials with exact rational coefficients.
//!
//! This is the workhorse behind the Hermite calculus: Hermite polynomials,
//! the monomial↔Hermite change of basis, and the symbolic application of the
//! Fokker-Planck operator all run on [`RatPoly`] so that no basis-conversion
//! error leaks into the numerical layers. Coefficients are converted to `f64`
//! only at evaluation and ODE boundaries.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use std::collections::BTreeMap;

/// Exact rational from a finite `f64` (every finite double is dyadic).
///
/// Panics on NaN/infinity; inputs are validated before they reach the
/// symbolic layer.
pub fn rational_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("non-finite value reached exact arithmetic")
}

/// Lossy conversion back to `f64` (used only at numeric boundaries).
pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("rational out of f64 range")
}

/// A polynomial in `dim` variables, stored sparsely as
/// exponent-vector → rational coefficient. Zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatPoly {
    dim: usize,
    terms: BTreeMap<Vec<u32>, BigRational>,
}

impl RatPoly {
    pub fn zero(dim: usize) -> Self {
        RatPoly {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: BigRational) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(vec![0; dim], c);
        p
    }

    pub fn one(dim: usize) -> Self {
        Self::constant(dim, BigRational::one())
    }

    /// The monomial `x_j`.
    pub fn variable(dim: usize, j: usize) -> Self {
        assert!(j < dim);
        let mut e = vec![0u32; dim];
        e[j] = 1;
        let mut p = Self::zero(dim);
        p.add_term(e, BigRational::one());
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &BigRational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Largest total degree among stored terms, `None` for the zero polynomial.
    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    /// Adds `c · x^e` in place, dropping the term if it cancels exactly.
    pub fn add_term(&mut self, e: Vec<u32>, c: BigRational) {
        assert_eq!(e.len(), self.dim, "exponent arity mismatch");
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(e);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get() + &c;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn add_assign(&mut self, other: &RatPoly) {
        assert_eq!(self.dim, other.dim);
        for (e, c) in &other.terms {
            self.add_term(e.clone(), c.clone());
        }
    }

    pub fn sub_assign(&mut self, other: &RatPoly) {
        assert_eq!(self.dim, other.dim);
        for (e, c) in &other.terms {
            self.add_term(e.clone(), -c.clone());
        }
    }

    pub fn add(&self, other: &RatPoly) -> RatPoly {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn sub(&self, other: &RatPoly) -> RatPoly {
        let mut out = self.clone();
        out.sub_assign(other);
        out
    }

    pub fn scale(&self, c: &BigRational) -> RatPoly {
        if c.is_zero() {
            return Self::zero(self.dim);
        }
        let mut out = Self::zero(self.dim);
        for (e, v) in &self.terms {
            out.terms.insert(e.clone(), v * c);
        }
        out
    }

    pub fn mul(&self, other: &RatPoly) -> RatPoly {
        assert_eq!(self.dim, other.dim);
        let mut out = Self::zero(self.dim);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    /// Multiplication by the variable `x_j`.
    pub fn mul_var(&self, j: usize) -> RatPoly {
        assert!(j < self.dim);
        let mut out = Self::zero(self.dim);
        for (e, c) in &self.terms {
            let mut e2 = e.clone();
            e2[j] += 1;
            out.terms.insert(e2, c.clone());
        }
        out
    }

    /// Exact partial derivative `∂/∂x_j`.
    pub fn partial(&self, j: usize) -> RatPoly {
        assert!(j < self.dim);
        let mut out = Self::zero(self.dim);
        for (e, c) in &self.terms {
            if e[j] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[j] -= 1;
            let k = BigRational::from(BigInt::from(e[j]));
            out.add_term(e2, c * k);
        }
        out
    }

    /// Removes and returns a term of maximal total degree
    /// (ties broken by the exponent ordering; any choice works for the
    /// triangular Hermite elimination).
    pub fn pop_max_degree_term(&mut self) -> Option<(Vec<u32>, BigRational)> {
        let key = self
            .terms
            .keys()
            .max_by_key(|e| (e.iter().sum::<u32>(), (*e).clone()))?
            .clone();
        let c = self.terms.remove(&key).unwrap();
        Some((key, c))
    }

    /// Evaluates at a point using `f64` arithmetic.
    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim);
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            let mut mono = 1.0;
            for (xi, &ei) in x.iter().zip(e) {
                mono *= xi.powi(ei as i32);
            }
            acc += rational_to_f64(c) * mono;
        }
        acc
    }

    /// Infinity norm of the coefficients after conversion to `f64`.
    pub fn coeff_inf_norm_f64(&self) -> f64 {
        self.terms
            .values()
            .map(|c| rational_to_f64(c).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn arithmetic_roundtrip() {
        // (x0 + 2 x1)^2 = x0^2 + 4 x0 x1 + 4 x1^2
        let p = RatPoly::variable(2, 0).add(&RatPoly::variable(2, 1).scale(&rat(2, 1)));
        let sq = p.mul(&p);
        assert_eq!(sq.num_terms(), 3);
        assert_eq!(sq.eval_f64(&[1.0, 1.0]), 9.0);
        assert_eq!(sq.total_degree(), Some(2));
    }

    #[test]
    fn derivative_of_product() {
        // d/dx0 (x0^2 x1) = 2 x0 x1
        let p = RatPoly::variable(2, 0)
            .mul(&RatPoly::variable(2, 0))
            .mul(&RatPoly::variable(2, 1));
        let dp = p.partial(0);
        assert_eq!(dp.eval_f64(&[3.0, 5.0]), 30.0);
    }

    #[test]
    fn exact_cancellation_drops_terms() {
        let p = RatPoly::variable(1, 0);
        let q = p.sub(&p);
        assert!(q.is_zero());
    }

    #[test]
    fn dyadic_f64_roundtrip() {
        for &x in &[0.5, -0.375, 3.0, 0.1] {
            assert_eq!(rational_to_f64(&rational_from_f64(x)), x);
        }
    }
}
