//! Finite-dimensional generator blocks.
//!
//! On each invariant space `V_m` the Fokker-Planck flow reduces to the linear
//! coefficient ODE `ḋ^{(m)} = −B_m d^{(m)}`. The matrix `B_m` is derived
//! constructively: apply `−L h_α = div(D ∇ h_α + C x h_α)` to every basis
//! function by exact polynomial calculus on `H_α f_∞` (using `∇f_∞ = −x f_∞`),
//! re-expand in the Hermite basis, and read off the columns. Exactness makes
//! the `V_m`-invariance check sharp: for a normalized model the image has
//! exactly zero component outside `V_m`.
//!
//! Derived convention (frozen into the contract and asserted by tests):
//! `B₁ = C` — the coefficient flow on `V_1` is `ḋ = −C d`. Consistently, the
//! coefficient vector `c_α = (m!/α!) v^α` evolves under `e^{-B_m t}` into the
//! same construction applied to `e^{-Ct} v`, which is the concrete content of
//! "`L` on `V_m` behaves like an m-fold tensorisation of the drift".

use crate::hermite::{enumerate_indices, expand_exact, hermite_polynomial, CoeffVector, MultiIndex};
use crate::linalg::{
    bottleneck_distance, eigenvalues_with_multiplicity, spectral_norm, RatMatrix,
    EXACT_EIG_MAX_SIDE,
};
use crate::model::{matrix_exponential, ModelSpec, SpectralSummary};
use crate::poly::{rational_from_f64, rational_to_f64, RatPoly};
use nalgebra::{Complex, DMatrix};
use num_rational::BigRational;
use num_traits::Zero;
use serde_json::json;
use thiserror::Error;

/// Default cap on the block side `binomial(m+d−1, d−1)`.
pub const DEFAULT_BLOCK_CAP: usize = 500;

/// Residual outside `V_m` above this (after conversion to `f64`) signals a
/// calculus bug or a non-normalized model and aborts the construction.
pub const INVARIANCE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("block side {side} exceeds the configured cap {cap}")]
    SizeExceeded { side: usize, cap: usize },
    #[error(
        "internal consistency error: image of h_{alpha:?} has residual {residual:e} outside V_{m}"
    )]
    ResidualOutsideBlock {
        m: u32,
        alpha: Vec<u32>,
        residual: f64,
    },
}

/// The matrix of `−L` restricted to `V_m` in the graded-lexicographic Hermite
/// basis, stored both in exact rational and `f64` form.
#[derive(Debug, Clone)]
pub struct GeneratorBlock {
    m: u32,
    basis: Vec<MultiIndex>,
    b: DMatrix<f64>,
    b_exact: Vec<BigRational>, // row-major, side²
}

impl GeneratorBlock {
    pub fn order(&self) -> u32 {
        self.m
    }

    pub fn basis(&self) -> &[MultiIndex] {
        &self.basis
    }

    pub fn side(&self) -> usize {
        self.basis.len()
    }

    /// The block matrix `B_m` (coefficient flow `ḋ = −B_m d`).
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    fn exact_matrix(&self) -> RatMatrix {
        let n = self.side();
        RatMatrix::from_rows(
            (0..n)
                .map(|i| self.b_exact[i * n..(i + 1) * n].to_vec())
                .collect(),
        )
    }

    /// Eigenvalues of `B_m` with algebraic multiplicities. Small blocks use
    /// the exact characteristic-polynomial route on the rational entries.
    pub fn eigenvalues(&self) -> Vec<(Complex<f64>, usize)> {
        if self.side() <= EXACT_EIG_MAX_SIDE {
            let cp = crate::linalg::char_poly(&self.exact_matrix());
            let mut out = Vec::new();
            for (factor, mult) in crate::linalg::square_free_factors(&cp) {
                for root in crate::linalg::roots_square_free(&factor) {
                    out.push((root, mult as usize));
                }
            }
            out
        } else {
            eigenvalues_with_multiplicity(&self.b)
        }
    }

    /// Block dump `{"m": .., "basis": [[..]], "B": [[row-major]]}` for
    /// external inspection.
    pub fn to_json(&self) -> String {
        let basis: Vec<Vec<u32>> = self.basis.iter().map(|a| a.entries().to_vec()).collect();
        let rows: Vec<Vec<f64>> = (0..self.side())
            .map(|i| (0..self.side()).map(|j| self.b[(i, j)]).collect())
            .collect();
        serde_json::to_string_pretty(&json!({
            "m": self.m,
            "basis": basis,
            "B": rows,
        }))
        .expect("serialization cannot fail")
    }
}

/// Exact image `div(D ∇(P f_∞) + C x P f_∞) / f_∞` of a polynomial profile:
/// with `v = D ∇P + (C − D) x P`, the result is `Σ_i (∂_i v_i − x_i v_i)`.
fn fp_apply(p: &RatPoly, c: &[Vec<BigRational>], d: &[Vec<BigRational>]) -> RatPoly {
    let dim = p.dim();
    let mut out = RatPoly::zero(dim);
    for i in 0..dim {
        // v_i = Σ_j D_ij ∂_j P + Σ_j (C−D)_ij x_j P
        let mut v_i = RatPoly::zero(dim);
        for j in 0..dim {
            if !d[i][j].is_zero() {
                v_i.add_assign(&p.partial(j).scale(&d[i][j]));
            }
            let cd = &c[i][j] - &d[i][j];
            if !cd.is_zero() {
                v_i.add_assign(&p.mul_var(j).scale(&cd));
            }
        }
        out.add_assign(&v_i.partial(i));
        out.sub_assign(&v_i.mul_var(i));
    }
    out
}

fn rational_rows(m: &DMatrix<f64>) -> Vec<Vec<BigRational>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| rational_from_f64(m[(i, j)])).collect())
        .collect()
}

/// Builds `B_m` with the default size cap.
pub fn build_block(model: &ModelSpec, m: u32) -> Result<GeneratorBlock, GeneratorError> {
    build_block_capped(model, m, DEFAULT_BLOCK_CAP)
}

/// Builds `B_m`, failing if the block side exceeds `cap`.
pub fn build_block_capped(
    model: &ModelSpec,
    m: u32,
    cap: usize,
) -> Result<GeneratorBlock, GeneratorError> {
    assert!(m >= 1, "block order must be at least 1");
    let dim = model.dim();
    let basis = enumerate_indices(dim, m);
    let side = basis.len();
    if side > cap {
        return Err(GeneratorError::SizeExceeded { side, cap });
    }
    let c = rational_rows(model.drift());
    let d = rational_rows(model.diffusion());

    let mut b_exact = vec![BigRational::zero(); side * side];
    let row_of = |alpha: &MultiIndex| basis.iter().position(|b| b == alpha);

    for (col, alpha) in basis.iter().enumerate() {
        let image = fp_apply(hermite_polynomial(alpha).poly(), &c, &d);
        let coeffs = expand_exact(&image);
        for (beta, q) in &coeffs.coeffs {
            match row_of(beta) {
                // image = −L h_α = Σ_β (−B)_{βα} h_β
                Some(row) => b_exact[row * side + col] = -q.clone(),
                None => {
                    let residual = rational_to_f64(q).abs();
                    if residual > INVARIANCE_TOL {
                        return Err(GeneratorError::ResidualOutsideBlock {
                            m,
                            alpha: alpha.entries().to_vec(),
                            residual,
                        });
                    }
                }
            }
        }
    }

    let b = DMatrix::from_fn(side, side, |i, j| rational_to_f64(&b_exact[i * side + j]));
    Ok(GeneratorBlock {
        m,
        basis,
        b,
        b_exact,
    })
}

/// Builds blocks `B_1 … B_M` sequentially.
pub fn build_blocks(model: &ModelSpec, max_order: u32) -> Result<Vec<GeneratorBlock>, GeneratorError> {
    (1..=max_order).map(|m| build_block(model, m)).collect()
}

/// Builds blocks `B_1 … B_M` on up to `threads` worker threads. Blocks for
/// different `m` are independent and land in fixed slots, so the result is
/// bitwise independent of the schedule.
pub fn build_blocks_parallel(
    model: &ModelSpec,
    max_order: u32,
    threads: usize,
) -> Result<Vec<GeneratorBlock>, GeneratorError> {
    let threads = threads.max(1);
    if threads == 1 || max_order <= 1 {
        return build_blocks(model, max_order);
    }
    let orders: Vec<u32> = (1..=max_order).collect();
    let chunk = orders.len().div_ceil(threads);
    let mut results: Vec<Result<GeneratorBlock, GeneratorError>> =
        Vec::with_capacity(orders.len());
    std::thread::scope(|scope| {
        let handles: Vec<_> = orders
            .chunks(chunk)
            .map(|ms| {
                scope.spawn(move || {
                    ms.iter()
                        .map(|&m| build_block(model, m))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for handle in handles {
            results.extend(handle.join().expect("block builder thread panicked"));
        }
    });
    results.into_iter().collect()
}

/// Hausdorff multiset distance (under optimal pairing) between `eig(B_m)` and
/// the prediction `{Σ_i α_i λ_i : |α| = m}` built from the model spectrum.
pub fn verify_spectrum(block: &GeneratorBlock, summary: &SpectralSummary) -> f64 {
    let lambdas = summary.eigenvalue_list();
    let targets: Vec<Complex<f64>> = block
        .basis
        .iter()
        .map(|alpha| {
            alpha
                .entries()
                .iter()
                .zip(&lambdas)
                .map(|(&a, l)| l * a as f64)
                .sum()
        })
        .collect();
    let mut computed = Vec::new();
    for (z, mult) in block.eigenvalues() {
        for _ in 0..mult {
            computed.push(z);
        }
    }
    bottleneck_distance(&computed, &targets)
}

/// `e^{-B_m t}` through the shared Padé kernel.
pub fn block_exponential(block: &GeneratorBlock, t: f64) -> DMatrix<f64> {
    matrix_exponential(&block.b, t)
}

/// Operator norm of `e^{-B_m t}` in the α!-weighted inner product
/// `⟨u,v⟩_w = Σ α! u_α v_α`, computed as `‖W^{1/2} e^{-B_m t} W^{-1/2}‖₂`
/// with `W = diag(α!)` in basis order.
pub fn weighted_operator_norm(block: &GeneratorBlock, t: f64) -> f64 {
    let e = block_exponential(block, t);
    let side = block.side();
    let sqrt_w: Vec<f64> = block.basis.iter().map(|a| a.factorial().sqrt()).collect();
    let scaled = DMatrix::from_fn(side, side, |i, j| sqrt_w[i] * e[(i, j)] / sqrt_w[j]);
    spectral_norm(&scaled)
}

/// The symmetric-power coefficient vector `c_α = (m!/α!) v^α` on `V_m`.
/// Its α!-weighted squared norm is `m! |v|^{2m}`, and under the block flow it
/// maps to the same construction applied to `e^{-Ct} v`.
pub fn symmetric_power(v: &[f64], m: u32) -> CoeffVector {
    let dim = v.len();
    let m_fact: f64 = (1..=m as u64).map(|k| k as f64).product();
    let mut out = CoeffVector::new(dim);
    for alpha in enumerate_indices(dim, m) {
        let mut mono = 1.0;
        for (vi, &ai) in v.iter().zip(alpha.entries()) {
            mono *= vi.powi(ai as i32);
        }
        let coeff = m_fact / alpha.factorial() * mono;
        out.set(alpha, coeff);
    }
    out
}
