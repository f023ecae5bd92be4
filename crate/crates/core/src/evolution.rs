//! Time evolution of Hermite coefficients, plus the independent route to the
//! same solution: the explicit Green's function
//! `G(z,t) = (2π)^{-d/2} det(W(t))^{-1/2} e^{-zᵀW(t)⁻¹z/2}` with covariance
//! `W(t) = 2∫₀ᵗ e^{-Cs} D e^{-Cᵀs} ds`, so that
//! `f(x,t) = ∫ G(x − e^{-Ct}y, t) f₀(y) dy`.
//!
//! The spectral solver is exact per block (blocks do not couple), so the
//! truncation order limits the representable initial data — not the accuracy.

use crate::generator::{block_exponential, build_blocks_parallel, GeneratorBlock, GeneratorError};
use crate::hermite::{gradient_shift, CoeffVector};
use crate::model::{matrix_exponential, ModelSpec};
use crate::quadrature::GaussHermite;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

/// RK4 steps per unit time used by the convenience Lyapunov solver.
pub const LYAPUNOV_STEPS_PER_UNIT: usize = 1000;

/// Green's evaluation refuses times where `cond(W(t))` exceeds this.
pub const GREENS_COND_LIMIT: f64 = 1e12;

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error("target time {target} is before the state time {current}")]
    TimeBackward { current: f64, target: f64 },
    #[error("no generator block of order {order}; rebuild with a larger truncation")]
    MissingBlock { order: u32 },
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error("covariance lost positivity at t={t}: min eigenvalue {min_eig:e} (step size too large)")]
    IndefiniteCovariance { t: f64, min_eig: f64 },
    #[error(
        "W(t) too degenerate at t={t} (cond > {limit:e}); smallest safe time ≈ {smallest_safe}"
    )]
    DegenerateTime {
        t: f64,
        limit: f64,
        smallest_safe: f64,
    },
}

/// A model together with its generator blocks up to a truncation order.
/// Propagation is exact for data supported on `|α| ≤ max_order`.
#[derive(Debug, Clone)]
pub struct BlockSet {
    model: ModelSpec,
    blocks: Vec<GeneratorBlock>,
}

impl BlockSet {
    pub fn new(model: ModelSpec, max_order: u32) -> Result<Self, GeneratorError> {
        Self::with_threads(model, max_order, 1)
    }

    /// Builds the blocks on up to `threads` workers (deterministic result).
    pub fn with_threads(
        model: ModelSpec,
        max_order: u32,
        threads: usize,
    ) -> Result<Self, GeneratorError> {
        let blocks = build_blocks_parallel(&model, max_order, threads)?;
        Ok(BlockSet { model, blocks })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn max_order(&self) -> u32 {
        self.blocks.len() as u32
    }

    pub fn block(&self, m: u32) -> Option<&GeneratorBlock> {
        if m == 0 {
            return None;
        }
        self.blocks.get(m as usize - 1)
    }
}

/// A coefficient vector at a point in time.
#[derive(Debug, Clone)]
pub struct SpectralState {
    pub t: f64,
    pub coeffs: CoeffVector,
}

impl SpectralState {
    pub fn initial(coeffs: CoeffVector) -> Self {
        SpectralState { t: 0.0, coeffs }
    }
}

/// Advances the state to `t_target`: per order, `d^{(m)} ← e^{-B_m Δt} d^{(m)}`;
/// the mass coefficient `d₀` is untouched (conservation).
pub fn propagate(
    set: &BlockSet,
    state: &SpectralState,
    t_target: f64,
) -> Result<SpectralState, EvolutionError> {
    if t_target < state.t {
        return Err(EvolutionError::TimeBackward {
            current: state.t,
            target: t_target,
        });
    }
    let needed = state.coeffs.max_order();
    if needed > set.max_order() {
        return Err(EvolutionError::MissingBlock { order: needed });
    }
    let dt = t_target - state.t;
    let mut coeffs = state.coeffs.clone();
    for m in 1..=needed {
        let block = set.block(m).expect("order checked above");
        let current = coeffs.block_vector(block.basis());
        if current.amax() == 0.0 {
            continue;
        }
        let advanced = block_exponential(block, dt) * current;
        coeffs.set_block(block.basis(), &advanced);
    }
    Ok(SpectralState {
        t: t_target,
        coeffs,
    })
}

/// The flux coefficient vectors `J_j/f_∞ = ∂_j f + x_j f`, `j = 1..d`.
pub fn flux_j(state: &SpectralState) -> Vec<CoeffVector> {
    (0..state.coeffs.dim())
        .map(|j| gradient_shift(&state.coeffs, j))
        .collect()
}

/// The covariance `W(t)` of the Green's function.
#[derive(Debug, Clone)]
pub struct LyapunovCovariance {
    pub t: f64,
    pub w: DMatrix<f64>,
}

/// Integrates the differential Lyapunov equation
/// `Ẇ = 2D − C W − W Cᵀ`, `W(0) = 0`, with classical RK4 at uniform step
/// `t/steps`, symmetrizing after every step. Fails if an eigenvalue of `W`
/// drops below −1e-10.
pub fn solve_lyapunov(
    model: &ModelSpec,
    t: f64,
    steps: usize,
) -> Result<LyapunovCovariance, EvolutionError> {
    assert!(t >= 0.0, "time must be nonnegative");
    assert!(steps >= 1, "at least one step required");
    let d = model.dim();
    let c = model.drift();
    let two_d = model.diffusion() * 2.0;
    let rhs = |w: &DMatrix<f64>| -> DMatrix<f64> { &two_d - c * w - w * c.transpose() };
    let h = t / steps as f64;
    let mut w = DMatrix::<f64>::zeros(d, d);
    let mut time = 0.0;
    for _ in 0..steps {
        let k1 = rhs(&w);
        let k2 = rhs(&(&w + &k1 * (h / 2.0)));
        let k3 = rhs(&(&w + &k2 * (h / 2.0)));
        let k4 = rhs(&(&w + &k3 * h));
        w += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        w = (&w + &w.transpose()) * 0.5;
        time += h;
        let min_eig = SymmetricEigen::new(w.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-10 {
            return Err(EvolutionError::IndefiniteCovariance { t: time, min_eig });
        }
    }
    Ok(LyapunovCovariance { t, w })
}

/// `W(t)` at the default resolution of 1000 RK4 steps per unit time.
pub fn lyapunov_covariance(model: &ModelSpec, t: f64) -> Result<LyapunovCovariance, EvolutionError> {
    let steps = ((t * LYAPUNOV_STEPS_PER_UNIT as f64).ceil() as usize).max(1);
    solve_lyapunov(model, t, steps)
}

fn condition_number(w: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(w.clone());
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Smallest time (searched on a geometric grid from `from`) at which the
/// Green's kernel is safely invertible, reported in degenerate-time errors.
pub fn smallest_safe_time(model: &ModelSpec, from: f64) -> f64 {
    let mut t = from.max(1e-6);
    for _ in 0..80 {
        if let Ok(cov) = lyapunov_covariance(model, t) {
            if condition_number(&cov.w) <= GREENS_COND_LIMIT {
                return t;
            }
        }
        t *= 1.3;
    }
    t
}

/// Evaluator for the Green's-function solution with polynomial-times-Gaussian
/// initial data `f₀ = P·f_∞`.
///
/// The product `G(x − Ey, t) f_∞(y)` is itself a Gaussian in `y`; completing
/// the square analytically leaves `P` as the only non-Gaussian factor, so
/// tensor Gauss–Hermite quadrature in the transformed variable is exact once
/// `quad_order > degree(P)/2`.
#[derive(Debug)]
pub struct GreensEvaluator {
    dim: usize,
    /// `e^{-Ct}`
    e: DMatrix<f64>,
    /// `W(t)⁻¹`
    w_inv: DMatrix<f64>,
    /// `A = Eᵀ W⁻¹ E + I`
    a: DMatrix<f64>,
    /// Cholesky factor `L` with `L Lᵀ = A⁻¹`
    l: DMatrix<f64>,
    /// `(2π)^{-d/2} det(W)^{-1/2} det(L)`
    prefactor: f64,
    quad: GaussHermite,
}

impl GreensEvaluator {
    pub fn new(model: &ModelSpec, t: f64, quad_order: usize) -> Result<Self, EvolutionError> {
        assert!(quad_order >= 1);
        let dim = model.dim();
        if t <= 0.0 {
            return Err(EvolutionError::DegenerateTime {
                t,
                limit: GREENS_COND_LIMIT,
                smallest_safe: smallest_safe_time(model, 1e-6),
            });
        }
        let cov = lyapunov_covariance(model, t)?;
        let det_w = cov.w.determinant();
        if det_w.is_nan() || det_w <= 1e-300 || condition_number(&cov.w) > GREENS_COND_LIMIT {
            return Err(EvolutionError::DegenerateTime {
                t,
                limit: GREENS_COND_LIMIT,
                smallest_safe: smallest_safe_time(model, t),
            });
        }
        let e = matrix_exponential(model.drift(), t);
        let w_chol = cov
            .w
            .clone()
            .cholesky()
            .expect("W is SPD within the condition limit");
        let w_inv = w_chol.inverse();
        let a = e.transpose() * &w_inv * &e + DMatrix::<f64>::identity(dim, dim);
        let a_inv = a
            .clone()
            .cholesky()
            .expect("A = EᵀW⁻¹E + I is SPD")
            .inverse();
        let l = a_inv
            .cholesky()
            .expect("A⁻¹ is SPD")
            .l();
        let det_l = (0..dim).map(|i| l[(i, i)]).product::<f64>();
        let prefactor =
            (2.0 * std::f64::consts::PI).powf(-(dim as f64) / 2.0) / det_w.sqrt() * det_l;
        Ok(GreensEvaluator {
            dim,
            e,
            w_inv,
            a,
            l,
            prefactor,
            quad: GaussHermite::new(quad_order),
        })
    }

    /// Warns when the rule cannot integrate `P` exactly
    /// (`quad_order < degree(P)/2 + 1`).
    pub fn accuracy_warning(&self, f0: &CoeffVector) -> Option<String> {
        let deg = f0.max_order() as usize;
        if self.quad.len() < deg / 2 + 1 {
            Some(format!(
                "quad_order {} is below degree({})/2 + 1; quadrature no longer exact",
                self.quad.len(),
                deg
            ))
        } else {
            None
        }
    }

    /// `f(x, t) = ∫ G(x − e^{-Ct} y, t) f₀(y) dy`.
    pub fn eval(&self, f0: &CoeffVector, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim);
        assert_eq!(f0.dim(), self.dim);
        let xv = DVector::from_column_slice(x);
        // complete the square: exponent −½[(y−μ)ᵀA(y−μ) + xᵀW⁻¹x − μᵀAμ]
        let b = self.e.transpose() * &self.w_inv * &xv;
        let mu = self
            .a
            .clone()
            .cholesky()
            .expect("A is SPD")
            .solve(&b);
        let quad_form = (xv.transpose() * &self.w_inv * &xv)[(0, 0)]
            - (mu.transpose() * &self.a * &mu)[(0, 0)];
        let scale = self.prefactor * (-0.5 * quad_form).exp();

        // E_Φ[P(μ + Lv)] over the standard Gaussian, exact for polynomials.
        let mean = self.quad.integrate(self.dim, |v| {
            let vv = DVector::from_column_slice(v);
            let y = &mu + &self.l * vv;
            poly_eval(f0, y.as_slice())
        });
        scale * mean
    }
}

/// Evaluates the polynomial profile `P(y) = Σ d_α H_α(y)` (no Gaussian
/// factor) from a coefficient vector, via the univariate Hermite recurrence.
fn poly_eval(f: &CoeffVector, y: &[f64]) -> f64 {
    let d = f.dim();
    let max_deg = f
        .iter()
        .map(|(a, _)| a.entries().iter().copied().max().unwrap_or(0))
        .max()
        .unwrap_or(0) as usize;
    let mut he = vec![vec![0.0; max_deg + 1]; d];
    for i in 0..d {
        he[i][0] = 1.0;
        if max_deg >= 1 {
            he[i][1] = y[i];
        }
        for k in 1..max_deg {
            he[i][k + 1] = y[i] * he[i][k] - k as f64 * he[i][k - 1];
        }
    }
    f.iter()
        .map(|(alpha, v)| {
            let mut h = v;
            for (i, &ai) in alpha.entries().iter().enumerate() {
                h *= he[i][ai as usize];
            }
            h
        })
        .sum()
}

/// One-shot convenience wrapper around [`GreensEvaluator`].
pub fn greens_evaluate(
    model: &ModelSpec,
    f0: &CoeffVector,
    x: &[f64],
    t: f64,
    quad_order: usize,
) -> Result<f64, EvolutionError> {
    Ok(GreensEvaluator::new(model, t, quad_order)?.eval(f0, x))
}
