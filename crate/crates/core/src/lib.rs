//! Spectral laboratory for degenerate Fokker-Planck equations
//! `∂_t f = div(D ∇f + C x f)` in normalized form (`D` diagonal, `D = (C + Cᵀ)/2`).
//!
//! The equation decomposes over the Hermite spaces `V_m = span{h_α : |α| = m}`,
//! where `h_α = (−1)^{|α|} ∂^α f_∞` and `f_∞` is the standard Gaussian. On each
//! `V_m` the coefficient flow is a linear ODE `ḋ = −B_m d` whose matrix is built
//! here by exact symbolic calculus. On top of that the crate computes the
//! 2-entropy, the quadratic Fisher information
//! `I₂ = Σ_k k Σ_{|α|=k} α! d_α²`, the sharp decay bound
//! `I₂(f(t)) ≤ ‖e^{-Ct}‖₂^{2m} I₂(f₀)` for data orthogonal to `⊕_{k<m} V_k`,
//! the `C_m (1+t)^{2nm} e^{-2mμt}` envelope, and an extremal initial condition
//! that attains the bound at a chosen time.
//!
//! Module map:
//! - [`model`]: the validated drift/diffusion pair, spectra, matrix exponentials.
//! - [`hermite`]: exact multi-index Hermite calculus and coefficient vectors.
//! - [`generator`]: the finite blocks `B_m` and their spectra.
//! - [`evolution`]: spectral propagation plus the Green's-function oracle.
//! - [`functionals`]: entropy, Fisher information, decay reports, sharpness.
//!
//! End-to-end, on the kinetic-type model with rank-one diffusion:
//!
//! ```
//! use fpspec_core::evolution::BlockSet;
//! use fpspec_core::functionals::{decay_experiment, sharpness_witness, witness_ratio};
//! use fpspec_core::model::{spectral_summary, validate};
//! use nalgebra::dmatrix;
//!
//! let c = dmatrix![0.0, -1.0; 1.0, 1.0];
//! let d = dmatrix![0.0, 0.0; 0.0, 1.0];
//! let model = validate(&c, &d).expect("conditions (A)-(C) hold");
//! assert!((spectral_summary(&model).mu - 0.5).abs() < 1e-12);
//!
//! // extremal data in V_2 whose Fisher curve touches the bound at t* = 1
//! let witness = sharpness_witness(&model, 2, 1.0).unwrap();
//! let set = BlockSet::new(model, 2).unwrap();
//! let report = decay_experiment(&set, &witness.f0, 2, &[0.0, 0.5, 1.0]).unwrap();
//! assert!(report.fisher.iter().zip(&report.bound).all(|(f, b)| f <= &(b * (1.0 + 1e-9))));
//! let ratio = witness_ratio(&set, &witness, 2, 1.0).unwrap();
//! assert!((ratio - 1.0).abs() < 1e-9);
//! ```

pub mod evolution;
pub mod functionals;
pub mod generator;
pub mod hermite;
pub mod linalg;
pub mod model;
pub mod poly;
pub mod presets;
pub mod quadrature;

pub use hermite::{CoeffVector, MultiIndex};
pub use model::{ModelSpec, SpectralSummary};
