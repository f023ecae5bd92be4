//! Named example models used across tests, the CLI documentation, and the
//! browser demo.

use crate::model::{validate, ModelSpec};
use nalgebra::{dmatrix, DMatrix};

/// Isotropic Ornstein–Uhlenbeck model: `C = D = I_d`.
pub fn ou(d: usize) -> ModelSpec {
    let id = DMatrix::<f64>::identity(d, d);
    validate(&id, &id).expect("identity model is valid")
}

/// Kinetic-type model with degenerate diffusion:
/// `C = [[0,−1],[1,1]]`, `D = diag(0,1)`; eigenvalues `1/2 ± i√3/2`.
pub fn kinetic() -> ModelSpec {
    let c = dmatrix![0.0, -1.0; 1.0, 1.0];
    let d = dmatrix![0.0, 0.0; 0.0, 1.0];
    validate(&c, &d).expect("kinetic model is valid")
}

/// Defective model: `C = [[1,1/2],[−1/2,0]]`, `D = diag(1,0)`;
/// double eigenvalue `1/2` with a single Jordan block (defect 1).
pub fn defective() -> ModelSpec {
    let c = dmatrix![1.0, 0.5; -0.5, 0.0];
    let d = dmatrix![1.0, 0.0; 0.0, 0.0];
    validate(&c, &d).expect("defective model is valid")
}

/// The three standard test models.
pub fn all() -> Vec<(&'static str, ModelSpec)> {
    vec![("ou", ou(2)), ("kinetic", kinetic()), ("defective", defective())]
}
