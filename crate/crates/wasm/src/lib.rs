//! Browser bindings for the Fokker-Planck spectral laboratory.
//!
//! Three operations back the demo page in `www/`:
//! - [`validate_model`]: conditions (A)-(C) + spectral summary;
//! - [`witness_f0`]: the extremal initial condition attaining the decay
//!   bound at a chosen time;
//! - [`decay_curves`]: the Fisher information along the flow with the sharp
//!   bound and fitted envelope, plus the block spectrum for plotting.
//!
//! Every function takes and returns JSON strings; errors come back as
//! `{"error": "..."}` so the page needs no exception plumbing.

use fpspec_core::evolution::BlockSet;
use fpspec_core::functionals::{decay_experiment, sharpness_witness, witness_ratio};
use fpspec_core::generator::{build_block, verify_spectrum};
use fpspec_core::hermite::CoeffVector;
use fpspec_core::model::{
    exp_norm, matrices_from_json, spectral_summary, validate, ModelSpec, ValidateError,
};
use serde_json::json;
use wasm_bindgen::prelude::wasm_bindgen;

fn err_json(msg: impl std::fmt::Display) -> String {
    json!({ "error": msg.to_string() }).to_string()
}

fn parse_model(model_json: &str) -> Result<ModelSpec, String> {
    let (c, d) = matrices_from_json(model_json)?;
    match validate(&c, &d) {
        Ok(model) => Ok(model),
        Err(ValidateError::Input(msg)) => Err(msg),
        Err(ValidateError::Invalid(violations)) => Err(format!(
            "invalid model: {}",
            serde_json::to_string(&violations).unwrap()
        )),
    }
}

/// Validates `{"d", "C", "D"}`; returns either the violation list or the
/// spectral summary (eigenvalues, spectral gap `mu`, defect `n`, rank of D).
#[wasm_bindgen]
pub fn validate_model(model_json: &str) -> String {
    let (c, d) = match matrices_from_json(model_json) {
        Ok(pair) => pair,
        Err(e) => return err_json(e),
    };
    match validate(&c, &d) {
        Err(ValidateError::Input(msg)) => err_json(msg),
        Err(ValidateError::Invalid(violations)) => json!({
            "valid": false,
            "violations": violations,
        })
        .to_string(),
        Ok(model) => {
            let summary = spectral_summary(&model);
            let eigenvalues: Vec<_> = summary
                .eigenvalues
                .iter()
                .map(|(z, mult)| json!({"re": z.re, "im": z.im, "multiplicity": mult}))
                .collect();
            json!({
                "valid": true,
                "d": model.dim(),
                "rank_D": model.diffusion_rank(),
                "eigenvalues": eigenvalues,
                "mu": summary.mu,
                "n": summary.defect,
            })
            .to_string()
        }
    }
}

/// Builds the sharpness witness for order `m` at time `t_star` and returns
/// its coefficient list (the `--f0` interchange format) together with the
/// maximizing direction.
#[wasm_bindgen]
pub fn witness_f0(model_json: &str, m: u32, t_star: f64) -> String {
    let model = match parse_model(model_json) {
        Ok(m) => m,
        Err(e) => return err_json(e),
    };
    if !(1..=8).contains(&m) || !t_star.is_finite() || t_star <= 0.0 {
        return err_json("require 1 ≤ m ≤ 8 and finite t* > 0");
    }
    let witness = match sharpness_witness(&model, m, t_star) {
        Ok(w) => w,
        Err(e) => return err_json(e),
    };
    let set = match BlockSet::new(model.clone(), m) {
        Ok(s) => s,
        Err(e) => return err_json(e),
    };
    let ratio = match witness_ratio(&set, &witness, m, t_star) {
        Ok(r) => r,
        Err(e) => return err_json(e),
    };
    json!({
        "f0": serde_json::from_str::<serde_json::Value>(&witness.f0.to_json()).unwrap(),
        "direction": witness.direction,
        "non_unique": witness.non_unique,
        "t_star": t_star,
        "ratio_over_bound": ratio,
    })
    .to_string()
}

/// Runs the decay experiment on a uniform grid and returns, per sample,
/// the Fisher information, the sharp bound `‖e^{-Ct}‖₂^{2m} I₂(f₀)`, and the
/// fitted envelope, plus the spectrum of the generator block `B_m` with its
/// predicted values for the spectrum panel.
#[wasm_bindgen]
pub fn decay_curves(model_json: &str, f0_json: &str, m: u32, t_max: f64, samples: u32) -> String {
    let model = match parse_model(model_json) {
        Ok(m) => m,
        Err(e) => return err_json(e),
    };
    if !(1..=8).contains(&m) || !t_max.is_finite() || t_max <= 0.0 || !(2..=100_000).contains(&samples) {
        return err_json("require 1 ≤ m ≤ 8, finite t_max > 0, 2 ≤ samples ≤ 100000");
    }
    let f0 = match CoeffVector::from_json(f0_json) {
        Ok(f) => f,
        Err(e) => return err_json(e),
    };
    if f0.dim() != model.dim() {
        return err_json("f0 dimension does not match the model");
    }
    let truncation = f0.max_order().max(m);
    let set = match BlockSet::new(model.clone(), truncation) {
        Ok(s) => s,
        Err(e) => return err_json(e),
    };
    let times: Vec<f64> = (0..samples)
        .map(|k| t_max * k as f64 / (samples - 1) as f64)
        .collect();
    let report = match decay_experiment(&set, &f0, m, &times) {
        Ok(r) => r,
        Err(e) => return err_json(e),
    };
    let summary = spectral_summary(&model);

    let block = match build_block(&model, m) {
        Ok(b) => b,
        Err(e) => return err_json(e),
    };
    let spectrum_error = verify_spectrum(&block, &summary);
    let block_eigs: Vec<_> = block
        .eigenvalues()
        .iter()
        .map(|(z, mult)| json!({"re": z.re, "im": z.im, "multiplicity": mult}))
        .collect();

    json!({
        "times": report.times,
        "fisher": report.fisher,
        "bound": report.bound,
        "envelope": report.envelope,
        "m": report.m,
        "fitted_Cm": report.fitted_cm,
        "mu": summary.mu,
        "n": summary.defect,
        "exp_norm_at_1": exp_norm(&model, 1.0),
        "block_spectrum": block_eigs,
        "spectrum_error": spectrum_error,
    })
    .to_string()
}
