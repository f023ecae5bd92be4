//! Entropy and Fisher-information functionals on coefficient vectors, the
//! sharp decay bound, and the extremal initial condition attaining it.
//!
//! With `f = Σ d_α h_α`:
//! - `e₂(f|f_∞) = ½ Σ_{|α|≥1} α! d_α²`;
//! - `I₂(f|f_∞) = Σ_k k Σ_{|α|=k} α! d_α²`, which equals the squared weighted
//!   norm of the flux `Σ_j ‖∂_j f + x_j f‖²_w` (both routes implemented);
//! - for `f₀ ⊥ ⊕_{k<m} V_k`:
//!   `I₂(f(t)) ≤ ‖e^{-Ct}‖₂^{2m} I₂(f₀) ≤ C_m (1+t)^{2nm} e^{-2mμt} I₂(f₀)`.

use crate::evolution::{propagate, BlockSet, EvolutionError, SpectralState};
use crate::hermite::{gradient_shift, CoeffVector};
use crate::model::{
    envelope_from_summary, exp_norm, matrix_exponential, spectral_summary, ModelSpec,
    SpectralSummary,
};
use nalgebra::{DMatrix, SymmetricEigen};
use serde_json::json;
use thiserror::Error;

/// Relative slack allowed when asserting the decay-bound invariants
/// (floating-point headroom only; the bound itself is sharp).
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FunctionalsError {
    #[error("P is not symmetric positive definite: {0}")]
    NotSpd(String),
    #[error("f0 is not orthogonal to ⊕_{{k<{m}}}V_k: nonzero coefficients at {offending:?}")]
    SupportViolation {
        m: u32,
        offending: Vec<Vec<u32>>,
    },
    #[error(
        "decay bound violated at sample {index} (t={t}): fisher {fisher} > bound {bound}; \
         this signals an implementation bug"
    )]
    BoundViolation {
        index: usize,
        t: f64,
        fisher: f64,
        bound: f64,
    },
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
}

/// The 2-entropy `e₂(f|f_∞) = ½ Σ_{|α|≥1} α! d_α²`. The mass coefficient is
/// ignored, so the formula serves both unit-mass inputs (`d₀ = 1`) and pure
/// deviations (`d₀ = 0`).
pub fn entropy_e2(f: &CoeffVector) -> f64 {
    0.5 * f
        .iter()
        .filter(|(a, _)| a.order() >= 1)
        .map(|(a, v)| a.factorial() * v * v)
        .sum::<f64>()
}

/// The quadratic Fisher information `I₂ = Σ_k k Σ_{|α|=k} α! d_α²`
/// (coefficient route).
pub fn fisher_i2(f: &CoeffVector) -> f64 {
    f.iter()
        .map(|(a, v)| a.order() as f64 * a.factorial() * v * v)
        .sum()
}

/// The same functional through the flux route `Σ_j ‖∂_j f + x_j f‖²_w`;
/// kept as an independent algebraic path for cross-checks.
pub fn fisher_i2_flux(f: &CoeffVector) -> f64 {
    (0..f.dim())
        .map(|j| gradient_shift(f, j).weighted_norm_sq())
        .sum()
}

fn weighted_inner(u: &CoeffVector, v: &CoeffVector) -> f64 {
    u.iter().map(|(a, x)| a.factorial() * x * v.get(a)).sum()
}

/// The anisotropic Fisher information
/// `I₂^P = Σ_{ij} P_ij ⟨J_i, J_j⟩_w`, requiring `P` symmetric positive
/// definite.
pub fn fisher_ip(f: &CoeffVector, p: &DMatrix<f64>) -> Result<f64, FunctionalsError> {
    let d = f.dim();
    if p.nrows() != d || p.ncols() != d {
        return Err(FunctionalsError::NotSpd(format!(
            "expected a {d}×{d} matrix, got {}×{}",
            p.nrows(),
            p.ncols()
        )));
    }
    let asym = (p - p.transpose()).amax();
    if asym > 1e-12 {
        return Err(FunctionalsError::NotSpd(format!(
            "asymmetry {asym:e} exceeds 1e-12"
        )));
    }
    let min_eig = SymmetricEigen::new((p + p.transpose()) * 0.5)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min_eig <= 0.0 {
        return Err(FunctionalsError::NotSpd(format!(
            "minimum eigenvalue {min_eig:e} is not positive"
        )));
    }
    let flux: Vec<CoeffVector> = (0..d).map(|j| gradient_shift(f, j)).collect();
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            if p[(i, j)] != 0.0 {
                acc += p[(i, j)] * weighted_inner(&flux[i], &flux[j]);
            }
        }
    }
    Ok(acc)
}

/// Sampled decay data: the Fisher information along the flow, the sharp bound
/// `‖e^{-Ct}‖₂^{2m} I₂(f₀)`, and the envelope
/// `C_m (1+t)^{2nm} e^{-2mμt} I₂(f₀)` with the fitted constant.
#[derive(Debug, Clone)]
pub struct DecayReport {
    pub times: Vec<f64>,
    pub fisher: Vec<f64>,
    pub bound: Vec<f64>,
    pub envelope: Vec<f64>,
    pub m: u32,
    pub fitted_cm: f64,
}

impl DecayReport {
    /// CSV with columns `t,fisher,bound,envelope`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,fisher,bound,envelope\n");
        for i in 0..self.times.len() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                self.times[i], self.fisher[i], self.bound[i], self.envelope[i]
            ));
        }
        out
    }

    /// JSON variant with metadata `{model hash, m, mu, n, fitted_Cm}`.
    pub fn to_json(&self, model: &ModelSpec, summary: &SpectralSummary) -> serde_json::Value {
        json!({
            "model_hash": model.content_hash(),
            "m": self.m,
            "mu": summary.mu,
            "n": summary.defect,
            "fitted_Cm": self.fitted_cm,
            "times": self.times,
            "fisher": self.fisher,
            "bound": self.bound,
            "envelope": self.envelope,
        })
    }
}

/// Checks that `f0 ⊥ ⊕_{k<m} V_k`: no stored coefficient with `0 < |α| < m`.
fn check_support(f0: &CoeffVector, m: u32) -> Result<(), FunctionalsError> {
    let offending: Vec<Vec<u32>> = f0
        .iter()
        .filter(|(a, _)| {
            let k = a.order();
            k > 0 && k < m
        })
        .map(|(a, _)| a.entries().to_vec())
        .collect();
    if offending.is_empty() {
        Ok(())
    } else {
        Err(FunctionalsError::SupportViolation { m, offending })
    }
}

/// Propagates `f0` (orthogonal to `⊕_{k<m} V_k`) over the sample times and
/// assembles the decay report, asserting its invariants
/// `fisher ≤ bound·(1+1e-9)` and `bound ≤ envelope·(1+1e-9)`.
pub fn decay_experiment(
    set: &BlockSet,
    f0: &CoeffVector,
    m: u32,
    times: &[f64],
) -> Result<DecayReport, FunctionalsError> {
    assert!(m >= 1, "vanishing order m must be at least 1");
    check_support(f0, m)?;
    let model = set.model();
    let summary = spectral_summary(model);
    let fisher0 = fisher_i2(f0);

    let mut state = SpectralState::initial(f0.clone());
    let mut fisher = Vec::with_capacity(times.len());
    let mut bound = Vec::with_capacity(times.len());
    for &t in times {
        state = propagate(set, &state, t)?;
        fisher.push(fisher_i2(&state.coeffs));
        bound.push(exp_norm(model, t).powi(2 * m as i32) * fisher0);
    }

    // smallest constant making the envelope dominate the bound on the grid
    let fitted_cm = if fisher0 > 0.0 {
        times
            .iter()
            .zip(&bound)
            .map(|(&t, &b)| b / (envelope_from_summary(&summary, m, t, 1.0) * fisher0))
            .fold(0.0, f64::max)
    } else {
        1.0
    };
    let envelope: Vec<f64> = times
        .iter()
        .map(|&t| envelope_from_summary(&summary, m, t, fitted_cm) * fisher0)
        .collect();

    for i in 0..times.len() {
        if fisher[i] > bound[i] * (1.0 + BOUND_SLACK) {
            return Err(FunctionalsError::BoundViolation {
                index: i,
                t: times[i],
                fisher: fisher[i],
                bound: bound[i],
            });
        }
        debug_assert!(bound[i] <= envelope[i] * (1.0 + BOUND_SLACK));
    }

    Ok(DecayReport {
        times: times.to_vec(),
        fisher,
        bound,
        envelope,
        m,
        fitted_cm,
    })
}

/// An extremal initial condition for the decay bound.
#[derive(Debug, Clone)]
pub struct SharpnessWitness {
    /// `f₀ = f_∞ + Σ_{|α|=m} (m!/α!) v^α h_α`.
    pub f0: CoeffVector,
    /// The maximizing direction `v` (top right singular vector of `e^{-Ct*}`).
    pub direction: Vec<f64>,
    /// Set when the top singular pair is degenerate (any maximizer returned).
    pub non_unique: bool,
}

/// Builds the initial condition in `V_m` whose Fisher information attains
/// `‖e^{-Ct*}‖₂^{2m} I₂(f₀)` at `t = t*`: the symmetric power of the top
/// right singular vector of `e^{-Ct*}`. The weighted norm of the symmetric
/// power is `m! |v|^{2m}` and the block flow maps `v ↦ e^{-Ct}v` inside the
/// power, so the ratio at `t*` is exactly the squared top singular value to
/// the m-th power.
pub fn sharpness_witness(
    model: &ModelSpec,
    m: u32,
    t_star: f64,
) -> Result<SharpnessWitness, FunctionalsError> {
    assert!(m >= 1, "m must be at least 1");
    assert!(t_star > 0.0, "t_star must be positive");
    let e = matrix_exponential(model.drift(), t_star);
    let svd = e.svd(false, true);
    let mut sv: Vec<(f64, usize)> = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();
    sv.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let non_unique = sv.len() > 1 && (sv[0].0 - sv[1].0) < 1e-12;
    let v_t = svd.v_t.expect("right singular vectors requested");
    let v: Vec<f64> = v_t.row(sv[0].1).iter().copied().collect();

    let mut f0 = CoeffVector::equilibrium(model.dim());
    let power = crate::generator::symmetric_power(&v, m);
    f0.add_scaled(&power, 1.0);
    Ok(SharpnessWitness {
        f0,
        direction: v,
        non_unique,
    })
}

/// Convenience check of the witness contract: the Fisher ratio at `t*`
/// relative to the bound `exp_norm(t*)^{2m}`.
pub fn witness_ratio(
    set: &BlockSet,
    witness: &SharpnessWitness,
    m: u32,
    t_star: f64,
) -> Result<f64, FunctionalsError> {
    let state = SpectralState::initial(witness.f0.clone());
    let out = propagate(set, &state, t_star)?;
    let ratio = fisher_i2(&out.coeffs) / fisher_i2(&witness.f0);
    let bound = exp_norm(set.model(), t_star).powi(2 * m as i32);
    Ok(ratio / bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::MultiIndex;
    use crate::presets;

    fn idx(e: &[u32]) -> MultiIndex {
        MultiIndex::new(e.to_vec())
    }

    #[test]
    fn entropy_examples() {
        let f = CoeffVector::equilibrium(2);
        assert_eq!(entropy_e2(&f), 0.0);

        let mut f = CoeffVector::equilibrium(2);
        f.set(idx(&[1, 0]), 1.0);
        assert_eq!(entropy_e2(&f), 0.5);

        let mut f = CoeffVector::equilibrium(2);
        f.set(idx(&[2, 0]), 1.0);
        assert_eq!(entropy_e2(&f), 1.0); // ½ · 2! · 1²
    }

    #[test]
    fn fisher_examples_and_route_agreement() {
        let f = CoeffVector::equilibrium(2);
        assert_eq!(fisher_i2(&f), 0.0);

        let mut f = CoeffVector::equilibrium(2);
        f.set(idx(&[1, 0]), 1.0);
        assert_eq!(fisher_i2(&f), 1.0);

        let mut f = CoeffVector::equilibrium(2);
        f.set(idx(&[2, 0]), 1.0);
        assert_eq!(fisher_i2(&f), 4.0); // k=2, α!=2
        assert_eq!(fisher_i2_flux(&f), 4.0); // ‖2 h_(1,0)‖²_w = 4
    }

    #[test]
    fn fisher_ip_examples() {
        let mut f = CoeffVector::equilibrium(2);
        f.set(idx(&[1, 1]), 0.5);
        f.set(idx(&[3, 0]), -0.25);
        let id = DMatrix::<f64>::identity(2, 2);
        let i2 = fisher_i2(&f);
        assert!((fisher_ip(&f, &id).unwrap() - i2).abs() < 1e-12);
        assert!((fisher_ip(&f, &(id * 2.0)).unwrap() - 2.0 * i2).abs() < 1e-12);

        let bad = nalgebra::dmatrix![1.0, 0.0; 0.0, -1.0];
        assert!(matches!(
            fisher_ip(&f, &bad),
            Err(FunctionalsError::NotSpd(_))
        ));
    }

    #[test]
    fn ou_decay_is_exact() {
        // OU with f₀ = f_∞ + h_α, |α| = m: fisher(t)/fisher(0) = e^{-2mt},
        // which meets the bound with equality.
        let model = presets::ou(2);
        let set = BlockSet::new(model, 4).unwrap();
        for m in 1..=4u32 {
            let mut f0 = CoeffVector::equilibrium(2);
            f0.set(idx(&[m, 0]), 1.0);
            let times: Vec<f64> = (0..50).map(|k| 3.0 * k as f64 / 49.0).collect();
            let report = decay_experiment(&set, &f0, m, &times).unwrap();
            let fisher0 = report.fisher[0];
            for (i, &t) in times.iter().enumerate() {
                let want = fisher0 * (-2.0 * m as f64 * t).exp();
                assert!(
                    (report.fisher[i] - want).abs() <= 1e-10 * fisher0,
                    "OU decay not exact at m={m}, t={t}"
                );
                assert!((report.bound[i] - want).abs() <= 1e-10 * fisher0);
            }
        }
    }

    #[test]
    fn decay_report_invariants_on_kinetic_model() {
        let model = presets::kinetic();
        let set = BlockSet::new(model, 3).unwrap();
        let mut f0 = CoeffVector::equilibrium(2);
        f0.set(idx(&[1, 0]), 0.7);
        f0.set(idx(&[0, 1]), -0.2);
        f0.set(idx(&[2, 1]), 0.1);
        let times: Vec<f64> = (0..50).map(|k| 10.0 * k as f64 / 49.0).collect();
        let report = decay_experiment(&set, &f0, 1, &times).unwrap();
        for i in 0..times.len() {
            assert!(report.fisher[i] <= report.bound[i] * (1.0 + BOUND_SLACK));
            assert!(report.bound[i] <= report.envelope[i] * (1.0 + BOUND_SLACK));
        }
        assert!(report.fitted_cm >= 1.0 - 1e-12); // at t = 0 bound = envelope/Cm
    }

    #[test]
    fn decay_rejects_inconsistent_support() {
        let model = presets::kinetic();
        let set = BlockSet::new(model, 3).unwrap();
        let mut f0 = CoeffVector::equilibrium(2);
        f0.set(idx(&[1, 0]), 0.5);
        f0.set(idx(&[0, 2]), 0.5);
        match decay_experiment(&set, &f0, 2, &[0.0, 1.0]) {
            Err(FunctionalsError::SupportViolation { m: 2, offending }) => {
                assert_eq!(offending, vec![vec![1, 0]]);
            }
            other => panic!("expected support violation, got {other:?}"),
        }
    }

    #[test]
    fn steady_state_report_is_zero() {
        let model = presets::kinetic();
        let set = BlockSet::new(model, 2).unwrap();
        let f0 = CoeffVector::equilibrium(2);
        let report = decay_experiment(&set, &f0, 1, &[0.0, 0.5, 1.0]).unwrap();
        assert!(report.fisher.iter().all(|&x| x == 0.0));
        assert!(report.bound.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sharpness_witness_attains_bound() {
        for (name, model) in [("kinetic", presets::kinetic()), ("defective", presets::defective())]
        {
            let set = BlockSet::new(model.clone(), 3).unwrap();
            for m in 1..=3u32 {
                let witness = sharpness_witness(&model, m, 1.0).unwrap();
                let ratio = witness_ratio(&set, &witness, m, 1.0).unwrap();
                assert!(
                    (ratio - 1.0).abs() <= 1e-6,
                    "{name}: witness ratio/bound = {ratio} at m={m}"
                );
            }
        }
    }

    #[test]
    fn isotropic_witness_is_flagged_non_unique() {
        let model = presets::ou(2);
        let witness = sharpness_witness(&model, 2, 0.7).unwrap();
        assert!(witness.non_unique);
        let set = BlockSet::new(model, 2).unwrap();
        let ratio = witness_ratio(&set, &witness, 2, 0.7).unwrap();
        assert!((ratio - 1.0).abs() <= 1e-9); // any unit direction works
    }

    #[test]
    fn fisher_is_monotone_along_the_flow() {
        // consequence of the bound with m ≥ 1 and exp_norm ≤ 1
        for (name, model) in presets::all() {
            let set = BlockSet::new(model, 3).unwrap();
            let mut f0 = CoeffVector::equilibrium(2);
            f0.set(idx(&[1, 0]), 0.4);
            f0.set(idx(&[0, 2]), -0.6);
            f0.set(idx(&[2, 1]), 0.3);
            let mut state = SpectralState::initial(f0);
            let mut prev = fisher_i2(&state.coeffs);
            for k in 1..=40 {
                let t = 0.25 * k as f64;
                state = propagate(&set, &state, t).unwrap();
                let now = fisher_i2(&state.coeffs);
                assert!(
                    now <= prev * (1.0 + 1e-12) + 1e-15,
                    "{name}: Fisher increased at t={t}"
                );
                prev = now;
            }
        }
    }

    #[test]
    fn csv_and_json_serialization() {
        let model = presets::kinetic();
        let summary = spectral_summary(&model);
        let set = BlockSet::new(model.clone(), 1).unwrap();
        let mut f0 = CoeffVector::equilibrium(2);
        f0.set(idx(&[1, 0]), 1.0);
        let report = decay_experiment(&set, &f0, 1, &[0.0, 1.0]).unwrap();
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,fisher,bound,envelope");
        assert_eq!(csv.lines().count(), 3);
        // 17 significant digits round-trip
        let first_data: Vec<f64> = csv
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .map(|x| x.parse().unwrap())
            .collect();
        assert_eq!(first_data[1], report.fisher[0]);

        let v = report.to_json(&model, &summary);
        assert_eq!(v["m"], 1);
        assert_eq!(v["model_hash"], model.content_hash());
        assert!((v["mu"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    }
}
