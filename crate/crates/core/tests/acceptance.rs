//! Acceptance suite: every numbered criterion below runs at its stated
//! tolerance and prints one PASS/FAIL line. Run with
//! `cargo test --test acceptance -- --nocapture` to see the lines.

use fpspec_core::evolution::{
    lyapunov_covariance, propagate, solve_lyapunov, BlockSet, GreensEvaluator, SpectralState,
};
use fpspec_core::functionals::{
    decay_experiment, fisher_i2, fisher_i2_flux, fisher_ip, sharpness_witness, witness_ratio,
};
use fpspec_core::generator::{build_block, verify_spectrum, weighted_operator_norm};
use fpspec_core::hermite::{
    enumerate_indices, hermite_combination_f64, reconstruct, CoeffVector, MultiIndex,
};
use fpspec_core::model::{exp_norm, spectral_summary};
use fpspec_core::presets;
use fpspec_core::quadrature::GaussHermite;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn criterion(number: u32, name: &str, body: impl FnOnce() -> Result<(), String>) {
    match body() {
        Ok(()) => println!("[acceptance] criterion {number:02} ({name}): PASS"),
        Err(msg) => {
            println!("[acceptance] criterion {number:02} ({name}): FAIL — {msg}");
            panic!("criterion {number} ({name}) failed: {msg}");
        }
    }
}

fn idx(e: &[u32]) -> MultiIndex {
    MultiIndex::new(e.to_vec())
}

fn uniform_grid(t_max: f64, samples: usize) -> Vec<f64> {
    (0..samples)
        .map(|k| t_max * k as f64 / (samples - 1) as f64)
        .collect()
}

/// Criterion 1 — OU exactness: for C = D = I₂ and f₀ = f_∞ + h_α with
/// |α| = m ∈ {1,2,3,4}, I₂(f(t))/I₂(f₀) = e^{-2mt} within 1e-8 at 50
/// uniform t ∈ [0, 3].
#[test]
fn c01_ou_exactness() {
    criterion(1, "ou-exactness", || {
        let set = BlockSet::new(presets::ou(2), 4).map_err(|e| e.to_string())?;
        let times = uniform_grid(3.0, 50);
        for m in 1..=4u32 {
            for alpha in enumerate_indices(2, m) {
                let mut f0 = CoeffVector::equilibrium(2);
                f0.set(alpha.clone(), 1.0);
                let report =
                    decay_experiment(&set, &f0, m, &times).map_err(|e| e.to_string())?;
                let fisher0 = report.fisher[0];
                for (i, &t) in times.iter().enumerate() {
                    let got = report.fisher[i] / fisher0;
                    let want = (-2.0 * m as f64 * t).exp();
                    if (got - want).abs() > 1e-8 {
                        return Err(format!(
                            "ratio {got} vs e^(-2mt) {want} at m={m}, α={alpha:?}, t={t}"
                        ));
                    }
                }
            }
        }
        Ok(())
    });
}

/// Criterion 2 — main decay bound on the kinetic model: 20 random f₀
/// supported on ⊕_{k≥m}V_k (m ∈ {1,2,3}, truncation 5) satisfy
/// I₂(f(t)) ≤ ‖e^{-Ct}‖₂^{2m} I₂(f₀) · (1 + 1e-9) at 50 sampled t ∈ [0, 10].
#[test]
fn c02_main_bound_kinetic() {
    criterion(2, "main-decay-bound", || {
        let model = presets::kinetic();
        let set = BlockSet::new(model, 5).map_err(|e| e.to_string())?;
        let times = uniform_grid(10.0, 50);
        let mut rng = StdRng::seed_from_u64(0x5eed_0002);
        for m in 1..=3u32 {
            for trial in 0..20 {
                let mut f0 = CoeffVector::equilibrium(2);
                for k in m..=5 {
                    for alpha in enumerate_indices(2, k) {
                        f0.set(alpha, rng.random_range(-1.0..1.0));
                    }
                }
                // decay_experiment itself enforces the bound invariant and
                // errors out on any violation.
                let report =
                    decay_experiment(&set, &f0, m, &times).map_err(|e| e.to_string())?;
                for ((&t, &fisher), &bound) in
                    times.iter().zip(&report.fisher).zip(&report.bound)
                {
                    if fisher > bound * (1.0 + 1e-9) {
                        return Err(format!("bound violated at m={m}, trial {trial}, t={t}"));
                    }
                }
            }
        }
        Ok(())
    });
}

/// Criterion 3 — sharpness: the witness for the kinetic and defective models,
/// m ∈ {1,2,3}, t* = 1, achieves ratio/bound ≥ 1 − 1e-6.
#[test]
fn c03_sharpness() {
    criterion(3, "sharpness-witness", || {
        for (name, model) in [("kinetic", presets::kinetic()), ("defective", presets::defective())]
        {
            let set = BlockSet::new(model.clone(), 3).map_err(|e| e.to_string())?;
            for m in 1..=3u32 {
                let witness = sharpness_witness(&model, m, 1.0).map_err(|e| e.to_string())?;
                let ratio = witness_ratio(&set, &witness, m, 1.0).map_err(|e| e.to_string())?;
                if ratio < 1.0 - 1e-6 {
                    return Err(format!("{name}: ratio/bound = {ratio} at m={m}"));
                }
            }
        }
        Ok(())
    });
}

/// Criterion 4 — spectrum identity: Hausdorff multiset distance between
/// eig(B_m) and {Σ αᵢλᵢ} at most 1e-8 for the OU and kinetic models and
/// 1e-5 for the defective model, m ≤ 4.
#[test]
fn c04_spectrum_identity() {
    criterion(4, "spectrum-identity", || {
        for (name, model) in presets::all() {
            let tol = if name == "defective" { 1e-5 } else { 1e-8 };
            let summary = spectral_summary(&model);
            for m in 1..=4u32 {
                let block = build_block(&model, m).map_err(|e| e.to_string())?;
                let dist = verify_spectrum(&block, &summary);
                if dist > tol {
                    return Err(format!("{name}: distance {dist:e} at m={m} (tol {tol:e})"));
                }
            }
        }
        Ok(())
    });
}

/// Criterion 5 — propagator-norm restriction: the α!-weighted operator norm
/// of e^{-B₁t} equals ‖e^{-Ct}‖₂ within 1e-8 at t ∈ {0.1, 0.5, 1, 2, 5} on
/// all three models, and for m ≤ 4 it is bounded by ‖e^{-Ct}‖₂^m + 1e-9.
#[test]
fn c05_propagator_norm() {
    criterion(5, "propagator-norm", || {
        let ts = [0.1, 0.5, 1.0, 2.0, 5.0];
        for (name, model) in presets::all() {
            let b1 = build_block(&model, 1).map_err(|e| e.to_string())?;
            for &t in &ts {
                let got = weighted_operator_norm(&b1, t);
                let want = exp_norm(&model, t);
                if (got - want).abs() > 1e-8 {
                    return Err(format!("{name}: V₁ norm {got} vs {want} at t={t}"));
                }
            }
            for m in 1..=4u32 {
                let block = build_block(&model, m).map_err(|e| e.to_string())?;
                for &t in &ts {
                    let lhs = weighted_operator_norm(&block, t);
                    let rhs = exp_norm(&model, t).powi(m as i32);
                    if lhs > rhs + 1e-9 {
                        return Err(format!(
                            "{name}: blockwise norm {lhs} exceeds {rhs} at m={m}, t={t}"
                        ));
                    }
                }
            }
        }
        Ok(())
    });
}

/// Criterion 6 — Green's/spectral cross-oracle: max pointwise discrepancy at
/// most 1e-6 on a 10×10 grid in [−3,3]² at t ∈ {0.25, 0.5, 1, 2}, for f₀
/// with max_order ≤ 3 and quadrature order 40, on the OU and kinetic models.
#[test]
fn c06_greens_cross_oracle() {
    criterion(6, "greens-cross-oracle", || {
        let mut f0 = CoeffVector::equilibrium(2);
        f0.set(idx(&[1, 0]), 0.6);
        f0.set(idx(&[0, 1]), -0.4);
        f0.set(idx(&[1, 1]), 0.3);
        f0.set(idx(&[2, 0]), -0.2);
        f0.set(idx(&[2, 1]), 0.15);
        f0.set(idx(&[0, 3]), 0.1);
        for (name, model) in [("ou", presets::ou(2)), ("kinetic", presets::kinetic())] {
            let set = BlockSet::new(model.clone(), 3).map_err(|e| e.to_string())?;
            for &t in &[0.25, 0.5, 1.0, 2.0] {
                let ev = GreensEvaluator::new(&model, t, 40).map_err(|e| e.to_string())?;
                let spectral = propagate(&set, &SpectralState::initial(f0.clone()), t)
                    .map_err(|e| e.to_string())?;
                let mut worst = 0.0f64;
                for i in 0..10 {
                    for j in 0..10 {
                        let x = [-3.0 + 6.0 * i as f64 / 9.0, -3.0 + 6.0 * j as f64 / 9.0];
                        let diff =
                            (ev.eval(&f0, &x) - reconstruct(&spectral.coeffs, &x)).abs();
                        worst = worst.max(diff);
                    }
                }
                if worst > 1e-6 {
                    return Err(format!("{name}: discrepancy {worst:e} at t={t}"));
                }
            }
        }
        Ok(())
    });
}

/// Criterion 7 — Lyapunov fixed point: ‖W(20) − I‖₂ ≤ 1e-6 for the kinetic
/// model at 1000 RK4 steps per unit time, with every step's eigenvalues
/// ≥ −1e-10 (enforced inside the solver).
#[test]
fn c07_lyapunov_fixed_point() {
    criterion(7, "lyapunov-fixed-point", || {
        let model = presets::kinetic();
        let cov = solve_lyapunov(&model, 20.0, 20_000).map_err(|e| e.to_string())?;
        let dev = fpspec_core::linalg::spectral_norm(
            &(&cov.w - DMatrix::<f64>::identity(2, 2)),
        );
        if dev > 1e-6 {
            return Err(format!("‖W(20) − I‖₂ = {dev:e}"));
        }
        // intermediate times stay PSD as well
        for k in 1..=10 {
            lyapunov_covariance(&model, 2.0 * k as f64).map_err(|e| e.to_string())?;
        }
        Ok(())
    });
}

/// Criterion 8 — Fisher-identity equivalence: the coefficient formula, the
/// gradient-shift route, and direct Gauss–Hermite quadrature of
/// ∫|∇(f/f_∞)|² f_∞ agree to 1e-8 relative on 50 random coefficient vectors
/// (d = 2, max_order ≤ 4).
#[test]
fn c08_fisher_identity() {
    criterion(8, "fisher-identity", || {
        let gh = GaussHermite::new(12);
        let mut rng = StdRng::seed_from_u64(0x5eed_0008);
        for trial in 0..50 {
            let mut f = CoeffVector::equilibrium(2);
            for k in 1..=4u32 {
                for alpha in enumerate_indices(2, k) {
                    if rng.random_range(0.0..1.0) < 0.7 {
                        f.set(alpha, rng.random_range(-1.0..1.0));
                    }
                }
            }
            let via_coeffs = fisher_i2(&f);
            let via_flux = fisher_i2_flux(&f);
            // quadrature route: R = f/f_∞ as a polynomial, ∫ |∇R|² f_∞
            let r = hermite_combination_f64(&f);
            let grads: Vec<_> = (0..2).map(|j| r.partial(j)).collect();
            let via_quad = gh.integrate(2, |x| {
                grads.iter().map(|g| g.eval_f64(x).powi(2)).sum::<f64>()
            });
            let scale = via_coeffs.abs().max(1e-30);
            if (via_coeffs - via_flux).abs() / scale > 1e-8
                || (via_coeffs - via_quad).abs() / scale > 1e-8
            {
                return Err(format!(
                    "trial {trial}: routes disagree: {via_coeffs} / {via_flux} / {via_quad}"
                ));
            }
        }
        Ok(())
    });
}

/// Criterion 9 — norm monotonicity: exp_norm(t) ≤ 1 and nonincreasing over
/// 200 uniform samples in [0, 10] for all valid normalized test models.
#[test]
fn c09_norm_monotonicity() {
    criterion(9, "norm-monotonicity", || {
        for (name, model) in presets::all() {
            let mut prev = f64::INFINITY;
            for &t in &uniform_grid(10.0, 200) {
                let v = exp_norm(&model, t);
                if v > 1.0 + 1e-12 {
                    return Err(format!("{name}: exp_norm({t}) = {v} > 1"));
                }
                if v > prev + 1e-11 {
                    return Err(format!("{name}: exp_norm increased at t={t}"));
                }
                prev = v;
            }
        }
        Ok(())
    });
}

/// Criterion 10 — sandwich: for 100 random SPD matrices P,
/// p_min·I₂ ≤ I₂^P ≤ p_max·I₂ with no violation beyond 1e-10 relative.
#[test]
fn c10_sandwich() {
    criterion(10, "fisher-sandwich", || {
        let mut rng = StdRng::seed_from_u64(0x5eed_0010);
        let mut f = CoeffVector::equilibrium(2);
        f.set(idx(&[1, 0]), 0.8);
        f.set(idx(&[0, 2]), -0.5);
        f.set(idx(&[2, 1]), 0.3);
        f.set(idx(&[1, 3]), -0.1);
        let i2 = fisher_i2(&f);
        let mut min_slack = f64::INFINITY;
        for trial in 0..100 {
            let raw = DMatrix::<f64>::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
            let q = raw.qr().q();
            let l1 = rng.random_range(0.2..5.0);
            let l2 = rng.random_range(0.2..5.0);
            let p = &q * DMatrix::from_diagonal(&nalgebra::dvector![l1, l2]) * q.transpose();
            let p = (&p + p.transpose()) * 0.5;
            let eig = SymmetricEigen::new(p.clone());
            let p_min = eig.eigenvalues.min();
            let p_max = eig.eigenvalues.max();
            let ip = fisher_ip(&f, &p).map_err(|e| e.to_string())?;
            if ip < p_min * i2 * (1.0 - 1e-10) || ip > p_max * i2 * (1.0 + 1e-10) {
                return Err(format!(
                    "trial {trial}: I₂^P = {ip} outside [{}, {}]",
                    p_min * i2,
                    p_max * i2
                ));
            }
            min_slack = min_slack
                .min((ip - p_min * i2) / i2)
                .min((p_max * i2 - ip) / i2);
        }
        println!("[acceptance]   sandwich min slack over 100 trials: {min_slack:.3e} (relative)");
        Ok(())
    });
}
