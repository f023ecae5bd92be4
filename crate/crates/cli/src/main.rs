//! `fpspec` — command-line front end for the Fokker-Planck spectral
//! laboratory.
//!
//! Subcommands: `validate`, `spectrum`, `evolve`, `decay`, `sharpness`,
//! `greens-check`. Models are JSON documents `{"d", "C", "D"}`; initial data
//! are JSON lists of `{"alpha", "value"}` coefficient entries. Time series
//! land in CSV (or JSON with `--format json`) with 17-significant-digit
//! numbers; outputs are written to a temporary file and renamed, so failures
//! never leave partial files behind.
//!
//! Exit codes: 0 success; 1 invalid model; 2 unreadable/malformed input or
//! bad configuration; 3 a checked tolerance failed (decay bound or
//! greens-check discrepancy); 4 degenerate-time refusal of the Green's
//! kernel. `FPSPEC_THREADS` caps internal parallelism.

use clap::{Args, Parser, Subcommand, ValueEnum};
use fpspec_core::evolution::{
    propagate, BlockSet, EvolutionError, GreensEvaluator, SpectralState,
};
use fpspec_core::functionals::{
    decay_experiment, entropy_e2, fisher_i2, sharpness_witness, FunctionalsError,
};
use fpspec_core::hermite::{reconstruct, CoeffVector};
use fpspec_core::model::{
    matrices_from_json, spectral_summary, validate, ModelSpec, SpectralSummary, ValidateError,
};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_INVALID_MODEL: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_TOLERANCE: u8 = 3;
const EXIT_DEGENERATE_TIME: u8 = 4;

/// Maximum pointwise spectral/Green's discrepancy accepted by `greens-check`.
const GREENS_CHECK_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(
    name = "fpspec",
    about = "Spectral laboratory for degenerate Fokker-Planck equations",
    long_about = "Validates normalized drift/diffusion pairs, computes spectra, propagates \
                  Hermite coefficients, certifies the Fisher-information decay bound \
                  ‖e^{-Ct}‖₂^{2m}·I₂(f₀) with its envelope, constructs sharpness witnesses, \
                  and cross-checks the spectral solver against the Green's-function formula."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Model file: JSON {"d": int, "C": [[..]], "D": [[..]]} (row-major)
    #[arg(long, value_name = "PATH")]
    model: PathBuf,
    /// Initial data: JSON list of {"alpha": [ints], "value": real}
    #[arg(long, value_name = "PATH")]
    f0: Option<PathBuf>,
    /// End of the uniform time grid (sharpness: the target time t*)
    #[arg(long, default_value_t = 3.0, value_name = "R")]
    tmax: f64,
    /// Number of samples on [0, tmax], both endpoints included
    #[arg(long, default_value_t = 50, value_name = "N")]
    samples: usize,
    /// Largest block order carried by the spectral solver
    /// (default: the largest order present in f0)
    #[arg(long, value_name = "M")]
    truncation: Option<u32>,
    /// Declared vanishing-moment order of f0
    #[arg(long, default_value_t = 1, value_name = "M0")]
    m: u32,
    /// Gauss–Hermite order per axis for Green's-function evaluation
    #[arg(long, default_value_t = 40, value_name = "Q")]
    quad_order: usize,
    /// Output file (stdout when omitted)
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Output format for reports
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Omit the generation timestamp, making outputs byte-reproducible
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Check conditions (A)-(C) and the normalized form; print the model
    /// summary or the violation list
    Validate(CommonOpts),
    /// Print eigenvalues with multiplicities, the spectral gap mu, and the
    /// defect n
    Spectrum(CommonOpts),
    /// Propagate f0 and dump t, e2, fisher, and per-order weighted norms
    Evolve(CommonOpts),
    /// Run the decay experiment: fisher, bound, and fitted envelope per t
    Decay(CommonOpts),
    /// Construct the extremal initial condition attaining the decay bound at
    /// t* (= --tmax); writes its coefficient JSON, prints the ratio report
    Sharpness(CommonOpts),
    /// Compare the spectral solution against the Green's-function formula on
    /// an evaluation grid, per sample time
    GreensCheck(CommonOpts),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate(o) => cmd_validate(o),
        Command::Spectrum(o) => cmd_spectrum(o),
        Command::Evolve(o) => cmd_evolve(o),
        Command::Decay(o) => cmd_decay(o),
        Command::Sharpness(o) => cmd_sharpness(o),
        Command::GreensCheck(o) => cmd_greens_check(o),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fpspec: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

struct CmdError {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> CmdError {
    CmdError {
        code,
        message: message.into(),
    }
}

fn threads_from_env() -> usize {
    std::env::var("FPSPEC_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

fn timestamp_comment(opts: &CommonOpts) -> String {
    if opts.no_timestamp {
        String::new()
    } else {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        format!("# generated-unix: {secs}\n")
    }
}

fn attach_timestamp_json(opts: &CommonOpts, value: &mut serde_json::Value) {
    if !opts.no_timestamp {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        if let Some(map) = value.as_object_mut() {
            map.insert("generated_unix".into(), json!(secs));
        }
    }
}

/// Writes to a temporary sibling and renames, so no partial file survives a
/// failure; prints to stdout when no path is given.
fn write_output(path: Option<&Path>, content: &str) -> Result<(), CmdError> {
    match path {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(p) => {
            let tmp = p.with_extension(format!(
                "{}.tmp{}",
                p.extension().and_then(|e| e.to_str()).unwrap_or(""),
                std::process::id()
            ));
            std::fs::write(&tmp, content)
                .and_then(|()| std::fs::rename(&tmp, p))
                .map_err(|e| fail(EXIT_INPUT, format!("cannot write {}: {e}", p.display())))
        }
    }
}

fn read_file(path: &Path) -> Result<String, CmdError> {
    std::fs::read_to_string(path)
        .map_err(|e| fail(EXIT_INPUT, format!("cannot read {}: {e}", path.display())))
}

fn load_matrices(
    opts: &CommonOpts,
) -> Result<(nalgebra::DMatrix<f64>, nalgebra::DMatrix<f64>), CmdError> {
    let text = read_file(&opts.model)?;
    matrices_from_json(&text).map_err(|e| fail(EXIT_INPUT, e))
}

fn load_model(opts: &CommonOpts) -> Result<ModelSpec, CmdError> {
    let (c, d) = load_matrices(opts)?;
    match validate(&c, &d) {
        Ok(model) => Ok(model),
        Err(ValidateError::Input(msg)) => Err(fail(EXIT_INPUT, msg)),
        Err(ValidateError::Invalid(violations)) => {
            let list = serde_json::to_string_pretty(&violations).unwrap();
            Err(fail(
                EXIT_INVALID_MODEL,
                format!("model violates the normalized-form conditions:\n{list}"),
            ))
        }
    }
}

fn load_f0(opts: &CommonOpts, dim: usize) -> Result<CoeffVector, CmdError> {
    let path = opts
        .f0
        .as_ref()
        .ok_or_else(|| fail(EXIT_INPUT, "--f0 is required for this command"))?;
    let text = read_file(path)?;
    let f0 = CoeffVector::from_json(&text).map_err(|e| fail(EXIT_INPUT, e))?;
    if f0.dim() != dim {
        return Err(fail(
            EXIT_INPUT,
            format!(
                "f0 dimension {} does not match model dimension {dim}",
                f0.dim()
            ),
        ));
    }
    Ok(f0)
}

fn check_run_config(opts: &CommonOpts, truncation: u32) -> Result<(), CmdError> {
    if !opts.tmax.is_finite() || opts.tmax <= 0.0 {
        return Err(fail(EXIT_INPUT, "tmax must be positive and finite"));
    }
    if opts.samples < 2 {
        return Err(fail(EXIT_INPUT, "samples must be at least 2"));
    }
    if opts.m < 1 {
        return Err(fail(EXIT_INPUT, "m must be at least 1"));
    }
    if truncation < opts.m {
        return Err(fail(
            EXIT_INPUT,
            format!("truncation {truncation} must be at least m = {}", opts.m),
        ));
    }
    if opts.quad_order < 4 {
        return Err(fail(EXIT_INPUT, "quad-order must be at least 4"));
    }
    Ok(())
}

/// Uniform grid on [0, tmax] including both endpoints.
fn time_grid(opts: &CommonOpts) -> Vec<f64> {
    (0..opts.samples)
        .map(|k| opts.tmax * k as f64 / (opts.samples - 1) as f64)
        .collect()
}

fn summary_json(model: &ModelSpec, summary: &SpectralSummary) -> serde_json::Value {
    let eigenvalues: Vec<serde_json::Value> = summary
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
        "model_hash": model.content_hash(),
    })
}

fn summary_text(model: &ModelSpec, summary: &SpectralSummary) -> String {
    let mut out = format!(
        "model: valid (d = {}, rank D = {})\n",
        model.dim(),
        model.diffusion_rank()
    );
    let eigs: Vec<String> = summary
        .eigenvalues
        .iter()
        .map(|(z, mult)| {
            if z.im == 0.0 {
                format!("{:.12} (x{mult})", z.re)
            } else {
                format!("{:.12}{:+.12}i (x{mult})", z.re, z.im)
            }
        })
        .collect();
    out.push_str(&format!("eigenvalues: {}\n", eigs.join(", ")));
    out.push_str(&format!("mu = {:.12}\n", summary.mu));
    out.push_str(&format!("defect n = {}\n", summary.defect));
    out
}

fn cmd_validate(opts: &CommonOpts) -> Result<(), CmdError> {
    let model = load_model(opts)?;
    let summary = spectral_summary(&model);
    let content = match opts.format {
        Format::Json => {
            let mut v = summary_json(&model, &summary);
            attach_timestamp_json(opts, &mut v);
            format!("{}\n", serde_json::to_string_pretty(&v).unwrap())
        }
        Format::Csv => summary_text(&model, &summary),
    };
    write_output(opts.out.as_deref(), &content)
}

fn cmd_spectrum(opts: &CommonOpts) -> Result<(), CmdError> {
    // identical data to validate, but the spectrum is the point
    cmd_validate(opts)
}

fn blockset(model: &ModelSpec, truncation: u32) -> Result<BlockSet, CmdError> {
    BlockSet::with_threads(model.clone(), truncation, threads_from_env())
        .map_err(|e| fail(EXIT_INPUT, e.to_string()))
}

fn cmd_evolve(opts: &CommonOpts) -> Result<(), CmdError> {
    let model = load_model(opts)?;
    let f0 = load_f0(opts, model.dim())?;
    let truncation = opts.truncation.unwrap_or_else(|| f0.max_order().max(1));
    check_run_config(opts, truncation)?;
    if f0.max_order() > truncation {
        return Err(fail(
            EXIT_INPUT,
            format!(
                "f0 has order {} beyond the truncation {truncation}",
                f0.max_order()
            ),
        ));
    }
    let set = blockset(&model, truncation)?;
    let times = time_grid(opts);
    let mut state = SpectralState::initial(f0);

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(times.len());
    for &t in &times {
        state = propagate(&set, &state, t).map_err(|e| fail(EXIT_INPUT, e.to_string()))?;
        let mut row = vec![t, entropy_e2(&state.coeffs), fisher_i2(&state.coeffs)];
        for m in 1..=truncation {
            row.push(state.coeffs.weighted_norm_sq_order(m).sqrt());
        }
        rows.push(row);
    }

    let content = match opts.format {
        Format::Csv => {
            let mut header = String::from("t,e2,fisher");
            for m in 1..=truncation {
                header.push_str(&format!(",block_norm_{m}"));
            }
            let mut out = timestamp_comment(opts);
            out.push_str(&header);
            out.push('\n');
            for row in &rows {
                let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
            out
        }
        Format::Json => {
            let mut v = json!({
                "model_hash": model.content_hash(),
                "truncation": truncation,
                "columns": {
                    "t": rows.iter().map(|r| r[0]).collect::<Vec<_>>(),
                    "e2": rows.iter().map(|r| r[1]).collect::<Vec<_>>(),
                    "fisher": rows.iter().map(|r| r[2]).collect::<Vec<_>>(),
                    "block_norms": rows.iter().map(|r| r[3..].to_vec()).collect::<Vec<_>>(),
                },
            });
            attach_timestamp_json(opts, &mut v);
            format!("{}\n", serde_json::to_string_pretty(&v).unwrap())
        }
    };
    write_output(opts.out.as_deref(), &content)
}

fn cmd_decay(opts: &CommonOpts) -> Result<(), CmdError> {
    let model = load_model(opts)?;
    let f0 = load_f0(opts, model.dim())?;
    let truncation = opts
        .truncation
        .unwrap_or_else(|| f0.max_order().max(opts.m));
    check_run_config(opts, truncation)?;
    if f0.max_order() > truncation {
        return Err(fail(
            EXIT_INPUT,
            format!(
                "f0 has order {} beyond the truncation {truncation}",
                f0.max_order()
            ),
        ));
    }
    let set = blockset(&model, truncation)?;
    let times = time_grid(opts);
    let report = match decay_experiment(&set, &f0, opts.m, &times) {
        Ok(r) => r,
        Err(FunctionalsError::SupportViolation { m, offending }) => {
            return Err(fail(
                EXIT_INPUT,
                format!("declared m = {m} inconsistent with f0 support at {offending:?}"),
            ));
        }
        Err(FunctionalsError::BoundViolation {
            index,
            t,
            fisher,
            bound,
        }) => {
            return Err(fail(
                EXIT_TOLERANCE,
                format!(
                    "decay bound violated at sample {index} (t={t}): fisher {fisher} > bound {bound}"
                ),
            ));
        }
        Err(e) => return Err(fail(EXIT_INPUT, e.to_string())),
    };

    let content = match opts.format {
        Format::Csv => format!("{}{}", timestamp_comment(opts), report.to_csv()),
        Format::Json => {
            let summary = spectral_summary(&model);
            let mut v = report.to_json(&model, &summary);
            attach_timestamp_json(opts, &mut v);
            format!("{}\n", serde_json::to_string_pretty(&v).unwrap())
        }
    };
    write_output(opts.out.as_deref(), &content)
}

fn cmd_sharpness(opts: &CommonOpts) -> Result<(), CmdError> {
    let model = load_model(opts)?;
    let truncation = opts.truncation.unwrap_or(opts.m);
    check_run_config(opts, truncation)?;
    let t_star = opts.tmax;
    let witness =
        sharpness_witness(&model, opts.m, t_star).map_err(|e| fail(EXIT_INPUT, e.to_string()))?;

    // certify the contract before emitting anything
    let set = blockset(&model, opts.m)?;
    let ratio = fpspec_core::functionals::witness_ratio(&set, &witness, opts.m, t_star)
        .map_err(|e| fail(EXIT_INPUT, e.to_string()))?;

    // the output file is the witness f0 in the coefficient interchange
    // format, directly usable as --f0 for the decay command
    write_output(opts.out.as_deref(), &format!("{}\n", witness.f0.to_json()))?;

    let report = json!({
        "m": opts.m,
        "t_star": t_star,
        "bound": fpspec_core::model::exp_norm(&model, t_star).powi(2 * opts.m as i32),
        "ratio_over_bound": ratio,
        "non_unique_maximizer": witness.non_unique,
        "direction": witness.direction,
    });
    if opts.out.is_some() {
        println!("{}", serde_json::to_string_pretty(&report).unwrap());
    } else {
        eprintln!("{}", serde_json::to_string_pretty(&report).unwrap());
    }
    Ok(())
}

fn cmd_greens_check(opts: &CommonOpts) -> Result<(), CmdError> {
    let model = load_model(opts)?;
    let f0 = load_f0(opts, model.dim())?;
    let truncation = opts
        .truncation
        .unwrap_or_else(|| f0.max_order().max(opts.m));
    check_run_config(opts, truncation)?;
    if f0.max_order() > truncation {
        return Err(fail(
            EXIT_INPUT,
            format!(
                "f0 has order {} beyond the truncation {truncation}",
                f0.max_order()
            ),
        ));
    }
    let set = blockset(&model, truncation)?;

    // t = 0 is excluded: W(0) = 0 makes the kernel degenerate for every model.
    let times: Vec<f64> = time_grid(opts).into_iter().filter(|&t| t > 0.0).collect();
    let d = model.dim();
    let per_axis = 10usize;
    let grid: Vec<Vec<f64>> = {
        let mut pts = Vec::new();
        let mut idx = vec![0usize; d];
        'outer: loop {
            pts.push(
                idx.iter()
                    .map(|&i| -3.0 + 6.0 * i as f64 / (per_axis - 1) as f64)
                    .collect(),
            );
            let mut k = 0;
            loop {
                if k == d {
                    break 'outer;
                }
                idx[k] += 1;
                if idx[k] < per_axis {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
        pts
    };

    let mut rows = Vec::with_capacity(times.len());
    let mut worst_overall = 0.0f64;
    let mut state = SpectralState::initial(f0.clone());
    for &t in &times {
        let ev = match GreensEvaluator::new(&model, t, opts.quad_order) {
            Ok(ev) => ev,
            Err(EvolutionError::DegenerateTime { smallest_safe, .. }) => {
                return Err(fail(
                    EXIT_DEGENERATE_TIME,
                    format!(
                        "W(t) too degenerate at t={t}; smallest safe time ≈ {smallest_safe:.6e}"
                    ),
                ));
            }
            Err(e) => return Err(fail(EXIT_INPUT, e.to_string())),
        };
        if let Some(w) = ev.accuracy_warning(&f0) {
            eprintln!("fpspec: warning: {w}");
        }
        state = propagate(&set, &state, t).map_err(|e| fail(EXIT_INPUT, e.to_string()))?;
        let mut worst = 0.0f64;
        for x in &grid {
            let diff = (ev.eval(&f0, x) - reconstruct(&state.coeffs, x)).abs();
            worst = worst.max(diff);
        }
        worst_overall = worst_overall.max(worst);
        rows.push((t, worst));
    }

    let content = match opts.format {
        Format::Csv => {
            let mut out = timestamp_comment(opts);
            out.push_str("t,max_discrepancy\n");
            for (t, w) in &rows {
                out.push_str(&format!("{t:.16e},{w:.16e}\n"));
            }
            out
        }
        Format::Json => {
            let mut v = json!({
                "model_hash": model.content_hash(),
                "tolerance": GREENS_CHECK_TOL,
                "times": rows.iter().map(|r| r.0).collect::<Vec<_>>(),
                "max_discrepancy": rows.iter().map(|r| r.1).collect::<Vec<_>>(),
            });
            attach_timestamp_json(opts, &mut v);
            format!("{}\n", serde_json::to_string_pretty(&v).unwrap())
        }
    };
    write_output(opts.out.as_deref(), &content)?;

    if worst_overall > GREENS_CHECK_TOL {
        return Err(fail(
            EXIT_TOLERANCE,
            format!("max discrepancy {worst_overall:e} exceeds {GREENS_CHECK_TOL:e}"),
        ));
    }
    Ok(())
}
