//! Subcommand implementations.

use std::path::Path;

use serde_json::{json, Value};

use omcal::calibration::{estimate_g0 as core_estimate_g0, synthesize_psd, BinNoise};
use omcal::config::ExperimentConfig;
use omcal::constants::{angular_to_hz, hz_to_angular, TWO_PI};
use omcal::fitting::{
    fano_model, fit_backaction, fit_fano, fit_lorentzian, BackactionFixed, FitResult, FitScaleMode,
    LineshapeOptions, NllsOptions,
};
use omcal::interferometer::{eta_g, fano_identification, reflection_exact};
use omcal::{Error, Interferometer};

use crate::csvio;
use crate::phases::parse_phase_list;
use crate::{CliError, CommonArgs, FitModel, ScaleMode};

fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let config = ExperimentConfig::from_json(&text).map_err(|e| {
        CliError::Config(format!(
            "{}: {} (line {}, column {})",
            path.display(),
            e,
            e.line(),
            e.column()
        ))
    })?;
    config
        .validate()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(config)
}

fn config_err(e: Error) -> CliError {
    CliError::Config(e.to_string())
}

fn reference_interferometer(interf: &Interferometer) -> Interferometer {
    Interferometer::new(0.0, interf.r_m(), interf.theta(), interf.l1(), interf.l2(), interf.n())
        .expect("r = 0 keeps parameters valid")
}

pub fn sweep_eta(common: &CommonArgs, phase_text: &str) -> Result<(), CliError> {
    let config = load_config(&common.config)?;
    let phases = parse_phase_list(phase_text)?;
    let cavity = config.cavity().map_err(config_err)?;
    let drive = config.drive().map_err(config_err)?;
    let mech = config.mechanical_mode(common.mode).map_err(config_err)?;
    let grid = config.delta_grid();

    let mut header: Vec<String> = vec!["delta_hz".to_string()];
    for i in 1..=phases.len() {
        header.push(format!("eta_g_{i}"));
        header.push(format!("g0_measured_hz_{i}"));
    }

    let mut rows: Vec<Vec<Option<f64>>> = Vec::with_capacity(grid.len());
    let mut skips: Vec<(f64, usize, String)> = Vec::new();
    let interferometers: Vec<Interferometer> = phases
        .iter()
        .map(|&psi| config.interferometer_with_phase(psi).map_err(config_err))
        .collect::<Result<_, _>>()?;

    for &delta in &grid {
        let mut row: Vec<Option<f64>> = vec![Some(angular_to_hz(delta))];
        for (i, interf) in interferometers.iter().enumerate() {
            let reference = reference_interferometer(interf);
            let biased = eta_g(&cavity, &drive, &mech, interf, delta);
            let baseline = eta_g(&cavity, &drive, &mech, &reference, delta);
            match (biased, baseline) {
                (Ok(eta), Ok(eta_ref)) => {
                    row.push(Some(eta));
                    row.push(Some(mech.g0() * (eta / eta_ref).sqrt() / TWO_PI));
                }
                (Err(e), _) => {
                    row.push(None);
                    row.push(None);
                    skips.push((angular_to_hz(delta), i + 1, e.to_string()));
                }
                (_, Err(e)) => {
                    row.push(None);
                    row.push(None);
                    skips.push((angular_to_hz(delta), i + 1, format!("r=0 reference: {e}")));
                }
            }
        }
        rows.push(row);
    }

    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    csvio::write_output(common.out.as_deref(), &csvio::render(&header_refs, &rows))?;

    let mut log = String::from("delta_hz,phase_index,reason\n");
    for (delta_hz, phase, reason) in &skips {
        log.push_str(&format!("{},{phase},{reason}\n", csvio::fmt(*delta_hz)));
    }
    match common.out.as_deref() {
        Some(path) => {
            let sidecar = path.with_extension("skips.csv");
            std::fs::write(&sidecar, log)
                .map_err(|e| CliError::Data(format!("cannot write skip log: {e}")))?;
        }
        None => {
            if !skips.is_empty() {
                eprint!("{log}");
            }
        }
    }
    Ok(())
}

pub fn reflection(common: &CommonArgs, phase_text: &str) -> Result<(), CliError> {
    let config = load_config(&common.config)?;
    let phases = parse_phase_list(phase_text)?;
    let cavity = config.cavity().map_err(config_err)?;
    let drive = config.drive().map_err(config_err)?;
    let grid = config.delta_grid();
    let s0_sq = drive.s0().powi(2);

    let mut header: Vec<String> = vec!["delta_hz".to_string()];
    for i in 1..=phases.len() {
        header.push(format!("refl_exact_{i}"));
        header.push(format!("refl_fano_{i}"));
        header.push(format!("residual_{i}"));
    }

    let mut curves = Vec::new();
    for &psi in &phases {
        let interf = config.interferometer_with_phase(psi).map_err(config_err)?;
        let fano = fano_identification(&cavity, &drive, &interf).map_err(config_err)?;
        curves.push((interf, fano));
    }

    let mut rows = Vec::with_capacity(grid.len());
    for &delta in &grid {
        let mut row: Vec<Option<f64>> = vec![Some(angular_to_hz(delta))];
        for (interf, fano) in &curves {
            let exact = reflection_exact(&cavity, &drive, interf, delta) / s0_sq;
            let identified = fano_model(
                &[fano.h / s0_sq, fano.a_amp / s0_sq, fano.q, cavity.kappa(), 0.0],
                delta,
            );
            row.push(Some(exact));
            row.push(Some(identified));
            row.push(Some(exact - identified));
        }
        rows.push(row);
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    csvio::write_output(common.out.as_deref(), &csvio::render(&header_refs, &rows))
}

fn map_fit_error(e: Error) -> CliError {
    match e {
        Error::NoDescentDirection | Error::ModelEvaluationFailed(_) => {
            CliError::NonConvergence(e.to_string())
        }
        other => CliError::Data(other.to_string()),
    }
}

fn fit_report(kind: &str, result: &FitResult, hz_params: &[&str]) -> Value {
    let mut params = serde_json::Map::new();
    let mut sigma = serde_json::Map::new();
    for (i, name) in result.names.iter().enumerate() {
        let is_hz = hz_params.contains(&name.as_str());
        let scale = if is_hz { 1.0 / TWO_PI } else { 1.0 };
        let key = if is_hz { format!("{name}_hz") } else { name.clone() };
        params.insert(key.clone(), json!(result.params[i] * scale));
        sigma.insert(key, json!(result.sigma(i) * scale));
    }
    json!({
        "fit": kind,
        "converged": result.converged,
        "iterations": result.iterations,
        "residual_norm": result.residual_norm,
        "params": Value::Object(params),
        "sigma_1": Value::Object(sigma),
        "warnings": result.warnings,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn fit(
    model: FitModel,
    input: &Path,
    config: Option<&Path>,
    out: Option<&Path>,
    window: Option<&str>,
    max_iterations: Option<usize>,
    scale_mode: ScaleMode,
    mode: usize,
) -> Result<(), CliError> {
    let mut nlls = NllsOptions::default();
    if let Some(n) = max_iterations {
        nlls.max_iterations = n;
    }

    let (report, result) = match model {
        FitModel::Fano | FitModel::Lorentz => {
            let (_, rows) = csvio::read_table(input, &["delta_hz", "reflection", "sigma"], 1)?;
            let deltas: Vec<f64> = rows.iter().map(|r| r[0]).collect();
            let values: Vec<f64> = rows.iter().map(|r| r[1]).collect();
            if rows.iter().all(|r| r.len() == 3) {
                nlls.sigmas = Some(rows.iter().map(|r| r[2]).collect());
            }
            let window_linewidths = match window {
                None => Some(3.0),
                Some("none") => None,
                Some(text) => Some(text.parse::<f64>().map_err(|_| {
                    CliError::Config(format!("cannot parse --window '{text}'"))
                })?),
            };
            let options = LineshapeOptions { window_linewidths, nlls };
            // The lineshape model is unit-agnostic; fitting runs directly on
            // the Hz axis, so kappa and delta0 come out in Hz.
            let result = match model {
                FitModel::Fano => fit_fano(&deltas, &values, None, &options),
                _ => fit_lorentzian(&deltas, &values, None, &options),
            }
            .map_err(map_fit_error)?;
            let kind = if model == FitModel::Fano { "fano" } else { "lorentz" };
            let mut report = fit_report(kind, &result, &[]);
            // Rename the axis parameters to carry their Hz unit.
            if let Some(obj) = report.get_mut("params").and_then(Value::as_object_mut) {
                if let Some(v) = obj.remove("kappa") {
                    obj.insert("kappa_hz".to_string(), v);
                }
                if let Some(v) = obj.remove("delta0") {
                    obj.insert("delta0_hz".to_string(), v);
                }
            }
            if let Some(obj) = report.get_mut("sigma_1").and_then(Value::as_object_mut) {
                if let Some(v) = obj.remove("kappa") {
                    obj.insert("kappa_hz".to_string(), v);
                }
                if let Some(v) = obj.remove("delta0") {
                    obj.insert("delta0_hz".to_string(), v);
                }
            }
            (report, result)
        }
        FitModel::Backaction => {
            let config_path = config.ok_or_else(|| {
                CliError::Config("fit backaction needs --config for the fixed parameters".into())
            })?;
            let config = load_config(config_path)?;
            let cavity = config.cavity().map_err(config_err)?;
            let drive = config.drive().map_err(config_err)?;
            let mech = config.mechanical_mode(mode).map_err(config_err)?;
            let (_, rows) =
                csvio::read_table(input, &["delta_hz", "omega_eff_hz", "gamma_eff_hz"], 0)?;
            let omega_pts: Vec<(f64, f64)> = rows
                .iter()
                .map(|r| (hz_to_angular(r[0]), hz_to_angular(r[1])))
                .collect();
            let gamma_pts: Vec<(f64, f64)> = rows
                .iter()
                .map(|r| (hz_to_angular(r[0]), hz_to_angular(r[2])))
                .collect();
            let fixed = BackactionFixed {
                kappa: cavity.kappa(),
                kappa_ex: cavity.kappa_ex(),
                power: drive.power(),
                omega_l: drive.omega_l(),
            };
            let (fit_mode, p0) = match scale_mode {
                ScaleMode::Fixed => (
                    FitScaleMode::FixedPower,
                    [mech.omega_m(), mech.gamma_m(), mech.g0()],
                ),
                ScaleMode::Coupled => (
                    FitScaleMode::Coupled,
                    [mech.omega_m(), mech.gamma_m(), mech.g0() * mech.g0() * drive.power()],
                ),
            };
            let result = fit_backaction(&omega_pts, &gamma_pts, &fixed, &p0, fit_mode, &nlls)
                .map_err(map_fit_error)?;
            let hz = ["omega_m", "gamma_m", "g0"];
            (fit_report("backaction", &result, &hz), result)
        }
    };

    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    csvio::write_output(out, &text)?;
    if !result.converged {
        return Err(CliError::NonConvergence(format!(
            "fit stopped after {} iterations without meeting the tolerances (report written)",
            result.iterations
        )));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn estimate_g0(
    common: &CommonArgs,
    trace_path: Option<&Path>,
    synthesize: bool,
    delta_hz: Option<f64>,
    sweep: bool,
    seed: Option<u64>,
    dump_trace: Option<&Path>,
) -> Result<(), CliError> {
    let config = load_config(&common.config)?;
    let cavity = config.cavity().map_err(config_err)?;
    let drive = config.drive().map_err(config_err)?;
    let mech = config.mechanical_mode(common.mode).map_err(config_err)?;
    let env = config.environment().map_err(config_err)?;
    let interf = config.interferometer().map_err(config_err)?;
    let n_th = env.thermal_occupation(mech.omega_m()).map_err(config_err)?;

    let estimate_from = |trace: &omcal::calibration::SpectrumTrace| {
        core_estimate_g0(trace, mech.omega_m(), drive.omega_c(), mech.gamma_m(), drive.phi0(), n_th)
    };
    let estimate_json = |e: &omcal::calibration::G0Estimate| {
        json!({
            "g0_hz": e.g0 / TWO_PI,
            "s_mech_peak": e.s_mech_peak,
            "s_cal_peak": e.s_cal_peak,
            "gamma_m_used_hz": e.gamma_m_used / TWO_PI,
            "n_th_used": e.n_th_used,
        })
    };

    let report: Value = if let Some(path) = trace_path {
        let trace = csvio::read_trace(path)?;
        let estimate = estimate_from(&trace).map_err(|e| CliError::Data(e.to_string()))?;
        json!({
            "command": "estimate-g0",
            "source": "trace",
            "estimate": estimate_json(&estimate),
        })
    } else if synthesize {
        let grid = config.trace_grid(common.mode).map_err(config_err)?;
        let noise = seed.map(|s| BinNoise { seed: s, n_avg: config.n_avg() });
        let noise_floor = config.noise_floor();
        if sweep {
            let mut entries = Vec::new();
            let mut successes = 0usize;
            for delta in config.delta_grid() {
                let trace = synthesize_psd(
                    &cavity, &drive, &mech, &interf, &env, delta, &grid, noise_floor, noise,
                )
                .map_err(|e| CliError::Data(e.to_string()))?;
                match estimate_from(&trace) {
                    Ok(estimate) => {
                        successes += 1;
                        entries.push(json!({
                            "delta_hz": delta / TWO_PI,
                            "estimate": estimate_json(&estimate),
                        }));
                    }
                    Err(e) => entries.push(json!({
                        "delta_hz": delta / TWO_PI,
                        "error": e.to_string(),
                    })),
                }
            }
            if successes == 0 {
                return Err(CliError::Data("no detuning produced a usable estimate".into()));
            }
            json!({
                "command": "estimate-g0",
                "source": "synthesized-sweep",
                "seed": seed,
                "points": entries,
            })
        } else {
            let delta_hz = delta_hz.ok_or_else(|| {
                CliError::Config("--synthesize needs --delta-hz or --sweep".into())
            })?;
            let delta = hz_to_angular(delta_hz);
            let trace = synthesize_psd(
                &cavity, &drive, &mech, &interf, &env, delta, &grid, noise_floor, noise,
            )
            .map_err(|e| CliError::Data(e.to_string()))?;
            if let Some(path) = dump_trace {
                std::fs::write(path, csvio::render_trace(&trace))
                    .map_err(|e| CliError::Data(format!("cannot write trace: {e}")))?;
            }
            let estimate = estimate_from(&trace).map_err(|e| CliError::Data(e.to_string()))?;
            json!({
                "command": "estimate-g0",
                "source": "synthesized",
                "seed": seed,
                "delta_hz": delta_hz,
                "estimate": estimate_json(&estimate),
            })
        }
    } else {
        return Err(CliError::Config("estimate-g0 needs --trace PATH or --synthesize".into()));
    };

    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    csvio::write_output(common.out.as_deref(), &text)
}
