//! End-to-end tests of the `omcal` binary: exit codes, CSV/JSON shapes,
//! and byte-level determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use omcal::constants::TWO_PI;
use omcal::fitting::fano_model;

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_omcal")
}

fn repo_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/example_device.json")
}

fn run(args: &[&str]) -> Output {
    Command::new(binary()).args(args).output().expect("binary runs")
}

fn config_with(dir: &Path, edits: &[(&str, &str)]) -> PathBuf {
    let mut text = std::fs::read_to_string(repo_config()).unwrap();
    for (from, to) in edits {
        assert!(text.contains(from), "canonical config lost marker {from}");
        text = text.replace(from, to);
    }
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn sweep_eta_canonical_shape_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let config = repo_config();
    let phases = "0,0.77pi,-0.77pi,0.4pi,-0.4pi";
    let status = run(&[
        "sweep-eta",
        "--config",
        config.to_str().unwrap(),
        "--phase",
        phases,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(status.status.success(), "stderr: {}", String::from_utf8_lossy(&status.stderr));

    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 402);
    assert_eq!(
        lines[0],
        "delta_hz,eta_g_1,g0_measured_hz_1,eta_g_2,g0_measured_hz_2,eta_g_3,g0_measured_hz_3,\
         eta_g_4,g0_measured_hz_4,eta_g_5,g0_measured_hz_5"
    );
    // The exact Delta = 0 reference null shows up as empty cells.
    let zero_row = lines.iter().find(|l| l.starts_with("0.0000000000000000e0,")).unwrap();
    assert!(zero_row.contains(",,"));

    let skips = std::fs::read_to_string(out.with_extension("skips.csv")).unwrap();
    assert!(skips.lines().count() > 1, "expected recorded skips:\n{skips}");
    assert!(skips.contains("calibration tone too small"));

    // Byte-stable across runs.
    let again = dir.path().join("sweep2.csv");
    run(&[
        "sweep-eta",
        "--config",
        config.to_str().unwrap(),
        "--phase",
        phases,
        "--out",
        again.to_str().unwrap(),
    ]);
    assert_eq!(text, std::fs::read_to_string(&again).unwrap());
}

#[test]
fn sweep_eta_without_mirror_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let config = config_with(dir.path(), &[("\"r\": 0.28", "\"r\": 0.0")]);
    let out = dir.path().join("flat.csv");
    let status = run(&[
        "sweep-eta",
        "--config",
        config.to_str().unwrap(),
        "--phase",
        "0.77pi",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(status.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    for line in text.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells[2].is_empty() {
            continue; // the Delta = 0 null
        }
        let g0: f64 = cells[2].parse().unwrap();
        assert!(
            (g0 / 4.52e5 - 1.0).abs() < 1e-9,
            "r = 0 must self-normalize, got {g0}"
        );
    }
}

#[test]
fn sweep_eta_rejects_empty_phase_list() {
    let status = run(&[
        "sweep-eta",
        "--config",
        repo_config().to_str().unwrap(),
        "--phase",
        " , ",
    ]);
    assert_eq!(status.status.code(), Some(2));
}

#[test]
fn reflection_symmetric_dip_at_zero_phase() {
    let dir = tempfile::tempdir().unwrap();
    let config = config_with(dir.path(), &[("\"r\": 0.28", "\"r\": 0.0")]);
    let out = dir.path().join("refl.csv");
    let status = run(&[
        "reflection",
        "--config",
        config.to_str().unwrap(),
        "--phase",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(status.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "delta_hz,refl_exact_1,refl_fano_1,residual_1");
    let rows: Vec<Vec<f64>> = lines[1..]
        .iter()
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 401);
    for i in 0..rows.len() {
        let mirror = &rows[rows.len() - 1 - i];
        assert!((rows[i][1] - mirror[1]).abs() <= 1e-12 * rows[i][1].abs().max(1e-12));
        // With no parasitic path the identified Fano curve is exact.
        assert!(rows[i][3].abs() <= 1e-9 * rows[i][1].abs().max(1e-12));
    }
    // Impedance-mismatched dip: minimum sits at Delta = 0.
    let min_row = rows.iter().min_by(|a, b| a[1].total_cmp(&b[1])).unwrap();
    assert_eq!(min_row[0], 0.0);
}

#[test]
fn fit_fano_recovers_synthetic_curve() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("fano.csv");
    let truth = [0.9, 2.0 * 2.47e9, -0.05, 2.47e9, 1.1e8];
    let mut text = String::from("delta_hz,reflection\n");
    for i in 0..801 {
        let delta = -8e9 + i as f64 * 2e7;
        text.push_str(&format!("{:.16e},{:.16e}\n", delta, fano_model(&truth, delta)));
    }
    std::fs::write(&data, text).unwrap();

    let out = dir.path().join("report.json");
    let status = run(&[
        "fit",
        "fano",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(status.status.success(), "stderr: {}", String::from_utf8_lossy(&status.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["fit"], "fano");
    assert_eq!(report["converged"], true);
    let kappa = report["params"]["kappa_hz"].as_f64().unwrap();
    let q = report["params"]["q"].as_f64().unwrap();
    let delta0 = report["params"]["delta0_hz"].as_f64().unwrap();
    assert!((kappa / truth[3] - 1.0).abs() < 1e-6, "kappa {kappa}");
    assert!((q - truth[2]).abs() < 1e-6, "q {q}");
    assert!((delta0 / truth[4] - 1.0).abs() < 1e-4, "delta0 {delta0}");
}

#[test]
fn fit_reflection_exact_curve_recovers_kappa() {
    // Cross-model check straight through the CLI: reflection CSV from the
    // exact model, Fano fit on top.
    let dir = tempfile::tempdir().unwrap();
    let config = config_with(
        dir.path(),
        &[("\"psi_rad\": 2.4190263432641409", "\"psi_rad\": 2.2370357592874119")],
    );
    let refl = dir.path().join("refl.csv");
    run(&[
        "reflection",
        "--config",
        config.to_str().unwrap(),
        "--phase",
        "2.2370357592874119",
        "--out",
        refl.to_str().unwrap(),
    ]);
    // Reduce to the two-column schema the fitter expects.
    let text = std::fs::read_to_string(&refl).unwrap();
    let mut data = String::from("delta_hz,reflection\n");
    for line in text.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        data.push_str(&format!("{},{}\n", cells[0], cells[1]));
    }
    let input = dir.path().join("fit_input.csv");
    std::fs::write(&input, data).unwrap();

    let out = dir.path().join("report.json");
    let status = run(&["fit", "fano", input.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(status.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let kappa = report["params"]["kappa_hz"].as_f64().unwrap();
    assert!(
        (kappa / 2.5e9 - 1.0).abs() < 0.02,
        "fitted kappa {kappa} deviates more than 2% from 2.5 GHz"
    );
}

#[test]
fn fit_rejects_malformed_csv_with_row_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    std::fs::write(&data, "delta_hz,reflection\n1.0e9,0.5\n2.0e9,oops\n").unwrap();
    let status = run(&["fit", "fano", data.to_str().unwrap()]);
    assert_eq!(status.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&status.stderr);
    assert!(stderr.contains("line 3"), "stderr: {stderr}");
}

#[test]
fn fit_truncated_iterations_exits_nonconverged() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("fano.csv");
    let truth = [0.9, 2.0 * 2.47e9, -0.05, 2.47e9, 0.0];
    let mut text = String::from("delta_hz,reflection\n");
    for i in 0..401 {
        let delta = -8e9 + i as f64 * 4e7;
        text.push_str(&format!("{:.16e},{:.16e}\n", delta, fano_model(&truth, delta)));
    }
    std::fs::write(&data, text).unwrap();
    let out = dir.path().join("report.json");
    let status = run(&[
        "fit",
        "fano",
        data.to_str().unwrap(),
        "--max-iterations",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(status.status.code(), Some(3));
    // The report is still written, flagged as non-converged.
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["converged"], false);
}

#[test]
fn fit_backaction_recovers_config_truth() {
    let dir = tempfile::tempdir().unwrap();
    let config = repo_config();
    // Synthesize effective-parameter data from the closed forms at a
    // different power so the fit has to work.
    let kappa = TWO_PI * 2.5e9;
    let kex = TWO_PI * 1.0e9;
    let omega_l = TWO_PI * 1.9555e14;
    let power = 1e-6;
    let (omega_m, gamma_m, g0) = (TWO_PI * 7.65e9, TWO_PI * 4.91e6, TWO_PI * 4.52e5);
    let hbar = 1.054571817e-34;
    let mut text = String::from("delta_hz,omega_eff_hz,gamma_eff_hz\n");
    for i in -10..=10 {
        let delta = TWO_PI * i as f64 * 0.9e9;
        let n_cav = kex / (delta * delta + kappa * kappa / 4.0) * power / (hbar * omega_l);
        let quarter = kappa * kappa / 4.0;
        let red = delta - omega_m;
        let blue = delta + omega_m;
        let dw = g0 * g0 * n_cav * (red / (quarter + red * red) + blue / (quarter + blue * blue));
        let dg = g0 * g0 * n_cav * (kappa / (quarter + blue * blue) - kappa / (quarter + red * red));
        text.push_str(&format!(
            "{:.16e},{:.16e},{:.16e}\n",
            delta / TWO_PI,
            (omega_m + dw) / TWO_PI,
            (gamma_m + dg) / TWO_PI
        ));
    }
    let data = dir.path().join("backaction.csv");
    std::fs::write(&data, text).unwrap();

    let out = dir.path().join("report.json");
    let status = run(&[
        "fit",
        "backaction",
        data.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(status.status.success(), "stderr: {}", String::from_utf8_lossy(&status.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let got_omega = report["params"]["omega_m_hz"].as_f64().unwrap();
    let got_gamma = report["params"]["gamma_m_hz"].as_f64().unwrap();
    let got_g0 = report["params"]["g0_hz"].as_f64().unwrap();
    assert!((got_omega / 7.65e9 - 1.0).abs() < 1e-8);
    assert!((got_gamma / 4.91e6 - 1.0).abs() < 1e-6);
    assert!((got_g0 / 4.52e5 - 1.0).abs() < 1e-6);
}

#[test]
fn estimate_g0_round_trip_and_seed_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config = config_with(dir.path(), &[("\"r\": 0.28", "\"r\": 0.0")]);

    let noiseless = run(&[
        "estimate-g0",
        "--config",
        config.to_str().unwrap(),
        "--synthesize",
        "--delta-hz",
        "1e9",
    ]);
    assert!(noiseless.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&noiseless.stdout)).unwrap();
    let g0 = report["estimate"]["g0_hz"].as_f64().unwrap();
    assert!(
        (g0 / 4.52e5 - 1.0).abs() < 5e-3,
        "round trip returned {g0} Hz, wanted 452 kHz within 0.5%"
    );

    let seeded = run(&[
        "estimate-g0",
        "--config",
        config.to_str().unwrap(),
        "--synthesize",
        "--delta-hz",
        "1e9",
        "--seed",
        "11",
    ]);
    let seeded_again = run(&[
        "estimate-g0",
        "--config",
        config.to_str().unwrap(),
        "--synthesize",
        "--delta-hz",
        "1e9",
        "--seed",
        "11",
    ]);
    assert!(seeded.status.success());
    assert_eq!(seeded.stdout, seeded_again.stdout);
}

#[test]
fn estimate_g0_trace_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = repo_config();
    let trace = dir.path().join("trace.csv");
    let direct = run(&[
        "estimate-g0",
        "--config",
        config.to_str().unwrap(),
        "--synthesize",
        "--delta-hz",
        "1e9",
        "--dump-trace",
        trace.to_str().unwrap(),
    ]);
    assert!(direct.status.success());
    let direct_report: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&direct.stdout)).unwrap();

    let from_file = run(&[
        "estimate-g0",
        "--config",
        config.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(from_file.status.success());
    let file_report: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&from_file.stdout)).unwrap();
    assert_eq!(direct_report["estimate"], file_report["estimate"]);
}

#[test]
fn estimate_g0_sweep_reports_bias_curve() {
    let dir = tempfile::tempdir().unwrap();
    let config = config_with(
        dir.path(),
        &[("\"points\": 401", "\"points\": 9")],
    );
    let status = run(&[
        "estimate-g0",
        "--config",
        config.to_str().unwrap(),
        "--synthesize",
        "--sweep",
    ]);
    assert!(status.status.success(), "stderr: {}", String::from_utf8_lossy(&status.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&status.stdout)).unwrap();
    let points = report["points"].as_array().unwrap();
    assert_eq!(points.len(), 9);
    let estimates: Vec<f64> = points
        .iter()
        .filter_map(|p| p["estimate"]["g0_hz"].as_f64())
        .collect();
    assert!(estimates.len() >= 8);
    // Parasitic mirror at r = 0.28: the per-detuning estimates spread.
    let min = estimates.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = estimates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!((max - min) / 4.52e5 > 1e-3, "expected a detuning-dependent bias curve");
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{ \"cavity\": { } }").unwrap();
    let status = run(&[
        "sweep-eta",
        "--config",
        path.to_str().unwrap(),
        "--phase",
        "0",
    ]);
    assert_eq!(status.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&status.stderr);
    assert!(stderr.contains("line"), "stderr should carry position info: {stderr}");
}
