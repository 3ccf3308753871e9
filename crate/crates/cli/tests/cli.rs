use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const DEVICE: &str = r#"
[device]
f_qubit_hz = 4.2e9
f_cavity_hz = 12.1e9
g_over_2pi_hz = 153e6
c_sigma_f = 91e-15
chi_over_2pi_hz = 390e3
q_total = 10400
coupling_ratio = 0.25
t1_intrinsic_s = 70e-6
"#;

const SOURCES: &str = r#"
[source.walls]
kappa_over_2pi_hz = 0.872596e6
temperature_k = 0.008

[source.feedline]
kappa_over_2pi_hz = 0.290865e6
temperature_k = 0.12
port = "external"
"#;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn cqed(dir: &Path, config: Option<&str>, args: &[&str]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cqed"));
    cmd.args(args);
    if let Some(text) = config {
        let path = dir.join("run.toml");
        fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    let Output {
        status,
        stdout,
        stderr,
    } = cmd.output().unwrap();
    Run {
        code: status.code().unwrap(),
        stdout: String::from_utf8(stdout).unwrap(),
        stderr: String::from_utf8(stderr).unwrap(),
    }
}

fn summary(dir: &Path, config: &str, command: &str) -> (i32, Value) {
    let run = cqed(dir, Some(config), &[command, "--format", "json-summary"]);
    let value = serde_json::from_str(&run.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}{}", run.stdout, run.stderr));
    (run.code, value)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn num(v: &Value, path: &[&str]) -> f64 {
    let mut cur = v;
    for p in path {
        cur = &cur[*p];
    }
    cur.as_f64()
        .unwrap_or_else(|| panic!("{path:?} missing in {v}"))
}

/// CSV body rows (comment lines stripped) as header plus records.
fn read_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .unwrap()
        .iter()
        .map(str::to_string)
        .collect();
    let rows = reader
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

fn tmp() -> TempDir {
    tempfile::tempdir().unwrap()
}

#[test]
fn derive_reports_quality_factors_and_purcell_limit() {
    let dir = tmp();
    let config = format!(
        "coherence.measured.t1_s = 70e-6\ncoherence.measured.t2_star_s = 95e-6\n{DEVICE}{SOURCES}"
    );
    let (code, s) = summary(dir.path(), &config, "derive");
    assert_eq!(code, 0);
    let q1 = num(&s, &["derived", "quality_factors", "measured", "q1"]);
    let q2 = num(&s, &["derived", "quality_factors", "measured", "q2"]);
    assert!(rel(q1, 1.85e6) < 0.01 && rel(q1, 1.8e6) < 0.03, "{q1}");
    assert!(rel(q2, 2.51e6) < 0.01 && rel(q2, 2.5e6) < 0.03, "{q2}");
    assert!(rel(num(&s, &["derived", "purcell_t1_s"]), 365e-6) < 0.01);
    assert!(rel(num(&s, &["derived", "n_th", "feedline"]), 7.976e-3) < 1e-3);
    // the explicit chi disagrees with the transmon formula
    assert!(s["warnings"][0].as_str().unwrap().contains("chi"));
    assert_eq!(s["inputs"]["device.f_occupation_hz"], Value::from(12.1e9));
}

#[test]
fn derive_efficiency_from_port_tags() {
    let dir = tmp();
    let config = format!(
        "source.walls.kappa_over_2pi_hz = 0.9e6\nsource.walls.temperature_k = 0.01\n\
         source.line.kappa_over_2pi_hz = 0.3e6\nsource.line.temperature_k = 0.05\nsource.line.port = \"external\"\n{DEVICE}"
    );
    let (code, s) = summary(dir.path(), &config, "derive");
    assert_eq!(code, 0);
    assert!((num(&s, &["derived", "coupling_efficiency"]) - 0.25).abs() < 1e-12);
}

#[test]
fn derive_without_sources_omits_occupations() {
    let dir = tmp();
    let (code, s) = summary(dir.path(), DEVICE, "derive");
    assert_eq!(code, 0);
    assert!(s["derived"].get("n_th").is_none());
    assert!((num(&s, &["derived", "coupling_efficiency"]) - 0.25).abs() < 1e-12);
}

#[test]
fn derive_lists_center_coupled_modes() {
    let dir = tmp();
    let config =
        format!("geometry.a_m = 18.6e-3\ngeometry.b_m = 4.2e-3\ngeometry.d_m = 15.5e-3\n{DEVICE}");
    let (code, s) = summary(dir.path(), &config, "derive");
    assert_eq!(code, 0);
    let modes = s["derived"]["center_coupled_modes"].as_array().unwrap();
    assert_eq!(modes.len(), 2);
    assert_eq!(modes[0]["index"], serde_json::json!([1, 0, 1]));
    assert!(rel(modes[0]["freq_hz"].as_f64().unwrap(), 12.1e9) < 0.05);
    assert!(modes[1]["freq_hz"].as_f64().unwrap() - 4.2e9 > 20e9);
}

#[test]
fn predict_without_chi_gives_twice_t1() {
    let dir = tmp();
    let config = format!("{}{SOURCES}", DEVICE.replace("390e3", "0.0"));
    let (code, s) = summary(dir.path(), &config, "predict");
    assert_eq!(code, 0);
    for key in ["gamma_thermal_s_inv", "gamma_small_chi_s_inv"] {
        assert_eq!(num(&s, &["prediction", key]), 0.0);
    }
    assert!(rel(num(&s, &["prediction", "t2_predicted_s"]), 140e-6) < 1e-12);
}

#[test]
fn predict_echoes_inputs_and_reports_as_printed_on_request() {
    let dir = tmp();
    let config = format!("predict.as_printed = true\n{DEVICE}{SOURCES}");
    let (code, s) = summary(dir.path(), &config, "predict");
    assert_eq!(code, 0);
    assert_eq!(
        s["inputs"]["source.feedline.temperature_k"],
        Value::from(0.12)
    );
    assert_eq!(s["prediction"]["regime"], "crossover");
    let gamma = num(&s, &["prediction", "gamma_thermal_s_inv"]);
    let t2 = num(&s, &["prediction", "t2_predicted_s"]);
    assert!(rel(t2, 1.0 / (0.5 / 70e-6 + gamma)) < 1e-12);
    assert!(s["prediction"].get("gamma_small_chi_as_printed").is_some());
}

#[test]
fn predict_needs_a_source() {
    let dir = tmp();
    assert_eq!(cqed(dir.path(), Some(DEVICE), &["predict"]).code, 2);
}

fn feedline_sweep() -> String {
    format!(
        "sweep.command = \"predict\"\n\
         sweep.axis.t.path = \"source.feedline.temperature_k\"\n\
         sweep.axis.t.values = [0.02, 0.04, 0.06, 0.08, 0.1, 0.12, 0.14, 0.16, 0.18, 0.2]\n{DEVICE}{SOURCES}"
    )
}

#[test]
fn feedline_temperature_sweep_is_monotone_and_ordered() {
    let dir = tmp();
    let run = cqed(
        dir.path(),
        Some(&feedline_sweep()),
        &["sweep", "--jobs", "3"],
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    let (header, rows) = read_csv(&run.stdout);
    let index = column(&header, &rows, "index");
    assert_eq!(index, (0..10).map(f64::from).collect::<Vec<_>>());
    let temps = column(&header, &rows, "source.feedline.temperature_k");
    assert_eq!(temps[0], 0.02);
    assert_eq!(temps[9], 0.2);
    let gamma = column(&header, &rows, "gamma_thermal_s_inv");
    assert!(gamma.windows(2).all(|w| w[1] > w[0]), "{gamma:?}");
}

#[test]
fn sweep_output_is_deterministic() {
    let dir = tmp();
    let a = cqed(
        dir.path(),
        Some(&feedline_sweep()),
        &["sweep", "--jobs", "1"],
    )
    .stdout;
    let b = cqed(
        dir.path(),
        Some(&feedline_sweep()),
        &["sweep", "--jobs", "4"],
    )
    .stdout;
    assert_eq!(a, b);
}

#[test]
fn sweep_axis_must_exist() {
    let dir = tmp();
    let config = feedline_sweep().replace(
        "source.feedline.temperature_k",
        "source.missing.temperature_k",
    );
    assert_eq!(cqed(dir.path(), Some(&config), &["sweep"]).code, 2);
}

fn t1_config(samples: usize) -> String {
    format!(
        "experiment.protocol = \"t1\"\nexperiment.t_final_s = 300e-6\nexperiment.samples = {samples}\n{DEVICE}{SOURCES}"
    )
}

#[test]
fn simulate_t1_recovers_intrinsic_lifetime() {
    let dir = tmp();
    let out = dir.path().join("out");
    let run = cqed(
        dir.path(),
        Some(&t1_config(201)),
        &["simulate", "--out", out.to_str().unwrap()],
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    let s: Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(rel(num(&s, &["fit", "decay_time"]), 70e-6) < 0.01);
    assert!(num(&s, &["derived", "discrepancy_pct"]) < 1.0);
    for section in ["inputs", "derived", "prediction", "fit", "checks"] {
        assert!(s.get(section).is_some(), "{section}");
    }
    let (header, rows) = read_csv(&fs::read_to_string(out.join("timeseries.csv")).unwrap());
    assert_eq!(header, ["t_s", "p_excited"]);
    assert_eq!(rows.len(), 201);
    assert_eq!(
        run.stdout,
        fs::read_to_string(out.join("timeseries.csv")).unwrap()
    );
}

#[test]
fn simulate_ramsey_matches_closed_form() {
    let dir = tmp();
    let config = format!(
        "experiment.protocol = \"ramsey\"\nexperiment.t_final_s = 300e-6\nexperiment.detuning_hz = 33.3e3\n{DEVICE}{SOURCES}"
    );
    let (code, s) = summary(dir.path(), &config, "simulate");
    assert_eq!(code, 0);
    assert!(num(&s, &["derived", "discrepancy_pct"]) <= 5.0);
    assert!(s["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["status"] == "pass"));
}

#[test]
fn simulate_rejects_single_sample() {
    let dir = tmp();
    let run = cqed(dir.path(), Some(&t1_config(1)), &["simulate"]);
    assert_eq!(run.code, 2, "{}", run.stderr);
}

#[test]
fn unfittable_ramsey_still_writes_the_series() {
    // No cavity photons and no intrinsic decay: the envelope never decays.
    let dir = tmp();
    let out = dir.path().join("out");
    let config = format!(
        "source.line.kappa_over_2pi_hz = 1e6\nsource.line.temperature_k = 0.0\n\
         experiment.protocol = \"ramsey\"\nexperiment.t_final_s = 20e-6\nexperiment.detuning_hz = 0.5e6\n{}",
        DEVICE.replace("t1_intrinsic_s = 70e-6\n", "")
    );
    let run = cqed(
        dir.path(),
        Some(&config),
        &["simulate", "--out", out.to_str().unwrap()],
    );
    assert_eq!(run.code, 4, "{}", run.stderr);
    assert!(out.join("timeseries.csv").exists());
    let s: Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(s["fit"]["error"].is_string());
}

#[test]
fn csv_numbers_and_embedded_config_round_trip() {
    let dir = tmp();
    let out = dir.path().join("first");
    let config = format!(
        "experiment.noise_sigma = 0.01\nexperiment.noise_seed = 7\n{}",
        t1_config(101)
    );
    let first = cqed(
        dir.path(),
        Some(&config),
        &["simulate", "--out", out.to_str().unwrap()],
    );
    assert_eq!(first.code, 0, "{}", first.stderr);
    let csv_text = fs::read_to_string(out.join("timeseries.csv")).unwrap();
    assert!(!csv_text.contains('\r'));

    // the header comments alone reproduce the run
    let embedded: String = csv_text
        .lines()
        .filter_map(|l| l.strip_prefix("# "))
        .map(|l| format!("{l}\n"))
        .collect();
    let again = cqed(dir.path(), Some(&embedded), &["simulate"]);
    assert_eq!(again.stdout, csv_text);

    let (header, rows) = read_csv(&csv_text);
    for value in column(&header, &rows, "p_excited") {
        let text = format!("{value:e}");
        assert_eq!(text.parse::<f64>().unwrap().to_bits(), value.to_bits());
    }
}

#[test]
fn invalid_configs_exit_with_2() {
    let dir = tmp();
    assert_eq!(
        cqed(dir.path(), Some("device.f_qubit = 4.2e9\n"), &["derive"]).code,
        2
    );
    assert_eq!(
        cqed(dir.path(), Some("[device\nf_qubit_hz = "), &["verify"]).code,
        2
    );
    assert_eq!(cqed(dir.path(), None, &["derive"]).code, 2);
    let missing: PathBuf = dir.path().join("absent.toml");
    let run = Command::new(env!("CARGO_BIN_EXE_cqed"))
        .args(["derive", "--config", missing.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn verify_default_grid_passes() {
    let dir = tmp();
    let run = cqed(dir.path(), None, &["verify"]);
    assert_eq!(run.code, 0, "{}", run.stdout);
    let (header, rows) = read_csv(&run.stdout);
    let status = header.iter().position(|h| h == "status").unwrap();
    assert!(rows.iter().all(|r| r[status] == "pass"));
    assert!(
        rows.iter()
            .filter(|r| r[0].starts_with("ramsey_rate"))
            .count()
            == 6
    );
}

#[test]
fn verify_marks_hot_grid_out_of_regime() {
    let dir = tmp();
    let run = cqed(
        dir.path(),
        Some("verify.n_th = [0.5]\nverify.chi_over_kappa = [1.0]\n"),
        &["verify"],
    );
    assert_eq!(run.code, 0, "{}", run.stdout);
    let (_, rows) = read_csv(&run.stdout);
    let rate = rows
        .iter()
        .find(|r| r[0].starts_with("ramsey_rate"))
        .unwrap();
    assert_eq!(rate[1], "out_of_validated_regime");
}

#[test]
fn sweep_can_drive_simulations() {
    let dir = tmp();
    let config = format!(
        "sweep.command = \"simulate\"\nsweep.axis.t.path = \"source.feedline.temperature_k\"\nsweep.axis.t.values = [0.05, 0.15]\n{}",
        t1_config(101)
    );
    let run = cqed(dir.path(), Some(&config), &["sweep"]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let (header, rows) = read_csv(&run.stdout);
    for t in column(&header, &rows, "fitted_decay_time_s") {
        assert!(rel(t, 70e-6) < 0.01, "{t}");
    }
}
