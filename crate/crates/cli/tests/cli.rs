use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use purify_core::analysis::{correlation_matrix, s_max};
use purify_core::channels::{bell_state, BellKind};
use purify_core::quantum::{fidelity_with_pure, DensityMatrix};
use purify_core::tomography::{counts_to_csv, expected_counts, standard_settings};
use serde_json::Value;

fn purify(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_purify"))
        .arg("--output-dir")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn state(path: &Path) -> DensityMatrix {
    DensityMatrix::from_json(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Keeps the frontier search small so the pipeline tests stay quick.
const FAST: &[&str] = &["--frontier-random-states", "2000", "--resamples", "20"];

fn pipeline(dir: &Path, extra: &[&str]) -> String {
    let mut args = vec!["pipeline"];
    args.extend_from_slice(FAST);
    args.extend_from_slice(extra);
    ok(purify(dir, &args))
}

#[test]
fn default_pipeline_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = pipeline(dir.path(), &[]);
    assert!(stdout.contains("S_MAX") && stdout.contains("purified"));
    for name in [
        "input_fw.json",
        "input_bw.json",
        "purified.json",
        "metrics.json",
        "bell_test.json",
        "fig4.csv",
        "config.toml",
    ] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    let m = json(&dir.path().join("metrics.json"));
    let s = |k: &str| m[k]["s_max"].as_f64().unwrap();
    assert!(s("input_fw") < 2.0 && s("input_bw") < 2.0);
    // at 50/62 degrees the purified value sits between the two inputs
    assert!(s("input_fw") < s("purified") && s("purified") < s("input_bw"));
    assert_eq!(m["target_bell"], "psi_plus");
    assert_eq!(m["purified"]["monte_carlo"].as_array().unwrap().len(), 4);

    let fig4 = fs::read_to_string(dir.path().join("fig4.csv")).unwrap();
    let mut lines = fig4.lines();
    assert_eq!(lines.next(), Some("series,linear_entropy,tangle"));
    assert_eq!(fig4.lines().filter(|l| l.starts_with("frontier,")).count(), 100);

    let bell = json(&dir.path().join("bell_test.json"));
    assert_eq!(bell["settings"]["a"], -22.5);
    assert_eq!(bell["states"].as_array().unwrap().len(), 3);
}

#[test]
fn emitted_states_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path(), &[]);
    for name in ["input_fw.json", "input_bw.json", "purified.json"] {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        let rho = DensityMatrix::from_json(&text).unwrap();
        assert_eq!(rho.to_json() + "\n", text);
        assert_eq!(DensityMatrix::from_json(&rho.to_json()).unwrap(), rho);
    }
}

#[test]
fn same_seed_gives_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    pipeline(a.path(), &["--seed", "7"]);
    pipeline(b.path(), &["--seed", "7"]);
    pipeline(c.path(), &["--seed", "8"]);
    for name in ["metrics.json", "purified.json", "bell_test.json", "fig4.csv"] {
        let read = |d: &Path| fs::read(d.join(name)).unwrap();
        assert_eq!(read(a.path()), read(b.path()), "{name}");
    }
    assert_ne!(
        fs::read(a.path().join("metrics.json")).unwrap(),
        fs::read(c.path().join("metrics.json")).unwrap()
    );
}

#[test]
fn noiseless_pairs_purify_to_psi_plus_through_tomography() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path(), &["--alpha-forward", "90", "--alpha-backward", "90"]);
    let rho = state(&dir.path().join("purified.json"));
    assert!(fidelity_with_pure(&rho, &bell_state(BellKind::PsiPlus)).unwrap() >= 0.999);
}

#[test]
fn exact_states_skip_tomography() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path(), &["--exact-states"]);
    let m = json(&dir.path().join("metrics.json"));
    assert_eq!(m["exact_states"], true);
    assert!(m["purified"].get("monte_carlo").is_none());
    let s = m["purified"]["s_max"].as_f64().unwrap();
    assert!((s - 1.6157078580804454).abs() < 1e-9);
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("out");
    fs::write(
        &cfg,
        format!(
            "seed = 3\nexact_states = true\nalpha_forward = 70\nalpha_backward = 75\nfrontier_random_states = 500\noutput_dir = {:?}\n",
            out.display().to_string()
        ),
    )
    .unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_purify"))
        .arg("--config")
        .arg(&cfg)
        .args(["pipeline", "--alpha-backward", "80"])
        .output()
        .unwrap();
    ok(status);
    let echo: toml::Value = toml::from_str(&fs::read_to_string(out.join("config.toml")).unwrap()).unwrap();
    assert_eq!(echo["alpha_forward"].as_float(), Some(70.0));
    assert_eq!(echo["alpha_backward"].as_float(), Some(80.0));
    assert_eq!(echo["seed"].as_integer(), Some(3));
    assert_eq!(echo["exact_states"].as_bool(), Some(true));
}

#[test]
fn failed_pipeline_leaves_no_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = purify(dir.path(), &["pipeline", "--alpha-forward", "120"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha_forward"));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);

    let bad_cfg = dir.path().join("bad.toml");
    fs::write(&bad_cfg, "alpha = 3\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_purify"))
        .arg("--config")
        .arg(&bad_cfg)
        .args(["--output-dir", dir.path().join("o").to_str().unwrap(), "pipeline"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!dir.path().join("o").exists());
}

#[test]
fn calibrate_examples() {
    let dir = tempfile::tempdir().unwrap();
    ok(purify(dir.path(), &["calibrate", "2.8284271247461903"]));
    let cal = json(&dir.path().join("calibration.json"));
    assert!((cal["alpha"].as_f64().unwrap() - 90.0).abs() < 1e-9);

    ok(purify(dir.path(), &["calibrate", "1.89"]));
    let cal = json(&dir.path().join("calibration.json"));
    let alpha = cal["alpha"].as_f64().unwrap();
    assert!(alpha > 0.0 && alpha < 90.0);
    assert!((cal["achieved"].as_f64().unwrap() - 1.89).abs() <= 1e-6);
    assert_eq!(cal["target"], 1.89);

    let out = purify(dir.path(), &["calibrate", "3.0"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("achievable range") && err.contains("2.828"), "{err}");
}

fn write_exact_counts(dir: &Path, kind: BellKind) -> std::path::PathBuf {
    let counts = expected_counts(&bell_state(kind).to_density(), &standard_settings(), 1e6).unwrap();
    let path = dir.join("counts.csv");
    fs::write(&path, counts_to_csv(&counts)).unwrap();
    path
}

#[test]
fn tomography_reports_fidelity_of_exact_counts() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_exact_counts(dir.path(), BellKind::PsiPlus);
    let stdout = ok(purify(
        dir.path(),
        &[
            "tomography",
            "--counts",
            csv.to_str().unwrap(),
            "--functional",
            "fidelity:psi_plus",
            "--functional",
            "s_max",
            "--resamples",
            "100",
        ],
    ));
    assert!(stdout.contains("fidelity:psi_plus"));
    let report = json(&dir.path().join("functionals.json"));
    let fid = &report["functionals"][0];
    assert!(fid["estimate"].as_f64().unwrap() >= 1.0 - 1e-6);
    let smax = &report["functionals"][1];
    assert_eq!(smax["name"], "s_max");
    assert!(smax["mean"].as_f64().is_some() && smax["std"].as_f64().unwrap() > 0.0);
    assert_eq!(smax["n_resamples"], 100);
    let rho = state(&dir.path().join("reconstructed.json"));
    assert!(fidelity_with_pure(&rho, &bell_state(BellKind::PsiPlus)).unwrap() >= 1.0 - 1e-6);
}

#[test]
fn tomography_rejects_malformed_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    fs::write(&csv, "label,count\nHH,4\n").unwrap();
    let out = purify(dir.path(), &["tomography", "--counts", csv.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("exposure"));

    fs::write(&csv, "label,count,exposure\nHH,4,1\nHV,x,1\n").unwrap();
    let out = purify(dir.path(), &["tomography", "--counts", csv.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    fs::write(&csv, "label,count,exposure\nQQ,4,1\n").unwrap();
    let out = purify(dir.path(), &["tomography", "--counts", csv.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("QQ"));
    assert!(!dir.path().join("reconstructed.json").exists());
}

fn bell_test(dir: &Path, state: &Path, extra: &[&str]) -> Value {
    let mut args = vec!["bell-test", "--state", state.to_str().unwrap()];
    args.extend_from_slice(extra);
    ok(purify(dir, &args));
    json(&dir.join("bell_test.json"))
}

#[test]
fn bell_test_examples() {
    let dir = tempfile::tempdir().unwrap();
    let psi = dir.path().join("psi.json");
    fs::write(&psi, bell_state(BellKind::PsiPlus).to_density().to_json()).unwrap();
    let r = bell_test(dir.path(), &psi, &["--settings", "-22.5", "22.5", "0", "45", "--optimal"]);
    assert!((r["s"].as_f64().unwrap() - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-10);
    assert!((r["s_max"].as_f64().unwrap() - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-10);

    let mixed = dir.path().join("mixed.json");
    fs::write(&mixed, DensityMatrix::maximally_mixed(vec![2, 2]).to_json()).unwrap();
    let r = bell_test(dir.path(), &mixed, &["--settings", "10", "20", "30", "40"]);
    assert!(r["s"].as_f64().unwrap().abs() < 1e-12);
    assert!(r.get("s_max").is_none());

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"dims":[2],"re":[[1,0],[0,1]],"im":[[0,0],[0,0]]}"#).unwrap();
    assert!(!purify(dir.path(), &["bell-test", "--state", bad.to_str().unwrap()]).status.success());
}

#[test]
fn bell_test_on_purified_state() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path(), &["--exact-states"]);
    let path = dir.path().join("purified.json");
    let rho = state(&path);
    let smax = s_max(&rho).unwrap();

    let r = bell_test(dir.path(), &path, &[]);
    assert!(r["s"].as_f64().unwrap() <= smax);

    // For a diagonal correlation matrix whose two largest entries are x and z,
    // the best settings measure σz, σx on one side and the normalized images
    // of those axes mixed at angle γ on the other.
    let t = correlation_matrix(&rho).unwrap().0;
    let (tx, tz) = (t[(0, 0)], t[(2, 2)]);
    let gamma = tx.abs().atan2(tz.abs());
    let axis = |x: f64, z: f64| 0.5 * x.atan2(z).to_degrees();
    let (ux, uz) = (0.0, tz.signum());
    let (vx, vz) = (tx.signum(), 0.0);
    let b = axis(ux * gamma.cos() + vx * gamma.sin(), uz * gamma.cos() + vz * gamma.sin());
    let b_prime = axis(ux * gamma.cos() - vx * gamma.sin(), uz * gamma.cos() - vz * gamma.sin());
    let settings = ["0".to_string(), "45".to_string(), b.to_string(), b_prime.to_string()];
    let mut args = vec!["--settings"];
    args.extend(settings.iter().map(String::as_str));
    let r = bell_test(dir.path(), &path, &args);
    let s = r["s"].as_f64().unwrap();
    assert!((s - smax).abs() <= 0.02, "{s} vs {smax}");
    assert!(s <= smax + 1e-12);
}

#[test]
fn frontier_command_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    ok(purify(dir.path(), &["frontier", "--n-grid", "20", "--random-states", "1000"]));
    let csv = fs::read_to_string(dir.path().join("frontier.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "linear_entropy,max_tangle");
    assert_eq!(rows.len(), 21);
    assert_eq!(rows[1], "0,1");
    assert!(rows[20].ends_with(",0"));
    assert!(!purify(dir.path(), &["frontier", "--n-grid", "5"]).status.success());
}
