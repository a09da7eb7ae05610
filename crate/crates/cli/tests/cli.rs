use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn metamss(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metamss")).args(args).current_dir(dir).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn structure(v: &serde_json::Value) -> Vec<String> {
    let mut s: Vec<String> = v["structure"].as_array().unwrap().iter().map(|t| t.as_str().unwrap().to_string()).collect();
    s.sort();
    s
}

#[test]
fn generated_s1_is_identified() {
    let dir = tempfile::tempdir().unwrap();
    assert!(metamss(&["generate", "S1", "--seed", "3", "--out", "s1.csv"], dir.path()).status.success());
    let head = fs::read_to_string(dir.path().join("s1.csv")).unwrap();
    assert!(head.starts_with("u1,y\n"));

    let report = json(&metamss(&["identify", "s1.csv", "--seed", "1"], dir.path()));
    assert_eq!(report["schema"], 1);
    assert_eq!(report["method"], "meta-mss");
    assert_eq!(structure(&report), ["x1(k-1)", "x1(k-2)", "y(k-1)", "y(k-2)"]);
    assert_eq!(report["elapsed_ms"], 0.0);
}

#[test]
fn frols_method_reports_energy_ratios() {
    let dir = tempfile::tempdir().unwrap();
    metamss(&["bench-gen", "S2", "--out", "s2.csv"], dir.path());
    let report = json(&metamss(&["identify", "s2.csv", "--method", "frols", "--frols-terms", "4"], dir.path()));
    assert_eq!(report["method"], "frols");
    assert_eq!(report["err"].as_array().unwrap().len(), 4);
    assert_eq!(structure(&report), ["x1(k-1)", "x1(k-1)^2", "x1(k-1)^3", "y(k-1)"]);
}

#[test]
fn missing_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = metamss(&["identify", "absent.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.csv"));
}

#[test]
fn unknown_system_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = metamss(&["benchmark", "S7"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("S7"));
}

#[test]
fn non_binary_labels_are_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.csv"), "u1,y\n0.1,0\n0.2,1\n0.3,2\n0.4,0\n").unwrap();
    let out = metamss(&["classify", "bad.csv"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("labels must be 0 or 1"));
}

#[test]
fn malformed_csv_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.csv"), "u1,y\n0.1,0\nabc,1\n").unwrap();
    assert_eq!(metamss(&["identify", "bad.csv"], dir.path()).status.code(), Some(3));
}

#[test]
fn invalid_settings_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    metamss(&["generate", "S1", "--out", "s1.csv"], dir.path());
    assert_eq!(metamss(&["identify", "s1.csv", "--alpha", "1.5"], dir.path()).status.code(), Some(2));
    assert_eq!(metamss(&["identify", "s1.csv", "--delay", "0"], dir.path()).status.code(), Some(2));
    assert_eq!(metamss(&["identify", "s1.csv", "--agents", "x"], dir.path()).status.code(), Some(2));
}

fn splitmix(k: u64) -> u64 {
    let mut z = k.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[test]
fn classify_reports_held_out_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("u1,y\n");
    let x: Vec<f64> = (0..400u64).map(|k| 2.0 * (splitmix(k) >> 11) as f64 / (1u64 << 53) as f64 - 1.0).collect();
    for k in 0..400 {
        let label = k >= 2 && 4.0 * x[k - 1] - 3.0 * x[k - 2] * x[k - 2] > 0.0;
        csv.push_str(&format!("{},{}\n", x[k], label as u8));
    }
    fs::write(dir.path().join("labels.csv"), csv).unwrap();
    let out = metamss(&["classify", "labels.csv", "--split", "0.8", "--standardize", "--seed", "2"], dir.path());
    let report = json(&out);
    let c = &report["classification"];
    assert!(c["test_accuracy"].as_f64().unwrap() >= 0.9, "{c}");
    assert_eq!(c["train_samples"], 317);
    assert_eq!(c["test_samples"], 79);
    assert!(String::from_utf8_lossy(&out.stderr).contains("test accuracy"));
}

#[test]
fn benchmark_writes_identical_reports_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    for prefix in ["a", "b"] {
        let out = metamss(&["benchmark", "S2", "meta-mss", "--runs", "3", "--seed", "42", "--out", prefix], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = fs::read(dir.path().join("a.json")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.json")).unwrap());
    assert_eq!(fs::read(dir.path().join("a.csv")).unwrap(), fs::read(dir.path().join("b.csv")).unwrap());

    let report: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(report["schema"], 1);
    assert_eq!(report["runs"], 3);
    assert!(report["correct_pct"].is_number());
    let csv = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().nth(1).unwrap().starts_with("0,42,S2,meta-mss,"));
}

#[test]
fn benchmark_defaults_to_a_named_prefix() {
    let dir = tempfile::tempdir().unwrap();
    assert!(metamss(&["benchmark", "S6", "frols", "--runs", "2"], dir.path()).status.success());
    assert!(dir.path().join("S6-frols.json").exists());
    assert!(dir.path().join("S6-frols.csv").exists());
}

#[test]
fn dictionary_size() {
    let dir = tempfile::tempdir().unwrap();
    let out = metamss(&["dictionary", "--ny", "4", "--nx", "4", "--degree", "3"], dir.path());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("terms         165\n"));
}
