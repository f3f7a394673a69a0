//! End-to-end tests of the `spinlab` binary: outputs, exit codes and
//! determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spinlab_core::variational::onersb_params;
use spinlab_core::Mixture;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spinlab"));
    c.env_remove("SPINLAB_THREADS");
    c
}

fn mixture_file(dir: &Path, name: &str, gammas: &[f64]) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::json!({ "gammas": gammas }).to_string()).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("bad JSON ({e}): {}", String::from_utf8_lossy(&o.stdout)))
}

/// Data rows of CSV output (comment lines and header skipped).
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn analyze_classifies_replica_symmetric_mixture() {
    let dir = tempfile::tempdir().unwrap();
    let m = mixture_file(dir.path(), "rs.json", &[0.0, 0.5]);
    let o = run(&["analyze", "--mixture", m.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["result"]["model_type"], "StrictlyRS");
    assert_eq!(v["tool"], "spinlab");
    assert_eq!(v["version"], spinlab_core::VERSION);
    assert_eq!(v["config"]["grid"], 4001);
    assert_eq!(v["mixture"][1].as_f64(), Some(0.5));
}

#[test]
fn rate_at_ground_state_energy_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let g = [0.0, 0.0, 1.0, 0.5f64.sqrt()];
    let m = mixture_file(dir.path(), "m.json", &g);
    let e0 = onersb_params(&Mixture::new(g.to_vec()).unwrap()).unwrap().e0;
    let e = format!("{e0:.17e}");
    let o = run(&["rate", "--mixture", m.to_str().unwrap(), "--emin", &e, "--emax", &e]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("# spinlab "));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 1);
    let theta: f64 = rows[0][2].parse().unwrap();
    assert!(theta.abs() < 1e-8, "theta {theta}");
}

#[test]
fn usage_errors_exit_64() {
    let o = run(&["analyze"]);
    assert_eq!(o.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(run(&["analyze", "--mixture", "/nonexistent/m.json"]).status.code(), Some(64));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn domain_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let m = mixture_file(dir.path(), "m.json", &[0.0, 0.0, 1.0]);
    // no degree-2 component to tilt
    let o = run(&["tilt", "--mixture", m.to_str().unwrap(), "--degree", "2"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn exhausted_budget_exits_3_with_output() {
    let dir = tempfile::tempdir().unwrap();
    let m = mixture_file(dir.path(), "m.json", &[0.0, 1.0, 0.5]);
    let o = run(&["sample-gs", "--mixture", m.to_str().unwrap(), "--n", "20", "--restarts", "1", "--steps", "1"]);
    assert_eq!(o.status.code(), Some(3));
    let v = stdout_json(&o);
    assert_eq!(v["result"]["iterations"], 1);
}

#[test]
fn identical_config_gives_identical_bytes_and_threads_do_not_matter() {
    let dir = tempfile::tempdir().unwrap();
    let m = mixture_file(dir.path(), "m.json", &[0.0, 1.0]);
    let out_a = dir.path().join("a.json");
    let out_b = dir.path().join("b.json");
    let args = |out: &Path| {
        vec![
            "subag".to_string(),
            "--mixture".into(),
            m.to_str().unwrap().into(),
            "--n".into(),
            "40".into(),
            "--eta".into(),
            "0.1".into(),
            "--k".into(),
            "3".into(),
            "--seed".into(),
            "7".into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    assert_eq!(bin().args(args(&out_a)).status().unwrap().code(), Some(0));
    assert_eq!(bin().args(args(&out_b)).env("SPINLAB_THREADS", "1").status().unwrap().code(), Some(0));
    // the output path is part of the embedded config; compare the rest
    let a: serde_json::Value = serde_json::from_slice(&std::fs::read(&out_a).unwrap()).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&std::fs::read(&out_b).unwrap()).unwrap();
    assert_eq!(a["result"], b["result"]);
    let again = dir.path().join("again.json");
    assert_eq!(bin().args(args(&out_a)).status().unwrap().code(), Some(0));
    std::fs::copy(&out_a, &again).unwrap();
    assert_eq!(bin().args(args(&out_a)).status().unwrap().code(), Some(0));
    assert_eq!(std::fs::read(&out_a).unwrap(), std::fs::read(&again).unwrap());
    let e = a["result"]["mean_energy"].as_f64().unwrap();
    assert!(e > 1.0 && e < 1.6, "mean energy {e}");
}

#[test]
fn bad_thread_variable_exits_64() {
    let dir = tempfile::tempdir().unwrap();
    let m = mixture_file(dir.path(), "m.json", &[0.0, 1.0]);
    let o = bin().args(["analyze", "--mixture", m.to_str().unwrap()]).env("SPINLAB_THREADS", "zero").output().unwrap();
    assert_eq!(o.status.code(), Some(64));
}

#[test]
fn tree_writes_summary_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let m = mixture_file(dir.path(), "m.json", &[0.0, 0.0, 1.0, 0.5f64.sqrt()]);
    let out = dir.path().join("tree.json");
    let side = dir.path().join("tree.bin");
    let o = run(&[
        "tree",
        "--mixture",
        m.to_str().unwrap(),
        "--n",
        "30",
        "--k",
        "2",
        "--delta",
        "0.3",
        "--eps",
        "1.5",
        "--init-steps",
        "10",
        "--steps",
        "50",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
        "--sidecar",
        side.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    let r = &v["result"];
    assert_eq!(r["radii"].as_array().unwrap().len(), 2);
    let built = r["built"]["nodes"].as_object().unwrap();
    assert_eq!(built.keys().cloned().collect::<Vec<_>>(), ["", "1", "2"]);
    assert!((built["1"]["point_norm2"].as_f64().unwrap() - 30.0).abs() < 1e-8);
    let pruned = r["pruned"]["nodes"].as_object().unwrap().len();
    let bytes = std::fs::read(&side).unwrap();
    assert_eq!(&bytes[..4], b"UTRE");
    assert_eq!(u64::from_le_bytes(bytes[4..12].try_into().unwrap()), 30);
    assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize, pruned);
    assert_eq!(bytes.len(), 20 + pruned * 30 * 8);
}

#[test]
fn curve_subcommands_emit_csv() {
    let dir = tempfile::tempdir().unwrap();
    let m1 = mixture_file(dir.path(), "m.json", &[0.0, 0.0, 1.0, 0.5f64.sqrt()]);
    let m = m1.to_str().unwrap();
    let o = run(&["profile", "--mixture", m, "--grid", "11"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&String::from_utf8(o.stdout).unwrap());
    assert_eq!(rows.len(), 11);
    // the zero-temperature profile ends at the ground-state energy
    let e1: f64 = rows[10][2].parse().unwrap();
    assert!((e1 - 2.093950437870).abs() < 1e-6);
    assert_eq!(rows[10][1], "");
    let o = run(&["complexity", "--mixture", m, "--grid", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(csv_rows(&String::from_utf8(o.stdout).unwrap()).len(), 9);
    // a pure mixture is perturbed automatically
    let p = mixture_file(dir.path(), "p.json", &[0.0, 0.0, 1.0]);
    let o = run(&["rate", "--mixture", p.to_str().unwrap(), "--grid", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_rows(&String::from_utf8(o.stdout).unwrap()).len(), 4);
}

#[test]
fn tilt_and_band_run() {
    let dir = tempfile::tempdir().unwrap();
    let m = mixture_file(dir.path(), "m.json", &[0.0, 0.0, 1.0, 0.5f64.sqrt()]);
    let o = run(&["tilt", "--mixture", m.to_str().unwrap(), "--degree", "3", "--xmax", "4", "--grid", "3", "--q-grid", "11"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&String::from_utf8(o.stdout).unwrap());
    let gs: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(gs[2] > gs[1] && gs[1] >= gs[0] - 1e-12);
    let o = run(&["band", "--mixture", m.to_str().unwrap(), "--n", "20", "--q", "0.5", "--samples", "256", "--restarts", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    let center = v["result"]["center_energy_density"].as_f64().unwrap();
    let band = v["result"]["band_ground_state"]["value"].as_f64().unwrap();
    assert!(band <= center + 1e-9 && band > 0.0);
}
