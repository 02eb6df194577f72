//! CLI contract: exit codes, schema error paths, manifest replay.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_supex"));
    c.env_remove("SUPEX_SEED");
    c
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("supex-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_stationary_spec(dir: &Path) -> PathBuf {
    let path = dir.join("stationary.json");
    std::fs::write(
        &path,
        r#"{"k":1,"k1":0,"T":1.0,
            "profiles":[{"kind":"constant","alpha0":1.0}],
            "variance_scales":[{"form":"constant","value":1.0}]}"#,
    )
    .unwrap();
    path
}

fn read_dir_artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .filter(|(name, _)| name != "manifest.json")
        .collect();
    out.sort();
    out
}

#[test]
fn validate_exit_codes() {
    let dir = tmp_dir("validate");
    let spec = write_stationary_spec(&dir);
    let st = bin()
        .args(["validate", "--spec"])
        .arg(&spec)
        .arg("--out")
        .arg(dir.join("ok"))
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));

    // condition failure: k1 = 1 but constant profile
    let bad = dir.join("bad.json");
    std::fs::write(
        &bad,
        r#"{"k":1,"k1":1,"T":1.0,
            "profiles":[{"kind":"constant","alpha0":1.0}],
            "variance_scales":[{"form":"constant","value":1.0}]}"#,
    )
    .unwrap();
    let st = bin()
        .args(["validate", "--spec"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.join("bad"))
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(1));

    // schema error: missing field
    let broken = dir.join("broken.json");
    std::fs::write(
        &broken,
        r#"{"k":1,"k1":0,"T":1.0,
            "profiles":[{"kind":"unique_min","alpha0":1.0}],
            "variance_scales":[{"form":"constant","value":1.0}]}"#,
    )
    .unwrap();
    let out = bin()
        .args(["validate", "--spec"])
        .arg(&broken)
        .arg("--out")
        .arg(dir.join("broken"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("$.profiles[0].t0"),
        "schema error must carry the path: {stderr}"
    );
}

#[test]
fn missing_required_flag_is_usage_error() {
    let st = bin().args(["pickands"]).status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn aggregate_spec_passes_validation() {
    let dir = tmp_dir("aggregate");
    let path = dir.join("aggregate.json");
    std::fs::write(
        &path,
        r#"{"k":2,"k1":2,"T":1.0,"origin":0.5,
            "profiles":[{"kind":"unique_min","alpha0":0.9,"t0":1.0,"M":1.5,"beta":2.0},
                        {"kind":"unique_min","alpha0":1.2,"t0":0.8,"M":1.0,"beta":2.0}],
            "variance_scales":[{"form":"mfbm_local","axis":0,"prefactor":0.25},
                               {"form":"mfbm_local","axis":1,"prefactor":0.25}]}"#,
    )
    .unwrap();
    let out = bin()
        .args(["validate", "--spec"])
        .arg(&path)
        .arg("--out")
        .arg(dir.join("run"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("run").join("validation.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["passed"], true);
}

#[test]
fn seed_env_var_honored_only_without_flag() {
    let dir = tmp_dir("seedenv");
    let run = |seed_flag: Option<&str>, env: Option<&str>, out: &str| -> serde_json::Value {
        let mut c = bin();
        c.args([
            "pickands", "--alpha", "2", "--horizon", "4", "--step", "0.05", "--reps", "50",
        ]);
        if let Some(s) = seed_flag {
            c.args(["--seed", s]);
        }
        if let Some(v) = env {
            c.env("SUPEX_SEED", v);
        }
        let st = c.arg("--out").arg(dir.join(out)).status().unwrap();
        assert_eq!(st.code(), Some(0));
        serde_json::from_str(
            &std::fs::read_to_string(dir.join(out).join("manifest.json")).unwrap(),
        )
        .unwrap()
    };
    let m1 = run(None, Some("777"), "env-only");
    assert_eq!(m1["seed"], 777);
    let m2 = run(Some("5"), Some("777"), "flag-wins");
    assert_eq!(m2["seed"], 5);
    let m3 = run(None, None, "default");
    assert_eq!(m3["seed"], 42);
}

#[test]
fn replay_reproduces_artifacts_bytewise() {
    let dir = tmp_dir("replay");
    let spec = write_stationary_spec(&dir);
    let out = dir.join("ratio-run");
    let st = bin()
        .args(["ratio", "--spec"])
        .arg(&spec)
        .args([
            "--u-list",
            "2.0,2.5",
            "--reps",
            "4000",
            "--pickands-const",
            "1.0",
            "--step",
            "0.05",
            "--seed",
            "11",
            "--threads",
            "1",
        ])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let first = read_dir_artifacts(&out);
    assert!(first.iter().any(|(n, _)| n == "ratio.csv"));

    // replay with a different thread cap must be byte-identical
    let manifest = out.join("manifest.json");
    let mut manifest_json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    let argv = manifest_json["argv"].as_array_mut().unwrap();
    for i in 0..argv.len() {
        if argv[i] == "--threads" {
            argv[i + 1] = serde_json::Value::String("4".into());
        }
    }
    std::fs::write(&manifest, serde_json::to_string(&manifest_json).unwrap()).unwrap();
    let st = bin().arg("replay").arg(&manifest).status().unwrap();
    assert_eq!(st.code(), Some(0));
    let second = read_dir_artifacts(&out);
    assert_eq!(first, second, "replay artifacts differ");
}

#[test]
fn sample_writes_csv_and_binary() {
    let dir = tmp_dir("sample");
    let spec = write_stationary_spec(&dir);
    for fmt in ["csv", "bin"] {
        let out = dir.join(format!("sample-{fmt}"));
        let st = bin()
            .args(["sample", "--spec"])
            .arg(&spec)
            .args([
                "--count", "2", "--step", "0.25", "--format", fmt, "--seed", "3",
            ])
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert_eq!(st.code(), Some(0));
        let arts = read_dir_artifacts(&out);
        assert_eq!(arts.len(), 2);
        if fmt == "csv" {
            let text = String::from_utf8_lossy(&arts[0].1).into_owned();
            assert!(text.starts_with("t0,value\n"));
            assert_eq!(text.lines().count(), 6); // header + 5 nodes
        } else {
            // header: u32 k + u64 count + u64 seed + u64 stream + 5 f64
            assert_eq!(arts[0].1.len(), 4 + 8 + 8 + 8 + 5 * 8);
        }
    }
}

#[test]
fn mc_and_tail_roundtrip() {
    let dir = tmp_dir("mc-tail");
    let spec = write_stationary_spec(&dir);
    let out = dir.join("mc");
    let st = bin()
        .args(["mc", "--spec"])
        .arg(&spec)
        .args(["--u", "2.0", "--step", "0.1", "--reps", "4000", "--seed", "9"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let est: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("mc.json")).unwrap()).unwrap();
    let p = est["estimate"].as_f64().unwrap();
    assert!(p > 0.0 && p < 1.0);

    // tail with a file-based Pickands constant
    let pick = dir.join("pickands.json");
    std::fs::write(&pick, r#"[{"estimate": 1.0, "standard_error": 0.0}]"#).unwrap();
    let out2 = dir.join("tail");
    let st = bin()
        .args(["tail", "--spec"])
        .arg(&spec)
        .args(["--u", "3.0", "--pickands"])
        .arg(&pick)
        .arg("--out")
        .arg(&out2)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let tail: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out2.join("tail.json")).unwrap()).unwrap();
    let p = tail["probability"].as_f64().unwrap();
    assert!((p - 0.0121490822).abs() < 1e-9, "9 Psi(3) expected, got {p}");
}
