//! Command-line behaviour: outputs, seed override and exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bsclink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bsclink"))
        .args(args)
        .output()
        .expect("bsclink runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let text = format!(
        r#"
seed = 3
scheme = "bpsk"
trials = 200
gamma_eff_db = 12.0

[channel]
k_tt_db = 7.0
k_tr_db = 7.0

[layout]
tau_sync = 4
symbol_period = 1e-6
slots = 2
slot_len = 8
pilot_len = 4
placement = "per-slot"

[sweep]
gamma_db = [5, 15]
estimators = ["ls", "lmmse"]
{extra}
"#
    );
    let path = dir.join("cfg.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn sweep_csv_has_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = bsclink(&["ber-sweep", "--config", s(&cfg)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert!(lines[0].starts_with("scheme,k_tt_db,k_tr_db,gamma_eff_db,estimator"));
    assert_eq!(lines.len(), 1 + 2 * 2);
    assert!(lines[1..].iter().all(|l| l.starts_with("bpsk,")));
}

#[test]
fn seed_override_changes_results_and_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let a = bsclink(&["sim", "--config", s(&cfg)]);
    let b = bsclink(&["sim", "--config", s(&cfg), "--seed", "4"]);
    let c = bsclink(&["sim", "--config", s(&cfg)]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, c.stdout);
    assert_ne!(a.stdout, b.stdout);
    let json: serde_json::Value = serde_json::from_slice(&b.stdout).unwrap();
    assert_eq!(json["seed"], 4);
}

#[test]
fn json_output_by_extension() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let target = dir.path().join("mse.json");
    let out = bsclink(&["mse-sweep", "--config", s(&cfg), "--out", s(&target)]);
    assert!(out.status.success());
    let rows: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&target).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 4);
}

#[test]
fn bad_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "seed = 1\nscheme = \"qam\"\n").unwrap();
    let out = bsclink(&["sim", "--config", s(&path)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("bsclink: "));

    let missing = bsclink(&["sim", "--config", s(&dir.path().join("none.toml"))]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn infeasible_allocation_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(
        dir.path(),
        "[allocation]\np0 = 1e-3\nn0 = 1e-9\ngamma_eff_db = 10.0\nber_target = 1e-3\nrate_min = 3.0\n",
    );
    let out = bsclink(&["optimize-frame", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn allocation_report_closes_the_frame() {
    let out = bsclink(&[
        "optimize-frame",
        "--config",
        s(&configs().join("allocation.toml")),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let n = |k: &str| r[k].as_f64().unwrap();
    assert_eq!(
        n("tau_sync") + n("tau_training") + n("tau_data"),
        n("tau_c")
    );
    assert!(n("tau_training") >= n("tau_min") && n("tau_training") <= n("tau_max"));
    assert_eq!(n("tau_training"), n("beta") * n("pilot_len"));
    assert!(r["meets_ber_target"].as_bool().unwrap());
}

#[test]
fn image_demo_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out_dir = dir.path().join("img");
    let out = bsclink(&[
        "image-demo",
        "--config",
        s(&cfg),
        "--out",
        s(&out_dir),
        "--size",
        "16",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let original = std::fs::read(out_dir.join("original.pgm")).unwrap();
    for est in ["ls", "lmmse"] {
        let rx = std::fs::read(out_dir.join(format!("received-{est}.pgm"))).unwrap();
        assert_eq!(rx.len(), original.len());
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["runs"].as_array().unwrap().len(), 2);
}

#[test]
fn shipped_configs_load() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            backscatter_link::harness::ExperimentConfig::load(&path)
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        }
    }
}
