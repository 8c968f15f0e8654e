use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_nested-ki");

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nested-ki-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let text = format!(
        r#"{{
  "schema_version": 1,
  "experiment": "purity-decay",
  "layout": {{"n_c": 1, "n_e": 3, "n_ep": 4}},
  "topology": {{"preset": "baseline-chain"}},
  "parameters": {{"J": 1.0, "lambda": 0.05, "gamma": 0.3}},
  "run": {{"t_max": 40, "record_every": 10, "base_seed": 5, "n_realizations": 3}}{extra}
}}"#
    );
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

fn nested_ki(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("NESTED_KI_OUTPUT_DIR").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn list_presets_names_figures_and_is_stable() {
    let a = nested_ki(&["list-presets"]);
    assert!(a.status.success());
    let text = stdout(&a);
    assert!(text.contains("baseline-chain (Fig. 2)"), "{text}");
    assert!(text.contains("spectator (Fig. 10)"), "{text}");
    assert_eq!(text, stdout(&nested_ki(&["list-presets"])));
}

#[test]
fn run_writes_csv_and_sidecar() {
    let dir = scratch("run");
    let cfg = small_config(&dir, "");
    let out = dir.join("out");
    let o = nested_ki(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("purity-decay.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "gamma,t,realization,n_realizations,seed,purity");
    assert_eq!(csv.lines().filter(|l| l.split(',').nth(2) == Some("mean")).count(), 5);
    assert_eq!(csv.lines().count(), 1 + 5 * 4);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("purity-decay.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(meta["base_seed"], 5);
    assert_eq!(meta["schema_version"], 1);
    assert_eq!(meta["run_config"]["experiment"], "purity-decay");
}

#[test]
fn oversized_layout_exits_one_with_memory_limit() {
    let dir = scratch("big");
    let cfg = small_config(&dir, "");
    let text = fs::read_to_string(&cfg).unwrap().replace("\"n_ep\": 4", "\"n_ep\": 36");
    fs::write(&cfg, text).unwrap();
    let o = nested_ki(&["run", cfg.to_str().unwrap(), "--out", dir.join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("memory limit"), "{}", stderr(&o));
}

#[test]
fn unknown_key_exits_one() {
    let dir = scratch("unknown");
    let cfg = small_config(&dir, ",\n  \"colour\": \"blue\"");
    let o = nested_ki(&["run", cfg.to_str().unwrap(), "--out", dir.join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown field"), "{}", stderr(&o));
}

#[test]
fn override_replaces_gamma_and_is_recorded() {
    let dir = scratch("override");
    let cfg = small_config(&dir, "");
    let out = dir.join("out");
    let o = nested_ki(&["run", cfg.to_str().unwrap(), "--override", "gamma=0.5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("purity-decay.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.starts_with("0.5,")));
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("purity-decay.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["overrides"][0], "gamma=0.5");
    assert_eq!(meta["run_config"]["parameters"]["gamma"], 0.5);
    assert_eq!(meta["config"]["gamma"], 0.5);
}

#[test]
fn csv_is_byte_identical_across_runs_and_thread_counts() {
    let dir = scratch("determinism");
    let cfg = small_config(&dir, ",\n  \"sweep\": {\"gammas\": [0.1, 0.4]}");
    let mut csvs = Vec::new();
    for (i, threads) in ["1", "3", "1", "2"].iter().enumerate() {
        let out = dir.join(format!("out{i}"));
        let o = nested_ki(&["--threads", threads, "run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        csvs.push(fs::read(out.join("purity-decay.csv")).unwrap());
    }
    assert!(csvs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn sidecar_reproduces_csv() {
    let dir = scratch("sidecar");
    let cfg = small_config(&dir, "");
    let first = dir.join("first");
    assert!(nested_ki(&["run", cfg.to_str().unwrap(), "-o", "lambda=0.08", "--out", first.to_str().unwrap()]).status.success());
    let second = dir.join("second");
    let sidecar = first.join("purity-decay.meta.json");
    let o = nested_ki(&["run", sidecar.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(first.join("purity-decay.csv")).unwrap(), fs::read(second.join("purity-decay.csv")).unwrap());
}

#[test]
fn output_dir_falls_back_to_environment() {
    let dir = scratch("envdir");
    let cfg = small_config(&dir, "");
    let target = dir.join("from-env");
    let o = Command::new(BIN)
        .args(["run", cfg.to_str().unwrap()])
        .env("NESTED_KI_OUTPUT_DIR", &target)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(target.join("purity-decay.csv").exists());
}

#[test]
fn cp_trajectory_writes_reference_curves() {
    let dir = scratch("cp");
    let text = r#"{
  "schema_version": 1,
  "experiment": "cp-trajectory",
  "layout": {"n_c": 2, "n_e": 2, "n_ep": 3},
  "topology": {"preset": "spectator"},
  "parameters": {"J": 1.0, "lambda": 0.05, "gamma": 0.3,
                 "fields": {"central": {"bx": 0.7071067811865476, "by": 0.0, "bz": 0.7071067811865476},
                            "near": {"bx": 1.0, "by": 0.0, "bz": 1.0}, "far": {"bx": 1.0, "by": 0.0, "bz": 1.0}}},
  "run": {"t_max": 30, "record_times": [0, 10, 30], "n_realizations": 2},
  "sweep": {"curve_samples": 11}
}"#;
    let cfg = dir.join("cp.json");
    fs::write(&cfg, text).unwrap();
    let out = dir.join("out");
    let o = nested_ki(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let header = fs::read_to_string(out.join("cp-trajectory.csv")).unwrap();
    assert!(header.starts_with("gamma,t,realization,n_realizations,seed,purity,concurrence\n"));
    let curves = fs::read_to_string(out.join("cp-trajectory.reference.csv")).unwrap();
    assert_eq!(curves.lines().count(), 1 + 22);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        nested_ki_cli::config::load(&text, &[]).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 9);
}

#[test]
fn verify_quick_passes() {
    let o = nested_ki(&["verify", "quick"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("oracle equivalence"));
}

#[test]
fn verify_detects_flipped_gate_order() {
    let o = nested_ki(&["verify", "quick", "--flip-gate-order"]);
    assert!(!o.status.success());
    let text = stdout(&o);
    let line = text.lines().find(|l| l.contains("oracle equivalence")).unwrap();
    assert!(line.starts_with("[FAIL]"), "{line}");
}
