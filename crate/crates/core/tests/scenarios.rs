use std::fs;

use serde_json::json;
use ssh_core::scenario::{
    config_hash, load_config, load_config_str, output_prefix, parse_config, run_scenario, PRESETS,
};
use ssh_core::Error;

fn run_preset(name: &str, dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let text = ssh_core::scenario::preset(name).unwrap();
    let (raw, config) = load_config_str(text, name).unwrap();
    run_scenario(&config, &raw, Some(dir)).unwrap().outputs
}

#[test]
fn every_preset_runs_into_an_override_directory() {
    let dir = tempfile::tempdir().unwrap();
    for (name, _) in PRESETS {
        for path in run_preset(name, dir.path()) {
            assert!(
                path.starts_with(dir.path()),
                "{name} wrote {}",
                path.display()
            );
            assert!(fs::metadata(&path).unwrap().len() > 0);
        }
    }
}

#[test]
fn csv_outputs_carry_the_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let text = ssh_core::scenario::preset("topological_bands").unwrap();
    let (raw, _) = load_config_str(text, "topological_bands").unwrap();
    let outputs = run_preset("topological_bands", dir.path());
    let body = fs::read_to_string(&outputs[0]).unwrap();
    let mut lines = body.lines();
    assert_eq!(
        lines.next().unwrap(),
        format!(
            "# ssh-sim {} config_hash={}",
            env!("CARGO_PKG_VERSION"),
            config_hash(&raw)
        )
    );
    assert_eq!(lines.next().unwrap(), "k,e_plus_khz,e_minus_khz");
    assert_eq!(lines.count(), 181);
}

#[test]
fn json_outputs_carry_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let outputs = run_preset("topological_chiral", dir.path());
    let summary = outputs
        .iter()
        .find(|p| p.to_string_lossy().ends_with("_summary.json"))
        .unwrap();
    let value: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(summary).unwrap()).unwrap();
    assert_eq!(value["provenance"]["tool"], "ssh-sim");
    assert_eq!(value["ideal_winding"], 1);
    let c_bar = value["winding_estimate"].as_f64().unwrap();
    assert!((c_bar - 0.8455471000259493).abs() < 1e-9, "{c_bar}");
}

#[test]
fn hash_ignores_key_order_and_whitespace() {
    let a: serde_json::Value = serde_json::from_str(r#"{"kind":"bands","n_k":3}"#).unwrap();
    let b: serde_json::Value =
        serde_json::from_str("{ \"n_k\": 3,\n \"kind\": \"bands\" }").unwrap();
    assert_eq!(config_hash(&a), config_hash(&b));
    assert_eq!(config_hash(&a).len(), 16);
    assert_ne!(
        config_hash(&a),
        config_hash(&json!({"kind": "bands", "n_k": 4}))
    );
}

#[test]
fn prefix_without_override_is_used_verbatim() {
    let (_, config) =
        load_config_str(ssh_core::scenario::preset("uniform_spectrum").unwrap(), "p").unwrap();
    assert_eq!(
        output_prefix(&config, None),
        std::path::PathBuf::from("out/uniform_spectrum")
    );
}

#[test]
fn relative_prefix_creates_nested_directories() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("a/b/run");
    let raw = json!({
        "kind": "bands",
        "spec": {"n_cells": 2, "j_intra_khz": 100, "j_inter_khz": 300},
        "n_k": 5,
        "output_prefix": prefix,
    });
    let config = parse_config(&raw).unwrap();
    let summary = run_scenario(&config, &raw, None).unwrap();
    assert_eq!(summary.outputs, vec![dir.path().join("a/b/run_bands.csv")]);
}

#[test]
fn file_errors_name_the_path() {
    let err = load_config(std::path::Path::new("/nonexistent/config.json")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.to_string().contains("/nonexistent/config.json"));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    fs::write(&path, "{ not json").unwrap();
    assert!(matches!(
        load_config(&path).unwrap_err(),
        Error::Json { .. }
    ));
}

#[test]
fn invalid_configs_report_every_problem() {
    let raw = json!({
        "kind": "quench",
        "spec": {"n_cells": 3, "j_intra_khz": -1, "j_inter_khz": 800, "onsite_khz": [0, 0, 0, 0, 0]},
        "dt_us": 0,
        "initial_site": 9,
        "output_prefix": "x",
        "colour": "blue",
    });
    let problems = parse_config(&raw).unwrap_err();
    let joined = problems.join("\n");
    for needle in [
        "j_intra_khz",
        "onsite_khz: expected 6 entries, got 5",
        "dt_us: must be positive, got 0",
        "initial_site",
        "colour",
    ] {
        assert!(joined.contains(needle), "missing {needle:?} in:\n{joined}");
    }
}
