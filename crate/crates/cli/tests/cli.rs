//! End-to-end checks of the `deploygame` binary: exit codes, output
//! files, and byte-level reproducibility.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_deploygame"))
}

fn write_intro_scenario(dir: &Path) -> PathBuf {
    std::fs::write(dir.join("net.txt"), "0 1\n1 2\n").unwrap();
    std::fs::write(dir.join("traffic.csv"), "src,dst,volume\n0,2,1.0\n").unwrap();
    let config = dir.join("scenario.toml");
    std::fs::write(
        &config,
        r#"
[topology]
source = "edge-list"
path = "net.txt"

[traffic]
source = "csv"
path = "traffic.csv"

[revenue]
unit_price = 12.0

[costs]
rule = "uniform"
unit_cost = 3.0

[experiment]
seed = 5
replicas = 3
horizon = 40
beta0 = 0.5
induction_rounds = 10
price_grid = { start = 5.0, stop = 30.0, step = 5.0 }
alpha_grid = ["inf", 1.0]
flatten_grid = [2, 3]
"#,
    )
    .unwrap();
    config
}

#[test]
fn validate_passes_on_good_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_intro_scenario(dir.path());
    let output = bin()
        .args(["--config"])
        .arg(&config)
        .arg("validate")
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    let diags: serde_json::Value =
        serde_json::from_slice(&output.stdout).expect("machine-readable diagnostics");
    assert!(diags.as_array().unwrap().is_empty());
}

#[test]
fn validate_fails_on_unreachable_pair() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("net.txt"), "0 1\n2 3\n").unwrap();
    std::fs::write(dir.path().join("traffic.csv"), "src,dst,volume\n0,3,1.0\n").unwrap();
    let config = dir.path().join("scenario.toml");
    std::fs::write(
        &config,
        r#"
[topology]
source = "edge-list"
path = "net.txt"

[traffic]
source = "csv"
path = "traffic.csv"

[revenue]
unit_price = 1.0

[costs]
unit_cost = 1.0
"#,
    )
    .unwrap();
    let output = bin()
        .args(["--config"])
        .arg(&config)
        .arg("validate")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let diags: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(diags[0]["code"], "UNREACHABLE");
}

#[test]
fn missing_dataset_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("scenario.toml");
    std::fs::write(
        &config,
        r#"
[topology]
source = "edge-list"
path = "missing/topology.txt"

[traffic]
source = "gravity"

[revenue]
unit_price = 1.0

[costs]
unit_cost = 1.0
"#,
    )
    .unwrap();
    let output = bin()
        .args(["--config"])
        .arg(&config)
        .arg("report")
        .env_remove("DEPLOYGAME_DATA_ROOT")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "{output:?}");
}

#[test]
fn report_and_price_sweep_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_intro_scenario(dir.path());
    for (out, label) in [("out_a", "first"), ("out_b", "second")] {
        let status = bin()
            .args(["--config"])
            .arg(&config)
            .args(["--out"])
            .arg(dir.path().join(out))
            .args(["--jobs", "2", "sweep-price"])
            .status()
            .unwrap();
        assert!(status.success(), "{label} sweep run failed");
    }
    let a = std::fs::read(dir.path().join("out_a/price_sweep.csv")).unwrap();
    let b = std::fs::read(dir.path().join("out_b/price_sweep.csv")).unwrap();
    assert_eq!(a, b, "sweep outputs must be byte-identical");

    let status = bin()
        .args(["--config"])
        .arg(&config)
        .args(["--out"])
        .arg(dir.path().join("report"))
        .arg("report")
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("report/report.json")).unwrap(),
    )
    .unwrap();
    assert!((report["gamma"].as_f64().unwrap() - 3.0).abs() < 1e-9);
    assert_eq!(report["profitable"], true);
    assert_eq!(report["necessary_condition"], false);
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("report/manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["command"], "report");
}

#[test]
fn remaining_subcommands_run_on_toy_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_intro_scenario(dir.path());
    for (sub, file) in [
        ("sweep-alpha", "alpha_sweep.csv"),
        ("sweep-flatten", "flatten_sweep.csv"),
        ("logit", "logit.csv"),
        ("mechanism", "mechanism.csv"),
    ] {
        let out = dir.path().join(sub);
        let output = bin()
            .args(["--config"])
            .arg(&config)
            .args(["--out"])
            .arg(&out)
            .arg(sub)
            .output()
            .unwrap();
        assert!(output.status.success(), "{sub}: {output:?}");
        assert!(out.join(file).exists(), "{sub} must write {file}");
        assert!(out.join("manifest.json").exists());
    }
    // Induction needs a symmetric game: a 3-ISP line with uniform costs.
    std::fs::write(dir.path().join("line.txt"), "0 1\n1 2\n").unwrap();
    let line_config = dir.path().join("line.toml");
    std::fs::write(
        &line_config,
        r#"
[topology]
source = "edge-list"
path = "line.txt"

[traffic]
source = "csv"
path = "traffic.csv"

[revenue]
unit_price = 1.0

[costs]
rule = "uniform"
unit_cost = 0.3333333333333333

[experiment]
seed = 2
induction_rounds = 12
"#,
    )
    .unwrap();
    let out = dir.path().join("induction");
    let output = bin()
        .args(["--config"])
        .arg(&line_config)
        .args(["--out"])
        .arg(&out)
        .arg("induction")
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    let text = std::fs::read_to_string(out.join("induction.csv")).unwrap();
    assert_eq!(text.lines().count(), 14); // header + init + 12 rounds
}

#[test]
fn logit_output_is_identical_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_intro_scenario(dir.path());
    let mut outputs = Vec::new();
    for (jobs, out) in [("1", "j1"), ("3", "j3")] {
        let status = bin()
            .args(["--config"])
            .arg(&config)
            .args(["--out"])
            .arg(dir.path().join(out))
            .args(["--jobs", jobs, "logit"])
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(dir.path().join(out).join("logit.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn shipped_example_configs_parse() {
    let repo_configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in [
        "intro.toml",
        "synthetic-research.toml",
        "line4.toml",
        "geant.toml",
        "caida.toml",
    ] {
        let path = repo_configs.join(name);
        let text = std::fs::read_to_string(&path).unwrap();
        deploygame_cli::config::ScenarioConfig::parse_str(&text)
            .unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}
