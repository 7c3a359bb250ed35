use std::path::{Path, PathBuf};
use std::process::Command;

use scatwave::cli::config::ThetaRule;
use scatwave::cli::{execute_config, ExperimentConfig, ExperimentName};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scatwave"))
}

fn crate_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn quick(name: ExperimentName) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default().quick();
    cfg.experiment = name;
    cfg
}

/// Every file except the wall-clock sidecar, in name order.
fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "runtime.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn repeated_runs_and_thread_counts_give_identical_bytes() {
    let cfg = quick(ExperimentName::EigenfunctionCheck);
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    for (dir, threads) in dirs.iter().zip([Some(1), Some(1), Some(3)]) {
        execute_config(&cfg, dir.path(), threads, true).unwrap();
    }
    let first = outputs(dirs[0].path());
    assert!(first.len() > 4);
    assert_eq!(first, outputs(dirs[1].path()), "rerun differs");
    assert_eq!(first, outputs(dirs[2].path()), "thread count changed the output");
}

#[test]
fn csv_headers_match_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    execute_config(&quick(ExperimentName::TraceSweep), dir.path(), Some(1), true).unwrap();
    execute_config(&quick(ExperimentName::OracleAudit), dir.path(), Some(1), true).unwrap();
    let header = |f: &str| std::fs::read_to_string(dir.path().join(f)).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header("trace-sweep.families.csv"), "family,asserted,bound_exponent,h,sup_over_k");
    assert_eq!(header("oracle-audit.manufactured.csv"), "step,bulk_truncation,interface_truncation,solution_error");
    assert_eq!(header("oracle-audit.audit.csv"), "quantity,value,bound");
    let readme = std::fs::read_to_string(crate_file("../../README.md")).unwrap_or_default();
    if !readme.is_empty() {
        for cols in ["family,asserted,bound_exponent,h,sup_over_k", "quantity,value,bound"] {
            assert!(readme.contains(cols), "README does not document {cols}");
        }
    }
}

#[test]
fn reports_validate_against_the_shipped_schema() {
    let schema: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(crate_file("schema/report.schema.json")).unwrap()).unwrap();
    let validator = jsonschema::JSONSchema::compile(&schema).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for name in [ExperimentName::TraceSweep, ExperimentName::EigenfunctionCheck, ExperimentName::OracleAudit] {
        execute_config(&quick(name), dir.path(), Some(1), true).unwrap();
        let text = std::fs::read_to_string(dir.path().join(format!("{}.json", name.as_str()))).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        let msgs: Vec<String> = match validator.validate(&doc) {
            Ok(()) => Vec::new(),
            Err(errors) => errors.map(|e| format!("{e} at {}", e.instance_path)).collect(),
        };
        assert!(msgs.is_empty(), "{} violates the schema: {msgs:?}", name.as_str());
    }
}

#[test]
fn bundled_quickcheck_is_the_quick_default() {
    let shipped = ExperimentConfig::load(&crate_file("quickcheck.json")).unwrap();
    assert_eq!(shipped, ExperimentConfig::default().quick());
}

#[test]
fn config_rejections() {
    let mut cfg = ExperimentConfig::default();
    cfg.h_list = vec![0.125, 0.18, 0.25, 0.35, 0.5];
    assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
    let mut cfg = ExperimentConfig::default();
    cfg.n0 = 2.0;
    assert!(cfg.validate().unwrap_err().to_string().contains("N0"));
    let mut cfg = ExperimentConfig::default();
    cfg.theta = ThetaRule::Explicit { values: vec![0.1] };
    assert!(cfg.validate().is_err());
    assert!(ExperimentConfig::from_json("{\"schema_version\": 1, \"bogus\": 0}").is_err());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let ok = bin().args(["--quick", "--experiment", "trace-sweep", "--out", out]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("[PASS] C04"));
    assert!(dir.path().join("summary.json").exists() && dir.path().join("runtime.json").exists());

    // Criterion 2 is an honest failure of the unit-factor identity.
    let red = bin().args(["--quick", "--experiment", "jost-validate", "--out", out]).output().unwrap();
    assert_eq!(red.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&red.stdout).contains("[FAIL] C02"));

    let bad = dir.path().join("bad.json");
    let mut cfg = ExperimentConfig::default();
    cfg.n0 = 2.0;
    std::fs::write(&bad, serde_json::to_string(&cfg).unwrap()).unwrap();
    let rejected = bin().args(["--config", bad.to_str().unwrap(), "--out", out]).output().unwrap();
    assert_eq!(rejected.status.code(), Some(2));

    let threads = bin().args(["--quick", "--experiment", "trace-sweep", "--out", out]).env("THREADS", "zero").output().unwrap();
    assert_eq!(threads.status.code(), Some(2));

    // A box that clips the resolvent solution is a numerical failure.
    let tight = dir.path().join("tight.json");
    let mut cfg = ExperimentConfig::default();
    cfg.grid.x_min = -0.5;
    cfg.grid.x_max = 1.5;
    cfg.oracle.doubling_h = 0.5;
    std::fs::write(&tight, serde_json::to_string(&cfg).unwrap()).unwrap();
    let numerical =
        bin().args(["--config", tight.to_str().unwrap(), "--experiment", "oracle-audit", "--out", out]).output().unwrap();
    assert_eq!(numerical.status.code(), Some(3), "{}", String::from_utf8_lossy(&numerical.stderr));
}
