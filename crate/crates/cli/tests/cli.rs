use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use compound_bo::campaign::{CampaignConfig, Strategy};
use compound_bo::experiment::{Experiment, Provenance};
use compound_bo::metrics::QualityMetrics;
use compound_bo::mixture::DomainSpec;
use compound_bo::oracle::Oracle;
use compound_bo_cli::{ApiError, ErrorCode};

fn bin(state: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_compound-bo"))
        .env("COMPOUND_BO_STATE_DIR", state)
        .env_remove("COMPOUND_BO_TOKEN")
        .args(args)
        .output()
        .expect("binary runs")
}

fn api_error(out: &Output) -> ApiError {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr {text:?} is not an ApiError: {e}"))
}

fn write_config(dir: &Path, name: &str, cfg: &CampaignConfig) -> String {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn simulate_run4_twice_gives_identical_logs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for p in [&a, &b] {
        let out = bin(
            dir.path(),
            &["simulate", "--strategy", "run4", "--seed", "7", "--out", p.to_str().unwrap()],
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (a, b) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn partial_record_is_a_conflict_and_leaves_the_log_alone() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = CampaignConfig::new(Strategy::Run4Simplified, 3);
    cfg.schedule = vec![4, 3];
    let cfg_path = write_config(dir.path(), "cfg.json", &cfg);
    let out = bin(dir.path(), &["init", &cfg_path, "--id", "lab"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = bin(dir.path(), &["propose", "lab"]);
    assert!(out.status.success());
    let batch = compound_bo::experiment::read_experiments_csv(&out.stdout[..]).unwrap();
    assert_eq!(batch.len(), 4);

    let oracle = Oracle::synthetic_default();
    let measured: Vec<Experiment> = batch
        .iter()
        .map(|e| Experiment {
            measured: Some(oracle.query_noiseless(&e.recipe).unwrap()),
            ..e.clone()
        })
        .collect();
    let partial = dir.path().join("partial.csv");
    let mut w = Vec::new();
    compound_bo::experiment::write_experiments_csv(&mut w, &measured[..3]).unwrap();
    fs::write(&partial, w).unwrap();

    let log = dir.path().join("lab.jsonl");
    let before = fs::read(&log).unwrap();
    let out = bin(dir.path(), &["record", "lab", partial.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(ErrorCode::Conflict.exit_code()));
    let err = api_error(&out);
    assert_eq!(err.code, ErrorCode::Conflict);
    assert_eq!(err.detail.unwrap()["missing"][0], batch[3].id);
    assert_eq!(fs::read(&log).unwrap(), before);

    let full = dir.path().join("full.csv");
    let mut w = Vec::new();
    compound_bo::experiment::write_experiments_csv(&mut w, &measured).unwrap();
    fs::write(&full, w).unwrap();
    let out = bin(dir.path(), &["record", "lab", full.to_str().unwrap(), "--request-id", "r1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let status: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(status["status"], "ready_to_propose");
    assert_eq!(status["batch_index"], 1);

    // Same request id again is a no-op.
    let after = fs::read(&log).unwrap();
    let out = bin(dir.path(), &["record", "lab", full.to_str().unwrap(), "--request-id", "r1"]);
    assert!(out.status.success());
    assert_eq!(fs::read(&log).unwrap(), after);

    // Recording again without an open batch conflicts.
    let out = bin(dir.path(), &["record", "lab", full.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(ErrorCode::Conflict.exit_code()));
}

/// Prior models trained only on outcomes far below the impact threshold.
fn low_impact_history() -> Vec<Experiment> {
    let oracle = Oracle::synthetic_default();
    let domain = DomainSpec::plain(DomainSpec::DEFAULT_UPPER_BOUNDS).unwrap();
    let recipes = domain.sample_dirichlet_rejection(15, [1.0; 4], 11).unwrap().recipes;
    recipes
        .into_iter()
        .enumerate()
        .map(|(i, recipe)| {
            let m = oracle.query_noiseless(&recipe).unwrap();
            Experiment {
                id: i as u64 + 1,
                batch_index: 0,
                recipe,
                measured: Some(QualityMetrics::new(m.mfr, m.youngs_modulus, 2.0 + 0.1 * (i % 3) as f64).unwrap()),
                provenance: Provenance::ManualEntry,
            }
        })
        .collect()
}

#[test]
fn run1_without_feasible_starts_exits_infeasible_with_pof_detail() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = CampaignConfig::new(Strategy::Run1Vanilla, 0);
    cfg.historical = low_impact_history();
    let cfg_path = write_config(dir.path(), "cfg.json", &cfg);
    let log = dir.path().join("run1.jsonl");
    let out = bin(
        dir.path(),
        &["simulate", "--config", &cfg_path, "--out", log.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(ErrorCode::Infeasible.exit_code()));
    let err = api_error(&out);
    assert_eq!(err.code, ErrorCode::Infeasible);
    let per = err.detail.unwrap()["feasibility"]["per_constraint"].clone();
    let per = per.as_array().unwrap();
    assert!(!per.is_empty());
    let impact = per
        .iter()
        .find(|c| c["constraint"]["metric"] == "impact_strength")
        .expect("impact constraint reported");
    assert!(impact["best_pof"].as_f64().unwrap() < 1e-6);
    // The log still holds the creation event.
    let text = fs::read_to_string(&log).unwrap();
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn error_codes_for_bad_input_and_missing_campaigns() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path(), &["summary", "nope"]);
    assert_eq!(out.status.code(), Some(ErrorCode::NotFound.exit_code()));
    assert_eq!(api_error(&out).code, ErrorCode::NotFound);

    let mut cfg = CampaignConfig::new(Strategy::Run4Simplified, 0);
    cfg.schedule = vec![3, 0];
    let cfg_path = write_config(dir.path(), "bad.json", &cfg);
    let out = bin(dir.path(), &["init", &cfg_path]);
    assert_eq!(out.status.code(), Some(ErrorCode::InvalidInput.exit_code()));

    let out = bin(dir.path(), &["simulate", "--strategy", "run4", "--oracle", "{\"kind\":\"nonsense\"}"]);
    assert_eq!(api_error(&out).code, ErrorCode::InvalidInput);
}

#[test]
fn validate_reports_rmse_on_a_csv() {
    let dir = tempfile::tempdir().unwrap();
    let oracle = Oracle::synthetic_default();
    let domain = DomainSpec::plain(DomainSpec::DEFAULT_UPPER_BOUNDS).unwrap();
    let rows: Vec<Experiment> = domain
        .sample_dirichlet_rejection(30, [1.0; 4], 5)
        .unwrap()
        .recipes
        .into_iter()
        .enumerate()
        .map(|(i, recipe)| Experiment {
            id: i as u64 + 1,
            batch_index: 0,
            recipe,
            measured: Some(oracle.query_noiseless(&recipe).unwrap()),
            provenance: Provenance::ManualEntry,
        })
        .collect();
    let path = dir.path().join("data.csv");
    let mut w = Vec::new();
    compound_bo::experiment::write_experiments_csv(&mut w, &rows).unwrap();
    fs::write(&path, w).unwrap();
    let out = bin(dir.path(), &["validate", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["rows"], 30);
    assert_eq!(report["per_metric"].as_array().unwrap().len(), 3);

    let mut w = Vec::new();
    compound_bo::experiment::write_experiments_csv(&mut w, &rows[..4]).unwrap();
    fs::write(&path, w).unwrap();
    let out = bin(dir.path(), &["validate", path.to_str().unwrap()]);
    assert_eq!(api_error(&out).code, ErrorCode::InvalidInput);
}
