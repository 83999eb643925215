//! Contract tests for the `mdp` binary: exit codes, --help coverage, --json
//! round trips, MDP_SEED resolution, and cross-checks of CLI output against
//! direct library calls.

use std::path::Path;
use std::process::{Command, Output};

use mdp_core::evaluate::leak_fingerprint;
use mdp_core::forge::ModifiedDataset;
use mdp_core::model::ModelParams;

fn mdp() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mdp"));
    cmd.env_remove("MDP_SEED");
    cmd
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn mdp");
    assert!(
        out.status.success(),
        "command failed: {:?}\nstdout: {}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json_stdout(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout parses as JSON")
}

/// Builds data.mdpd, ref.ckpt, and mod.mdpd (zero-step forge) in `dir`.
fn forge_fixture(dir: &Path, steps: u32) {
    run_ok(mdp().args([
        "synth",
        "--classes",
        "2",
        "--per-class",
        "8",
        "--height",
        "8",
        "--width",
        "8",
        "--seed",
        "3",
        "--out",
    ])
    .arg(dir.join("data.mdpd")));
    run_ok(mdp()
        .args(["train-ref", "--epochs", "3", "--seed", "1", "--data"])
        .arg(dir.join("data.mdpd"))
        .arg("--out")
        .arg(dir.join("ref.ckpt")));
    run_ok(mdp()
        .args(["forge", "--steps", &steps.to_string(), "--step-size", "0.02", "--seed", "2"])
        .arg("--data")
        .arg(dir.join("data.mdpd"))
        .arg("--model")
        .arg(dir.join("ref.ckpt"))
        .arg("--out")
        .arg(dir.join("mod.mdpd")));
}

#[test]
fn every_subcommand_offers_help() {
    for sub in
        ["synth", "train-ref", "forge", "augment", "eval", "ssim", "transfer", "leak-check", "run"]
    {
        let out = mdp().args([sub, "--help"]).output().unwrap();
        assert!(out.status.success(), "{sub} --help failed");
        assert!(!out.stdout.is_empty());
    }
    assert!(mdp().arg("--help").output().unwrap().status.success());
}

#[test]
fn unknown_flags_and_missing_files_exit_one() {
    let out = mdp().args(["synth", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = mdp()
        .args(["ssim", "--modified", "/nonexistent/mod.mdpd", "--source", "/nonexistent/src.mdpd"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty(), "missing-file error goes to stderr");
}

#[test]
fn zero_step_forge_has_unit_ssim_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    forge_fixture(dir.path(), 0);
    let out = run_ok(mdp()
        .args(["ssim", "--json"])
        .arg("--modified")
        .arg(dir.path().join("mod.mdpd"))
        .arg("--source")
        .arg(dir.path().join("data.mdpd")));
    let value = json_stdout(&out);
    assert_eq!(value["mean"], 1.0);
    assert_eq!(value["min"], 1.0);
}

#[test]
fn leak_check_matches_the_library_call_exactly() {
    let dir = tempfile::tempdir().unwrap();
    forge_fixture(dir.path(), 4);
    let out = run_ok(mdp()
        .args(["leak-check", "--json"])
        .arg("--model")
        .arg(dir.path().join("ref.ckpt"))
        .arg("--modified")
        .arg(dir.path().join("mod.mdpd")));
    let cli_value = json_stdout(&out)["agreement"].as_f64().unwrap();

    let suspect = ModelParams::load(dir.path().join("ref.ckpt")).unwrap();
    let modified = ModifiedDataset::load(dir.path().join("mod.mdpd")).unwrap();
    let direct = leak_fingerprint(&suspect, &modified).unwrap();
    assert_eq!(cli_value, direct);
}

#[test]
fn env_seed_is_used_and_overridden_by_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &Path| {
        vec![
            "synth".to_string(),
            "--classes".into(),
            "2".into(),
            "--per-class".into(),
            "3".into(),
            "--height".into(),
            "4".into(),
            "--width".into(),
            "4".into(),
            "--out".into(),
            out.display().to_string(),
        ]
    };

    let a = dir.path().join("a.mdpd");
    let b = dir.path().join("b.mdpd");
    let c = dir.path().join("c.mdpd");
    run_ok(mdp().args(args(&a)).env("MDP_SEED", "7"));
    run_ok(mdp().args(args(&b)).args(["--seed", "7"]));
    run_ok(mdp().args(args(&c)).env("MDP_SEED", "8"));
    let bytes = |p: &Path| std::fs::read(p).unwrap();
    assert_eq!(bytes(&a), bytes(&b));
    assert_ne!(bytes(&a), bytes(&c));

    let out = mdp().args(args(&a)).env("MDP_SEED", "not-a-number").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn eval_saves_a_consumer_usable_for_leak_checks() {
    let dir = tempfile::tempdir().unwrap();
    forge_fixture(dir.path(), 4);
    // Split off a "test" file; reuse the source data for this smoke check.
    let out = run_ok(mdp()
        .args(["eval", "--epochs", "2", "--seed", "5", "--json"])
        .arg("--modified")
        .arg(dir.path().join("mod.mdpd"))
        .arg("--test")
        .arg(dir.path().join("data.mdpd"))
        .arg("--save-model")
        .arg(dir.path().join("consumer.ckpt")));
    let value = json_stdout(&out);
    assert!(value["clean_test_accuracy"].is_f64());
    assert!(dir.path().join("consumer.ckpt").exists());

    run_ok(mdp()
        .arg("leak-check")
        .arg("--model")
        .arg(dir.path().join("consumer.ckpt"))
        .arg("--modified")
        .arg(dir.path().join("mod.mdpd")));
}

#[test]
fn transfer_reports_one_row_per_architecture() {
    let dir = tempfile::tempdir().unwrap();
    forge_fixture(dir.path(), 2);
    let out = run_ok(mdp()
        .args(["transfer", "--epochs", "2", "--seed", "4", "--archs", "conv-small,conv-wide", "--json"])
        .arg("--modified")
        .arg(dir.path().join("mod.mdpd"))
        .arg("--test")
        .arg(dir.path().join("data.mdpd")));
    let value = json_stdout(&out);
    let rows = value["transfer"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["architecture"], "conv-small");
    assert_eq!(rows[1]["architecture"], "conv-wide");
}

#[test]
fn run_requires_config_unless_printing_the_default() {
    let out = mdp().arg("run").output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = run_ok(mdp().args(["run", "--print-default-config"]));
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(value["reference_arch"], "conv-small");
    assert_eq!(value["pgd"]["epsilon"].as_f64().unwrap(), 8.0 / 255.0);
}

fn mini_run_config(outdir: &Path) -> mdp_core::pipeline::ExperimentConfig {
    let mut cfg = mdp_core::pipeline::ExperimentConfig::desk_default();
    cfg.dataset = mdp_core::pipeline::DatasetSource::Synthetic {
        classes: 2,
        per_class_train: 6,
        per_class_test: 2,
        height: 8,
        width: 8,
        channels: 1,
        noise_level: 0.1,
    };
    cfg.reference_train.epochs = 2;
    cfg.consumer_train.epochs = 2;
    cfg.pgd.steps = 3;
    cfg.transfer_archs = vec![mdp_core::model::Architecture::ConvWide];
    cfg.output_dir = outdir.to_path_buf();
    cfg
}

#[test]
fn bad_override_paths_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    let cfg = mini_run_config(&dir.path().join("out"));
    std::fs::write(&cfg_path, cfg.to_json_pretty().unwrap()).unwrap();

    let out = mdp()
        .args(["run", "--set", "pgd.no_such_knob=1", "--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    // deny_unknown_fields rejects the injected key.
    assert_eq!(out.status.code(), Some(1));

    let out = mdp()
        .args(["run", "--set", "not-an-assignment", "--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_overrides_apply_before_execution() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    let cfg = mini_run_config(&dir.path().join("out"));
    std::fs::write(&cfg_path, cfg.to_json_pretty().unwrap()).unwrap();

    let moved = dir.path().join("moved");
    let out = run_ok(mdp()
        .args(["run", "--json", "--set", "augmentation_passes=2", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&moved));
    let report = json_stdout(&out);
    assert_eq!(report["configs"]["augmentation_passes"], 2);
    assert!(moved.join("report.json").exists());
    // 2 passes over 12 train images.
    let modified = ModifiedDataset::load(moved.join("modified.mdpd")).unwrap();
    assert_eq!(modified.len(), 24);
}
