use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use edgan::cli::{RunManifest, ABORT_FILE, LOG_FILE, METRICS_FILE, OUT_ENV, RUN_FILE};
use edgan::report::{parse_metrics_csv, svg_series, COMPARISON_HEADER};

const FAST_CONFIG: &str = r#"
[model]
encoder_hidden = 16
decoder_hidden = 16
temporal_hidden = 8
conv_channels = [8, 8]
mlp_hidden = [16, 8]

[train]
batch_size = 32
"#;

fn edgan(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edgan"))
        .current_dir(dir)
        .env_remove(OUT_ENV)
        .env_remove("RUST_LOG")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = edgan(dir, args);
    assert!(
        out.status.success(),
        "{:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Synthesises two stocks into `out` and ingests them.
fn prepare(dir: &Path, out: &str, seed: &str) {
    fs::write(dir.join("fast.toml"), FAST_CONFIG).unwrap();
    ok(dir, &["--out", out, "--seed", seed, "synth", "--kind", "sine", "--length", "260"]);
    ok(dir, &["--out", out, "--seed", seed, "synth", "--kind", "gbm", "--length", "260", "--sector", "tech"]);
    ok(dir, &["--out", out, "--config", "fast.toml", "ingest"]);
}

#[test]
fn full_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    prepare(dir, "runs", "1");
    for variant in ["edgan", "dragan"] {
        ok(dir, &["--out", "runs", "--config", "fast.toml", "--variant", variant, "--epochs", "5", "train"]);
        let run = dir.join("runs").join(variant);
        let log = fs::read_to_string(run.join(LOG_FILE)).unwrap();
        assert_eq!(log.lines().count(), 5);
        assert!(log.lines().all(|l| l.starts_with("epoch=")));
        assert_eq!(fs::read_to_string(run.join("timing.log")).unwrap().lines().count(), 5);
        let m = RunManifest::load(&run).unwrap();
        assert_eq!(m.variant.name(), variant);
        assert_eq!(m.train.epochs, 5);

        ok(dir, &["--out", "runs", "--variant", variant, "evaluate"]);
        let rows = parse_metrics_csv(&fs::read_to_string(run.join(METRICS_FILE)).unwrap()).unwrap();
        assert_eq!(rows.len(), 8);
        assert!(rows.iter().all(|r| r.rmse.is_finite() && r.mae.is_finite() && r.r2.is_finite()));
    }

    let table = ok(dir, &["--out", "runs", "compare"]);
    assert!(table.contains("edgan") && table.contains("dragan"));
    let csv = fs::read_to_string(dir.join("runs/comparison.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some(COMPARISON_HEADER));
    assert!(fs::read_to_string(dir.join("runs/comparison.svg")).unwrap().contains("data-best"));

    ok(dir, &["--out", "runs", "--variant", "edgan", "plot", "--kind", "convergence"]);
    ok(dir, &["--out", "runs", "--variant", "edgan", "plot", "--kind", "forecast"]);
    let svg = fs::read_to_string(dir.join("runs/edgan/convergence.svg")).unwrap();
    assert_eq!(svg_series(&svg).unwrap()[0].1.len(), 5);
    let forecast = fs::read_to_string(dir.join("runs/edgan/forecast_SINE.csv")).unwrap();
    assert_eq!(forecast.lines().next(), Some("anchor_date,real,predicted"));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    prepare(dir, "runs", "3");
    let run = dir.join("runs/wgan_gp");
    let mut seen = Vec::new();
    for _ in 0..2 {
        ok(dir, &["--out", "runs", "--config", "fast.toml", "--variant", "wgan_gp", "--epochs", "2", "train"]);
        let files: Vec<Vec<u8>> = [LOG_FILE, RUN_FILE, "checkpoint.bin"]
            .iter()
            .map(|f| fs::read(run.join(f)).unwrap())
            .collect();
        seen.push(files);
    }
    assert_eq!(seen[0], seen[1]);
}

#[test]
fn output_root_comes_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_edgan"))
        .current_dir(tmp.path())
        .env(OUT_ENV, "from_env")
        .args(["synth", "--kind", "ar1", "--length", "100"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(tmp.path().join("from_env/data/AR1.csv").exists());
    assert!(tmp.path().join("from_env/data/manifest.txt").exists());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(edgan(dir, &[]).status.code(), Some(1));
    assert_eq!(edgan(dir, &["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(edgan(dir, &["--variant", "vae", "train"]).status.code(), Some(1));
    assert_eq!(edgan(dir, &["--help"]).status.code(), Some(0));

    let missing = edgan(dir, &["ingest", "nowhere/manifest.txt"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(stderr(&missing).contains("nowhere/manifest.txt"), "{}", stderr(&missing));

    let untrained = edgan(dir, &["--out", "empty", "evaluate"]);
    assert_eq!(untrained.status.code(), Some(2));
    assert!(stderr(&untrained).contains(RUN_FILE), "{}", stderr(&untrained));

    fs::write(dir.join("typo.toml"), "[train]\nepoch = 5\n").unwrap();
    assert_eq!(edgan(dir, &["--config", "typo.toml", "train"]).status.code(), Some(1));
}

#[test]
fn numeric_abort_exits_3_and_leaves_a_report() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    prepare(dir, "runs", "5");
    let cfg = format!("{}lr_generator = 1e300\nlr_discriminator = 1e300\n", FAST_CONFIG);
    fs::write(dir.join("explode.toml"), cfg).unwrap();
    let out = edgan(dir, &["--out", "runs", "--config", "explode.toml", "--epochs", "20", "train"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    let report = fs::read_to_string(dir.join("runs/edgan").join(ABORT_FILE)).unwrap();
    assert!(report.contains("epoch"), "{}", report);
    assert!(report.contains("run digest"), "{}", report);
    assert!(!dir.join("runs/edgan/checkpoint.bin").exists());
}

#[test]
fn compare_refuses_runs_over_different_datasets() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    prepare(dir, "a", "1");
    prepare(dir, "b", "2");
    for root in ["a", "b"] {
        ok(dir, &["--out", root, "--config", "fast.toml", "--epochs", "1", "train"]);
        ok(dir, &["--out", root, "evaluate"]);
    }
    let a = RunManifest::load(&dir.join("a/edgan")).unwrap();
    let b = RunManifest::load(&dir.join("b/edgan")).unwrap();
    assert_ne!(a.dataset_digest, b.dataset_digest);

    let out = edgan(dir, &["--out", "a", "compare", "a/edgan", "b/edgan"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains(&a.dataset_digest) && err.contains(&b.dataset_digest), "{}", err);
    assert!(!dir.join("a/comparison.txt").exists());
}
