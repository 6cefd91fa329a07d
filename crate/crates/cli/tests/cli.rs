use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn mbn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mbn"))
        .args(args)
        .env_remove("MBN_THREADS")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = mbn(args);
    assert!(
        out.status.success(),
        "mbn {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Three labeled Gaussian blobs in 6 dimensions, label in column 0.
fn blobs(dir: &TempDir) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut text = String::new();
    for i in 0..90 {
        let c = i % 3;
        text.push_str(&c.to_string());
        for j in 0..6 {
            let center = if j % 3 == c { 4.0 } else { 0.0 };
            text.push_str(&format!(",{:.5}", center + rng.random_range(-1.0..1.0)));
        }
        text.push('\n');
    }
    let path = dir.path().join("blobs.csv");
    std::fs::write(&path, text).unwrap();
    path
}

fn train(dir: &TempDir, data: &Path, name: &str, extra: &[&str]) -> (PathBuf, PathBuf) {
    let model = dir.path().join(format!("{name}.mbn"));
    let emb = dir.path().join(format!("{name}.csv"));
    let mut args = vec![
        "train", "--data", s(data), "--label-column", "0", "--classes", "3", "--v", "30", "--dims", "2", "--model",
        s(&model), "--embedding", s(&emb), "-q",
    ];
    args.extend_from_slice(extra);
    ok(&args);
    (model, emb)
}

#[test]
fn training_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let data = blobs(&dir);
    let (m1, e1) = train(&dir, &data, "a", &["--seed", "5"]);
    let (m2, e2) = train(&dir, &data, "b", &["--seed", "5", "--threads", "1"]);
    let (m3, _) = train(&dir, &data, "c", &["--seed", "6"]);
    let read = |p: &Path| std::fs::read(p).unwrap();
    assert_eq!(read(&m1), read(&m2));
    assert_eq!(read(&e1), read(&e2));
    assert_ne!(read(&m1), read(&m3));
}

#[test]
fn transform_reproduces_training_embedding() {
    let dir = tempfile::tempdir().unwrap();
    let data = blobs(&dir);
    let (model, emb) = train(&dir, &data, "net", &[]);
    let out = dir.path().join("t.csv");
    ok(&["transform", "--model", s(&model), "--data", s(&data), "--label-column", "0", "--out", s(&out)]);
    let parse = |p: &Path| -> Vec<Vec<f64>> {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect()
    };
    let (a, b) = (parse(&emb), parse(&out));
    assert_eq!(a.len(), 90);
    for (ra, rb) in a.iter().zip(&b) {
        assert_eq!(ra[0], rb[0]);
        for (x, y) in ra.iter().zip(rb) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn evaluation_commands_on_separable_blobs() {
    let dir = tempfile::tempdir().unwrap();
    let data = blobs(&dir);
    let (_, emb) = train(&dir, &data, "net", &[]);

    let report = ok(&["cluster", "--embedding", s(&emb), "--restarts", "5"]);
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "mode,runs,nmi,accuracy,nmi_sd,accuracy_sd");
    let best: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(best[0], "best");
    assert!(best[2].parse::<f64>().unwrap() > 0.9, "{report}");

    let precision = ok(&["retrieve", "--embedding", s(&emb)]);
    let rows: Vec<&str> = precision.lines().collect();
    assert_eq!(rows[0], "depth,precision");
    // depths 127 and beyond exceed the 90-point corpus
    assert_eq!(rows.len(), 1 + 6);
    assert!(rows[1].starts_with("1,"));

    let svg = dir.path().join("s.svg");
    ok(&["scatter", "--embedding", s(&emb), "--out", s(&svg)]);
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<circle").count(), 90);
}

#[test]
fn distill_reports_agreement_and_speedup() {
    let dir = tempfile::tempdir().unwrap();
    let data = blobs(&dir);
    let (model, emb) = train(&dir, &data, "net", &[]);
    let mlp = dir.path().join("net.mlp");
    let report = ok(&[
        "distill", "--data", s(&data), "--label-column", "0", "--model", s(&model), "--embedding", s(&emb),
        "--clusters", "3", "--restarts", "5", "--hidden", "16", "--epochs", "40", "--batch", "10", "--out", s(&mlp),
    ]);
    let agreement: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("agreement,"))
        .unwrap()
        .parse()
        .unwrap();
    assert!(agreement > 0.9, "{report}");
    assert!(report.contains("speedup,"));
    assert_eq!(&std::fs::read(&mlp).unwrap()[..4], b"MLP1");
}

#[test]
fn theory_writes_curves_and_verification() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c.csv");
    let report = ok(&["theory", "--rho-step", "0.25", "--ratios", "1,2", "--vs", "10", "--mc-draws", "20000", "--mc-settings", "3", "--out", s(&csv)]);
    let curves = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(curves.lines().count(), 1 + 5 * 2);
    assert!(curves.starts_with("rho,sigma_ratio,V,"));
    assert!(report.contains("closed form"));
}

#[test]
fn config_file_defaults_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let data = blobs(&dir);
    let config = dir.path().join("c.toml");
    std::fs::write(&config, "seed = 3\n[train]\nv = 4\ndims = 3\n").unwrap();
    let model = dir.path().join("m.mbn");
    let report = dir.path().join("r.json");
    let base = [
        "--config", s(&config), "train", "--data", s(&data), "--label-column", "0", "--classes", "3", "--model",
        s(&model), "--report", s(&report), "-q",
    ];
    ok(&base);
    let read = || -> serde_json::Value { serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap() };
    let r = read();
    assert_eq!(r["model"]["layers"][0]["v"], 4);
    assert_eq!(r["model"]["pca"]["output_dim"], 3);
    assert_eq!(r["model"]["schedule"]["seed"], 3);

    let mut overridden = base.to_vec();
    overridden.extend_from_slice(&["--v", "6"]);
    ok(&overridden);
    assert_eq!(read()["model"]["layers"][0]["v"], 6);
}

#[test]
fn bad_delta_is_a_one_line_usage_error() {
    let out = mbn(&["train", "--data", "x.csv", "--dims", "2", "--model", "m", "--delta", "1.2"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("delta"));
}

#[test]
fn runtime_errors_are_one_line_and_name_the_file() {
    let out = mbn(&["cluster", "--embedding", "/nonexistent/e.csv"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: /nonexistent/e.csv"));
}

#[test]
fn help_succeeds() {
    let out = ok(&["--help"]);
    for command in ["train", "transform", "cluster", "retrieve", "theory", "distill", "scatter", "bench"] {
        assert!(out.contains(command));
    }
}

#[test]
fn bench_writes_one_row_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = blobs(&dir);
    let csv = dir.path().join("b.csv");
    let report = ok(&[
        "bench", "--data", s(&data), "--label-column", "0", "--n", "40,80", "--v", "4", "--runs", "2", "--k1", "20",
        "--classes", "3", "--out", s(&csv),
    ]);
    let rows = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().next(), Some("V,n,run,bottom_seconds,upper_seconds"));
    assert_eq!(rows.lines().count(), 1 + 4);
    assert!(report.contains("n=40->80"));
}

#[test]
fn transform_rejects_wrong_feature_count() {
    let dir = tempfile::tempdir().unwrap();
    let data = blobs(&dir);
    let (model, _) = train(&dir, &data, "net", &[]);
    let narrow = dir.path().join("narrow.csv");
    std::fs::write(&narrow, "0,1,2,3\n1,0,1,0\n").unwrap();
    let out = mbn(&["transform", "--model", s(&model), "--data", s(&narrow), "--out", s(&dir.path().join("z.csv"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
}
