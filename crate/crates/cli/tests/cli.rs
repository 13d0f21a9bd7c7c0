use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use vbll_core::calibration::DEFAULT_ECE_BINS;
use vbll_core::{ece, generate_synthetic, load_csv, SyntheticConfig};

fn vbll(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vbll"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = vbll(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out.stderr.is_empty(), "success wrote to stderr");
    out
}

fn fails_with(dir: &Path, args: &[&str], code: i32) -> String {
    let out = vbll(dir, args);
    assert_eq!(out.status.code(), Some(code), "{args:?}");
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(
        err.trim_end().lines().count(),
        1,
        "diagnostic must be one line: {err:?}"
    );
    err
}

fn read(path: impl AsRef<Path>) -> String {
    fs::read_to_string(path).unwrap()
}

fn small_pipeline(dir: &Path, seed: &str) {
    ok(
        dir,
        &[
            "gen",
            "--seed",
            seed,
            "--per-class",
            "200",
            "--out",
            "data.csv",
        ],
    );
    ok(
        dir,
        &[
            "split", "--seed", seed, "--input", "data.csv", "--out", "splits",
        ],
    );
    ok(
        dir,
        &[
            "train",
            "--seed",
            seed,
            "--train",
            "splits/train.csv",
            "--val",
            "splits/val.csv",
            "--epochs",
            "10",
            "--out",
            "model",
        ],
    );
}

#[test]
fn gen_round_trips_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "gen",
            "--seed",
            "3",
            "--classes",
            "3",
            "--dim",
            "4",
            "--per-class",
            "5,6,7",
            "--out",
            "a.csv",
        ],
    );
    ok(
        d,
        &[
            "gen",
            "--seed",
            "3",
            "--classes",
            "3",
            "--dim",
            "4",
            "--per-class",
            "5,6,7",
            "--out",
            "b.csv",
        ],
    );
    assert_eq!(
        fs::read(d.join("a.csv")).unwrap(),
        fs::read(d.join("b.csv")).unwrap()
    );

    let cfg = SyntheticConfig {
        num_classes: 3,
        feature_dim: 4,
        samples_per_class: vec![5, 6, 7],
        ..SyntheticConfig::default()
    };
    let expected = generate_synthetic(&cfg, vbll_core::rng::role_seed(3, "gen")).unwrap();
    assert_eq!(load_csv(d.join("a.csv")).unwrap(), expected);

    let err = fails_with(
        d,
        &["gen", "--per-class", "10,0,10,10,10", "--out", "z.csv"],
        1,
    );
    assert!(err.contains("class 1"), "{err}");
}

#[test]
fn split_writes_three_stratified_files() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "gen",
            "--per-class",
            "100",
            "--dim",
            "3",
            "--out",
            "data.csv",
        ],
    );
    ok(d, &["split", "--input", "data.csv", "--out", "s"]);
    let rows = |f: &str| load_csv(d.join("s").join(f)).unwrap().len();
    assert_eq!(
        (rows("train.csv"), rows("val.csv"), rows("test.csv")),
        (350, 75, 75)
    );

    ok(
        d,
        &[
            "split",
            "--input",
            "data.csv",
            "--ratios",
            "0.5,0.25,0.25",
            "--out",
            "s2",
        ],
    );
    let rows2 = |f: &str| load_csv(d.join("s2").join(f)).unwrap().len();
    assert_eq!(
        (rows2("train.csv"), rows2("val.csv"), rows2("test.csv")),
        (250, 125, 125)
    );

    // concatenated outputs are a permutation of the input
    let body = |p: &Path| -> Vec<String> {
        read(p)
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with('f'))
            .map(String::from)
            .collect()
    };
    let mut all: Vec<String> = ["train.csv", "val.csv", "test.csv"]
        .iter()
        .flat_map(|f| body(&d.join("s").join(f)))
        .collect();
    let mut input = body(&d.join("data.csv"));
    all.sort();
    input.sort();
    assert_eq!(all, input);

    ok(
        d,
        &["gen", "--per-class", "10,2,10,10,10", "--out", "tiny.csv"],
    );
    let err = fails_with(d, &["split", "--input", "tiny.csv", "--out", "s3"], 1);
    assert!(err.contains("class 1"), "{err}");
}

#[test]
fn balance_hits_targets() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "gen",
            "--per-class",
            "30,5,12,8,20",
            "--dim",
            "3",
            "--out",
            "imb.csv",
        ],
    );
    ok(d, &["balance", "--input", "imb.csv", "--out", "bal.csv"]);
    assert_eq!(
        load_csv(d.join("bal.csv")).unwrap().class_counts(),
        vec![30; 5]
    );
    ok(
        d,
        &[
            "balance",
            "--input",
            "imb.csv",
            "--target",
            "30,6,12,8,21",
            "--out",
            "bal2.csv",
        ],
    );
    assert_eq!(
        load_csv(d.join("bal2.csv")).unwrap().class_counts(),
        vec![30, 6, 12, 8, 21]
    );
    fails_with(
        d,
        &[
            "balance",
            "--input",
            "imb.csv",
            "--target",
            "1,5,12,8,20",
            "--out",
            "x.csv",
        ],
        1,
    );
}

#[test]
fn train_reports_corrupt_input_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_pipeline(d, "5");
    let first = read(d.join("model/model.json"));
    ok(
        d,
        &[
            "train",
            "--seed",
            "5",
            "--train",
            "splits/train.csv",
            "--val",
            "splits/val.csv",
            "--epochs",
            "10",
            "--out",
            "model2",
        ],
    );
    assert_eq!(first, read(d.join("model2/model.json")));
    assert_eq!(read(d.join("model/trace.csv")).lines().count(), 11);

    let mut corrupt: Vec<String> = read(d.join("splits/train.csv"))
        .lines()
        .map(String::from)
        .collect();
    corrupt[6] = corrupt[6].replacen(|c: char| c.is_ascii_digit(), "x", 1);
    fs::write(d.join("bad.csv"), corrupt.join("\n") + "\n").unwrap();
    let err = fails_with(
        d,
        &[
            "train",
            "--train",
            "bad.csv",
            "--val",
            "splits/val.csv",
            "--out",
            "m",
        ],
        1,
    );
    assert!(err.contains("line 7"), "{err}");

    ok(
        d,
        &[
            "gen",
            "--dim",
            "3",
            "--per-class",
            "10",
            "--out",
            "other.csv",
        ],
    );
    fails_with(
        d,
        &[
            "train",
            "--train",
            "splits/train.csv",
            "--val",
            "other.csv",
            "--out",
            "m",
        ],
        1,
    );
    fails_with(
        d,
        &[
            "train",
            "--train",
            "splits/train.csv",
            "--val",
            "splits/val.csv",
            "--epochs",
            "0",
            "--out",
            "m",
        ],
        1,
    );
}

#[test]
fn desk_scale_training_fits_the_runtime_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["gen", "--seed", "1", "--out", "data.csv"]);
    ok(
        d,
        &["split", "--seed", "1", "--input", "data.csv", "--out", "s"],
    );
    let start = Instant::now();
    ok(
        d,
        &[
            "train",
            "--seed",
            "1",
            "--train",
            "s/train.csv",
            "--val",
            "s/val.csv",
            "--out",
            "m",
        ],
    );
    assert!(start.elapsed().as_secs_f64() < 60.0);
}

fn json(path: impl AsRef<Path>) -> serde_json::Value {
    serde_json::from_str(&read(path)).unwrap()
}

#[test]
fn eval_outputs_are_self_consistent() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_pipeline(d, "9");
    ok(
        d,
        &[
            "eval",
            "--seed",
            "9",
            "--model",
            "model/model.json",
            "--data",
            "splits/val.csv",
            "--posterior",
            "--out",
            "e",
        ],
    );
    let e = d.join("e");
    for f in [
        "summary.json",
        "calibration.json",
        "predictions.csv",
        "histogram.csv",
        "confusion_all.csv",
        "confusion_accepted.csv",
        "posterior.csv",
    ] {
        assert!(e.join(f).exists(), "{f} missing");
    }
    let s = json(e.join("summary.json"));
    for key in [
        "accuracy_accepted",
        "coverage",
        "rejection_rate",
        "ece",
        "overall_accuracy",
        "n_samples",
        "threshold",
        "mc_samples",
        "seed",
        "toolkit_version",
    ] {
        assert!(s.get(key).is_some(), "{key}");
    }
    let cov = s["coverage"].as_f64().unwrap();
    assert!((cov + s["rejection_rate"].as_f64().unwrap() - 1.0).abs() <= 1e-12);

    // recompute ECE from the per-sample file
    let (conf, correct): (Vec<f64>, Vec<bool>) = read(e.join("predictions.csv"))
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[3].parse::<f64>().unwrap(), f[1] == f[2])
        })
        .unzip();
    let recomputed = ece(&conf, &correct, DEFAULT_ECE_BINS).unwrap().ece;
    assert_eq!(recomputed, s["ece"].as_f64().unwrap());
    assert_eq!(json(e.join("calibration.json"))["ece"], s["ece"]);

    let hist = read(e.join("histogram.csv"));
    assert!(hist.ends_with("# threshold=0.700000000\n"));
    let n: usize = hist
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(n, conf.len());

    ok(
        d,
        &[
            "eval",
            "--seed",
            "9",
            "--model",
            "model/model.json",
            "--data",
            "splits/val.csv",
            "--threshold",
            "0",
            "--out",
            "e0",
        ],
    );
    let s0 = json(d.join("e0/summary.json"));
    assert_eq!(s0["coverage"].as_f64(), Some(1.0));
    assert_eq!(s0["accuracy_accepted"], s0["overall_accuracy"]);

    fails_with(
        d,
        &[
            "eval",
            "--model",
            "model/model.json",
            "--data",
            "splits/val.csv",
            "--threshold",
            "1.5",
            "--out",
            "x",
        ],
        1,
    );
    ok(
        d,
        &[
            "gen",
            "--dim",
            "3",
            "--per-class",
            "10",
            "--out",
            "other.csv",
        ],
    );
    fails_with(
        d,
        &[
            "eval",
            "--model",
            "model/model.json",
            "--data",
            "other.csv",
            "--out",
            "x",
        ],
        1,
    );
}

#[test]
fn sweep_matches_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_pipeline(d, "2");
    ok(
        d,
        &[
            "sweep",
            "--seed",
            "2",
            "--model",
            "model/model.json",
            "--data",
            "splits/val.csv",
            "--out",
            "sweep.csv",
        ],
    );
    ok(
        d,
        &[
            "eval",
            "--seed",
            "2",
            "--model",
            "model/model.json",
            "--data",
            "splits/val.csv",
            "--out",
            "e",
        ],
    );
    let text = read(d.join("sweep.csv"));
    let rows: Vec<Vec<String>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 9);
    let cov: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(cov.windows(2).all(|w| w[1] <= w[0]));
    let row = rows
        .iter()
        .find(|r| r[0].parse::<f64>().unwrap() == 0.7)
        .unwrap();
    let s = json(d.join("e/summary.json"));
    assert_eq!(
        row[1].parse::<f64>().unwrap(),
        s["coverage"].as_f64().unwrap()
    );
    assert_eq!(
        row[2].parse::<f64>().unwrap(),
        s["rejection_rate"].as_f64().unwrap()
    );
    assert_eq!(row[3].parse::<f64>().ok(), s["accuracy_accepted"].as_f64());

    ok(
        d,
        &[
            "sweep",
            "--model",
            "model/model.json",
            "--data",
            "splits/val.csv",
            "--grid",
            "0.2,0.99",
            "--measure",
            "entropy",
            "--out",
            "s2.csv",
        ],
    );
    fails_with(
        d,
        &[
            "sweep",
            "--model",
            "model/model.json",
            "--data",
            "splits/val.csv",
            "--grid",
            "0.9,0.5",
            "--out",
            "s3.csv",
        ],
        1,
    );
}

#[test]
fn gradcheck_prints_one_line_and_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let a = ok(tmp.path(), &["gradcheck", "--seed", "4"]);
    let b = ok(tmp.path(), &["gradcheck", "--seed", "4"]);
    let text = String::from_utf8(a.stdout.clone()).unwrap();
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(text.lines().count(), 1);
    let value = text.trim().rsplit(' ').next().unwrap();
    let mantissa = value.split('e').next().unwrap();
    assert_eq!(mantissa.replace('.', "").len(), 3, "{value}");
    assert!(value.parse::<f64>().unwrap() <= 1e-4);
}

#[test]
fn config_file_is_strict_and_flags_win() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("bad.json"), r#"{"train": {"epochs": 2, "lr": 1}}"#).unwrap();
    fails_with(d, &["--config", "bad.json", "gen", "--out", "x.csv"], 1);

    fs::write(d.join("cfg.json"), r#"{"seed": 11, "synthetic": {"num_classes": 3, "feature_dim": 2, "samples_per_class": [4, 4, 4]}}"#).unwrap();
    ok(d, &["--config", "cfg.json", "gen", "--out", "a.csv"]);
    ok(
        d,
        &[
            "gen",
            "--seed",
            "11",
            "--classes",
            "3",
            "--dim",
            "2",
            "--per-class",
            "4",
            "--out",
            "b.csv",
        ],
    );
    assert_eq!(read(d.join("a.csv")), read(d.join("b.csv")));
    ok(
        d,
        &[
            "--config", "cfg.json", "gen", "--dim", "5", "--out", "c.csv",
        ],
    );
    assert_eq!(load_csv(d.join("c.csv")).unwrap().feature_dim(), 5);
    fails_with(d, &["--config", "missing.json", "gen", "--out", "x.csv"], 2);
}
