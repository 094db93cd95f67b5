//! End-to-end tests of the compiled binary: every subcommand runs as a
//! real process, and the full synth → train → predict → eval pipeline is
//! exercised through files on disk.

use std::path::Path;
use std::process::{Command, Output};

fn mici(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mici"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stdout_line(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).trim().to_string()
}

#[test]
fn classification_pipeline_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path();

    let out = mici(
        &[
            "synth", "--task", "contamination", "--sweep", "0", "--seed", "3", "--out",
            "data.csv", "--num-bags", "20", "--bag-size", "6",
        ],
        path,
    );
    assert_success(&out);
    assert!(path.join("data.csv").exists());
    assert!(path.join("data.truth.csv").exists());

    let out = mici(
        &[
            "train", "--data", "data.csv", "--objective", "minmax", "--seed", "5",
            "--max-iter", "300", "--out", "model.json", "--trace", "trace.csv",
        ],
        path,
    );
    assert_success(&out);
    assert!(stdout_line(&out).starts_with("best_objective="));
    assert!(path.join("model.json").exists());
    let trace = std::fs::read_to_string(path.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iter,best_objective,wallclock_ms\n"));
    assert!(trace.lines().count() > 2);

    let out = mici(
        &[
            "predict", "--model", "model.json", "--data", "data.csv", "--out", "preds.csv",
            "--agg", "max",
        ],
        path,
    );
    assert_success(&out);
    let preds = std::fs::read_to_string(path.join("preds.csv")).unwrap();
    assert!(preds.starts_with("bag_id,instance_idx,ci_score\n"));
    assert!(preds.contains(",agg,"));

    // Instance-level error against the generated truth.
    let out = mici(
        &[
            "eval", "--preds", "preds.csv", "--truth", "data.truth.csv", "--metric",
            "relerr-cls",
        ],
        path,
    );
    assert_success(&out);
    let err: f64 = stdout_line(&out).parse().expect("numeric metric");
    assert!((0.0..=1.0).contains(&err), "got {err}");

    // Bag-level area under the ROC curve, with the polyline written out.
    let out = mici(
        &[
            "eval", "--preds", "preds.csv", "--truth", "data.truth.csv", "--metric", "auc",
            "--level", "bag", "--far-cap", "0.5", "--roc-out", "roc.csv",
        ],
        path,
    );
    assert_success(&out);
    let auc: f64 = stdout_line(&out).parse().expect("numeric metric");
    assert!((0.0..=0.5).contains(&auc), "capped area is at most the cap, got {auc}");
    let roc = std::fs::read_to_string(path.join("roc.csv")).unwrap();
    assert!(roc.starts_with("far,pd\n"));
}

#[test]
fn regression_pipeline_evaluates_at_bag_level() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path();

    let out = mici(
        &[
            "synth", "--task", "primary-ratio", "--sweep", "1.0", "--seed", "11", "--out",
            "reg.csv", "--num-bags", "6", "--bag-size", "10",
        ],
        path,
    );
    assert_success(&out);

    let out = mici(
        &[
            "train", "--data", "reg.csv", "--objective", "micir", "--seed", "2",
            "--max-iter", "400", "--out", "reg_model.json",
        ],
        path,
    );
    assert_success(&out);

    let out = mici(
        &[
            "predict", "--model", "reg_model.json", "--data", "reg.csv", "--out",
            "reg_preds.csv", "--agg", "mean",
        ],
        path,
    );
    assert_success(&out);

    let out = mici(
        &[
            "eval", "--preds", "reg_preds.csv", "--truth", "reg.truth.csv", "--metric",
            "relerr-reg", "--level", "bag",
        ],
        path,
    );
    assert_success(&out);
    let err: f64 = stdout_line(&out).parse().expect("numeric metric");
    assert!(err.is_finite() && err >= 0.0);

    let out = mici(
        &[
            "eval", "--preds", "reg_preds.csv", "--truth", "reg.truth.csv", "--metric",
            "rmse", "--level", "instance",
        ],
        path,
    );
    assert_success(&out);
    let rmse: f64 = stdout_line(&out).parse().expect("numeric metric");
    assert!(rmse.is_finite() && rmse >= 0.0);
}

#[test]
fn training_twice_with_one_seed_writes_identical_model_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path();

    let out = mici(
        &[
            "synth", "--task", "contamination", "--sweep", "0.3", "--seed", "7", "--out",
            "d.csv", "--num-bags", "10", "--bag-size", "5",
        ],
        path,
    );
    assert_success(&out);

    for name in ["m1.json", "m2.json"] {
        let out = mici(
            &[
                "train", "--data", "d.csv", "--objective", "genmean", "--p1", "10", "--p2",
                "-10", "--seed", "9", "--max-iter", "150", "--out", name,
            ],
            path,
        );
        assert_success(&out);
    }
    let a = std::fs::read(path.join("m1.json")).unwrap();
    let b = std::fs::read(path.join("m2.json")).unwrap();
    assert_eq!(a, b, "same seed must produce byte-identical model files");

    let out = mici(
        &[
            "train", "--data", "d.csv", "--objective", "genmean", "--seed", "10",
            "--max-iter", "150", "--out", "m3.json",
        ],
        path,
    );
    assert_success(&out);
    let c = std::fs::read(path.join("m3.json")).unwrap();
    assert_ne!(a, c, "a different seed explores differently");
}

#[test]
fn micir_reconstruction_trains_on_binary_bags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path();

    let out = mici(
        &[
            "synth", "--task", "contamination", "--sweep", "0", "--seed", "13", "--out",
            "c.csv", "--num-bags", "8", "--bag-size", "4",
        ],
        path,
    );
    assert_success(&out);

    let out = mici(
        &[
            "train", "--data", "c.csv", "--objective", "micir", "--reconstruct", "--seed",
            "1", "--max-iter", "200", "--out", "mr.json",
        ],
        path,
    );
    assert_success(&out);
    assert!(path.join("mr.json").exists());
}

#[test]
fn bench_writes_one_row_per_sampler_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path();

    let out = mici(
        &[
            "bench", "--task", "primary-ratio", "--sweep", "1.0", "--data-seed", "4",
            "--samplers", "me,vi", "--seeds", "1..=2", "--max-iter", "40", "--out",
            "bench.csv",
        ],
        path,
    );
    assert_success(&out);
    let content = std::fs::read_to_string(path.join("bench.csv")).unwrap();
    let mut lines = content.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sampler,seed,iterations,wallclock_ms"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4, "2 samplers x 2 seeds: {content}");
    assert!(rows[0].starts_with("me,1,") && rows[1].starts_with("me,2,"));
    assert!(rows[2].starts_with("vi,1,") && rows[3].starts_with("vi,2,"));
}

#[test]
fn usage_and_data_errors_use_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path();

    let out = mici(&["train", "--no-such-flag"], path);
    assert_eq!(out.status.code(), Some(2), "usage errors exit 2");

    let out = mici(&["--help"], path);
    assert_eq!(out.status.code(), Some(0), "help exits 0");
    assert!(String::from_utf8_lossy(&out.stdout).contains("train"));

    let out = mici(
        &[
            "train", "--data", "missing.csv", "--out", "m.json",
        ],
        path,
    );
    assert_eq!(out.status.code(), Some(1), "data errors exit 1");
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = mici(
        &[
            "synth", "--task", "contamination", "--sweep", "1.5", "--out", "x.csv",
        ],
        path,
    );
    assert_eq!(out.status.code(), Some(1), "invalid sweep exits 1");

    let out = mici(
        &[
            "eval", "--preds", "nope.csv", "--truth", "nope.csv", "--metric", "rmse",
        ],
        path,
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn predict_rejects_dimension_mismatches() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path();

    let out = mici(
        &[
            "synth", "--task", "contamination", "--sweep", "0", "--seed", "1", "--out",
            "a.csv", "--num-bags", "4", "--bag-size", "3", "--num-sources", "2",
        ],
        path,
    );
    assert_success(&out);
    let out = mici(
        &[
            "train", "--data", "a.csv", "--seed", "1", "--max-iter", "50", "--out",
            "a_model.json",
        ],
        path,
    );
    assert_success(&out);

    let out = mici(
        &[
            "synth", "--task", "contamination", "--sweep", "0", "--seed", "1", "--out",
            "b.csv", "--num-bags", "4", "--bag-size", "3", "--num-sources", "3",
        ],
        path,
    );
    assert_success(&out);

    let out = mici(
        &[
            "predict", "--model", "a_model.json", "--data", "b.csv", "--out", "p.csv",
        ],
        path,
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("2 sources"), "stderr: {stderr}");
}
