//! End-to-end tests of the binary: stage composition, refusals, exit
//! codes. Everything runs against small generated datasets in temporary
//! directories, with relative paths so the command lines stay portable.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blindspot"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawning the binary")
}

fn run_ok(dir: &Path, args: &[&str]) {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "blindspot {args:?} exited {:?}:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process terminated by signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn key_values(path: &Path) -> BTreeMap<String, String> {
    fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
        .lines()
        .map(|l| {
            let (k, v) = l.split_once('=').expect("key=value line");
            (k.to_string(), v.to_string())
        })
        .collect()
}

fn get_usize(kv: &BTreeMap<String, String>, key: &str) -> usize {
    kv[key].parse().unwrap_or_else(|e| panic!("{key}: {e}"))
}

fn get_f64(kv: &BTreeMap<String, String>, key: &str) -> f64 {
    kv[key].parse().unwrap_or_else(|e| panic!("{key}: {e}"))
}

/// Generate a small dataset and run both cue pipelines to scored
/// hypotheses, leaving the stage directories in `root`.
fn run_small_pipeline(root: &Path) {
    run_ok(root, &["synth", "--out", "data", "--sequences", "2", "--frames", "12"]);
    run_ok(root, &["hypothesize-temporal", "--data", "data", "--out", "hyp_t"]);
    run_ok(root, &["hypothesize-stereo", "--data", "data", "--out", "hyp_s"]);
    run_ok(root, &["featurize", "--data", "data", "--hypotheses", "hyp_t", "--out", "feat_t"]);
    run_ok(
        root,
        &["featurize", "--data", "data", "--hypotheses", "hyp_s", "--shifted", "hyp_s", "--out", "feat_s"],
    );
    run_ok(root, &["label", "--data", "data", "--hypotheses", "feat_t", "--out", "lab_t"]);
    run_ok(root, &["label", "--data", "data", "--hypotheses", "feat_s", "--out", "lab_s"]);
    run_ok(root, &["train", "--hypotheses", "lab_t", "--out", "model_t"]);
    run_ok(root, &["train", "--hypotheses", "lab_s", "--out", "model_s"]);
    run_ok(
        root,
        &["predict", "--hypotheses", "lab_t", "--model", "model_t/model.txt", "--out", "pred_t"],
    );
    run_ok(
        root,
        &["predict", "--hypotheses", "lab_s", "--model", "model_s/model.txt", "--out", "pred_s"],
    );
}

#[test]
fn golden_path_produces_reports_and_heatmaps() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    run_small_pipeline(root);
    run_ok(root, &["fuse", "--temporal", "pred_t", "--stereo", "pred_s", "--out", "fused"]);
    run_ok(
        root,
        &["eval", "--hypotheses", "pred_t", "--out", "eval_t", "--errors", "fused", "--data", "data"],
    );
    run_ok(root, &["geomap", "--data", "data", "--errors", "fused", "--out", "geo"]);

    let report = key_values(&root.join("eval_t/summary.txt"));
    let ap = get_f64(&report, "ap");
    let naive = get_f64(&report, "naive_ap");
    assert!((0.0..=1.0).contains(&ap), "ap = {ap}");
    assert!((0.0..=1.0).contains(&naive), "naive_ap = {naive}");
    assert!(get_usize(&report, "items") > 0);
    assert!(report.contains_key("f1_before") && report.contains_key("f1_after"));

    let curve = fs::read_to_string(root.join("eval_t/pr_curve.csv")).unwrap();
    assert!(curve.starts_with("recall,precision,threshold\n"));
    assert!(curve.lines().count() > 1);

    assert!(root.join("geo/heatmap.csv").exists());
    assert!(root.join("geo/heatmap.pgm").exists());

    // every stage echoes its parameters next to its outputs
    for dir in ["data", "hyp_t", "feat_s", "lab_t", "model_s", "pred_t", "fused", "eval_t", "geo"] {
        let manifest = key_values(&root.join(dir).join("manifest.txt"));
        assert!(manifest.contains_key("command"), "{dir} manifest lacks command");
    }
    let synth_manifest = key_values(&root.join("data/manifest.txt"));
    assert_eq!(synth_manifest["command"], "synth");
    assert_eq!(synth_manifest["sequences"], "2");
}

#[test]
fn fuse_counts_are_consistent() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    run_small_pipeline(root);
    run_ok(root, &["fuse", "--temporal", "pred_t", "--stereo", "pred_s", "--out", "fused"]);

    let s = key_values(&root.join("fused/summary.txt"));
    let total_t = get_usize(&s, "total_temporal");
    let total_s = get_usize(&s, "total_stereo");
    let unique_t = get_usize(&s, "unique_temporal");
    let unique_s = get_usize(&s, "unique_stereo");
    let intersection = get_usize(&s, "intersection");
    assert_eq!(unique_t + intersection, total_t);
    assert_eq!(unique_s + intersection, total_s);
    assert!(get_usize(&s, "fused") <= total_t + total_s);
}

#[test]
fn eval_refuses_unlabeled_hypotheses() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    run_ok(root, &["synth", "--out", "data", "--sequences", "1", "--frames", "8"]);
    run_ok(root, &["hypothesize-temporal", "--data", "data", "--out", "hyp_t"]);
    let out = run(root, &["eval", "--hypotheses", "hyp_t", "--out", "ev"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("label"), "{}", stderr(&out));
}

#[test]
fn predict_refuses_model_of_the_other_cue() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    run_small_pipeline(root);
    let out = run(
        root,
        &["predict", "--hypotheses", "lab_s", "--model", "model_t/model.txt", "--out", "bad"],
    );
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("cue mismatch"), "{}", stderr(&out));
}

#[test]
fn featurize_stereo_needs_the_shifted_cohort() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    run_ok(root, &["synth", "--out", "data", "--sequences", "1", "--frames", "8"]);
    run_ok(root, &["hypothesize-stereo", "--data", "data", "--out", "hyp_s"]);
    let out = run(root, &["featurize", "--data", "data", "--hypotheses", "hyp_s", "--out", "feat"]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    assert!(stderr(&out).contains("--shifted"), "{}", stderr(&out));
}

#[test]
fn wrong_invocations_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let out = run(root, &["hypothesize-temporal", "--data", "nowhere", "--out", "o"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("nowhere"));

    run_ok(root, &["synth", "--out", "data", "--sequences", "1", "--frames", "8"]);
    let out = run(
        root,
        &["hypothesize-temporal", "--data", "data", "--out", "o", "--conf-threshold", "1.5"],
    );
    assert_eq!(code(&out), 1);

    let out = run(root, &["synth", "--out", "s2", "--miss-prob", "2.0"]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));

    let out = run(root, &["--no-such-flag"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn help_and_version_exit_zero() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [&["--help"][..], &["--version"][..], &["synth", "--help"][..]] {
        let out = run(tmp.path(), args);
        assert_eq!(code(&out), 0, "{args:?}");
    }
}

#[test]
fn malformed_and_missing_inputs_are_data_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    run_ok(root, &["synth", "--out", "data", "--sequences", "1", "--frames", "8"]);

    fs::remove_file(root.join("data/seq0000/tracklets.txt")).unwrap();
    let out = run(root, &["hypothesize-temporal", "--data", "data", "--out", "o"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("tracklets.txt"), "{}", stderr(&out));

    fs::write(root.join("data/seq0000/det_left.txt"), "not a detection line\n").unwrap();
    let out = run(root, &["hypothesize-stereo", "--data", "data", "--out", "o2"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    let msg = stderr(&out);
    assert!(msg.contains("det_left.txt") && msg.contains("line 1"), "{msg}");
}

#[test]
fn eval_correction_flags_go_together() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    run_small_pipeline(root);
    let out = run(root, &["eval", "--hypotheses", "pred_t", "--out", "ev", "--data", "data"]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    assert!(stderr(&out).contains("--errors"), "{}", stderr(&out));
}

#[test]
fn summaries_count_what_was_written() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    run_ok(root, &["synth", "--out", "data", "--sequences", "2", "--frames", "10"]);
    run_ok(root, &["hypothesize-temporal", "--data", "data", "--out", "hyp_t"]);

    let s = key_values(&root.join("hyp_t/summary.txt"));
    assert_eq!(get_usize(&s, "sequences"), 2);
    let mut rows = 0;
    for seq in ["seq0000", "seq0001"] {
        let table = fs::read_to_string(root.join("hyp_t").join(seq).join("hypotheses.csv"))
            .unwrap();
        rows += table.lines().count() - 1;
    }
    assert_eq!(get_usize(&s, "hypotheses"), rows);
}
