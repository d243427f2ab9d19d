use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ppg-triage"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL_SPEC: &str = "seed = 5\nn_positive = 4\nn_negative = 5\nduration_s = 60.0\n\
[positive.beat]\ndiastolic_amp = 0.2\n[negative.beat]\ndiastolic_amp = 0.6\n";

/// synth, extract and evaluate into `dir`; returns the report bytes.
fn full_run(dir: &Path, workers: &str) -> Vec<u8> {
    let spec = write(dir, "spec.toml", SMALL_SPEC);
    let cohort = dir.join("cohort");
    let feats = dir.join("feats");
    let eval = dir.join("eval");
    let o = run(&[
        "--workers",
        workers,
        "synth",
        "--spec",
        p(&spec),
        "--out",
        p(&cohort),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&[
        "extract",
        "--manifest",
        p(&cohort.join("manifest.toml")),
        "--out",
        p(&feats),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&[
        "--workers",
        workers,
        "evaluate",
        "--matrix",
        p(&feats.join("features.csv")),
        "--screening",
        p(&feats.join("screening.json")),
        "--out",
        p(&eval),
        "--seed",
        "2",
        "--config",
        p(&write(dir, "run.toml", "n_iter = 6\n")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("ALL"), "{}", stdout(&o));
    for f in [
        "summary.csv",
        "roc.csv",
        "selection_frequency.csv",
        "distributions.json",
    ] {
        assert!(eval.join(f).exists(), "{f} missing");
    }
    std::fs::read(eval.join("report.json")).unwrap()
}

#[test]
fn synth_reports_class_counts() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "s.toml", "seed = 1\nduration_s = 20.0\n");
    let o = run(&[
        "synth",
        "--spec",
        p(&spec),
        "--out",
        p(&dir.path().join("c")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("25 C1 / 61 C0"), "{}", stdout(&o));
    let manifest = std::fs::read_to_string(dir.path().join("c/manifest.toml")).unwrap();
    assert_eq!(manifest.matches("[[entry]]").count(), 86);
}

#[test]
fn bad_arguments_exit_1() {
    assert_eq!(run(&["synth"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn synth_without_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "s.toml", "duration_s = 20.0\n");
    let o = run(&[
        "synth",
        "--spec",
        p(&spec),
        "--out",
        p(&dir.path().join("c")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[config]"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "window_seconds = 30\n");
    let o = run(&[
        "evaluate",
        "--matrix",
        "missing.csv",
        "--config",
        p(&cfg),
        "--out",
        p(dir.path()),
        "--seed",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("window_seconds"), "{}", stderr(&o));
}

#[test]
fn malformed_manifest_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(
        dir.path(),
        "manifest.toml",
        "[[entry]]\npatient_id = \"P1\"\nsample_file = \"nowhere.txt\"\nfs = 1000.0\nlabel = \"NL\"\n",
    );
    let o = run(&["extract", "--manifest", p(&m), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error[data]"), "{}", stderr(&o));
}

#[test]
fn single_positive_patient_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "s.toml",
        "seed = 3\nn_positive = 1\nn_negative = 4\nduration_s = 60.0\n",
    );
    let cohort = dir.path().join("c");
    assert!(run(&["synth", "--spec", p(&spec), "--out", p(&cohort)])
        .status
        .success());
    let feats = dir.path().join("f");
    assert!(run(&[
        "extract",
        "--manifest",
        p(&cohort.join("manifest.toml")),
        "--out",
        p(&feats)
    ])
    .status
    .success());
    let o = run(&[
        "evaluate",
        "--matrix",
        p(&feats.join("features.csv")),
        "--out",
        p(&dir.path().join("e")),
        "--seed",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(
        stderr(&o).starts_with("error[degenerate]"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn repeated_runs_are_byte_identical_across_worker_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = full_run(a.path(), "1");
    let rb = full_run(b.path(), "2");
    assert!(!ra.is_empty());
    assert!(ra == rb, "reports differ");
}

#[test]
fn catalog_matches_checked_in_csv() {
    let o = run(&["catalog"]);
    assert!(o.status.success());
    let shipped =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/catalog.csv"))
            .unwrap();
    assert_eq!(stdout(&o), shipped);
}

#[test]
fn shipped_configs_parse() {
    let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "manifest.toml", "");
    // A valid config gets past config loading and fails on the empty manifest.
    let o = run(&[
        "extract",
        "--manifest",
        p(&m),
        "--out",
        p(dir.path()),
        "--config",
        &format!("{root}/default.toml"),
    ]);
    assert_ne!(o.status.code(), Some(2), "{}", stderr(&o));
    for spec in ["cohort.toml", "null_cohort.toml"] {
        let text = std::fs::read_to_string(format!("{root}/{spec}")).unwrap();
        let short = text.replace("duration_s = 600.0", "duration_s = 10.0");
        let s = write(dir.path(), spec, &short);
        let o = run(&[
            "synth",
            "--spec",
            p(&s),
            "--out",
            p(&dir.path().join(format!("out_{spec}"))),
        ]);
        assert!(o.status.success(), "{spec}: {}", stderr(&o));
    }
}
