use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ppg_triage::config::{Level, RunConfig};
use ppg_triage::eval::run_experiment;
use ppg_triage::features::Family;
use ppg_triage::io::{self, Class, Recording, Sex};
use ppg_triage::pipeline::extract_cohort;
use ppg_triage::synth::{synth_cohort, synth_recording, CohortSpec};

fn small_spec(seed: u64) -> CohortSpec {
    let mut spec = CohortSpec::standard_separable(seed);
    spec.n_positive = 4;
    spec.n_negative = 6;
    spec.duration_s = 90.0;
    spec
}

fn config(n_iter: usize) -> RunConfig {
    RunConfig {
        seed: Some(3),
        n_iter,
        ..RunConfig::default()
    }
}

#[test]
fn clean_minute_yields_two_rows() {
    let mut spec = small_spec(1);
    spec.duration_s = 60.0;
    let rec = synth_recording(&spec, Class::Lvo, "P1", 11);
    let ex = extract_cohort(&[rec], &config(1), false).unwrap();
    assert_eq!(ex.screening.summary.total, 2);
    assert_eq!(ex.matrix.n_rows(), 2);
    assert!(ex.matrix.rows.iter().all(|r| r.patient_id == "P1"));
}

#[test]
fn noise_recording_yields_no_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let rec = Recording {
        patient_id: "N1".into(),
        fs: 1000.0,
        samples: (0..90_000)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect(),
        label: Class::Nl,
        age: Some(60.0),
        sex: Sex::Female,
    };
    let ex = extract_cohort(&[rec], &config(1), false).unwrap();
    assert_eq!(ex.screening.summary.total, 3);
    assert_eq!(ex.screening.summary.excluded, 3);
    assert_eq!(ex.matrix.n_rows(), 0);
}

#[test]
fn short_recording_is_skipped_not_fatal() {
    let spec = small_spec(2);
    let mut cohort = synth_cohort(&spec).unwrap();
    cohort[0].samples.truncate(10);
    let ex = extract_cohort(&cohort, &config(1), false).unwrap();
    assert_eq!(ex.screening.skipped_recordings.len(), 1);
    assert_eq!(
        ex.screening.skipped_recordings[0].patient_id,
        cohort[0].patient_id
    );
}

#[test]
fn matrix_and_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = synth_cohort(&small_spec(4)).unwrap();
    let manifest = io::write_cohort(&dir.path().join("c"), &cohort).unwrap();
    assert_eq!(io::load_cohort(&manifest).unwrap(), cohort);

    let ex = extract_cohort(&cohort, &config(5), true).unwrap();
    assert!(!ex.fiducials.is_empty());
    let path = dir.path().join("features.csv");
    io::write_matrix(&ex.matrix, &path).unwrap();
    let back = io::read_matrix(&path).unwrap();
    assert_eq!(back.rows.len(), ex.matrix.rows.len());
    for (a, b) in back.rows.iter().zip(&ex.matrix.rows) {
        assert_eq!(a.values.len(), b.values.len());
        for (x, y) in a.values.iter().zip(&b.values) {
            assert_eq!(x.map(f64::to_bits), y.map(f64::to_bits));
        }
    }

    let report = run_experiment(&back, &config(5)).unwrap();
    let rpath = dir.path().join("report.json");
    io::write_report(&report, &rpath).unwrap();
    assert_eq!(io::read_report(&rpath).unwrap(), report);
}

#[test]
fn single_iteration_collapses_quartiles() {
    let cohort = synth_cohort(&small_spec(5)).unwrap();
    let ex = extract_cohort(&cohort, &config(1), false).unwrap();
    let report = run_experiment(&ex.matrix, &config(1)).unwrap();
    for level in [Level::Window, Level::Patient] {
        let row = report.summary(level, Family::All).unwrap();
        let m = row.auroc_median.unwrap();
        assert_eq!(row.auroc_p25, Some(m));
        assert_eq!(row.auroc_p75, Some(m));
    }
}

#[test]
fn selection_counts_sum_to_k_per_iteration() {
    let cohort = synth_cohort(&small_spec(6)).unwrap();
    let ex = extract_cohort(&cohort, &config(4), false).unwrap();
    let cfg = RunConfig {
        rfe_k: 3,
        ..config(4)
    };
    let report = run_experiment(&ex.matrix, &cfg).unwrap();
    let total: usize = report
        .selection_frequency
        .iter()
        .filter(|s| s.family == Family::Mor)
        .map(|s| s.count)
        .sum();
    assert_eq!(total, 3 * 4);
}

#[test]
fn separable_small_cohort_discriminates() {
    let cohort = synth_cohort(&small_spec(8)).unwrap();
    let ex = extract_cohort(&cohort, &config(10), false).unwrap();
    let report = run_experiment(&ex.matrix, &config(10)).unwrap();
    let row = report.summary(Level::Window, Family::Mor).unwrap();
    assert!(row.auroc_median.unwrap() > 0.9, "{row:?}");
}
