//! Repeated patient-level stratified splits, threshold metrics, AUROC and
//! report aggregation.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Level, RunConfig};
use crate::error::{Error, Result};
use crate::features::{Family, FeatureMatrix, CATALOG_VERSION};
use crate::io::BinaryLabel;
use crate::model::LogisticModel;
use crate::preprocess::ScreeningSummary;
use crate::stats;

pub const ROC_GRID_POINTS: usize = 101;
pub const HISTOGRAM_BINS: usize = 30;
pub const TOP_DISTRIBUTION_FEATURES: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub train_fraction: f64,
    pub iterations: Vec<Split>,
}

/// Number of test patients for a class of `count`: the test share rounded
/// up, kept within `[1, count - 1]`.
pub fn test_count(count: usize, train_fraction: f64) -> usize {
    let raw = (count as f64 * (1.0 - train_fraction) - 1e-9).ceil() as usize;
    raw.clamp(1, count - 1)
}

/// Shuffles each class independently per iteration with a generator seeded
/// by `seed + iteration`.
pub fn plan_splits(
    patients: &[(String, BinaryLabel)],
    train_fraction: f64,
    n_iter: usize,
    seed: u64,
) -> Result<SplitPlan> {
    let mut by_class: BTreeMap<u8, Vec<&str>> = BTreeMap::new();
    for (id, label) in patients {
        by_class.entry(label.as_u8()).or_default().push(id);
    }
    for label in [BinaryLabel::C1, BinaryLabel::C0] {
        let n = by_class.get(&label.as_u8()).map_or(0, Vec::len);
        if n < 2 {
            return Err(Error::Degenerate(format!(
                "class {label} has {n} patient(s); at least 2 are needed per class"
            )));
        }
    }
    for ids in by_class.values_mut() {
        ids.sort_unstable();
    }
    let iterations = (0..n_iter)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let mut split = Split {
                train: Vec::new(),
                test: Vec::new(),
            };
            for label in [BinaryLabel::C1, BinaryLabel::C0] {
                let mut ids = by_class[&label.as_u8()].clone();
                ids.shuffle(&mut rng);
                let n_test = test_count(ids.len(), train_fraction);
                split
                    .test
                    .extend(ids[..n_test].iter().map(|s| s.to_string()));
                split
                    .train
                    .extend(ids[n_test..].iter().map(|s| s.to_string()));
            }
            split.train.sort_unstable();
            split.test.sort_unstable();
            split
        })
        .collect();
    Ok(SplitPlan {
        seed,
        train_fraction,
        iterations,
    })
}

/// Mann-Whitney AUROC from average ranks; `None` unless both classes occur.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += avg_rank * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

/// ROC vertices `(fpr, tpr)` from the highest threshold down; tied scores
/// move diagonally in one step.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Vec<(f64, f64)> {
    let n_pos = labels.iter().filter(|l| **l).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            j += 1;
        }
        points.push((fp / n_neg, tp / n_pos));
        i = j;
    }
    points
}

/// TPR on an evenly spaced FPR grid over [0, 1]; vertical jumps take the
/// upper value.
pub fn roc_on_grid(points: &[(f64, f64)], n_grid: usize) -> Vec<f64> {
    (0..n_grid)
        .map(|g| {
            let f = g as f64 / (n_grid - 1) as f64;
            let k = points.iter().rposition(|p| p.0 <= f).unwrap_or(0);
            let (f0, t0) = points[k];
            match points.get(k + 1) {
                Some(&(f1, t1)) if f0 < f => t0 + (t1 - t0) * (f - f0) / (f1 - f0),
                _ => t0,
            }
        })
        .collect()
}

/// Youden-optimal threshold: predicted positive iff `score >= threshold`.
/// Among equally good cut intervals the lowest wins; the threshold is its
/// midpoint, or the minimum score when every score is predicted positive.
/// Returns `(threshold, J)`.
pub fn choose_threshold(scores: &[f64], labels: &[bool]) -> (f64, f64) {
    let n_pos = labels.iter().filter(|l| **l).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Scan cuts upwards; below the cut at unique value u_j everything is negative.
    let (mut fn_, mut tn) = (0.0, 0.0);
    let mut best = (scores[order[0]], f64::NEG_INFINITY);
    let mut prev: Option<f64> = None;
    let mut i = 0;
    while i < order.len() {
        let u = scores[order[i]];
        let j_stat = (n_pos - fn_) / n_pos + tn / n_neg - 1.0;
        if j_stat > best.1 {
            best = (prev.map_or(u, |p| 0.5 * (p + u)), j_stat);
        }
        while i < order.len() && scores[order[i]] == u {
            if labels[order[i]] {
                fn_ += 1.0;
            } else {
                tn += 1.0;
            }
            i += 1;
        }
        prev = Some(u);
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMetrics {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
}

pub fn confusion_metrics(scores: &[f64], labels: &[bool], threshold: f64) -> ConfusionMetrics {
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (s, &l) in scores.iter().zip(labels) {
        match (*s >= threshold, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| (a + b > 0).then(|| a as f64 / (a + b) as f64);
    let sensitivity = ratio(tp, fn_);
    let precision = ratio(tp, fp);
    let f1 = match (precision, sensitivity) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    ConfusionMetrics {
        sensitivity,
        specificity: ratio(tn, fp),
        precision,
        f1,
    }
}

/// Test-set result for one family at one scoring level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub level: Level,
    pub auroc: f64,
    pub threshold: f64,
    pub metrics: ConfusionMetrics,
    pub n_test: usize,
    /// TPR on the common FPR grid.
    pub roc_tpr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyResult {
    pub family: Family,
    pub selected: Vec<String>,
    pub dropped_features: Vec<String>,
    /// Train and test windows skipped for missing family values.
    pub dropped_train_rows: usize,
    pub dropped_test_rows: usize,
    pub converged: bool,
    /// Levels whose test set lacked a class are absent.
    pub levels: Vec<LevelResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationResult {
    pub iteration: usize,
    pub families: Vec<FamilyResult>,
    /// Families that could not be trained in this iteration.
    pub untrainable: Vec<Family>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Option<Quartiles> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Quartiles {
            p25: stats::percentile_sorted(&v, 0.25),
            median: stats::percentile_sorted(&v, 0.5),
            p75: stats::percentile_sorted(&v, 0.75),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub family: Family,
    pub n_evaluated: usize,
    pub n_degenerate: usize,
    /// Medians over evaluated iterations.
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub auroc_median: Option<f64>,
    pub auroc_p25: Option<f64>,
    pub auroc_p75: Option<f64>,
    pub sensitivity_iqr: Option<Quartiles>,
    pub specificity_iqr: Option<Quartiles>,
    pub precision_iqr: Option<Quartiles>,
    pub f1_iqr: Option<Quartiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocEnvelope {
    pub family: Family,
    pub fpr: Vec<f64>,
    pub tpr_median: Vec<f64>,
    pub tpr_p25: Vec<f64>,
    pub tpr_p75: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: Level,
    pub summary: Vec<SummaryRow>,
    pub roc: Vec<RocEnvelope>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionCount {
    pub family: Family,
    pub feature: String,
    pub count: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDistribution {
    pub feature: String,
    /// `HISTOGRAM_BINS + 1` edges over the pooled range.
    pub bin_edges: Vec<f64>,
    /// Per-class bin masses; each sums to one when the class has values.
    pub c0: Vec<f64>,
    pub c1: Vec<f64>,
    pub n_c0: usize,
    pub n_c1: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortCounts {
    pub c1_patients: usize,
    pub c0_patients: usize,
    pub windows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub catalog_version: String,
    pub seed: u64,
    pub n_iter: usize,
    pub train_fraction: f64,
    pub lambda: f64,
    pub rfe_k: usize,
    pub cohort: CohortCounts,
    pub levels: Vec<LevelReport>,
    pub selection_frequency: Vec<SelectionCount>,
    pub distributions: Vec<FeatureDistribution>,
    pub screening: Option<ScreeningSummary>,
    pub iterations: Vec<IterationResult>,
}

impl EvalReport {
    pub fn level(&self, level: Level) -> Option<&LevelReport> {
        self.levels.iter().find(|l| l.level == level)
    }

    pub fn summary(&self, level: Level, family: Family) -> Option<&SummaryRow> {
        self.level(level)?
            .summary
            .iter()
            .find(|r| r.family == family)
    }
}

/// Family columns for rows, with rows lacking any value left out.
struct FamilyData {
    names: Vec<String>,
    /// Per matrix row, the complete values if any.
    values: Vec<Option<Vec<f64>>>,
}

impl FamilyData {
    fn new(matrix: &FeatureMatrix, family: Family) -> Self {
        let cols = matrix.catalog.columns(family);
        FamilyData {
            names: cols
                .iter()
                .map(|&c| matrix.catalog.features[c].name.clone())
                .collect(),
            values: matrix
                .rows
                .iter()
                .map(|r| cols.iter().map(|&c| r.values[c]).collect())
                .collect(),
        }
    }
}

struct Scored {
    patient: usize,
    score: f64,
    label: bool,
}

fn patient_means(scored: &[Scored]) -> (Vec<f64>, Vec<bool>) {
    let mut acc: BTreeMap<usize, (f64, usize, bool)> = BTreeMap::new();
    for s in scored {
        let e = acc.entry(s.patient).or_insert((0.0, 0, s.label));
        e.0 += s.score;
        e.1 += 1;
    }
    acc.values()
        .map(|(sum, n, l)| (sum / *n as f64, *l))
        .unzip()
}

fn level_result(
    level: Level,
    train: &(Vec<f64>, Vec<bool>),
    test: &(Vec<f64>, Vec<bool>),
) -> Option<LevelResult> {
    let auc = auroc(&test.0, &test.1)?;
    let has_both = train.1.iter().any(|l| *l) && train.1.iter().any(|l| !*l);
    if !has_both {
        return None;
    }
    let (threshold, _) = choose_threshold(&train.0, &train.1);
    Some(LevelResult {
        level,
        auroc: auc,
        threshold,
        metrics: confusion_metrics(&test.0, &test.1, threshold),
        n_test: test.0.len(),
        roc_tpr: roc_on_grid(&roc_curve(&test.0, &test.1), ROC_GRID_POINTS),
    })
}

fn run_family(
    matrix: &FeatureMatrix,
    data: &FamilyData,
    family: Family,
    patient_of_row: &[usize],
    in_train: &[bool],
    config: &RunConfig,
) -> Option<FamilyResult> {
    let mut train_rows = Vec::new();
    let mut train_idx = Vec::new();
    let mut dropped_train_rows = 0;
    let mut dropped_test_rows = 0;
    for (i, v) in data.values.iter().enumerate() {
        match (v, in_train[patient_of_row[i]]) {
            (Some(v), true) => {
                train_rows.push(v.clone());
                train_idx.push(i);
            }
            (None, true) => dropped_train_rows += 1,
            (None, false) => dropped_test_rows += 1,
            _ => {}
        }
    }
    let y: Vec<bool> = train_idx
        .iter()
        .map(|&i| matrix.rows[i].label.is_positive())
        .collect();
    if !(y.iter().any(|l| *l) && y.iter().any(|l| !*l)) {
        return None;
    }
    let k = config.rfe_k.min(data.names.len());
    let model = LogisticModel::train(&data.names, &train_rows, &y, config.lambda, k).ok()?;
    let index: Vec<usize> = model
        .features
        .iter()
        .map(|n| {
            data.names
                .iter()
                .position(|m| m == n)
                .expect("selected feature comes from the family")
        })
        .collect();
    let score = |i: usize| {
        data.values[i]
            .as_ref()
            .map(|v| model.predict_one(&index.iter().map(|&c| v[c]).collect::<Vec<_>>()))
    };
    let scored_for = |train: bool| -> Vec<Scored> {
        (0..matrix.rows.len())
            .filter(|&i| in_train[patient_of_row[i]] == train)
            .filter_map(|i| {
                score(i).map(|s| Scored {
                    patient: patient_of_row[i],
                    score: s,
                    label: matrix.rows[i].label.is_positive(),
                })
            })
            .collect()
    };
    let train_scored = scored_for(true);
    let test_scored = scored_for(false);
    let window =
        |s: &[Scored]| -> (Vec<f64>, Vec<bool>) { s.iter().map(|s| (s.score, s.label)).unzip() };

    let mut levels = Vec::new();
    if config.metric_level.includes(Level::Window) {
        levels.extend(level_result(
            Level::Window,
            &window(&train_scored),
            &window(&test_scored),
        ));
    }
    if config.metric_level.includes(Level::Patient) {
        levels.extend(level_result(
            Level::Patient,
            &patient_means(&train_scored),
            &patient_means(&test_scored),
        ));
    }
    Some(FamilyResult {
        family,
        selected: model.features.clone(),
        dropped_features: model.standardizer.dropped.clone(),
        dropped_train_rows,
        dropped_test_rows,
        converged: model.diagnostics.converged,
        levels,
    })
}

fn summarize(
    iterations: &[IterationResult],
    family: Family,
    level: Level,
    n_iter: usize,
) -> (SummaryRow, RocEnvelope) {
    let results: Vec<&LevelResult> = iterations
        .iter()
        .flat_map(|it| it.families.iter().filter(|f| f.family == family))
        .flat_map(|f| f.levels.iter().filter(|l| l.level == level))
        .collect();
    let collect = |get: &dyn Fn(&LevelResult) -> Option<f64>| -> Option<Quartiles> {
        Quartiles::of(&results.iter().filter_map(|r| get(r)).collect::<Vec<_>>())
    };
    let auc = collect(&|r| Some(r.auroc));
    let sens = collect(&|r| r.metrics.sensitivity);
    let spec = collect(&|r| r.metrics.specificity);
    let prec = collect(&|r| r.metrics.precision);
    let f1 = collect(&|r| r.metrics.f1);
    let row = SummaryRow {
        family,
        n_evaluated: results.len(),
        n_degenerate: n_iter - results.len(),
        sensitivity: sens.map(|q| q.median),
        specificity: spec.map(|q| q.median),
        precision: prec.map(|q| q.median),
        f1: f1.map(|q| q.median),
        auroc_median: auc.map(|q| q.median),
        auroc_p25: auc.map(|q| q.p25),
        auroc_p75: auc.map(|q| q.p75),
        sensitivity_iqr: sens,
        specificity_iqr: spec,
        precision_iqr: prec,
        f1_iqr: f1,
    };
    let fpr: Vec<f64> = (0..ROC_GRID_POINTS)
        .map(|g| g as f64 / (ROC_GRID_POINTS - 1) as f64)
        .collect();
    let mut env = RocEnvelope {
        family,
        fpr,
        tpr_median: Vec::new(),
        tpr_p25: Vec::new(),
        tpr_p75: Vec::new(),
    };
    if !results.is_empty() {
        for g in 0..ROC_GRID_POINTS {
            let q = Quartiles::of(&results.iter().map(|r| r.roc_tpr[g]).collect::<Vec<_>>())
                .expect("non-empty");
            env.tpr_median.push(q.median);
            env.tpr_p25.push(q.p25);
            env.tpr_p75.push(q.p75);
        }
    }
    (row, env)
}

fn selection_frequency(
    matrix: &FeatureMatrix,
    iterations: &[IterationResult],
    families: &[Family],
) -> Vec<SelectionCount> {
    let n = iterations.len() as f64;
    let mut out = Vec::new();
    for &family in families {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for f in iterations
            .iter()
            .flat_map(|it| &it.families)
            .filter(|f| f.family == family)
        {
            for name in &f.selected {
                *counts.entry(name).or_default() += 1;
            }
        }
        let mut rows: Vec<SelectionCount> = counts
            .into_iter()
            .map(|(feature, count)| SelectionCount {
                family,
                feature: feature.to_string(),
                count,
                fraction: count as f64 / n,
            })
            .collect();
        let pos = |name: &str| matrix.catalog.index_of(name).unwrap_or(usize::MAX);
        rows.sort_by(|a, b| {
            b.count
                .cmp(&a.count)
                .then_with(|| pos(&a.feature).cmp(&pos(&b.feature)))
        });
        out.extend(rows);
    }
    out
}

/// Per-class normalized histograms over the pooled range of each feature.
/// A constant feature puts all of its mass in the first bin.
pub fn export_distributions(matrix: &FeatureMatrix, names: &[String]) -> Vec<FeatureDistribution> {
    names
        .iter()
        .filter_map(|name| {
            let col = matrix.column(name)?;
            let vals: Vec<(f64, bool)> = col
                .iter()
                .zip(&matrix.rows)
                .filter_map(|(v, r)| v.map(|v| (v, r.label.is_positive())))
                .collect();
            let lo = vals.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
            let hi = vals.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
            let (lo, width) = if vals.is_empty() {
                (0.0, 1.0 / HISTOGRAM_BINS as f64)
            } else if hi > lo {
                (lo, (hi - lo) / HISTOGRAM_BINS as f64)
            } else {
                (lo, 1.0 / HISTOGRAM_BINS as f64)
            };
            let mut c0 = vec![0.0; HISTOGRAM_BINS];
            let mut c1 = vec![0.0; HISTOGRAM_BINS];
            let (mut n0, mut n1) = (0usize, 0usize);
            for &(v, pos) in &vals {
                let bin = (((v - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
                if pos {
                    c1[bin] += 1.0;
                    n1 += 1;
                } else {
                    c0[bin] += 1.0;
                    n0 += 1;
                }
            }
            for (h, n) in [(&mut c0, n0), (&mut c1, n1)] {
                if n > 0 {
                    h.iter_mut().for_each(|v| *v /= n as f64);
                }
            }
            Some(FeatureDistribution {
                feature: name.clone(),
                bin_edges: (0..=HISTOGRAM_BINS)
                    .map(|i| lo + width * i as f64)
                    .collect(),
                c0,
                c1,
                n_c0: n0,
                n_c1: n1,
            })
        })
        .collect()
}

/// Runs the repeated split protocol over the configured families.
pub fn run_experiment(matrix: &FeatureMatrix, config: &RunConfig) -> Result<EvalReport> {
    config.validate()?;
    let seed = config
        .seed
        .ok_or_else(|| Error::Config("evaluation requires a seed".into()))?;
    let patients = matrix.patients();
    let plan = plan_splits(&patients, config.train_fraction, config.n_iter, seed)?;
    for &family in &config.families {
        if matrix.catalog.count(family) == 0 {
            return Err(Error::Config(format!(
                "feature matrix has no {family} columns"
            )));
        }
    }
    let pid: HashMap<&str, usize> = patients
        .iter()
        .enumerate()
        .map(|(i, (id, _))| (id.as_str(), i))
        .collect();
    let patient_of_row: Vec<usize> = matrix
        .rows
        .iter()
        .map(|r| pid[r.patient_id.as_str()])
        .collect();
    let data: Vec<FamilyData> = config
        .families
        .iter()
        .map(|&f| FamilyData::new(matrix, f))
        .collect();

    let iterations: Vec<IterationResult> = plan
        .iterations
        .par_iter()
        .enumerate()
        .map(|(iteration, split)| {
            let mut in_train = vec![false; patients.len()];
            for id in &split.train {
                in_train[pid[id.as_str()]] = true;
            }
            let mut result = IterationResult {
                iteration,
                families: Vec::new(),
                untrainable: Vec::new(),
            };
            for (&family, d) in config.families.iter().zip(&data) {
                match run_family(matrix, d, family, &patient_of_row, &in_train, config) {
                    Some(f) => result.families.push(f),
                    None => result.untrainable.push(family),
                }
            }
            result
        })
        .collect();

    let mut levels = Vec::new();
    for level in [Level::Window, Level::Patient] {
        if !config.metric_level.includes(level) {
            continue;
        }
        let (summary, roc) = config
            .families
            .iter()
            .map(|&f| summarize(&iterations, f, level, config.n_iter))
            .unzip();
        levels.push(LevelReport {
            level,
            summary,
            roc,
        });
    }
    if levels
        .iter()
        .all(|l| l.summary.iter().all(|r| r.n_evaluated == 0))
    {
        return Err(Error::Degenerate(
            "no iteration produced an evaluable test set".into(),
        ));
    }

    let selection = selection_frequency(matrix, &iterations, &config.families);
    let dist_family = if config.families.contains(&Family::All) {
        Family::All
    } else {
        config.families[0]
    };
    let top: Vec<String> = selection
        .iter()
        .filter(|s| s.family == dist_family)
        .take(TOP_DISTRIBUTION_FEATURES)
        .map(|s| s.feature.clone())
        .collect();
    let c1 = patients.iter().filter(|p| p.1.is_positive()).count();
    Ok(EvalReport {
        catalog_version: CATALOG_VERSION.to_string(),
        seed,
        n_iter: config.n_iter,
        train_fraction: config.train_fraction,
        lambda: config.lambda,
        rfe_k: config.rfe_k,
        cohort: CohortCounts {
            c1_patients: c1,
            c0_patients: patients.len() - c1,
            windows: matrix.n_rows(),
        },
        levels,
        selection_frequency: selection,
        distributions: export_distributions(matrix, &top),
        screening: None,
        iterations,
    })
}

/// `median (p25–p75)` with two decimals.
pub fn format_auroc(median: f64, p25: f64, p75: f64) -> String {
    format!("{median:.2} ({p25:.2}\u{2013}{p75:.2})")
}

/// Human-readable summary table, one block per level.
pub fn format_summary_table(report: &EvalReport) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"));
    let mut s = String::new();
    for level in &report.levels {
        s.push_str(&format!(
            "[{}]\n{:<6} {:>11} {:>11} {:>9} {:>6}  {}\n",
            level.level.as_str(),
            "family",
            "sensitivity",
            "specificity",
            "precision",
            "f1",
            "auroc"
        ));
        for r in &level.summary {
            let auc = match (r.auroc_median, r.auroc_p25, r.auroc_p75) {
                (Some(m), Some(a), Some(b)) => format_auroc(m, a, b),
                _ => "-".into(),
            };
            s.push_str(&format!(
                "{:<6} {:>11} {:>11} {:>9} {:>6}  {}\n",
                r.family.as_str(),
                opt(r.sensitivity),
                opt(r.specificity),
                opt(r.precision),
                opt(r.f1),
                auc
            ));
        }
    }
    s
}
