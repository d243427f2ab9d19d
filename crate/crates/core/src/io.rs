//! On-disk data model: cohort manifests, per-recording sample files,
//! feature-matrix CSV, and JSON reports/models.
//!
//! A manifest is a TOML file holding one `[[entry]]` table per recording:
//!
//! ```toml
//! [[entry]]
//! patient_id = "P001"
//! sample_file = "samples/P001.txt"   # relative to the manifest's directory
//! fs = 1000.0
//! label = "LVO"                      # LVO | NL | SM
//! age = 71.5                         # optional
//! sex = "male"                       # male | female | unknown (optional)
//! ```
//!
//! Sample files carry one decimal amplitude per line.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::features::{FeatureCatalog, FeatureMatrix, FeatureRow};

/// Clinical class of a recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Class {
    #[serde(rename = "LVO")]
    Lvo,
    #[serde(rename = "NL")]
    Nl,
    #[serde(rename = "SM")]
    Sm,
}

impl Class {
    pub fn as_str(self) -> &'static str {
        match self {
            Class::Lvo => "LVO",
            Class::Nl => "NL",
            Class::Sm => "SM",
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Class {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "LVO" => Ok(Class::Lvo),
            "NL" => Ok(Class::Nl),
            "SM" => Ok(Class::Sm),
            other => Err(format!("unknown label {other:?} (expected LVO, NL or SM)")),
        }
    }
}

/// Two-class target: LVO is the positive class, NL and SM the negative class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinaryLabel {
    C0,
    C1,
}

impl BinaryLabel {
    pub fn is_positive(self) -> bool {
        self == BinaryLabel::C1
    }

    pub fn as_u8(self) -> u8 {
        match self {
            BinaryLabel::C0 => 0,
            BinaryLabel::C1 => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(BinaryLabel::C0),
            1 => Some(BinaryLabel::C1),
            _ => None,
        }
    }
}

impl fmt::Display for BinaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BinaryLabel::C0 => "C0",
            BinaryLabel::C1 => "C1",
        })
    }
}

pub fn binarize_label(label: Class) -> BinaryLabel {
    match label {
        Class::Lvo => BinaryLabel::C1,
        Class::Nl | Class::Sm => BinaryLabel::C0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
    #[default]
    Unknown,
}

impl Sex {
    /// Numeric encoding used as a feature: male 1, female 0, unknown missing.
    pub fn encode(self) -> Option<f64> {
        match self {
            Sex::Male => Some(1.0),
            Sex::Female => Some(0.0),
            Sex::Unknown => None,
        }
    }
}

impl FromStr for Sex {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "male" => Ok(Sex::Male),
            "female" => Ok(Sex::Female),
            "unknown" => Ok(Sex::Unknown),
            other => Err(format!(
                "unknown sex {other:?} (expected male, female or unknown)"
            )),
        }
    }
}

/// One patient's raw fingertip PPG plus labels and demographics.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub patient_id: String,
    pub fs: f64,
    pub samples: Vec<f64>,
    pub label: Class,
    pub age: Option<f64>,
    pub sex: Sex,
}

impl Recording {
    pub fn binary_label(&self) -> BinaryLabel {
        binarize_label(self.label)
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub patient_id: String,
    pub sample_file: PathBuf,
    pub fs: f64,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sex: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CohortManifest {
    #[serde(default)]
    pub entry: Vec<ManifestEntry>,
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes a text file, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Parses a sample file: one finite decimal per line, blank lines ignored.
pub fn parse_samples(text: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| format!("line {}: cannot parse {line:?} as a number", lineno + 1))?;
        if !v.is_finite() {
            return Err(format!("line {}: non-finite sample {line:?}", lineno + 1));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn format_samples(samples: &[f64]) -> String {
    let mut s = String::with_capacity(samples.len() * 12);
    for v in samples {
        // Display for f64 prints the shortest string that parses back to the same value.
        s.push_str(&v.to_string());
        s.push('\n');
    }
    s
}

pub fn write_samples(path: &Path, samples: &[f64]) -> Result<()> {
    write_bytes(path, format_samples(samples).as_bytes())
}

pub fn parse_manifest(text: &str) -> Result<CohortManifest> {
    #[derive(Deserialize)]
    struct Raw {
        #[serde(default)]
        entry: Vec<toml::Table>,
    }
    let raw: Raw =
        toml::from_str(text).map_err(|e| Error::Data(format!("malformed manifest: {e}")))?;
    let mut entries = Vec::with_capacity(raw.entry.len());
    for (index, table) in raw.entry.into_iter().enumerate() {
        let entry: ManifestEntry = table
            .try_into()
            .map_err(|e| Error::entry(index, format!("malformed entry: {e}")))?;
        entries.push(entry);
    }
    Ok(CohortManifest { entry: entries })
}

fn validate_entry(index: usize, entry: &ManifestEntry) -> Result<(Class, Sex)> {
    let label: Class = entry.label.parse().map_err(|m| Error::entry(index, m))?;
    let sex = match &entry.sex {
        None => Sex::Unknown,
        Some(s) => s.parse().map_err(|m| Error::entry(index, m))?,
    };
    if !(entry.fs.is_finite() && entry.fs > 0.0) {
        return Err(Error::entry(
            index,
            format!("fs must be positive, got {}", entry.fs),
        ));
    }
    if let Some(age) = entry.age {
        if !(age.is_finite() && age > 0.0) {
            return Err(Error::entry(
                index,
                format!("age must be positive, got {age}"),
            ));
        }
    }
    Ok((label, sex))
}

/// Loads every recording named by the manifest, in manifest order.
pub fn load_cohort(manifest_path: &Path) -> Result<Vec<Recording>> {
    let manifest = parse_manifest(&read_to_string(manifest_path)?)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new(""));
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(manifest.entry.len());
    for (index, entry) in manifest.entry.iter().enumerate() {
        let (label, sex) = validate_entry(index, entry)?;
        if !seen.insert(entry.patient_id.clone()) {
            return Err(Error::entry(
                index,
                format!("duplicate patient_id {:?}", entry.patient_id),
            ));
        }
        let path = base.join(&entry.sample_file);
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::entry(index, format!("{}: {e}", path.display())))?;
        let samples = parse_samples(&text)
            .map_err(|m| Error::entry(index, format!("{}: {m}", path.display())))?;
        if samples.is_empty() {
            return Err(Error::entry(
                index,
                format!("{}: no samples", path.display()),
            ));
        }
        out.push(Recording {
            patient_id: entry.patient_id.clone(),
            fs: entry.fs,
            samples,
            label,
            age: entry.age,
            sex,
        });
    }
    Ok(out)
}

/// Writes `manifest.toml` plus one sample file per recording under `dir/samples/`.
/// Returns the manifest path.
pub fn write_cohort(dir: &Path, recordings: &[Recording]) -> Result<PathBuf> {
    let mut manifest = CohortManifest::default();
    for rec in recordings {
        let rel = PathBuf::from("samples").join(format!("{}.txt", rec.patient_id));
        write_samples(&dir.join(&rel), &rec.samples)?;
        manifest.entry.push(ManifestEntry {
            patient_id: rec.patient_id.clone(),
            sample_file: rel,
            fs: rec.fs,
            label: rec.label.as_str().to_string(),
            age: rec.age,
            sex: match rec.sex {
                Sex::Unknown => None,
                Sex::Male => Some("male".into()),
                Sex::Female => Some("female".into()),
            },
        });
    }
    let text = toml::to_string(&manifest)
        .map_err(|e| Error::Data(format!("cannot serialize manifest: {e}")))?;
    let path = dir.join("manifest.toml");
    write_bytes(&path, text.as_bytes())?;
    Ok(path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Data(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

pub fn write_report(report: &EvalReport, path: &Path) -> Result<()> {
    write_json(path, report)
}

pub fn read_report(path: &Path) -> Result<EvalReport> {
    read_json(path)
}

/// Table-2 style summary as CSV: `family,sensitivity,specificity,precision,f1,auroc_median,auroc_p25,auroc_p75`.
pub fn format_summary_csv(report: &EvalReport) -> String {
    let mut s = String::from(
        "level,family,sensitivity,specificity,precision,f1,auroc_median,auroc_p25,auroc_p75\n",
    );
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for level in &report.levels {
        for row in &level.summary {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                level.level.as_str(),
                row.family,
                opt(row.sensitivity),
                opt(row.specificity),
                opt(row.precision),
                opt(row.f1),
                opt(row.auroc_median),
                opt(row.auroc_p25),
                opt(row.auroc_p75),
            ));
        }
    }
    s
}

/// ROC envelopes as long-form CSV: `level,family,fpr,tpr_median,tpr_p25,tpr_p75`.
pub fn format_roc_csv(report: &EvalReport) -> String {
    let mut s = String::from("level,family,fpr,tpr_median,tpr_p25,tpr_p75\n");
    for level in &report.levels {
        for env in &level.roc {
            for (i, f) in env.fpr.iter().enumerate() {
                if let (Some(m), Some(a), Some(b)) = (
                    env.tpr_median.get(i),
                    env.tpr_p25.get(i),
                    env.tpr_p75.get(i),
                ) {
                    s.push_str(&format!(
                        "{},{},{f},{m},{a},{b}\n",
                        level.level.as_str(),
                        env.family
                    ));
                }
            }
        }
    }
    s
}

pub fn format_selection_csv(report: &EvalReport) -> String {
    let mut s = String::from("family,feature,count,fraction\n");
    for row in &report.selection_frequency {
        s.push_str(&format!(
            "{},{},{},{}\n",
            row.family, row.feature, row.count, row.fraction
        ));
    }
    s
}

const MATRIX_KEY_COLUMNS: [&str; 3] = ["patient_id", "window_index", "label"];

/// Writes the feature matrix as CSV; missing values are empty fields.
pub fn write_matrix(matrix: &FeatureMatrix, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    let header: Vec<&str> = MATRIX_KEY_COLUMNS
        .iter()
        .copied()
        .chain(matrix.catalog.names())
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for row in &matrix.rows {
        let mut rec = vec![
            row.patient_id.clone(),
            row.window_index.to_string(),
            row.label.as_u8().to_string(),
        ];
        rec.extend(
            row.values
                .iter()
                .map(|v| v.map(|x| x.to_string()).unwrap_or_default()),
        );
        w.write_record(&rec).map_err(csv_err)?;
    }
    let mut inner = w
        .into_inner()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    inner.flush().map_err(|e| Error::io(path, e))
}

/// Reads a feature-matrix CSV. Column names must exist in the built-in catalog.
pub fn read_matrix(path: &Path) -> Result<FeatureMatrix> {
    let data_err = |m: String| Error::Data(format!("{}: {m}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| data_err(e.to_string()))?;
    let header = r.headers().map_err(|e| data_err(e.to_string()))?.clone();
    if header.len() < MATRIX_KEY_COLUMNS.len()
        || header.iter().take(3).ne(MATRIX_KEY_COLUMNS.iter().copied())
    {
        return Err(data_err(format!(
            "header must start with {}",
            MATRIX_KEY_COLUMNS.join(",")
        )));
    }
    let names: Vec<String> = header.iter().skip(3).map(str::to_string).collect();
    let catalog = FeatureCatalog::standard()
        .subset_by_names(&names)
        .map_err(data_err)?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| data_err(e.to_string()))?;
        let line = i + 2;
        let window_index = rec[1]
            .parse()
            .map_err(|_| data_err(format!("line {line}: bad window_index {:?}", &rec[1])))?;
        let label = rec[2]
            .parse::<u8>()
            .ok()
            .and_then(BinaryLabel::from_u8)
            .ok_or_else(|| data_err(format!("line {line}: bad label {:?}", &rec[2])))?;
        let mut values = Vec::with_capacity(names.len());
        for field in rec.iter().skip(3) {
            if field.is_empty() {
                values.push(None);
            } else {
                let v: f64 = field
                    .parse()
                    .map_err(|_| data_err(format!("line {line}: bad value {field:?}")))?;
                values.push(v.is_finite().then_some(v));
            }
        }
        rows.push(FeatureRow {
            patient_id: rec[0].to_string(),
            window_index,
            label,
            values,
        });
    }
    FeatureMatrix::new(catalog, rows).map_err(data_err)
}
