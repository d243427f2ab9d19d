use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::io::{BinaryLabel, Recording};

use super::catalog::{Family, FeatureCatalog};
use super::FeatureValues;

/// Window-level features before META columns are joined in.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowFeatures {
    pub patient_id: String,
    pub window_index: usize,
    pub mor: FeatureValues,
    pub brv: FeatureValues,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub patient_id: String,
    pub window_index: usize,
    pub label: BinaryLabel,
    /// Aligned to the matrix catalog; `None` is a missing value.
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub catalog: FeatureCatalog,
    pub rows: Vec<FeatureRow>,
}

impl FeatureMatrix {
    pub fn new(catalog: FeatureCatalog, rows: Vec<FeatureRow>) -> Result<Self, String> {
        let mut labels: HashMap<&str, BinaryLabel> = HashMap::new();
        for row in &rows {
            if row.values.len() != catalog.len() {
                return Err(format!(
                    "row {}/{} has {} values, expected {}",
                    row.patient_id,
                    row.window_index,
                    row.values.len(),
                    catalog.len()
                ));
            }
            let prev = *labels.entry(&row.patient_id).or_insert(row.label);
            if prev != row.label {
                return Err(format!(
                    "patient {} has inconsistent labels",
                    row.patient_id
                ));
            }
        }
        Ok(FeatureMatrix { catalog, rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.catalog.len()
    }

    /// `true` where a value is missing.
    pub fn missing_mask(&self) -> Vec<Vec<bool>> {
        self.rows
            .iter()
            .map(|r| r.values.iter().map(Option::is_none).collect())
            .collect()
    }

    /// Column sub-matrix for one family, columns in catalog order.
    pub fn select(&self, family: Family) -> FeatureMatrix {
        let cols = self.catalog.columns(family);
        FeatureMatrix {
            catalog: FeatureCatalog {
                version: self.catalog.version.clone(),
                features: cols
                    .iter()
                    .map(|&c| self.catalog.features[c].clone())
                    .collect(),
            },
            rows: self
                .rows
                .iter()
                .map(|r| FeatureRow {
                    values: cols.iter().map(|&c| r.values[c]).collect(),
                    ..r.clone()
                })
                .collect(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let c = self.catalog.index_of(name)?;
        Some(self.rows.iter().map(|r| r.values[c]).collect())
    }

    /// Distinct patients and their labels, sorted by id.
    pub fn patients(&self) -> Vec<(String, BinaryLabel)> {
        let map: BTreeMap<&str, BinaryLabel> = self
            .rows
            .iter()
            .map(|r| (r.patient_id.as_str(), r.label))
            .collect();
        map.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

/// Joins window features with per-patient META values into a matrix in
/// catalog order, sorted by (patient_id, window_index).
pub fn assemble_matrix(
    windows: &[WindowFeatures],
    recordings: &[Recording],
    catalog: &FeatureCatalog,
) -> Result<FeatureMatrix> {
    let by_id: HashMap<&str, &Recording> = recordings
        .iter()
        .map(|r| (r.patient_id.as_str(), r))
        .collect();
    let mut rows = Vec::with_capacity(windows.len());
    for w in windows {
        let rec = by_id.get(w.patient_id.as_str()).ok_or_else(|| {
            Error::Data(format!(
                "window {} references unknown patient {:?}",
                w.window_index, w.patient_id
            ))
        })?;
        let values = catalog
            .features
            .iter()
            .map(|d| match d.family {
                Family::Mor => w.mor.get(&d.name),
                Family::Brv => w.brv.get(&d.name),
                Family::Meta => match d.name.as_str() {
                    "Age" => rec.age,
                    "Sex" => rec.sex.encode(),
                    _ => None,
                },
                Family::All => None,
            })
            .collect();
        rows.push(FeatureRow {
            patient_id: w.patient_id.clone(),
            window_index: w.window_index,
            label: rec.binary_label(),
            values,
        });
    }
    rows.sort_by(|a, b| (&a.patient_id, a.window_index).cmp(&(&b.patient_id, b.window_index)));
    FeatureMatrix::new(catalog.clone(), rows).map_err(Error::Data)
}
