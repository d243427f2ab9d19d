//! Morphology (MOR), beat-rate-variability (BRV) and demographic (META)
//! features, and assembly of the labelled feature matrix.

mod brv;
mod catalog;
mod matrix;
mod mor;

pub use brv::brv_features;
pub use catalog::{
    Family, FeatureCatalog, FeatureDescriptor, FeatureKind, CATALOG_VERSION, WIDTH_LEVELS,
};
pub use matrix::{assemble_matrix, FeatureMatrix, FeatureRow, WindowFeatures};
pub use mor::{aggregate_window_mor, mor_features_per_beat};

use crate::error::Result;
use crate::fiducials::{self, BeatSpan, FiducialSet};

/// Named feature values in a fixed order; `None` marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureValues {
    names: &'static [String],
    pub values: Vec<Option<f64>>,
}

impl FeatureValues {
    pub fn missing(names: &'static [String]) -> Self {
        FeatureValues {
            names,
            values: vec![None; names.len()],
        }
    }

    pub fn names(&self) -> &'static [String] {
        self.names
    }

    fn index(&self, name: &str) -> usize {
        self.names
            .iter()
            .position(|n| n == name)
            .unwrap_or_else(|| panic!("feature {name:?} is not in this family"))
    }

    pub fn set(&mut self, name: &str, value: Option<f64>) {
        let i = self.index(name);
        self.values[i] = value.filter(|v| v.is_finite());
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values[self.index(name)]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Option<f64>)> {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.values.iter().copied())
    }
}

/// Features and landmarks extracted from one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowExtraction {
    pub mor: FeatureValues,
    pub brv: FeatureValues,
    pub fiducials: Vec<FiducialSet>,
}

/// Runs fiducial location on every beat, then aggregates MOR and computes BRV.
pub fn extract_window_features(
    samples: &[f64],
    fs: f64,
    beats: &[BeatSpan],
    smoothing_s: f64,
) -> Result<WindowExtraction> {
    let der = fiducials::smooth_derivatives(samples, fs, smoothing_s)?;
    let fiducials: Vec<FiducialSet> = beats
        .iter()
        .map(|b| fiducials::locate_fiducials(b, samples, &der))
        .collect();
    let per_beat: Vec<FeatureValues> = fiducials
        .iter()
        .map(|f| mor_features_per_beat(f, samples, &der, fs))
        .collect();
    let intervals: Vec<f64> = beats.iter().map(|b| b.len() as f64 / fs).collect();
    Ok(WindowExtraction {
        mor: aggregate_window_mor(&per_beat),
        brv: brv_features(&intervals),
        fiducials,
    })
}
