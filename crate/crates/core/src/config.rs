//! Run configuration shared by extraction and evaluation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Family;
use crate::preprocess::SqiConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricLevel {
    Window,
    Patient,
    Both,
}

impl MetricLevel {
    pub fn includes(self, level: Level) -> bool {
        matches!(
            (self, level),
            (MetricLevel::Both, _)
                | (MetricLevel::Window, Level::Window)
                | (MetricLevel::Patient, Level::Patient)
        )
    }
}

impl std::str::FromStr for MetricLevel {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "window" => Ok(MetricLevel::Window),
            "patient" => Ok(MetricLevel::Patient),
            "both" => Ok(MetricLevel::Both),
            _ => Err(format!(
                "unknown metric level {s:?} (expected window, patient or both)"
            )),
        }
    }
}

/// A single scoring level in a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Window,
    Patient,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Window => "window",
            Level::Patient => "patient",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub filter_order: usize,
    pub window_s: f64,
    pub sqi_threshold: f64,
    pub am_threshold: f64,
    pub min_beats: usize,
    /// Moving-average span applied before each derivative.
    pub smoothing_ms: f64,
    pub n_iter: usize,
    pub train_fraction: f64,
    pub rfe_k: usize,
    pub lambda: f64,
    pub seed: Option<u64>,
    pub families: Vec<Family>,
    pub metric_level: MetricLevel,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            band_low_hz: 0.5,
            band_high_hz: 12.0,
            filter_order: 4,
            window_s: 30.0,
            sqi_threshold: 0.8,
            am_threshold: 3.0,
            min_beats: 12,
            smoothing_ms: 10.0,
            n_iter: 100,
            train_fraction: 2.0 / 3.0,
            rfe_k: 10,
            lambda: 1.0,
            seed: None,
            families: Family::EVALUATED.to_vec(),
            metric_level: MetricLevel::Both,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn sqi(&self) -> SqiConfig {
        SqiConfig {
            sqi_threshold: self.sqi_threshold,
            am_threshold: self.am_threshold,
            min_beats: self.min_beats,
            ..SqiConfig::default()
        }
    }

    pub fn smoothing_s(&self) -> f64 {
        self.smoothing_ms / 1000.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.window_s > 0.0 && self.window_s.is_finite()) {
            return bad(format!("window_s must be positive, got {}", self.window_s));
        }
        if !(self.band_low_hz > 0.0 && self.band_low_hz < self.band_high_hz) {
            return bad(format!(
                "invalid band [{}, {}] Hz",
                self.band_low_hz, self.band_high_hz
            ));
        }
        if self.filter_order == 0 {
            return bad("filter_order must be positive".into());
        }
        if !(self.smoothing_ms >= 0.0 && self.smoothing_ms.is_finite()) {
            return bad(format!(
                "smoothing_ms must be non-negative, got {}",
                self.smoothing_ms
            ));
        }
        if self.n_iter == 0 {
            return bad("n_iter must be at least 1".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            ));
        }
        if self.rfe_k == 0 {
            return bad("rfe_k must be at least 1".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if self.families.is_empty() {
            return bad("families must not be empty".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn keys_parse() {
        let cfg = RunConfig::from_toml_str(
            "n_iter = 5\nseed = 7\nfamilies = [\"MOR\", \"ALL\"]\nmetric_level = \"patient\"\nlambda = 0.1\n",
        )
        .unwrap();
        assert_eq!(cfg.n_iter, 5);
        assert_eq!(cfg.seed, Some(7));
        assert_eq!(cfg.families, vec![Family::Mor, Family::All]);
        assert_eq!(cfg.metric_level, MetricLevel::Patient);
        assert_eq!(cfg.lambda, 0.1);
    }

    #[test]
    fn bad_values_are_config_errors() {
        for text in [
            "n_iter = 0",
            "train_fraction = 1.5",
            "bogus = 1",
            "families = []",
            "lambda = -1.0",
        ] {
            assert!(
                matches!(RunConfig::from_toml_str(text), Err(Error::Config(_))),
                "{text}"
            );
        }
    }
}
