use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::fiducials::{self, BeatSpan};

use super::window::Window;

fn default_sqi_threshold() -> f64 {
    0.8
}
fn default_am_threshold() -> f64 {
    3.0
}
fn default_min_beats() -> usize {
    12
}
fn default_template_len() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqiConfig {
    #[serde(default = "default_sqi_threshold")]
    pub sqi_threshold: f64,
    #[serde(default = "default_am_threshold")]
    pub am_threshold: f64,
    #[serde(default = "default_min_beats")]
    pub min_beats: usize,
    #[serde(default = "default_template_len")]
    pub template_len: usize,
}

impl Default for SqiConfig {
    fn default() -> Self {
        SqiConfig {
            sqi_threshold: default_sqi_threshold(),
            am_threshold: default_am_threshold(),
            min_beats: default_min_beats(),
            template_len: default_template_len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Flatline,
    TooFewBeats,
    AmplitudeModulation,
    LowSqi,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Flatline => "flatline",
            RejectReason::TooFewBeats => "too_few_beats",
            RejectReason::AmplitudeModulation => "amplitude_modulation",
            RejectReason::LowSqi => "low_sqi",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Kept,
    Rejected(RejectReason),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqiResult {
    /// Mean correlation between each resampled beat and the window's mean beat.
    pub score: Option<f64>,
    /// Largest over smallest onset-to-peak amplitude; `None` when a beat has non-positive amplitude.
    pub amplitude_modulation_ratio: Option<f64>,
    pub n_beats: usize,
    pub verdict: Verdict,
}

fn resample_linear(x: &[f64], len: usize) -> Vec<f64> {
    if len == 1 || x.len() == 1 {
        return vec![x[0]; len];
    }
    let step = (x.len() - 1) as f64 / (len - 1) as f64;
    (0..len)
        .map(|i| {
            let pos = i as f64 * step;
            let lo = (pos.floor() as usize).min(x.len() - 2);
            let frac = pos - lo as f64;
            x[lo] + (x[lo + 1] - x[lo]) * frac
        })
        .collect()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Scores a window from already-detected beats.
pub fn sqi_from_beats(samples: &[f64], beats: &[BeatSpan], cfg: &SqiConfig) -> SqiResult {
    let reject = |reason, score, amr, n| SqiResult {
        score,
        amplitude_modulation_ratio: amr,
        n_beats: n,
        verdict: Verdict::Rejected(reason),
    };
    if fiducials::is_flat(samples) {
        return reject(RejectReason::Flatline, None, None, 0);
    }
    let n = beats.len();
    if n < cfg.min_beats.max(1) {
        return reject(RejectReason::TooFewBeats, None, None, n);
    }

    let amps: Vec<f64> = beats
        .iter()
        .map(|b| samples[b.systolic_peak] - samples[b.onset])
        .collect();
    let min_amp = amps.iter().copied().fold(f64::INFINITY, f64::min);
    let max_amp = amps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let amr = (min_amp > 0.0).then(|| max_amp / min_amp);

    let len = cfg.template_len.max(2);
    let resampled: Vec<Vec<f64>> = beats
        .iter()
        .map(|b| resample_linear(&samples[b.onset..=b.next_onset], len))
        .collect();
    let mut template = vec![0.0; len];
    for beat in &resampled {
        for (t, v) in template.iter_mut().zip(beat) {
            *t += v;
        }
    }
    for t in &mut template {
        *t /= n as f64;
    }
    let score = resampled.iter().map(|b| pearson(b, &template)).sum::<f64>() / n as f64;

    let verdict = match amr {
        None => Verdict::Rejected(RejectReason::AmplitudeModulation),
        Some(r) if r > cfg.am_threshold => Verdict::Rejected(RejectReason::AmplitudeModulation),
        _ if score < cfg.sqi_threshold => Verdict::Rejected(RejectReason::LowSqi),
        _ => Verdict::Kept,
    };
    SqiResult {
        score: Some(score),
        amplitude_modulation_ratio: amr,
        n_beats: n,
        verdict,
    }
}

pub fn compute_sqi(window: &Window, cfg: &SqiConfig) -> SqiResult {
    let beats = fiducials::detect_beats(&window.samples, window.fs);
    sqi_from_beats(&window.samples, &beats, cfg)
}

/// Window counts from a screening pass.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScreeningSummary {
    pub total: usize,
    pub kept: usize,
    pub excluded: usize,
    pub by_reason: BTreeMap<String, usize>,
}

/// Partitions windows into kept and excluded, scoring any window that has no SQI yet.
pub fn screen_windows(
    windows: Vec<Window>,
    cfg: &SqiConfig,
) -> (Vec<Window>, Vec<Window>, ScreeningSummary) {
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    let mut summary = ScreeningSummary::default();
    for mut w in windows {
        if w.sqi.is_none() {
            w.sqi = Some(compute_sqi(&w, cfg));
        }
        summary.total += 1;
        match w.sqi.as_ref().map(|s| s.verdict) {
            Some(Verdict::Rejected(reason)) => {
                *summary.by_reason.entry(reason.to_string()).or_default() += 1;
                excluded.push(w);
            }
            _ => kept.push(w),
        }
    }
    summary.kept = kept.len();
    summary.excluded = excluded.len();
    (kept, excluded, summary)
}
