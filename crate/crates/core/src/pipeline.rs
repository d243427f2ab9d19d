//! Recording-to-matrix extraction: filter, window, screen, detect fiducials
//! and compute features.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::features::{
    assemble_matrix, extract_window_features, FeatureCatalog, FeatureMatrix, WindowFeatures,
};
use crate::fiducials::{detect_beats, FiducialRecord};
use crate::io::Recording;
use crate::preprocess::{
    design_bandpass, screen_windows, segment_windows, sqi_from_beats, ScreeningSummary, Verdict,
};

/// Screening outcome for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowLog {
    pub patient_id: String,
    pub window_index: usize,
    pub start_s: f64,
    /// `kept` or the rejection reason.
    pub verdict: String,
    pub sqi: Option<f64>,
    pub amplitude_modulation_ratio: Option<f64>,
    pub n_beats: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedRecording {
    pub patient_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningLog {
    pub summary: ScreeningSummary,
    pub skipped_recordings: Vec<SkippedRecording>,
    pub windows: Vec<WindowLog>,
}

#[derive(Debug, Clone)]
pub struct Extraction {
    pub matrix: FeatureMatrix,
    pub screening: ScreeningLog,
    pub fiducials: Vec<FiducialRecord>,
}

struct RecordingOutput {
    features: Vec<WindowFeatures>,
    summary: ScreeningSummary,
    windows: Vec<WindowLog>,
    fiducials: Vec<FiducialRecord>,
    skipped: Option<String>,
}

fn process_recording(
    rec: &Recording,
    config: &RunConfig,
    keep_fiducials: bool,
) -> Result<RecordingOutput> {
    let design = design_bandpass(
        rec.fs,
        config.band_low_hz,
        config.band_high_hz,
        config.filter_order,
    )
    .map_err(|e| Error::Data(format!("patient {}: {e}", rec.patient_id)))?;
    let mut out = RecordingOutput {
        features: Vec::new(),
        summary: ScreeningSummary::default(),
        windows: Vec::new(),
        fiducials: Vec::new(),
        skipped: None,
    };
    let filtered = match crate::preprocess::zero_phase_filter(&rec.samples, &design) {
        Ok(y) => y,
        Err(e) => {
            log::warn!("patient {}: skipped, {e}", rec.patient_id);
            out.skipped = Some(e.to_string());
            return Ok(out);
        }
    };
    let filtered_rec = Recording {
        samples: filtered,
        ..rec.clone()
    };
    let sqi_cfg = config.sqi();
    let mut windows = segment_windows(&filtered_rec, config.window_s);
    let mut beats = HashMap::new();
    for w in &mut windows {
        let b = detect_beats(&w.samples, w.fs);
        let sqi = sqi_from_beats(&w.samples, &b, &sqi_cfg);
        out.windows.push(WindowLog {
            patient_id: w.patient_id.clone(),
            window_index: w.index,
            start_s: w.start as f64 / w.fs,
            verdict: match sqi.verdict {
                Verdict::Kept => "kept".to_string(),
                Verdict::Rejected(r) => r.to_string(),
            },
            sqi: sqi.score,
            amplitude_modulation_ratio: sqi.amplitude_modulation_ratio,
            n_beats: sqi.n_beats,
        });
        w.sqi = Some(sqi);
        beats.insert(w.index, b);
    }
    let (kept, _, summary) = screen_windows(windows, &sqi_cfg);
    out.summary = summary;
    for w in &kept {
        let spans = &beats[&w.index];
        let ex = extract_window_features(&w.samples, w.fs, spans, config.smoothing_s()).map_err(
            |e| Error::Data(format!("patient {} window {}: {e}", w.patient_id, w.index)),
        )?;
        if keep_fiducials {
            out.fiducials.extend(
                ex.fiducials
                    .iter()
                    .enumerate()
                    .map(|(beat, f)| FiducialRecord {
                        patient_id: w.patient_id.clone(),
                        window_index: w.index,
                        beat,
                        fiducials: *f,
                    }),
            );
        }
        out.features.push(WindowFeatures {
            patient_id: w.patient_id.clone(),
            window_index: w.index,
            mor: ex.mor,
            brv: ex.brv,
        });
    }
    log::info!(
        "patient {}: {}/{} windows kept",
        rec.patient_id,
        out.summary.kept,
        out.summary.total
    );
    Ok(out)
}

/// Runs extraction over a cohort; recordings are processed in parallel and
/// merged in input order.
pub fn extract_cohort(
    recordings: &[Recording],
    config: &RunConfig,
    keep_fiducials: bool,
) -> Result<Extraction> {
    config.validate()?;
    let outputs: Vec<RecordingOutput> = recordings
        .par_iter()
        .map(|r| process_recording(r, config, keep_fiducials))
        .collect::<Result<_>>()?;
    let mut summary = ScreeningSummary::default();
    let mut log = ScreeningLog {
        summary: ScreeningSummary::default(),
        skipped_recordings: Vec::new(),
        windows: Vec::new(),
    };
    let mut features = Vec::new();
    let mut fiducials = Vec::new();
    for (rec, out) in recordings.iter().zip(outputs) {
        summary.total += out.summary.total;
        summary.kept += out.summary.kept;
        summary.excluded += out.summary.excluded;
        for (reason, n) in out.summary.by_reason {
            *summary.by_reason.entry(reason).or_default() += n;
        }
        if let Some(reason) = out.skipped {
            log.skipped_recordings.push(SkippedRecording {
                patient_id: rec.patient_id.clone(),
                reason,
            });
        }
        log.windows.extend(out.windows);
        features.extend(out.features);
        fiducials.extend(out.fiducials);
    }
    log.summary = summary;
    let matrix = assemble_matrix(&features, recordings, &FeatureCatalog::standard())?;
    Ok(Extraction {
        matrix,
        screening: log,
        fiducials,
    })
}
