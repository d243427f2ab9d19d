use crate::io::Recording;

use super::sqi::{SqiResult, Verdict};

/// A fixed-length segment of a filtered recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub patient_id: String,
    pub index: usize,
    /// Offset of the first sample within the recording.
    pub start: usize,
    pub fs: f64,
    pub samples: Vec<f64>,
    pub sqi: Option<SqiResult>,
}

impl Window {
    pub fn kept(&self) -> bool {
        matches!(self.sqi.as_ref().map(|s| &s.verdict), Some(Verdict::Kept))
    }
}

/// Splits a recording into contiguous, non-overlapping windows of
/// `round(window_s * fs)` samples; the trailing partial segment is dropped.
pub fn segment_windows(recording: &Recording, window_s: f64) -> Vec<Window> {
    let len = (window_s * recording.fs).round() as usize;
    if len == 0 {
        return Vec::new();
    }
    recording
        .samples
        .chunks_exact(len)
        .enumerate()
        .map(|(index, chunk)| Window {
            patient_id: recording.patient_id.clone(),
            index,
            start: index * len,
            fs: recording.fs,
            samples: chunk.to_vec(),
            sqi: None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{Class, Sex};
    use proptest::prelude::*;

    fn recording(seconds: f64, fs: f64) -> Recording {
        let n = (seconds * fs) as usize;
        Recording {
            patient_id: "p".into(),
            fs,
            samples: (0..n).map(|i| (i as f64 * 0.37).sin()).collect(),
            label: Class::Nl,
            age: None,
            sex: Sex::Unknown,
        }
    }

    #[test]
    fn window_counts_follow_floor_rule() {
        assert_eq!(segment_windows(&recording(600.0, 100.0), 30.0).len(), 20);
        assert_eq!(segment_windows(&recording(45.0, 100.0), 30.0).len(), 1);
        assert_eq!(segment_windows(&recording(29.0, 100.0), 30.0).len(), 0);
        let w = segment_windows(&recording(61.0, 1000.0), 30.0);
        assert_eq!(w.len(), 2);
        assert!(w.iter().all(|w| w.samples.len() == 30_000));
    }

    proptest! {
        #[test]
        fn windows_partition_the_recording(seconds in 0.0f64..200.0, fs in 1.0f64..50.0) {
            let rec = recording(seconds, fs);
            let ws = segment_windows(&rec, 30.0);
            let mut rebuilt: Vec<f64> = ws.iter().flat_map(|w| w.samples.iter().copied()).collect();
            let used = rebuilt.len();
            rebuilt.extend_from_slice(&rec.samples[used..]);
            prop_assert_eq!(&rebuilt, &rec.samples);
            let len = (30.0 * fs).round() as usize;
            prop_assert!(rec.samples.len() - used < len);
            for (i, w) in ws.iter().enumerate() {
                prop_assert_eq!(w.index, i);
                prop_assert_eq!(w.start, i * len);
            }
        }
    }
}
