//! Synthetic PPG cohorts built from a two-Gaussian pulse model.
//!
//! Each beat is the sum of a systolic and a diastolic Gaussian evaluated over
//! the beat's own period. Beat periods follow a truncated normal with an
//! optional first-order autoregressive term, and every patient draws a small
//! multiplicative jitter on its class parameters so that windows of one
//! patient are correlated the way real recordings are.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{Class, Recording, Sex};

const MIN_PERIOD_S: f64 = 0.3;
const MAX_PERIOD_S: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BeatModel {
    pub systolic_amp: f64,
    pub systolic_center: f64,
    pub systolic_width: f64,
    pub diastolic_amp: f64,
    pub diastolic_center: f64,
    pub diastolic_width: f64,
}

impl Default for BeatModel {
    fn default() -> Self {
        BeatModel {
            systolic_amp: 1.0,
            systolic_center: 0.18,
            systolic_width: 0.05,
            diastolic_amp: 0.5,
            diastolic_center: 0.42,
            diastolic_width: 0.08,
        }
    }
}

impl BeatModel {
    /// Checks the model against a nominal beat period in seconds.
    pub fn validate(&self, period_s: f64) -> Result<()> {
        let ok = self.systolic_width > 0.0
            && self.diastolic_width > 0.0
            && self.systolic_amp > 0.0
            && self.diastolic_amp >= 0.0
            && self.diastolic_amp < self.systolic_amp
            && 0.0 < self.systolic_center
            && self.systolic_center < self.diastolic_center
            && self.diastolic_center < period_s;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid beat model for period {period_s} s: {self:?}"
            )))
        }
    }
}

fn gaussian(amp: f64, center: f64, width: f64, t: f64) -> f64 {
    let z = (t - center) / width;
    amp * (-0.5 * z * z).exp()
}

/// Pulse amplitude at time `t` seconds after beat onset.
pub fn synth_beat(model: &BeatModel, t: f64) -> f64 {
    gaussian(
        model.systolic_amp,
        model.systolic_center,
        model.systolic_width,
        t,
    ) + gaussian(
        model.diastolic_amp,
        model.diastolic_center,
        model.diastolic_width,
        t,
    )
}

fn default_hr() -> f64 {
    72.0
}
fn default_hr_sd() -> f64 {
    3.0
}
fn default_ar() -> f64 {
    0.5
}
fn default_age_min() -> f64 {
    60.0
}
fn default_age_max() -> f64 {
    80.0
}
fn default_male_fraction() -> f64 {
    0.65
}

/// Generator parameters for one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassParams {
    #[serde(default = "default_hr")]
    pub mean_hr_bpm: f64,
    /// Beat-to-beat rate spread; converted to a period spread of `60 * hr_sd / hr^2` s.
    #[serde(default = "default_hr_sd")]
    pub hr_sd_bpm: f64,
    /// Lag-one autocorrelation of successive period deviations, in [0, 1).
    #[serde(default = "default_ar")]
    pub hr_ar: f64,
    #[serde(default)]
    pub beat: BeatModel,
    #[serde(default = "default_age_min")]
    pub age_min: f64,
    #[serde(default = "default_age_max")]
    pub age_max: f64,
    #[serde(default = "default_male_fraction")]
    pub male_fraction: f64,
}

impl Default for ClassParams {
    fn default() -> Self {
        ClassParams {
            mean_hr_bpm: default_hr(),
            hr_sd_bpm: default_hr_sd(),
            hr_ar: default_ar(),
            beat: BeatModel::default(),
            age_min: default_age_min(),
            age_max: default_age_max(),
            male_fraction: default_male_fraction(),
        }
    }
}

impl ClassParams {
    fn validate(&self, which: &str) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("{which}: {m}")));
        if !(self.mean_hr_bpm > 20.0 && self.mean_hr_bpm < 250.0) {
            return bad(format!(
                "mean_hr_bpm must be in (20, 250), got {}",
                self.mean_hr_bpm
            ));
        }
        if !(self.hr_sd_bpm >= 0.0 && self.hr_sd_bpm.is_finite()) {
            return bad(format!("hr_sd_bpm must be >= 0, got {}", self.hr_sd_bpm));
        }
        if !(0.0..1.0).contains(&self.hr_ar) {
            return bad(format!("hr_ar must be in [0, 1), got {}", self.hr_ar));
        }
        if !(self.age_min > 0.0 && self.age_min <= self.age_max) {
            return bad(format!(
                "age range [{}, {}] invalid",
                self.age_min, self.age_max
            ));
        }
        if !(0.0..=1.0).contains(&self.male_fraction) {
            return bad(format!(
                "male_fraction must be in [0, 1], got {}",
                self.male_fraction
            ));
        }
        self.beat
            .validate(60.0 / self.mean_hr_bpm)
            .or_else(|e| bad(e.to_string()))
    }
}

fn default_n_positive() -> u32 {
    25
}
fn default_n_negative() -> u32 {
    61
}
fn default_sm_fraction() -> f64 {
    27.0 / 63.0
}
fn default_duration() -> f64 {
    600.0
}
fn default_fs() -> f64 {
    1000.0
}
fn default_noise() -> f64 {
    0.02
}
fn default_wander_amp() -> f64 {
    0.1
}
fn default_wander_hz() -> f64 {
    0.2
}
fn default_jitter() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    #[serde(default = "default_n_positive")]
    pub n_positive: u32,
    #[serde(default = "default_n_negative")]
    pub n_negative: u32,
    /// Share of negative recordings labelled SM (the rest are NL).
    #[serde(default = "default_sm_fraction")]
    pub sm_fraction: f64,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default = "default_fs")]
    pub fs: f64,
    /// White-noise standard deviation relative to the systolic amplitude.
    #[serde(default = "default_noise")]
    pub noise_sd: f64,
    #[serde(default = "default_wander_amp")]
    pub wander_amp: f64,
    #[serde(default = "default_wander_hz")]
    pub wander_hz: f64,
    /// Relative spread of per-patient deviations from the class parameters.
    #[serde(default = "default_jitter")]
    pub patient_jitter: f64,
    pub seed: u64,
    #[serde(default)]
    pub positive: ClassParams,
    #[serde(default)]
    pub negative: ClassParams,
}

impl CohortSpec {
    /// Full-size cohort (25 positive, 61 negative, 10 min at 1 kHz) with
    /// identical class parameters.
    pub fn standard(seed: u64) -> Self {
        CohortSpec {
            n_positive: default_n_positive(),
            n_negative: default_n_negative(),
            sm_fraction: default_sm_fraction(),
            duration_s: default_duration(),
            fs: default_fs(),
            noise_sd: default_noise(),
            wander_amp: default_wander_amp(),
            wander_hz: default_wander_hz(),
            patient_jitter: default_jitter(),
            seed,
            positive: ClassParams::default(),
            negative: ClassParams::default(),
        }
    }

    /// Full-size cohort whose classes differ strongly in diastolic amplitude.
    pub fn standard_separable(seed: u64) -> Self {
        let mut spec = Self::standard(seed);
        spec.positive.beat.diastolic_amp = 0.2;
        spec.negative.beat.diastolic_amp = 0.6;
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::Config(format!(
                "duration_s must be > 0, got {}",
                self.duration_s
            )));
        }
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return Err(Error::Config(format!("fs must be > 0, got {}", self.fs)));
        }
        for (name, v) in [
            ("noise_sd", self.noise_sd),
            ("wander_amp", self.wander_amp),
            ("wander_hz", self.wander_hz),
            ("patient_jitter", self.patient_jitter),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.sm_fraction) {
            return Err(Error::Config(format!(
                "sm_fraction must be in [0, 1], got {}",
                self.sm_fraction
            )));
        }
        self.positive.validate("positive")?;
        self.negative.validate("negative")
    }

    pub fn params(&self, label: Class) -> &ClassParams {
        match label {
            Class::Lvo => &self.positive,
            Class::Nl | Class::Sm => &self.negative,
        }
    }

    /// Labels in generation order: all positives, then the negatives with SM first.
    pub fn labels(&self) -> Vec<Class> {
        let n_sm = (self.n_negative as f64 * self.sm_fraction).round() as u32;
        let n_sm = n_sm.min(self.n_negative);
        std::iter::repeat_n(Class::Lvo, self.n_positive as usize)
            .chain(std::iter::repeat_n(Class::Sm, n_sm as usize))
            .chain(std::iter::repeat_n(
                Class::Nl,
                (self.n_negative - n_sm) as usize,
            ))
            .collect()
    }
}

/// A generated recording together with the true beat-onset times.
#[derive(Debug, Clone)]
pub struct SynthRecording {
    pub recording: Recording,
    pub onsets_s: Vec<f64>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn jittered(rng: &mut ChaCha8Rng, value: f64, jitter: f64) -> f64 {
    value * (1.0 + jitter * normal(rng)).max(0.5)
}

fn patient_beat(rng: &mut ChaCha8Rng, base: &BeatModel, jitter: f64, period: f64) -> BeatModel {
    let mut b = BeatModel {
        systolic_amp: base.systolic_amp,
        systolic_center: jittered(rng, base.systolic_center, jitter),
        systolic_width: jittered(rng, base.systolic_width, jitter),
        diastolic_amp: jittered(rng, base.diastolic_amp, jitter),
        diastolic_center: jittered(rng, base.diastolic_center, jitter),
        diastolic_width: jittered(rng, base.diastolic_width, jitter),
    };
    b.diastolic_amp = b.diastolic_amp.min(0.95 * b.systolic_amp);
    b.diastolic_center = b
        .diastolic_center
        .max(b.systolic_center + 0.02)
        .min(0.9 * period);
    b
}

/// Draws one truncated-normal innovation so that `mean + dev` stays in range.
fn next_period(rng: &mut ChaCha8Rng, mean: f64, sd: f64, ar: f64, prev_dev: f64) -> (f64, f64) {
    let scale = sd * (1.0 - ar * ar).sqrt();
    for _ in 0..100 {
        let dev = ar * prev_dev + scale * normal(rng);
        let p = mean + dev;
        if (MIN_PERIOD_S..=MAX_PERIOD_S).contains(&p) {
            return (p, dev);
        }
    }
    let p = mean.clamp(MIN_PERIOD_S, MAX_PERIOD_S);
    (p, p - mean)
}

/// Generates one recording. Output depends only on the arguments.
pub fn synth_recording_with_onsets(
    spec: &CohortSpec,
    label: Class,
    patient_id: &str,
    stream_seed: u64,
) -> SynthRecording {
    let params = spec.params(label);
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed);
    let jitter = spec.patient_jitter;

    let hr = if jitter > 0.0 {
        jittered(&mut rng, params.mean_hr_bpm, jitter).clamp(25.0, 200.0)
    } else {
        params.mean_hr_bpm
    };
    let mean_period = 60.0 / hr;
    let beat = if jitter > 0.0 {
        patient_beat(&mut rng, &params.beat, jitter, mean_period)
    } else {
        params.beat
    };
    let period_sd = 60.0 * params.hr_sd_bpm / (hr * hr);
    let age = params.age_min + (params.age_max - params.age_min) * rng.random::<f64>();
    let sex = if rng.random::<f64>() < params.male_fraction {
        Sex::Male
    } else {
        Sex::Female
    };
    let wander_phase = rng.random::<f64>() * std::f64::consts::TAU;

    let n = (spec.duration_s * spec.fs).round() as usize;
    let mut samples = vec![0.0; n];
    let mut onsets_s = Vec::new();
    let mut onset = 0.0;
    let mut dev = 0.0;
    while onset * spec.fs < n as f64 {
        let (period, d) = if period_sd > 0.0 {
            next_period(&mut rng, mean_period, period_sd, params.hr_ar, dev)
        } else {
            (mean_period.clamp(MIN_PERIOD_S, MAX_PERIOD_S), 0.0)
        };
        dev = d;
        onsets_s.push(onset);
        let start = (onset * spec.fs).ceil() as usize;
        let end = (((onset + period) * spec.fs).ceil() as usize).min(n);
        for (i, y) in samples.iter_mut().enumerate().take(end).skip(start) {
            *y = synth_beat(&beat, i as f64 / spec.fs - onset);
        }
        onset += period;
    }

    let amp = beat.systolic_amp;
    if spec.noise_sd > 0.0 || spec.wander_amp > 0.0 {
        let w = std::f64::consts::TAU * spec.wander_hz;
        for (i, y) in samples.iter_mut().enumerate() {
            let t = i as f64 / spec.fs;
            *y += spec.wander_amp * amp * (w * t + wander_phase).sin()
                + spec.noise_sd * amp * normal(&mut rng);
        }
    }

    SynthRecording {
        recording: Recording {
            patient_id: patient_id.to_string(),
            fs: spec.fs,
            samples,
            label,
            age: Some(age),
            sex,
        },
        onsets_s,
    }
}

pub fn synth_recording(
    spec: &CohortSpec,
    label: Class,
    patient_id: &str,
    stream_seed: u64,
) -> Recording {
    synth_recording_with_onsets(spec, label, patient_id, stream_seed).recording
}

/// Generates the whole cohort; recording `i` uses stream seed `seed + i`.
pub fn synth_cohort(spec: &CohortSpec) -> Result<Vec<Recording>> {
    spec.validate()?;
    let labels = spec.labels();
    Ok(labels
        .par_iter()
        .enumerate()
        .map(|(i, &label)| {
            let id = format!("P{:03}", i + 1);
            synth_recording(spec, label, &id, spec.seed.wrapping_add(i as u64))
        })
        .collect())
}
