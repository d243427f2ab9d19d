//! Beat detection and per-beat landmark location.
//!
//! Landmarks on the second derivative (a–e) are alternating local extrema
//! scanned forward from the pulse onset: a is the first maximum, b the next
//! minimum, then c (max), d (min), e (max). First-derivative landmarks u, v, w
//! and pulse landmarks (systolic peak, dicrotic notch, diastolic peak, p1, p2)
//! are placed relative to those. The a-point must lie on the systolic upstroke
//! (before the peak); a landmark that cannot be found is `None`, and so is
//! every landmark searched for after it.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Range below which a signal is treated as zero-variance.
const FLAT_RANGE: f64 = 1e-10;
const REFRACTORY_S: f64 = 0.3;
const THRESHOLD_HALF_WINDOW_S: f64 = 1.5;
const THRESHOLD_STEP_S: f64 = 0.5;
const THRESHOLD_FRACTION: f64 = 0.5;
const FOOT_FRACTION: f64 = 0.05;

pub(crate) fn is_flat(x: &[f64]) -> bool {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    (hi - lo).partial_cmp(&FLAT_RANGE) != Some(std::cmp::Ordering::Greater)
}

/// One complete beat: onset, systolic peak, and the onset of the next beat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeatSpan {
    pub onset: usize,
    pub systolic_peak: usize,
    pub next_onset: usize,
}

impl BeatSpan {
    pub fn len(&self) -> usize {
        self.next_onset - self.onset
    }

    pub fn is_empty(&self) -> bool {
        self.next_onset == self.onset
    }
}

fn quantile_in_place(buf: &mut [f64], q: f64) -> f64 {
    let k = ((buf.len() - 1) as f64 * q).round() as usize;
    *buf.select_nth_unstable_by(k, f64::total_cmp).1
}

/// Per-block threshold halfway between the local 5th and 95th percentiles.
fn adaptive_threshold(x: &[f64], fs: f64) -> (Vec<f64>, usize) {
    let step = ((THRESHOLD_STEP_S * fs).round() as usize).max(1);
    let half = ((THRESHOLD_HALF_WINDOW_S * fs).round() as usize).max(1);
    let n_blocks = x.len().div_ceil(step);
    let mut buf = Vec::with_capacity(2 * half + 1);
    let thr = (0..n_blocks)
        .map(|b| {
            let center = b * step + step / 2;
            let lo = center.saturating_sub(half);
            let hi = (center + half + 1).min(x.len());
            buf.clear();
            buf.extend_from_slice(&x[lo..hi]);
            let q05 = quantile_in_place(&mut buf, 0.05);
            let q95 = quantile_in_place(&mut buf, 0.95);
            q05 + THRESHOLD_FRACTION * (q95 - q05)
        })
        .collect();
    (thr, step)
}

fn argmin(x: &[f64], lo: usize, hi: usize) -> usize {
    let mut best = lo;
    for i in lo + 1..hi {
        if x[i] < x[best] {
            best = i;
        }
    }
    best
}

/// Foot of the upstroke into `peak`: the last sample in `[lo, peak)` within
/// `FOOT_FRACTION` of the rise above the trough minimum. On a flat trough
/// this lands where the upstroke starts rather than anywhere on the plateau.
fn foot(x: &[f64], lo: usize, peak: usize) -> usize {
    let m = argmin(x, lo, peak);
    let level = x[m] + FOOT_FRACTION * (x[peak] - x[m]);
    (m..peak).rev().find(|&i| x[i] <= level).unwrap_or(m)
}

/// Finds systolic peaks above a moving-quantile threshold with a 0.3 s
/// refractory period, then places onsets at the upstroke feet between them.
pub fn detect_beats(x: &[f64], fs: f64) -> Vec<BeatSpan> {
    if x.len() < 3 || is_flat(x) {
        return Vec::new();
    }
    let (thr, step) = adaptive_threshold(x, fs);
    let mut candidates: Vec<usize> = (1..x.len() - 1)
        .filter(|&i| x[i - 1] < x[i] && x[i] >= x[i + 1] && x[i] > thr[i / step])
        .collect();
    candidates.sort_by(|&i, &j| x[j].total_cmp(&x[i]).then(i.cmp(&j)));

    let refractory = (REFRACTORY_S * fs).round() as usize;
    let mut accepted = BTreeSet::new();
    for c in candidates {
        let lo = c.saturating_sub(refractory.saturating_sub(1));
        let clash = accepted.range(lo..c + refractory).next().is_some();
        if !clash {
            accepted.insert(c);
        }
    }
    let peaks: Vec<usize> = accepted.into_iter().collect();
    if peaks.len() < 3 {
        return Vec::new();
    }

    // Onsets come only from troughs bounded by two peaks, so the first
    // peak (possibly a partial beat) never starts a span.
    let onsets: Vec<usize> = peaks.windows(2).map(|w| foot(x, w[0] + 1, w[1])).collect();
    (1..peaks.len() - 1)
        .filter_map(|j| {
            let (onset, next_onset) = (onsets[j - 1], onsets[j]);
            (onset < peaks[j] && peaks[j] < next_onset).then_some(BeatSpan {
                onset,
                systolic_peak: peaks[j],
                next_onset,
            })
        })
        .collect()
}

/// Smoothed first, second and third derivatives (per second, per s², per s³).
#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
}

/// Centred moving average whose window shrinks symmetrically at the edges.
fn moving_average(x: &[f64], radius: usize) -> Vec<f64> {
    if radius == 0 {
        return x.to_vec();
    }
    let n = x.len();
    // Direct sums: a running prefix sum loses precision on offset signals.
    (0..n)
        .map(|i| {
            let r = radius.min(i).min(n - 1 - i);
            x[i - r..=i + r].iter().sum::<f64>() / (2 * r + 1) as f64
        })
        .collect()
}

fn central_difference(x: &[f64], fs: f64) -> Vec<f64> {
    let n = x.len();
    let mut d = Vec::with_capacity(n);
    d.push((x[1] - x[0]) * fs);
    for i in 1..n - 1 {
        d.push((x[i + 1] - x[i - 1]) * fs * 0.5);
    }
    d.push((x[n - 1] - x[n - 2]) * fs);
    d
}

/// Moving-average smoothing over `smoothing_s` seconds (rounded up to an odd
/// number of samples), then repeated central differences with one-sided ends.
pub fn smooth_derivatives(x: &[f64], fs: f64, smoothing_s: f64) -> Result<Derivatives> {
    let min_len = ((0.3 * fs).ceil() as usize).max(3);
    if x.len() < min_len {
        return Err(Error::Data(format!(
            "segment of {} samples is too short for derivatives (needs {min_len})",
            x.len()
        )));
    }
    let len = (fs * smoothing_s).round() as usize;
    let smoothed = moving_average(x, len / 2);
    let d1 = central_difference(&smoothed, fs);
    let d2 = central_difference(&d1, fs);
    let d3 = central_difference(&d2, fs);
    Ok(Derivatives { d1, d2, d3 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Extremum {
    Max,
    Min,
}

fn is_extremum(x: &[f64], i: usize, kind: Extremum) -> bool {
    match kind {
        Extremum::Max => x[i - 1] < x[i] && x[i] >= x[i + 1],
        Extremum::Min => x[i - 1] > x[i] && x[i] <= x[i + 1],
    }
}

/// First extremum of `kind` with index in `from..to`.
fn next_extremum(x: &[f64], from: usize, to: usize, kind: Extremum) -> Option<usize> {
    let from = from.max(1);
    let to = to.min(x.len().saturating_sub(1));
    (from..to).find(|&i| is_extremum(x, i, kind))
}

/// Landmark indices for one beat, in the same index space as the span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FiducialSet {
    pub onset: usize,
    pub next_onset: usize,
    pub sp: usize,
    pub dn: Option<usize>,
    pub dp: Option<usize>,
    pub a: Option<usize>,
    pub b: Option<usize>,
    pub c: Option<usize>,
    pub d: Option<usize>,
    pub e: Option<usize>,
    pub u: Option<usize>,
    pub v: Option<usize>,
    pub w: Option<usize>,
    pub p1: Option<usize>,
    pub p2: Option<usize>,
}

/// Locates all landmarks of `beat` on the signal `x` and its derivatives.
/// `x` and the derivative arrays share one index space (usually the window).
pub fn locate_fiducials(beat: &BeatSpan, x: &[f64], der: &Derivatives) -> FiducialSet {
    let (on, sp, next) = (beat.onset, beat.systolic_peak, beat.next_onset);
    let d2 = &der.d2;

    let rising = x[sp] > x[on] && x[sp] > x[next];
    let a = next_extremum(d2, on + 1, next, Extremum::Max).filter(|&a| rising && a < sp);
    let b = a.and_then(|a| next_extremum(d2, a + 1, next, Extremum::Min));
    let c = b.and_then(|b| next_extremum(d2, b + 1, next, Extremum::Max));
    let d = c.and_then(|c| next_extremum(d2, c + 1, next, Extremum::Min));
    let e = d.and_then(|d| next_extremum(d2, d + 1, next, Extremum::Max));

    let u = (on..=sp).max_by(|&i, &j| der.d1[i].total_cmp(&der.d1[j]).then(j.cmp(&i)));
    let v = (sp + 1..next).min_by(|&i, &j| der.d1[i].total_cmp(&der.d1[j]).then(i.cmp(&j)));
    let w = v.and_then(|v| next_extremum(&der.d1, v + 1, next, Extremum::Max));

    let pulse_minima: Vec<usize> = (sp + 1..next)
        .filter(|&i| i + 1 < x.len() && is_extremum(x, i, Extremum::Min))
        .collect();
    let dn = match e {
        Some(e) => pulse_minima
            .iter()
            .copied()
            .min_by_key(|&m| (m.abs_diff(e), m))
            .or((e > sp).then_some(e)),
        None => pulse_minima.first().copied(),
    };
    let dp = dn.and_then(|dn| next_extremum(x, dn + 1, next, Extremum::Max));

    let p2 = d;
    let p1 = b
        .and_then(|b| next_extremum(&der.d3, b + 1, next, Extremum::Max))
        .filter(|&p1| p2.is_some_and(|p2| p1 <= p2));

    FiducialSet {
        onset: on,
        next_onset: next,
        sp,
        dn,
        dp,
        a,
        b,
        c,
        d,
        e,
        u,
        v,
        w,
        p1,
        p2,
    }
}

/// One row of the fiducial debug export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiducialRecord {
    pub patient_id: String,
    pub window_index: usize,
    pub beat: usize,
    pub fiducials: FiducialSet,
}

/// Writes per-beat landmark indices as CSV (empty field = absent).
pub fn write_fiducials_csv(path: &Path, records: &[FiducialRecord]) -> Result<()> {
    let mut out = String::from(
        "patient_id,window_index,beat,onset,next_onset,sp,dn,dp,a,b,c,d,e,u,v,w,p1,p2\n",
    );
    let o = |v: Option<usize>| v.map(|i| i.to_string()).unwrap_or_default();
    for r in records {
        let f = &r.fiducials;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.patient_id,
            r.window_index,
            r.beat,
            f.onset,
            f.next_onset,
            f.sp,
            o(f.dn),
            o(f.dp),
            o(f.a),
            o(f.b),
            o(f.c),
            o(f.d),
            o(f.e),
            o(f.u),
            o(f.v),
            o(f.w),
            o(f.p1),
            o(f.p2)
        ));
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(path, e))
}
