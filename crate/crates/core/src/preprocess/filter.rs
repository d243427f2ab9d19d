use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Second-order section in transposed direct form II; `a0` is fixed to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let num = self.b[0] + z_inv * (self.b[1] + z_inv * self.b[2]);
        let den = 1.0 + z_inv * (self.a[0] + z_inv * self.a[1]);
        num / den
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    fn poles(&self) -> [Complex64; 2] {
        let (a1, a2) = (self.a[0], self.a[1]);
        let disc = Complex64::new(a1 * a1 - 4.0 * a2, 0.0).sqrt();
        [(-a1 + disc) / 2.0, (-a1 - disc) / 2.0]
    }

    /// State that holds the section at rest under a constant input `u`.
    fn steady_state(&self, u: f64) -> [f64; 2] {
        let y = self.dc_gain() * u;
        let s2 = self.b[2] * u - self.a[1] * y;
        let s1 = self.b[1] * u - self.a[0] * y + s2;
        [s1, s2]
    }
}

/// Butterworth bandpass as a cascade of second-order sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDesign {
    /// Order of the lowpass prototype; the bandpass has twice as many poles.
    pub order: usize,
    pub band: [f64; 2],
    pub fs: f64,
    pub sections: Vec<Biquad>,
    /// Samples until the one-pass step response stays within 1% of its peak magnitude.
    pub settle_len: usize,
}

/// Designs a Butterworth bandpass by bilinear transform of the analog
/// prototype with pre-warped band edges, normalised to unit gain at the
/// geometric band centre.
pub fn design_bandpass(fs: f64, low_hz: f64, high_hz: f64, order: usize) -> Result<FilterDesign> {
    if order == 0 {
        return Err(Error::Config("filter order must be positive".into()));
    }
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::Config(format!("fs must be positive, got {fs}")));
    }
    if !(low_hz > 0.0 && low_hz < high_hz) {
        return Err(Error::Config(format!(
            "invalid band [{low_hz}, {high_hz}] Hz"
        )));
    }
    if high_hz >= fs / 2.0 {
        return Err(Error::Config(format!(
            "upper band edge {high_hz} Hz is not below Nyquist ({} Hz) for fs = {fs}",
            fs / 2.0
        )));
    }

    let two_fs = 2.0 * fs;
    let w_lo = two_fs * (PI * low_hz / fs).tan();
    let w_hi = two_fs * (PI * high_hz / fs).tan();
    let bw = w_hi - w_lo;
    let w0_sq = w_lo * w_hi;

    let n = order as f64;
    let mut digital = Vec::with_capacity(2 * order);
    for k in 0..order {
        let theta = PI * (2.0 * k as f64 + n + 1.0) / (2.0 * n);
        let p = Complex64::from_polar(1.0, theta) * bw;
        let disc = (p * p - 4.0 * w0_sq).sqrt();
        for q in [(p + disc) / 2.0, (p - disc) / 2.0] {
            digital.push((two_fs + q) / (two_fs - q));
        }
    }

    let eps = 1e-12;
    let mut sections = Vec::with_capacity(order);
    let mut real_poles = Vec::new();
    for z in &digital {
        if z.im > eps {
            sections.push(Biquad {
                b: [1.0, 0.0, -1.0],
                a: [-2.0 * z.re, z.norm_sqr()],
            });
        } else if z.im.abs() <= eps {
            real_poles.push(z.re);
        }
    }
    for pair in real_poles.chunks(2) {
        let (z1, z2) = (pair[0], *pair.get(1).unwrap_or(&0.0));
        sections.push(Biquad {
            b: [1.0, 0.0, -1.0],
            a: [-(z1 + z2), z1 * z2],
        });
    }
    if sections.len() != order {
        return Err(Error::Config(format!(
            "pole pairing produced {} sections for order {order}",
            sections.len()
        )));
    }

    let center = 2.0 * (w0_sq.sqrt() / two_fs).atan();
    let z_inv = Complex64::from_polar(1.0, -center);
    let gain: f64 = sections.iter().map(|s| s.response(z_inv).norm()).product();
    let per_section = (1.0 / gain).powf(1.0 / order as f64);
    for s in &mut sections {
        for b in &mut s.b {
            *b *= per_section;
        }
    }

    let mut design = FilterDesign {
        order,
        band: [low_hz, high_hz],
        fs,
        sections,
        settle_len: 0,
    };
    design.settle_len = design.step_settling_len();
    Ok(design)
}

impl FilterDesign {
    /// One-pass magnitude response at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq_hz / self.fs);
        self.sections
            .iter()
            .map(|s| s.response(z_inv))
            .product::<Complex64>()
            .norm()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.sections.iter().flat_map(|s| s.poles()).collect()
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < 1.0)
    }

    /// Reflection padding applied on each side before the zero-phase pass.
    pub fn pad_len(&self) -> usize {
        3 * self.settle_len
    }

    /// Single causal pass starting from `state` (two entries per section).
    fn run(&self, x: &mut [f64], state: &mut [[f64; 2]]) {
        for v in x.iter_mut() {
            let mut u = *v;
            for (s, st) in self.sections.iter().zip(state.iter_mut()) {
                let y = s.b[0] * u + st[0];
                st[0] = s.b[1] * u - s.a[0] * y + st[1];
                st[1] = s.b[2] * u - s.a[1] * y;
                u = y;
            }
            *v = u;
        }
    }

    /// Causal pass from rest.
    pub fn filter_causal(&self, x: &mut [f64]) {
        let mut state = vec![[0.0; 2]; self.sections.len()];
        self.run(x, &mut state);
    }

    fn steady_state(&self, u: f64) -> Vec<[f64; 2]> {
        let mut input = u;
        self.sections
            .iter()
            .map(|s| {
                let st = s.steady_state(input);
                input *= s.dc_gain();
                st
            })
            .collect()
    }

    fn step_settling_len(&self) -> usize {
        let max_len = (120.0 * self.fs).ceil() as usize;
        let mut step = vec![1.0; max_len];
        self.filter_causal(&mut step);
        let peak = step.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = 0.01 * peak;
        step.iter()
            .rposition(|v| v.abs() > tol)
            .map_or(1, |i| i + 1)
    }
}

/// Forward-backward filtering with odd reflection padding at both ends and
/// steady-state initial conditions for each pass.
pub fn zero_phase_filter(samples: &[f64], design: &FilterDesign) -> Result<Vec<f64>> {
    let n = samples.len();
    let pad = design.pad_len();
    if n <= pad {
        return Err(Error::Data(format!(
            "input of {n} samples is too short for zero-phase filtering (needs more than {pad})"
        )));
    }
    let first = samples[0];
    let last = samples[n - 1];
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * first - samples[i]));
    ext.extend_from_slice(samples);
    ext.extend((1..=pad).map(|i| 2.0 * last - samples[n - 1 - i]));

    let mut state = design.steady_state(ext[0]);
    design.run(&mut ext, &mut state);
    ext.reverse();
    let mut state = design.steady_state(ext[0]);
    design.run(&mut ext, &mut state);
    ext.reverse();

    Ok(ext[pad..pad + n].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn db(x: f64) -> f64 {
        20.0 * x.log10()
    }

    /// Analog Butterworth bandpass magnitude at the pre-warped frequency.
    fn analog_oracle(f: f64, fs: f64, lo: f64, hi: f64, order: i32) -> f64 {
        let warp = |x: f64| 2.0 * fs * (PI * x / fs).tan();
        let (w, w1, w2) = (warp(f), warp(lo), warp(hi));
        let x = (w * w - w1 * w2) / (w * (w2 - w1));
        1.0 / (1.0 + x.powi(2 * order)).sqrt()
    }

    #[test]
    fn stable_and_matches_analog_prototype() {
        let d = design_bandpass(1000.0, 0.5, 12.0, 4).unwrap();
        assert_eq!(d.sections.len(), 4);
        assert!(d.is_stable());
        for f in [0.05, 0.2, 0.5, 1.0, 5.0, 12.0, 20.0, 40.0, 200.0] {
            let got = d.magnitude(f);
            let want = analog_oracle(f, 1000.0, 0.5, 12.0, 4);
            assert!(
                (got - want).abs() < 1e-6 * want.max(1e-6),
                "f={f}: {got} vs {want}"
            );
        }
        assert!(db(d.magnitude(5.0)).abs() < 1.0);
        assert!(db(d.magnitude(0.05)) <= -20.0);
        assert!(db(d.magnitude(40.0)) <= -20.0);
    }

    #[test]
    fn odd_orders_design_too() {
        for order in [1, 2, 3, 5] {
            let d = design_bandpass(250.0, 0.5, 12.0, order).unwrap();
            assert_eq!(d.sections.len(), order);
            assert!(d.is_stable());
            let want = analog_oracle(3.0, 250.0, 0.5, 12.0, order as i32);
            assert!((d.magnitude(3.0) - want).abs() < 1e-6);
        }
    }

    #[test]
    fn low_fs_rejected() {
        assert!(matches!(
            design_bandpass(20.0, 0.5, 12.0, 4),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn zeros_stay_zero_and_short_input_errors() {
        let d = design_bandpass(100.0, 0.5, 12.0, 4).unwrap();
        let x = vec![0.0; d.pad_len() + 10];
        assert!(zero_phase_filter(&x, &d).unwrap().iter().all(|v| *v == 0.0));
        assert!(zero_phase_filter(&x[..d.pad_len()], &d).is_err());
    }

    #[test]
    fn constant_input_is_removed() {
        let d = design_bandpass(200.0, 0.5, 12.0, 4).unwrap();
        let y = zero_phase_filter(&vec![3.0; 2 * d.pad_len()], &d).unwrap();
        assert!(
            y.iter().all(|v| v.abs() < 1e-9),
            "{:?}",
            y.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        );
    }
}
