use crate::fiducials::{Derivatives, FiducialSet};

use super::catalog::{FeatureCatalog, WIDTH_LEVELS};
use super::FeatureValues;

fn ratio(num: f64, den: f64) -> Option<f64> {
    let r = num / den;
    (den != 0.0 && r.is_finite()).then_some(r)
}

/// Fractional sample index where the pulse rises through `level` before `sp`.
fn rising_crossing(x: &[f64], onset: usize, sp: usize, level: f64) -> Option<f64> {
    (onset..sp).rev().find_map(|j| {
        (x[j] <= level && level < x[j + 1]).then(|| j as f64 + (level - x[j]) / (x[j + 1] - x[j]))
    })
}

/// Fractional sample index where the pulse falls through `level` after `sp`.
fn falling_crossing(x: &[f64], sp: usize, next_onset: usize, level: f64) -> Option<f64> {
    (sp..next_onset).find_map(|j| {
        (x[j] >= level && level > x[j + 1]).then(|| j as f64 + (x[j] - level) / (x[j] - x[j + 1]))
    })
}

/// Morphology features of one beat. `x` and `der` share the fiducials' index space.
pub fn mor_features_per_beat(
    f: &FiducialSet,
    x: &[f64],
    der: &Derivatives,
    fs: f64,
) -> FeatureValues {
    let names = FeatureCatalog::mor_names();
    let mut out = FeatureValues::missing(names);
    let on = f.onset;
    let base = x[on];
    let amp = |i: usize| x[i] - base;
    let t = |i: usize| (i - on) as f64 / fs;
    let between = |from: Option<usize>, to: Option<usize>| match (from, to) {
        (Some(a), Some(b)) if b >= a => Some((b - a) as f64 / fs),
        _ => None,
    };

    let t_pi = (f.next_onset - on) as f64 / fs;
    let t_sp = t(f.sp);
    out.set("T_pi", Some(t_pi));
    out.set("T_sp", Some(t_sp));
    for (name, idx) in [
        ("T_a", f.a),
        ("T_b", f.b),
        ("T_c", f.c),
        ("T_d", f.d),
        ("T_e", f.e),
        ("T_dn", f.dn),
        ("T_dp", f.dp),
        ("T_u", f.u),
        ("T_v", f.v),
        ("T_w", f.w),
        ("T_p1", f.p1),
        ("T_p2", f.p2),
    ] {
        out.set(name, idx.map(t));
    }
    out.set("T_b-d", between(f.b, f.d));
    out.set("T_c-e", between(f.c, f.e));
    out.set("T_sp-dn", between(Some(f.sp), f.dn));
    out.set("T_dn-dp", between(f.dn, f.dp));

    let a_sp = amp(f.sp);
    if a_sp > 0.0 {
        for level in WIDTH_LEVELS {
            let y = base + a_sp * level as f64 / 100.0;
            let sw = rising_crossing(x, on, f.sp, y).map(|c| (f.sp as f64 - c) / fs);
            let dw = falling_crossing(x, f.sp, f.next_onset, y).map(|c| (c - f.sp as f64) / fs);
            out.set(&format!("T_sw{level}"), sw);
            out.set(&format!("T_dw{level}"), dw);
            if let (Some(sw), Some(dw)) = (sw, dw) {
                out.set(&format!("T_dw{level}/T_sw{level}"), ratio(dw, sw));
                out.set(&format!("T_pw{level}/T_pi"), ratio(sw + dw, t_pi));
            }
        }
    }

    if let (Some(p1), Some(p2)) = (f.p1, f.p2) {
        out.set("A_p2/A_p1", ratio(amp(p2), amp(p1)));
        out.set("AI", ratio(x[p2] - x[p1], a_sp));
    }
    out.set("A_dn/A_sp", f.dn.and_then(|i| ratio(amp(i), a_sp)));
    out.set("A_dp/A_sp", f.dp.and_then(|i| ratio(amp(i), a_sp)));

    let d2 = &der.d2;
    if let Some(a) = f.a {
        let da = d2[a];
        out.set("b/a", f.b.and_then(|i| ratio(d2[i], da)));
        out.set("c/a", f.c.and_then(|i| ratio(d2[i], da)));
        out.set("d/a", f.d.and_then(|i| ratio(d2[i], da)));
        out.set("e/a", f.e.and_then(|i| ratio(d2[i], da)));
        if let (Some(b), Some(c), Some(d), Some(e)) = (f.b, f.c, f.d, f.e) {
            out.set("AGI", ratio(d2[b] - d2[c] - d2[d] - d2[e], da));
        }
    }

    out.set("S_rise", ratio(a_sp, t_sp));
    let area = |from: usize, to: usize| (from..to).map(|i| x[i] - base).sum::<f64>() / fs;
    out.set("Area_pulse", Some(area(on, f.next_onset)));
    if let Some(dn) = f.dn {
        let sys = area(on, dn);
        let dia = area(dn, f.next_onset);
        out.set("Area_sys", Some(sys));
        out.set("Area_dia", Some(dia));
        out.set("IPA", ratio(dia, sys));
    }
    out
}

/// Mean over beats of each feature, ignoring beats where it is missing.
pub fn aggregate_window_mor(per_beat: &[FeatureValues]) -> FeatureValues {
    let names = FeatureCatalog::mor_names();
    let mut out = FeatureValues::missing(names);
    for col in 0..out.values.len() {
        let present: Vec<f64> = per_beat.iter().filter_map(|b| b.values[col]).collect();
        if !present.is_empty() {
            out.values[col] = Some(present.iter().sum::<f64>() / present.len() as f64);
        }
    }
    out
}
