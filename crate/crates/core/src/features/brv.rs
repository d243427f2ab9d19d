use crate::stats::{mean, percentile, sample_sd};

use super::catalog::FeatureCatalog;
use super::FeatureValues;

/// Beat-rate-variability features from inter-beat intervals in seconds.
/// Fewer than three intervals leaves every feature missing.
pub fn brv_features(intervals: &[f64]) -> FeatureValues {
    let mut out = FeatureValues::missing(FeatureCatalog::brv_names());
    if intervals.len() < 3 {
        return out;
    }
    let diffs: Vec<f64> = intervals.windows(2).map(|w| w[1] - w[0]).collect();
    let pp_mean = mean(intervals).unwrap();
    let sdpp = sample_sd(intervals).unwrap();
    let rmssd = (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt();
    let frac_above =
        |thr: f64| diffs.iter().filter(|d| d.abs() > thr).count() as f64 / diffs.len() as f64;
    let pp_min = intervals.iter().copied().fold(f64::INFINITY, f64::min);
    let pp_max = intervals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rates: Vec<f64> = intervals.iter().map(|p| 60.0 / p).collect();

    let s = std::f64::consts::SQRT_2;
    let minor: Vec<f64> = intervals.windows(2).map(|w| (w[0] - w[1]) / s).collect();
    let major: Vec<f64> = intervals.windows(2).map(|w| (w[0] + w[1]) / s).collect();
    let sd1 = sample_sd(&minor).unwrap();
    let sd2 = sample_sd(&major).unwrap();

    out.set("PP_mean", Some(pp_mean));
    out.set("PP_median", percentile(intervals, 0.5));
    out.set("SDPP", Some(sdpp));
    out.set("RMSSD", Some(rmssd));
    out.set("pPP50", Some(frac_above(0.050)));
    out.set("pPP20", Some(frac_above(0.020)));
    out.set("CV_PP", (pp_mean > 0.0).then(|| sdpp / pp_mean));
    out.set("PP_min", Some(pp_min));
    out.set("PP_max", Some(pp_max));
    out.set("PP_range", Some(pp_max - pp_min));
    out.set(
        "PP_IQR",
        Some(percentile(intervals, 0.75).unwrap() - percentile(intervals, 0.25).unwrap()),
    );
    out.set("BR_mean", Some(60.0 / pp_mean));
    out.set("BR_sd", sample_sd(&rates));
    out.set("SD1", Some(sd1));
    out.set("SD2", Some(sd2));
    out.set("SD1/SD2", (sd2 > 0.0).then(|| sd1 / sd2));
    out.set(
        "MASD",
        Some(diffs.iter().map(|d| d.abs()).sum::<f64>() / diffs.len() as f64),
    );
    out
}
