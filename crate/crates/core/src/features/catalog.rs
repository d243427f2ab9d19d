use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

pub const CATALOG_VERSION: &str = "1";

/// Feature family. `All` selects every column and never labels a descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Family {
    Mor,
    Brv,
    Meta,
    All,
}

impl Family {
    pub const EVALUATED: [Family; 4] = [Family::Mor, Family::Brv, Family::Meta, Family::All];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Mor => "MOR",
            Family::Brv => "BRV",
            Family::Meta => "META",
            Family::All => "ALL",
        }
    }

    /// Whether a column of family `column` belongs to this selection.
    pub fn selects(self, column: Family) -> bool {
        self == Family::All || self == column
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "MOR" => Ok(Family::Mor),
            "BRV" => Ok(Family::Brv),
            "META" => Ok(Family::Meta),
            "ALL" => Ok(Family::All),
            _ => Err(format!(
                "unknown feature family {s:?} (expected MOR, BRV, META or ALL)"
            )),
        }
    }
}

/// How a feature responds to scaling the signal amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    /// Seconds (or a rate derived from seconds); independent of amplitude.
    Timing,
    /// Dimensionless ratio; independent of amplitude.
    Ratio,
    /// Scales with amplitude.
    Amplitude,
    /// Patient covariate.
    Demographic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub family: Family,
    pub unit: String,
    pub kind: FeatureKind,
    pub definition: String,
}

struct Spec(&'static str, &'static str, FeatureKind, &'static str);

use FeatureKind::{Amplitude, Demographic, Ratio, Timing};

const MOR_FIXED_HEAD: &[Spec] = &[
    Spec("T_pi", "s", Timing, "pulse interval, onset to next onset"),
    Spec("T_sp", "s", Timing, "onset to systolic peak"),
    Spec(
        "T_a",
        "s",
        Timing,
        "onset to a-point (first d2 maximum on the upstroke)",
    ),
    Spec(
        "T_b",
        "s",
        Timing,
        "onset to b-point (first d2 minimum after a)",
    ),
    Spec(
        "T_c",
        "s",
        Timing,
        "onset to c-point (next d2 maximum after b)",
    ),
    Spec(
        "T_d",
        "s",
        Timing,
        "onset to d-point (next d2 minimum after c)",
    ),
    Spec(
        "T_e",
        "s",
        Timing,
        "onset to e-point (next d2 maximum after d)",
    ),
    Spec("T_dn", "s", Timing, "onset to dicrotic notch"),
    Spec("T_dp", "s", Timing, "onset to diastolic peak"),
    Spec(
        "T_u",
        "s",
        Timing,
        "onset to u-point (d1 maximum on the upstroke)",
    ),
    Spec(
        "T_v",
        "s",
        Timing,
        "onset to v-point (d1 minimum after the systolic peak)",
    ),
    Spec(
        "T_w",
        "s",
        Timing,
        "onset to w-point (next d1 maximum after v)",
    ),
    Spec(
        "T_p1",
        "s",
        Timing,
        "onset to p1 (first d3 maximum after b)",
    ),
    Spec("T_p2", "s", Timing, "onset to p2 (at the d-point)"),
    Spec("T_b-d", "s", Timing, "b-point to d-point"),
    Spec("T_c-e", "s", Timing, "c-point to e-point"),
    Spec("T_sp-dn", "s", Timing, "systolic peak to dicrotic notch"),
    Spec("T_dn-dp", "s", Timing, "dicrotic notch to diastolic peak"),
];

/// Pulse-amplitude fractions at which widths are measured.
pub const WIDTH_LEVELS: [u32; 6] = [10, 25, 33, 50, 66, 75];

const MOR_FIXED_TAIL: &[Spec] = &[
    Spec(
        "A_p2/A_p1",
        "ratio",
        Ratio,
        "(y(p2) - y(onset)) / (y(p1) - y(onset))",
    ),
    Spec(
        "A_dn/A_sp",
        "ratio",
        Ratio,
        "(y(dn) - y(onset)) / (y(sp) - y(onset))",
    ),
    Spec(
        "A_dp/A_sp",
        "ratio",
        Ratio,
        "(y(dp) - y(onset)) / (y(sp) - y(onset))",
    ),
    Spec(
        "AI",
        "ratio",
        Ratio,
        "augmentation index (y(p2) - y(p1)) / (y(sp) - y(onset))",
    ),
    Spec("b/a", "ratio", Ratio, "d2(b) / d2(a)"),
    Spec("c/a", "ratio", Ratio, "d2(c) / d2(a)"),
    Spec("d/a", "ratio", Ratio, "d2(d) / d2(a)"),
    Spec("e/a", "ratio", Ratio, "d2(e) / d2(a)"),
    Spec(
        "AGI",
        "ratio",
        Ratio,
        "aging index (d2(b) - d2(c) - d2(d) - d2(e)) / d2(a)",
    ),
    Spec("S_rise", "au/s", Amplitude, "(y(sp) - y(onset)) / T_sp"),
    Spec(
        "Area_pulse",
        "au*s",
        Amplitude,
        "area above the onset level, onset to next onset",
    ),
    Spec(
        "Area_sys",
        "au*s",
        Amplitude,
        "area above the onset level, onset to dicrotic notch",
    ),
    Spec(
        "Area_dia",
        "au*s",
        Amplitude,
        "area above the onset level, dicrotic notch to next onset",
    ),
    Spec(
        "IPA",
        "ratio",
        Ratio,
        "inflection point area ratio Area_dia / Area_sys",
    ),
];

const BRV_SPECS: &[Spec] = &[
    Spec(
        "PP_mean",
        "s",
        Timing,
        "mean peak-to-peak interval (onset-to-onset intervals are used)",
    ),
    Spec("PP_median", "s", Timing, "median interval"),
    Spec(
        "SDPP",
        "s",
        Timing,
        "sample standard deviation of intervals",
    ),
    Spec(
        "RMSSD",
        "s",
        Timing,
        "root mean square of successive interval differences",
    ),
    Spec(
        "pPP50",
        "ratio",
        Ratio,
        "fraction of successive differences larger than 50 ms",
    ),
    Spec(
        "pPP20",
        "ratio",
        Ratio,
        "fraction of successive differences larger than 20 ms",
    ),
    Spec("CV_PP", "ratio", Ratio, "SDPP / PP_mean"),
    Spec("PP_min", "s", Timing, "shortest interval"),
    Spec("PP_max", "s", Timing, "longest interval"),
    Spec("PP_range", "s", Timing, "PP_max - PP_min"),
    Spec("PP_IQR", "s", Timing, "interquartile range of intervals"),
    Spec("BR_mean", "bpm", Timing, "mean beating rate, 60 / PP_mean"),
    Spec(
        "BR_sd",
        "bpm",
        Timing,
        "sample standard deviation of instantaneous rates 60 / PP_i",
    ),
    Spec(
        "SD1",
        "s",
        Timing,
        "Poincare short-axis spread, sd of (PP_i - PP_i+1) / sqrt 2",
    ),
    Spec(
        "SD2",
        "s",
        Timing,
        "Poincare long-axis spread, sd of (PP_i + PP_i+1) / sqrt 2",
    ),
    Spec("SD1/SD2", "ratio", Ratio, "SD1 / SD2"),
    Spec("MASD", "s", Timing, "mean absolute successive difference"),
];

const META_SPECS: &[Spec] = &[
    Spec("Age", "year", Demographic, "age of the patient"),
    Spec("Sex", "binary", Demographic, "male 1, female 0"),
];

fn descriptor(s: &Spec, family: Family) -> FeatureDescriptor {
    FeatureDescriptor {
        name: s.0.to_string(),
        family,
        unit: s.1.to_string(),
        kind: s.2,
        definition: s.3.to_string(),
    }
}

fn mor_descriptors() -> Vec<FeatureDescriptor> {
    let mut out: Vec<_> = MOR_FIXED_HEAD
        .iter()
        .map(|s| descriptor(s, Family::Mor))
        .collect();
    let width = |name: String, unit: &str, kind, definition: String| FeatureDescriptor {
        name,
        family: Family::Mor,
        unit: unit.into(),
        kind,
        definition,
    };
    for x in WIDTH_LEVELS {
        out.push(width(
            format!("T_sw{x}"),
            "s",
            Timing,
            format!("systolic width at {x}% of pulse amplitude"),
        ));
    }
    for x in WIDTH_LEVELS {
        out.push(width(
            format!("T_dw{x}"),
            "s",
            Timing,
            format!("diastolic width at {x}% of pulse amplitude"),
        ));
    }
    for x in WIDTH_LEVELS {
        out.push(width(
            format!("T_dw{x}/T_sw{x}"),
            "ratio",
            Ratio,
            format!("diastolic over systolic width at {x}%"),
        ));
    }
    for x in WIDTH_LEVELS {
        out.push(width(
            format!("T_pw{x}/T_pi"),
            "ratio",
            Ratio,
            format!("pulse width at {x}% over pulse interval"),
        ));
    }
    out.extend(MOR_FIXED_TAIL.iter().map(|s| descriptor(s, Family::Mor)));
    out
}

/// Ordered feature descriptors: MOR, then BRV, then META.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCatalog {
    pub version: String,
    pub features: Vec<FeatureDescriptor>,
}

impl FeatureCatalog {
    pub fn standard() -> Self {
        let mut features = mor_descriptors();
        features.extend(BRV_SPECS.iter().map(|s| descriptor(s, Family::Brv)));
        features.extend(META_SPECS.iter().map(|s| descriptor(s, Family::Meta)));
        FeatureCatalog {
            version: CATALOG_VERSION.to_string(),
            features,
        }
    }

    pub fn mor_names() -> &'static [String] {
        static NAMES: OnceLock<Vec<String>> = OnceLock::new();
        NAMES.get_or_init(|| mor_descriptors().into_iter().map(|d| d.name).collect())
    }

    pub fn brv_names() -> &'static [String] {
        static NAMES: OnceLock<Vec<String>> = OnceLock::new();
        NAMES.get_or_init(|| BRV_SPECS.iter().map(|s| s.0.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn count(&self, family: Family) -> usize {
        self.features
            .iter()
            .filter(|f| family.selects(f.family))
            .count()
    }

    /// Column indices selected by `family`, in catalog order.
    pub fn columns(&self, family: Family) -> Vec<usize> {
        (0..self.features.len())
            .filter(|&i| family.selects(self.features[i].family))
            .collect()
    }

    /// Catalog restricted to `names`, in the order given.
    pub fn subset_by_names(&self, names: &[String]) -> Result<FeatureCatalog, String> {
        let features = names
            .iter()
            .map(|n| {
                self.index_of(n)
                    .map(|i| self.features[i].clone())
                    .ok_or_else(|| format!("unknown feature column {n:?}"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(format!("duplicate feature column {dup:?}"));
        }
        Ok(FeatureCatalog {
            version: self.version.clone(),
            features,
        })
    }

    /// Reference listing shipped with the crate as `catalog.csv`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("name,family,unit,kind,definition\n");
        for f in &self.features {
            let kind = match f.kind {
                Timing => "timing",
                Ratio => "ratio",
                Amplitude => "amplitude",
                Demographic => "demographic",
            };
            s.push_str(&format!(
                "{},{},{},{},\"{}\"\n",
                f.name, f.family, f.unit, kind, f.definition
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_shape() {
        let c = FeatureCatalog::standard();
        assert!(c.count(Family::Mor) >= 40);
        assert_eq!(c.count(Family::Brv), 17);
        assert_eq!(c.count(Family::Meta), 2);
        assert_eq!(c.count(Family::All), c.len());
        let mut names: Vec<&str> = c.names().collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), c.len());
        for top in [
            "Age",
            "T_a",
            "T_b",
            "T_c",
            "T_dw25/T_sw25",
            "RMSSD",
            "T_b-d",
            "A_p2/A_p1",
            "AI",
            "T_pw75/T_pi",
        ] {
            assert!(c.index_of(top).is_some(), "{top}");
        }
        assert_eq!(c.columns(Family::Meta).len(), 2);
    }

    #[test]
    fn shipped_catalog_file_is_current() {
        assert_eq!(
            include_str!("../../catalog.csv"),
            FeatureCatalog::standard().to_csv()
        );
    }

    #[test]
    fn family_parsing() {
        assert_eq!("all".parse::<Family>().unwrap(), Family::All);
        assert!("xyz".parse::<Family>().is_err());
    }
}
