//! Weighted composite of normalized metrics (explicit scoring).

use std::collections::BTreeMap;
use std::fmt;

use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::metrics::MetricsReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScoredMetric {
    Trustworthiness,
    SilhouetteScore,
    SpearmanCorrelation,
    Stress1,
    LofMedian,
}

impl ScoredMetric {
    pub const ALL: [ScoredMetric; 5] = [
        Self::Trustworthiness,
        Self::SilhouetteScore,
        Self::SpearmanCorrelation,
        Self::Stress1,
        Self::LofMedian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Trustworthiness => "Trustworthiness",
            Self::SilhouetteScore => "Silhouette Score",
            Self::SpearmanCorrelation => "Spearman Correlation",
            Self::Stress1 => "Stress-1",
            Self::LofMedian => "LOF Median",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    /// Maps the raw metric to `[0, 1]`, higher is better. `None` when the
    /// report lacks the metric.
    pub fn normalized(self, report: &MetricsReport) -> Option<f64> {
        Some(match self {
            Self::Trustworthiness => report.trustworthiness.value.clamp(0.0, 1.0),
            Self::SilhouetteScore => ((report.silhouette? + 1.0) / 2.0).clamp(0.0, 1.0),
            Self::SpearmanCorrelation => ((report.spearman + 1.0) / 2.0).clamp(0.0, 1.0),
            Self::Stress1 => 1.0 - report.stress.min(1.0),
            Self::LofMedian => 1.0 - (report.lof.median - 1.0).abs().min(1.0),
        })
    }
}

impl fmt::Display for ScoredMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Nonnegative weights over [`ScoredMetric`]s summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: BTreeMap<ScoredMetric, f64>,
}

pub const PRESET_NAMES: [&str; 3] = ["gpt-5.2", "claude-opus-4-5", "gemini-3-pro-preview"];

impl WeightVector {
    pub fn new(weights: BTreeMap<ScoredMetric, f64>) -> Result<Self> {
        for (m, &w) in &weights {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidArgument(format!(
                    "weight for {m} is {w}, expected [0, 1]"
                )));
            }
        }
        let sum: f64 = weights.values().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(Self { weights })
    }

    /// Scales nonnegative raw weights to sum to one.
    pub fn normalized(raw: BTreeMap<ScoredMetric, f64>) -> Result<Self> {
        let sum: f64 = raw.values().sum();
        if sum.is_nan() || sum <= 0.0 || raw.values().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidArgument(
                "weights must be nonnegative with a positive sum".into(),
            ));
        }
        Ok(Self {
            weights: raw.into_iter().map(|(m, w)| (m, w / sum)).collect(),
        })
    }

    fn from_pairs(pairs: [(ScoredMetric, f64); 5]) -> Self {
        Self::new(pairs.into_iter().collect()).expect("preset weights are valid")
    }

    /// Named weight presets.
    pub fn preset(name: &str) -> Option<Self> {
        use ScoredMetric::*;
        Some(match name {
            "gpt-5.2" => Self::from_pairs([
                (Trustworthiness, 0.30),
                (SilhouetteScore, 0.30),
                (SpearmanCorrelation, 0.20),
                (Stress1, 0.15),
                (LofMedian, 0.05),
            ]),
            "claude-opus-4-5" => Self::from_pairs([
                (Trustworthiness, 0.20),
                (SilhouetteScore, 0.35),
                (SpearmanCorrelation, 0.15),
                (Stress1, 0.10),
                (LofMedian, 0.20),
            ]),
            "gemini-3-pro-preview" => Self::from_pairs([
                (Trustworthiness, 0.25),
                (SilhouetteScore, 0.25),
                (SpearmanCorrelation, 0.20),
                (Stress1, 0.15),
                (LofMedian, 0.15),
            ]),
            _ => return None,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn get(&self, metric: ScoredMetric) -> f64 {
        self.weights.get(&metric).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ScoredMetric, f64)> + '_ {
        self.weights.iter().map(|(m, w)| (*m, *w))
    }

    pub fn sum(&self) -> f64 {
        self.weights.values().sum()
    }
}

impl Serialize for WeightVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.weights.len()))?;
        for (m, w) in &self.weights {
            map.serialize_entry(m.name(), w)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for WeightVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = BTreeMap::<String, f64>::deserialize(d)?;
        let mut weights = BTreeMap::new();
        for (name, w) in raw {
            let m = ScoredMetric::from_name(&name).ok_or_else(|| {
                D::Error::custom(format!(
                    "unknown metric `{name}`, expected one of: {}",
                    ScoredMetric::ALL.map(ScoredMetric::name).join(", ")
                ))
            })?;
            weights.insert(m, w);
        }
        WeightVector::new(weights).map_err(D::Error::custom)
    }
}

/// `Σ w_i · Õ_i` over normalized metrics. When the silhouette is absent its
/// weight is spread over the remaining metrics in proportion to theirs.
pub fn explicit_composite_score(report: &MetricsReport, weights: &WeightVector) -> f64 {
    let mut total = 0.0;
    let mut used = 0.0;
    for (m, w) in weights.iter() {
        if let Some(v) = m.normalized(report) {
            total += w * v;
            used += w;
        } else if w > 0.0 {
            log::info!("{m} unavailable, redistributing its weight {w}");
        }
    }
    if used <= 0.0 {
        return 0.0;
    }
    (total / used).clamp(0.0, 1.0)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::metrics::{KScore, LofSummary};

    pub(crate) fn report(
        t: f64,
        sil: Option<f64>,
        rho: f64,
        stress: f64,
        lof: f64,
    ) -> MetricsReport {
        MetricsReport {
            n: 10,
            spearman: rho,
            stress,
            mean_distance_ratio: 1.0,
            trustworthiness: KScore { k: 10, value: t },
            continuity: KScore { k: 10, value: t },
            silhouette: sil,
            lof: LofSummary {
                k: 20,
                median: lof,
                threshold: 1.5,
                outlier_count: 0,
            },
            label_summary: vec![],
            centroids_2d: vec![],
            follow_up: vec![],
            subsample: None,
        }
    }

    #[test]
    fn presets_sum_to_one() {
        for name in PRESET_NAMES {
            let w = WeightVector::preset(name).unwrap();
            assert_eq!(w.sum(), 1.0, "{name}");
        }
        assert_eq!(
            WeightVector::preset("gpt-5.2")
                .unwrap()
                .get(ScoredMetric::Trustworthiness),
            0.30
        );
        assert!(WeightVector::preset("gpt-4").is_none());
    }

    #[test]
    fn perfect_report_scores_one() {
        let r = report(1.0, Some(1.0), 1.0, 0.0, 1.0);
        for name in PRESET_NAMES {
            assert_eq!(
                explicit_composite_score(&r, &WeightVector::preset(name).unwrap()),
                1.0
            );
        }
    }

    #[test]
    fn mixed_report_hand_value() {
        // normalized: T .9, sil .6, rho .8, stress .6, lof .9
        // .25*.9 + .25*.6 + .20*.8 + .15*.6 + .15*.9 = 0.76
        let r = report(0.9, Some(0.2), 0.6, 0.4, 1.1);
        let s =
            explicit_composite_score(&r, &WeightVector::preset("gemini-3-pro-preview").unwrap());
        assert!((s - 0.76).abs() < 1e-9, "{s}");
    }

    #[test]
    fn absent_silhouette_redistributes() {
        let r = report(0.9, None, 0.6, 0.4, 1.1);
        let s = explicit_composite_score(&r, &WeightVector::preset("gpt-5.2").unwrap());
        // (.30*.9 + .20*.8 + .15*.6 + .05*.9) / .70
        let expect = (0.27 + 0.16 + 0.09 + 0.045) / 0.70;
        assert!((s - expect).abs() < 1e-12);
    }

    #[test]
    fn json_weights() {
        let w = WeightVector::from_json(r#"{"Trustworthiness": 0.5, "Stress-1": 0.5}"#).unwrap();
        assert_eq!(w.get(ScoredMetric::Stress1), 0.5);
        assert!(WeightVector::from_json(r#"{"Trustworthiness": 0.5}"#).is_err());
        assert!(WeightVector::from_json(r#"{"Accuracy": 1.0}"#).is_err());
        let s = serde_json::to_string(&WeightVector::preset("gpt-5.2").unwrap()).unwrap();
        assert!(
            s.starts_with(r#"{"Trustworthiness":0.3,"Silhouette Score":0.3"#),
            "{s}"
        );
    }
}
