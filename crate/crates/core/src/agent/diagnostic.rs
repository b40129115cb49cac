//! The agent's structured diagnostic and its hyperparameter recommendations.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};

use crate::dr::{parse_param, DrConfig, Warning};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Priority {
    High,
    Medium,
    Low,
}

impl<'de> Deserialize<'de> for Priority {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        match s.trim().to_ascii_lowercase().as_str() {
            "high" => Ok(Self::High),
            "medium" => Ok(Self::Medium),
            "low" => Ok(Self::Low),
            _ => Err(D::Error::custom(format!(
                "priority `{s}` is not one of high, medium, low"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AgreementLevel {
    Low,
    Moderate,
    High,
}

impl<'de> Deserialize<'de> for AgreementLevel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        match s.trim().to_ascii_lowercase().as_str() {
            "low" => Ok(Self::Low),
            "moderate" => Ok(Self::Moderate),
            "high" => Ok(Self::High),
            _ => Err(D::Error::custom(format!(
                "agreement_level `{s}` is not one of low, moderate, high"
            ))),
        }
    }
}

impl fmt::Display for AgreementLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Low => "low",
            Self::Moderate => "moderate",
            Self::High => "high",
        })
    }
}

/// Accepts strings, numbers and booleans as text.
fn lenient_string<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<String, D::Error> {
    match Value::deserialize(d)? {
        Value::String(s) => Ok(s),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        Value::Null => Ok(String::new()),
        other => Err(D::Error::custom(format!("expected text, got {other}"))),
    }
}

fn lenient_strings<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<String>, D::Error> {
    let items = match Value::deserialize(d)? {
        Value::Null => return Ok(Vec::new()),
        Value::Array(items) => items,
        single => vec![single],
    };
    Ok(items
        .into_iter()
        .map(|v| match v {
            Value::String(s) => s,
            other => other.to_string(),
        })
        .collect())
}

fn lenient_score<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    match Value::deserialize(d)? {
        Value::Number(n) => n
            .as_f64()
            .ok_or_else(|| D::Error::custom("quality_score is not a number")),
        Value::String(s) => s
            .trim()
            .parse()
            .map_err(|_| D::Error::custom(format!("quality_score `{s}` is not a number"))),
        other => Err(D::Error::custom(format!(
            "quality_score must be a number, got {other}"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    /// Possibly dotted, e.g. `tsne.perplexity`.
    pub parameter: String,
    #[serde(default, deserialize_with = "lenient_string")]
    pub current_value: String,
    #[serde(deserialize_with = "lenient_string")]
    pub suggested_value: String,
    #[serde(default, deserialize_with = "lenient_string")]
    pub rationale: String,
    #[serde(default, deserialize_with = "lenient_string")]
    pub expected_impact: String,
    #[serde(default = "default_priority")]
    pub priority: Priority,
}

fn default_priority() -> Priority {
    Priority::Medium
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OverallAssessment {
    #[serde(default, deserialize_with = "lenient_strings")]
    pub key_strengths: Vec<String>,
    #[serde(default, deserialize_with = "lenient_strings")]
    pub key_weaknesses: Vec<String>,
    #[serde(default)]
    pub metric_analysis: Value,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DendrogramComparison {
    #[serde(default)]
    pub agreement_level: Option<AgreementLevel>,
    #[serde(default, deserialize_with = "lenient_strings")]
    pub key_similarities: Vec<String>,
    #[serde(default, deserialize_with = "lenient_strings")]
    pub key_differences: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VisualInspection {
    #[serde(default, deserialize_with = "lenient_string")]
    pub cluster_separation: String,
    #[serde(default, deserialize_with = "lenient_string")]
    pub cluster_compactness: String,
    #[serde(default, deserialize_with = "lenient_strings")]
    pub notable_patterns: Vec<String>,
    #[serde(default, deserialize_with = "lenient_strings")]
    pub artifacts: Vec<String>,
}

/// One agent verdict. An empty `recommendations` list means "no further
/// changes".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    /// In `[0, 10]`.
    #[serde(deserialize_with = "lenient_score")]
    pub quality_score: f64,
    #[serde(default, deserialize_with = "lenient_string")]
    pub score_rationale: String,
    #[serde(default)]
    pub overall_assessment: OverallAssessment,
    #[serde(default)]
    pub dendrogram_comparison: DendrogramComparison,
    #[serde(default)]
    pub visual_inspection: VisualInspection,
    pub recommendations: Vec<Recommendation>,
    #[serde(default, deserialize_with = "lenient_strings")]
    pub follow_up_metrics: Vec<String>,
    /// Fields outside the schema, kept verbatim.
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl DiagnosticReport {
    /// Parses without consulting any configuration. Tolerates code fences,
    /// `...` placeholders and trailing commas.
    pub fn from_json(raw: &str) -> Result<Self> {
        let report: Self = match serde_json::from_str(raw) {
            Ok(r) => r,
            Err(strict) => {
                let repaired = repair_json(raw);
                serde_json::from_str(&repaired).map_err(|e| {
                    Error::Diagnostic(if repaired.trim() == raw.trim() {
                        strict.to_string()
                    } else {
                        format!("{e} (after repair; original error: {strict})")
                    })
                })?
            }
        };
        if !report.quality_score.is_finite() || !(0.0..=10.0).contains(&report.quality_score) {
            return Err(Error::Diagnostic(format!(
                "quality_score {} is outside [0, 10]",
                report.quality_score
            )));
        }
        Ok(report)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("diagnostic serializes")
    }
}

/// A diagnostic checked against the active configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedDiagnostic {
    pub report: DiagnosticReport,
    pub warnings: Vec<Warning>,
}

/// Parses `raw` and validates every recommendation against `config`:
/// out-of-bounds suggestions are clamped to the nearest bound, unknown
/// parameters and unparseable values are kept but flagged.
pub fn parse_diagnostic(raw: &str, config: &DrConfig) -> Result<ValidatedDiagnostic> {
    let report = DiagnosticReport::from_json(raw)?;
    Ok(validate_against(report, config))
}

pub fn validate_against(mut report: DiagnosticReport, config: &DrConfig) -> ValidatedDiagnostic {
    let mut warnings = Vec::new();
    for rec in &mut report.recommendations {
        let Some(key) = config.resolve_param(&rec.parameter) else {
            warnings.push(format!(
                "`{}` is not a parameter of {}, recommendation will be skipped",
                rec.parameter, config.method
            ));
            continue;
        };
        let value = match parse_param(key, rec.suggested_value.trim()) {
            Ok(v) => v,
            Err(e) => {
                warnings.push(format!(
                    "`{}`: {e}, recommendation will be skipped",
                    rec.parameter
                ));
                continue;
            }
        };
        let (clamped, warning) = config.clamped(key, value);
        if let Some(w) = warning {
            rec.suggested_value = clamped.to_string();
            warnings.push(w);
        }
    }
    ValidatedDiagnostic { report, warnings }
}

/// Best-effort cleanup of near-JSON model output: keeps the outermost
/// object, drops `...`/`…` placeholders and trailing commas. String
/// contents are never touched.
pub fn repair_json(raw: &str) -> String {
    let body = match (raw.find('{'), raw.rfind('}')) {
        (Some(a), Some(b)) if a < b => &raw[a..=b],
        _ => raw,
    };
    let mut out = String::with_capacity(body.len());
    let mut chars = body.chars().peekable();
    let mut in_string = false;
    let mut escaped = false;
    while let Some(c) = chars.next() {
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        match c {
            '"' => {
                in_string = true;
                out.push(c);
            }
            '…' => {}
            '.' if chars.peek() == Some(&'.') => {
                while chars.peek() == Some(&'.') {
                    chars.next();
                }
            }
            '}' | ']' => {
                let trimmed = out.trim_end().len();
                if out[..trimmed].ends_with(',') {
                    out.truncate(trimmed - 1);
                }
                out.push(c);
            }
            ',' => {
                // collapses the comma pairs left behind by removed placeholders
                let trimmed = out.trim_end();
                if !trimmed.ends_with(',') && !trimmed.ends_with('{') && !trimmed.ends_with('[') {
                    out.push(c);
                }
            }
            _ => out.push(c),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SAMPLE_DIAGNOSTIC: &str = r#"{
  "quality_score": 6.0,
  "score_rationale": "Excellent local neighbor preservation but poor global structure...",
  "overall_assessment": {
    "key_strengths": ["High local fidelity"],
    "key_weaknesses": ["Global structure distortion"],
    "metric_analysis": { ... }
  },
  "dendrogram_comparison": {
    "agreement_level": "moderate",
    "key_differences": ["MNP relocated toward endothelial block..."]
  },
  "visual_inspection": {
    "artifacts": ["Large amorphous Proximal Tubule island"]
  },
  "recommendations": [
    {
      "parameter": "tsne.perplexity",
      "current_value": "30.0",
      "suggested_value": "80",
      "rationale": "Larger perplexity increases the effective neighborhood size...",
      "expected_impact": "Reduce Stress-1; more coherent macro-branches.",
      "priority": "high"
    },
    ...
  ],
  "follow_up_metrics": [ ... ]
}"#;

    #[test]
    fn sample_with_placeholders_parses_after_repair() {
        let r = DiagnosticReport::from_json(SAMPLE_DIAGNOSTIC).unwrap();
        assert_eq!(r.quality_score, 6.0);
        assert_eq!(r.recommendations.len(), 1);
        let rec = &r.recommendations[0];
        assert_eq!(rec.parameter, "tsne.perplexity");
        assert_eq!(rec.current_value, "30.0");
        assert_eq!(rec.suggested_value, "80");
        assert_eq!(rec.priority, Priority::High);
        assert_eq!(
            r.dendrogram_comparison.agreement_level,
            Some(AgreementLevel::Moderate)
        );
        assert!(r.score_rationale.ends_with("structure..."));
        assert!(r.follow_up_metrics.is_empty());
    }

    #[test]
    fn minimal_report_with_empty_recommendations() {
        let r = DiagnosticReport::from_json(r#"{"quality_score": 7.0, "recommendations": []}"#)
            .unwrap();
        assert!(r.recommendations.is_empty());
    }

    #[test]
    fn required_fields_and_range() {
        assert!(DiagnosticReport::from_json(r#"{"recommendations": []}"#).is_err());
        assert!(DiagnosticReport::from_json(r#"{"quality_score": 5}"#).is_err());
        assert!(
            DiagnosticReport::from_json(r#"{"quality_score": 10.5, "recommendations": []}"#)
                .is_err()
        );
        assert!(
            DiagnosticReport::from_json(r#"{"quality_score": -1, "recommendations": []}"#).is_err()
        );
        assert!(DiagnosticReport::from_json("not json at all").is_err());
    }

    #[test]
    fn lenient_scalars_and_case() {
        let raw = r#"```json
{"quality_score": "8.5", "recommendations": [
  {"parameter": "perplexity", "current_value": 30.0, "suggested_value": 45, "priority": "HIGH"},
],
 "dendrogram_comparison": {"agreement_level": "High"}}
```"#;
        let r = DiagnosticReport::from_json(raw).unwrap();
        assert_eq!(r.quality_score, 8.5);
        assert_eq!(r.recommendations[0].current_value, "30.0");
        assert_eq!(r.recommendations[0].suggested_value, "45");
        assert_eq!(r.recommendations[0].priority, Priority::High);
        assert_eq!(
            r.dendrogram_comparison.agreement_level,
            Some(AgreementLevel::High)
        );
    }

    #[test]
    fn unknown_fields_survive_round_trip() {
        let raw = r#"{"quality_score": 4.0, "recommendations": [], "confidence": {"level": 3}}"#;
        let r = DiagnosticReport::from_json(raw).unwrap();
        assert_eq!(r.extra["confidence"]["level"], 3);
        assert_eq!(DiagnosticReport::from_json(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn repair_leaves_strings_alone() {
        let raw = r#"{"a": "x, ...]", "b": [1, 2, ], ...}"#;
        let v: Value = serde_json::from_str(&repair_json(raw)).unwrap();
        assert_eq!(v["a"], "x, ...]");
        assert_eq!(v["b"], serde_json::json!([1, 2]));
    }

    #[test]
    fn clamps_out_of_bounds_suggestion() {
        let config = DrConfig::tsne(1000, 50);
        let raw = r#"{"quality_score": 5.0, "recommendations": [
            {"parameter": "tsne.perplexity", "current_value": "30.0", "suggested_value": "10000"}]}"#;
        let v = parse_diagnostic(raw, &config).unwrap();
        assert_eq!(v.report.recommendations[0].suggested_value, "100.0");
        assert_eq!(v.warnings.len(), 1);
        assert!(v.warnings[0].contains("clamped"), "{}", v.warnings[0]);
    }

    #[test]
    fn flags_unknown_parameter() {
        let config = DrConfig::tsne(1000, 50);
        let raw = r#"{"quality_score": 5.0, "recommendations": [
            {"parameter": "umap.min_dist", "suggested_value": "0.5"}]}"#;
        let v = parse_diagnostic(raw, &config).unwrap();
        assert_eq!(v.warnings.len(), 1);
        assert!(v.warnings[0].contains("skipped"));
    }
}
