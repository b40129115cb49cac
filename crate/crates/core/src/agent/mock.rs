//! Offline stand-in for the language model: scores with the explicit
//! composite and proposes one multiplicative coordinate step per iteration.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::composite::{explicit_composite_score, ScoredMetric, WeightVector};
use super::diagnostic::{
    AgreementLevel, DendrogramComparison, DiagnosticReport, OverallAssessment, Priority,
    Recommendation, VisualInspection,
};
use super::prompt::MasterPrompt;
use crate::dr::{param_kind, DrConfig, Method, ParamKind, ParamValue};
use crate::hierarchy::parse_newick;
use crate::metrics::{format_score, MetricsReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    fn reversed(self) -> Self {
        match self {
            Self::Up => Self::Down,
            Self::Down => Self::Up,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MockPolicy {
    /// Composite changes below this count as stationary.
    pub epsilon: f64,
    /// Multiplicative step size.
    pub factor: f64,
    /// A parameter is abandoned after this many direction reversals.
    pub max_reversals: usize,
}

impl Default for MockPolicy {
    fn default() -> Self {
        Self {
            epsilon: 0.005,
            factor: 1.5,
            max_reversals: 2,
        }
    }
}

/// What the mock saw and did at one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockStep {
    pub composite: f64,
    /// `None` once the policy has nothing left to try.
    pub parameter: Option<String>,
    pub direction: Direction,
    pub reversal: bool,
    pub stationary: bool,
}

/// Parameters the mock tunes, in visiting order.
pub fn tunable_parameters(method: &Method) -> &'static [&'static str] {
    match method {
        Method::Tsne => &["perplexity", "learning_rate"],
        Method::External(_) => &["n_neighbors", "min_dist"],
        Method::Pca => &[],
    }
}

/// `value` stepped once in `dir`, or `None` when bounds pin it in place.
fn stepped(config: &DrConfig, key: &str, dir: Direction, factor: f64) -> Option<ParamValue> {
    let v = config.get(key)?.as_f64()?;
    let raw = match dir {
        Direction::Up => v * factor,
        Direction::Down => v / factor,
    };
    let candidate = match param_kind(key) {
        Some(ParamKind::Int) => {
            let mut r = raw.round();
            if r == v {
                r = match dir {
                    Direction::Up => v + 1.0,
                    Direction::Down => v - 1.0,
                };
            }
            ParamValue::Int(r as i64)
        }
        _ => ParamValue::Float(raw),
    };
    let (clamped, _) = config.clamped(key, candidate);
    (clamped.as_f64() != Some(v)).then_some(clamped)
}

fn reversals(history: &[MockStep], key: &str) -> usize {
    history
        .iter()
        .filter(|s| s.reversal && s.parameter.as_deref() == Some(key))
        .count()
}

/// Chooses the next move as `(parameter, direction, reversal)`, plus
/// whether the score was stationary.
fn decide(
    composite: f64,
    history: &[MockStep],
    config: &DrConfig,
    policy: &MockPolicy,
) -> (Option<(String, Direction, bool)>, bool) {
    let cycle = tunable_parameters(&config.method);
    let usable = |k: &str| config.get(k).is_some() && reversals(history, k) < policy.max_reversals;
    // first movable parameter at or after cycle position `from`
    let fresh = |from: usize| {
        (0..cycle.len()).find_map(|off| {
            let key = cycle[(from + off) % cycle.len()];
            if !usable(key) {
                return None;
            }
            [Direction::Up, Direction::Down]
                .into_iter()
                .find(|&d| stepped(config, key, d, policy.factor).is_some())
                .map(|d| (key.to_string(), d, false))
        })
    };
    let Some(last) = history.last() else {
        return (fresh(0), false);
    };
    let Some(prev_key) = last.parameter.as_deref() else {
        return (None, false);
    };
    let delta = composite - last.composite;
    let next_pos = cycle
        .iter()
        .position(|k| *k == prev_key)
        .map_or(0, |p| p + 1);

    if delta.abs() < policy.epsilon {
        if last.stationary {
            return (None, true);
        }
        return (fresh(next_pos), true);
    }
    let (dir, reversal) = if delta > 0.0 {
        (last.direction, false)
    } else {
        (last.direction.reversed(), true)
    };
    if usable(prev_key) && stepped(config, prev_key, dir, policy.factor).is_some() {
        return (Some((prev_key.to_string(), dir, reversal)), false);
    }
    (fresh(next_pos), false)
}

fn agreement(prompt: &MasterPrompt) -> DendrogramComparison {
    let clade_sets =
        |e: &Option<super::prompt::HierarchyEntry>| -> Option<BTreeSet<BTreeSet<String>>> {
            let tree = parse_newick(&e.as_ref()?.newick).ok()?;
            let n = tree.leaves().len();
            Some(
                tree.clades()
                    .into_iter()
                    .map(|(c, _)| c)
                    .filter(|c| c.len() < n)
                    .collect(),
            )
        };
    let (Some(hd), Some(ld)) = (
        clade_sets(&prompt.hierarchy_hd),
        clade_sets(&prompt.hierarchy_2d),
    ) else {
        return DendrogramComparison::default();
    };
    let shared: Vec<_> = hd.intersection(&ld).collect();
    let union = hd.union(&ld).count();
    let jaccard = if union == 0 {
        1.0
    } else {
        shared.len() as f64 / union as f64
    };
    let level = if jaccard >= 0.75 {
        AgreementLevel::High
    } else if jaccard >= 0.4 {
        AgreementLevel::Moderate
    } else {
        AgreementLevel::Low
    };
    let show =
        |c: &BTreeSet<String>| format!("{{{}}}", c.iter().cloned().collect::<Vec<_>>().join(", "));
    DendrogramComparison {
        agreement_level: Some(level),
        key_similarities: shared
            .iter()
            .take(3)
            .map(|c| format!("shared clade {}", show(c)))
            .collect(),
        key_differences: hd
            .difference(&ld)
            .take(3)
            .map(|c| format!("clade {} not recovered in 2D", show(c)))
            .collect(),
    }
}

fn raw_value(metric: ScoredMetric, report: &MetricsReport) -> String {
    match metric {
        ScoredMetric::Trustworthiness => format_score(report.trustworthiness.value),
        ScoredMetric::SilhouetteScore => {
            report.silhouette.map_or_else(|| "N/A".into(), format_score)
        }
        ScoredMetric::SpearmanCorrelation => format_score(report.spearman),
        ScoredMetric::Stress1 => format_score(report.stress),
        ScoredMetric::LofMedian => format_score(report.lof.median),
    }
}

/// One deterministic policy step. Returns the diagnostic and the history
/// entry to append.
pub fn mock_agent_step(
    prompt: &MasterPrompt,
    report: &MetricsReport,
    config: &DrConfig,
    weights: &WeightVector,
    history: &[MockStep],
    policy: &MockPolicy,
) -> (DiagnosticReport, MockStep) {
    let composite = explicit_composite_score(report, weights);
    let (choice, stationary) = decide(composite, history, config, policy);

    let mut metric_analysis = Map::new();
    let mut strengths = Vec::new();
    let mut weaknesses = Vec::new();
    let mut terms = Vec::new();
    for (m, w) in weights.iter() {
        let norm = m.normalized(report);
        metric_analysis.insert(
            m.name().into(),
            json!({
                "value": raw_value(m, report),
                "normalized": norm.map_or_else(|| "N/A".into(), format_score),
                "weight": w,
            }),
        );
        if let Some(v) = norm {
            terms.push((m, v));
            if v >= 0.75 {
                strengths.push(format!("{} {}", m, raw_value(m, report)));
            } else if v < 0.5 {
                weaknesses.push(format!("{} {}", m, raw_value(m, report)));
            }
        }
    }
    let best = terms.iter().max_by(|a, b| a.1.total_cmp(&b.1));
    let worst = terms.iter().min_by(|a, b| a.1.total_cmp(&b.1));
    let mut rationale = format!("Weighted composite {}.", format_score(composite));
    if let (Some(b), Some(w)) = (best, worst) {
        rationale.push_str(&format!(
            " Strongest term {} ({}), weakest term {} ({}).",
            b.0,
            format_score(b.1),
            w.0,
            format_score(w.1)
        ));
    }

    let separation = match report.silhouette {
        Some(s) if s > 0.5 => "well separated",
        Some(s) if s > 0.25 => "partially overlapping",
        Some(_) => "poorly separated",
        None => "no labels to judge",
    };
    let compactness = if (report.lof.median - 1.0).abs() <= 0.1 {
        "homogeneous local density"
    } else {
        "uneven local density"
    };
    let artifacts = if report.lof.outlier_count > 0 {
        vec![format!(
            "{} points with LOF above {}",
            report.lof.outlier_count, report.lof.threshold
        )]
    } else {
        Vec::new()
    };

    let recommendations = choice
        .as_ref()
        .and_then(|(key, dir, reversal)| {
            let value = stepped(config, key, *dir, policy.factor)?;
            let current = config.get(key)?.to_string();
            let verb = match dir {
                Direction::Up => "Increase",
                Direction::Down => "Decrease",
            };
            let why = if history.is_empty() {
                "initial probe".to_string()
            } else if *reversal {
                "the last step lowered the composite score, so the direction is reversed"
                    .to_string()
            } else if stationary {
                "the composite score stalled on the previous parameter".to_string()
            } else {
                "the last step raised the composite score".to_string()
            };
            Some(vec![Recommendation {
                parameter: format!("{}.{key}", config.method.short_name()),
                current_value: current.clone(),
                suggested_value: value.to_string(),
                rationale: format!("{verb} {key} from {current} to {value}: {why}."),
                expected_impact: format!(
                    "Composite score moves away from {}.",
                    format_score(composite)
                ),
                priority: Priority::High,
            }])
        })
        .unwrap_or_default();

    let entry = MockStep {
        composite,
        parameter: recommendations
            .first()
            .and(choice.as_ref().map(|c| c.0.clone())),
        direction: choice.as_ref().map_or(Direction::Up, |c| c.1),
        reversal: choice.as_ref().is_some_and(|c| c.2),
        stationary,
    };
    let diagnostic = DiagnosticReport {
        quality_score: (10.0 * composite).clamp(0.0, 10.0),
        score_rationale: rationale,
        overall_assessment: OverallAssessment {
            key_strengths: strengths,
            key_weaknesses: weaknesses,
            metric_analysis: Value::Object(metric_analysis),
        },
        dendrogram_comparison: agreement(prompt),
        visual_inspection: VisualInspection {
            cluster_separation: separation.into(),
            cluster_compactness: compactness.into(),
            notable_patterns: Vec::new(),
            artifacts,
        },
        recommendations,
        follow_up_metrics: Vec::new(),
        extra: Map::new(),
    };
    (diagnostic, entry)
}
