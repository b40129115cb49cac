use std::collections::BTreeSet;

use super::diagnostic::DiagnosticReport;
use crate::dr::{parse_param, DrConfig, Warning};

fn skip(warnings: &mut Vec<Warning>, w: Warning) {
    log::warn!("{w}");
    warnings.push(w);
}

/// A config after recommendations, plus what was skipped or clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct Applied {
    pub config: DrConfig,
    pub changed: Vec<String>,
    pub warnings: Vec<Warning>,
}

/// Applies recommendations in priority order (high first, list order within
/// a priority). The first recommendation to touch a parameter wins; unknown
/// names and unparseable values are skipped. `config` is left untouched.
pub fn apply_recommendations(config: &DrConfig, report: &DiagnosticReport) -> Applied {
    let mut order: Vec<_> = report.recommendations.iter().collect();
    order.sort_by_key(|r| r.priority);

    let mut next = config.clone();
    let mut seen = BTreeSet::new();
    let mut changed = Vec::new();
    let mut warnings = Vec::new();
    for rec in order {
        let Some(key) = config.resolve_param(&rec.parameter) else {
            skip(
                &mut warnings,
                format!(
                    "skipping `{}`: not a parameter of {}",
                    rec.parameter, config.method
                ),
            );
            continue;
        };
        if !seen.insert(key.to_string()) {
            skip(
                &mut warnings,
                format!(
                    "skipping `{}`: already set by a higher-priority recommendation",
                    rec.parameter
                ),
            );
            continue;
        }
        let value = match parse_param(key, rec.suggested_value.trim()) {
            Ok(v) => v,
            Err(e) => {
                skip(&mut warnings, format!("skipping `{}`: {e}", rec.parameter));
                continue;
            }
        };
        if let Some(w) = next.set_param(key, value) {
            warnings.push(w);
        }
        changed.push(key.to_string());
    }
    Applied {
        config: next,
        changed,
        warnings,
    }
}
