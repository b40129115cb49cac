use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dr::DrConfig;
use crate::hierarchy::Dendrogram;
use crate::metrics::MetricsReport;

/// A tree as the agent sees it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyEntry {
    pub newick: String,
    /// e.g. `"20D (PCA)"` or `"2D"`.
    pub dimension: String,
}

impl HierarchyEntry {
    pub fn new(tree: &Dendrogram, dimension: impl Into<String>) -> Self {
        Self {
            newick: tree.to_newick(),
            dimension: dimension.into(),
        }
    }
}

/// Inline image for vision-capable agents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlotAttachment {
    pub media_type: String,
    pub bytes: Vec<u8>,
}

/// The agent's complete view of one iteration. Only the five schema keys
/// are serialized; `iteration` and `plot` travel alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterPrompt {
    pub metrics: Value,
    pub label_summary: Value,
    pub hierarchy_hd: Option<HierarchyEntry>,
    pub hierarchy_2d: Option<HierarchyEntry>,
    pub parameters: Value,
    #[serde(skip)]
    pub iteration: usize,
    #[serde(skip)]
    pub plot: Option<PlotAttachment>,
}

impl MasterPrompt {
    /// Pretty-printed, byte-stable JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("prompt serializes")
    }
}

/// Assembles the prompt from one iteration's state. Trees may be absent
/// when fewer than two groups exist.
pub fn build_master_prompt(
    report: &MetricsReport,
    hierarchy_hd: Option<HierarchyEntry>,
    hierarchy_2d: Option<HierarchyEntry>,
    config: &DrConfig,
    iteration: usize,
) -> MasterPrompt {
    MasterPrompt {
        metrics: report.to_prompt_block(),
        label_summary: report.label_summary_json(),
        hierarchy_hd,
        hierarchy_2d,
        parameters: config.parameters_json(),
        iteration,
        plot: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::centroid_dendrogram;
    use crate::metrics::{assemble_report, MetricsConfig};
    use crate::synthetic::gaussian_blobs;

    fn prompt() -> MasterPrompt {
        let hd = gaussian_blobs(3, 10, 4, 8.0, 2).unwrap();
        let emb = hd.leading_columns(2);
        let labels = hd.labels().unwrap();
        let report = assemble_report(&hd, &emb, Some(labels), &MetricsConfig::default()).unwrap();
        let t_hd = centroid_dendrogram(&hd, labels).unwrap();
        let t_2d = centroid_dendrogram(&emb, labels).unwrap();
        build_master_prompt(
            &report,
            Some(HierarchyEntry::new(&t_hd, "4D")),
            Some(HierarchyEntry::new(&t_2d, "2D")),
            &DrConfig::tsne(30, 4),
            1,
        )
    }

    #[test]
    fn top_level_keys_are_exact() {
        let v: Value = serde_json::from_str(&prompt().to_json()).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(
            keys,
            [
                "metrics",
                "label_summary",
                "hierarchy_hd",
                "hierarchy_2d",
                "parameters"
            ]
        );
        assert_eq!(v["parameters"]["method"], "tsne");
        assert_eq!(v["hierarchy_2d"]["dimension"], "2D");
        assert!(v["hierarchy_hd"]["newick"].as_str().unwrap().ends_with(';'));
        let rho = v["metrics"]["Global Structure & HD<->2D Correlation"]["Spearman Correlation"]
            .as_str()
            .unwrap();
        assert_eq!(rho.split_once('.').unwrap().1.len(), 4);
    }

    #[test]
    fn deterministic() {
        assert_eq!(prompt().to_json(), prompt().to_json());
    }
}
