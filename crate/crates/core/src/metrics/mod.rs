//! Embedding reliability metrics and clustering/outlier diagnostics.
//!
//! Every metric compares a high-dimensional reference representation with a
//! 2D embedding through their pairwise [`DistanceMatrix`]es.

mod distance;
mod global;
mod local;
mod lof;
mod rank;
mod report;
mod silhouette;

pub use distance::{pairwise_distances, DistanceMatrix};
pub use global::{mean_distance_ratio, spearman_distance_score, stress};
pub use local::{continuity, trustworthiness};
pub use lof::{
    lof_from_distances, lof_scores, LofResult, DEFAULT_THRESHOLD as DEFAULT_LOF_THRESHOLD,
    MAX_DENSITY,
};
pub use rank::{average_ranks, RankMatrix};
pub use report::{
    assemble_report, format_score, FollowUpMetric, KScore, LofSummary, MetricsConfig,
    MetricsReport, NeighborhoodMetric, Subsample,
};
pub use silhouette::{silhouette, silhouette_from_distances};
