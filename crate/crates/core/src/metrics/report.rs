use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::distance::pairwise_distances;
use super::global::{mean_distance_ratio, spearman_distance_score, stress};
use super::local::{continuity, trustworthiness};
use super::lof::lof_from_distances;
use super::silhouette::silhouette_from_distances;
use crate::data::{label_index, DataMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    /// Neighborhood size for trustworthiness and continuity.
    pub k: usize,
    pub lof_k: usize,
    pub lof_threshold: f64,
    /// Above this many points the metrics run on a seeded uniform subsample.
    pub subsample_cap: usize,
    pub subsample_seed: u64,
    #[serde(default)]
    pub follow_up: Vec<FollowUpMetric>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            k: 10,
            lof_k: 20,
            lof_threshold: super::lof::DEFAULT_THRESHOLD,
            subsample_cap: 2000,
            subsample_seed: 0,
            follow_up: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborhoodMetric {
    Trustworthiness,
    Continuity,
}

impl NeighborhoodMetric {
    fn display(self) -> &'static str {
        match self {
            Self::Trustworthiness => "Trustworthiness",
            Self::Continuity => "Continuity",
        }
    }
}

/// An extra k-dependent score requested by the agent, e.g.
/// "Trustworthiness (k=30)".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FollowUpMetric {
    pub metric: NeighborhoodMetric,
    pub k: usize,
}

impl FollowUpMetric {
    /// Recognizes free-text requests naming trustworthiness or continuity
    /// together with a `k=NN` neighborhood size. Anything else is ignored.
    pub fn parse(text: &str) -> Option<Self> {
        let lower = text.to_ascii_lowercase();
        let metric = if lower.contains("trustworthiness") {
            NeighborhoodMetric::Trustworthiness
        } else if lower.contains("continuity") {
            NeighborhoodMetric::Continuity
        } else {
            return None;
        };
        let compact: String = lower.chars().filter(|c| !c.is_whitespace()).collect();
        let pos = compact.find("k=")?;
        let digits: String = compact[pos + 2..]
            .chars()
            .take_while(char::is_ascii_digit)
            .collect();
        let k = digits.parse().ok()?;
        Some(Self { metric, k })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KScore {
    pub k: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LofSummary {
    pub k: usize,
    pub median: f64,
    pub threshold: f64,
    pub outlier_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subsample {
    pub seed: u64,
    pub size: usize,
    pub total: usize,
}

/// All scores for one embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub spearman: f64,
    pub stress: f64,
    pub mean_distance_ratio: f64,
    pub trustworthiness: KScore,
    pub continuity: KScore,
    pub silhouette: Option<f64>,
    pub lof: LofSummary,
    /// Label counts over the full dataset, largest first.
    pub label_summary: Vec<(String, usize)>,
    /// Per-label mean of the embedding, in first-appearance label order.
    pub centroids_2d: Vec<(String, [f64; 2])>,
    #[serde(default)]
    pub follow_up: Vec<(FollowUpMetric, f64)>,
    #[serde(default)]
    pub subsample: Option<Subsample>,
}

/// Scores render as fixed 4-decimal strings.
pub fn format_score(v: f64) -> String {
    format!("{v:.4}")
}

/// Computes every metric for `embedding` against the reference `hd`.
///
/// `k` values larger than the point count allows are reduced to the largest
/// valid value and the effective value is recorded.
pub fn assemble_report(
    hd: &DataMatrix,
    embedding: &DataMatrix,
    labels: Option<&[String]>,
    config: &MetricsConfig,
) -> Result<MetricsReport> {
    let n = hd.rows();
    if embedding.rows() != n {
        return Err(Error::Shape(format!(
            "reference has {n} rows, embedding has {}",
            embedding.rows()
        )));
    }
    if embedding.cols() != 2 {
        return Err(Error::Shape(format!(
            "embedding has {} columns, expected 2",
            embedding.cols()
        )));
    }
    if let Some(l) = labels {
        if l.len() != n {
            return Err(Error::Shape(format!("{} labels for {n} rows", l.len())));
        }
    }
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "metrics need at least 3 points, got {n}"
        )));
    }

    let (label_summary, centroids_2d) = match labels {
        Some(l) => label_stats(embedding, l),
        None => (Vec::new(), Vec::new()),
    };

    let (hd_s, ld_s, labels_s, subsample) = if n > config.subsample_cap {
        let mut rng = ChaCha8Rng::seed_from_u64(config.subsample_seed);
        let mut idx = sample(&mut rng, n, config.subsample_cap).into_vec();
        idx.sort_unstable();
        let lab = labels.map(|l| idx.iter().map(|&i| l[i].clone()).collect::<Vec<_>>());
        (
            hd.select_rows(&idx),
            embedding.select_rows(&idx),
            lab,
            Some(Subsample {
                seed: config.subsample_seed,
                size: idx.len(),
                total: n,
            }),
        )
    } else {
        (
            hd.clone(),
            embedding.clone(),
            labels.map(<[String]>::to_vec),
            None,
        )
    };
    let m = hd_s.rows();
    let hd_d = pairwise_distances(&hd_s)?;
    let ld_d = pairwise_distances(&ld_s)?;

    let max_k = (m - 1) / 2;
    let k = config.k.min(max_k).max(1);
    let lof_k = config.lof_k.min(m - 1).max(1);
    let lof = lof_from_distances(&ld_d, lof_k, config.lof_threshold)?;
    let silhouette = labels_s.as_ref().and_then(|l| {
        let (_, ids) = label_index(l);
        silhouette_from_distances(&ld_d, &ids)
    });

    let mut follow_up = Vec::new();
    for f in &config.follow_up {
        if f.k == 0 || f.k > max_k {
            log::warn!(
                "skipping follow-up {} (k={}): valid range is 1..={max_k}",
                f.metric.display(),
                f.k
            );
            continue;
        }
        let v = match f.metric {
            NeighborhoodMetric::Trustworthiness => trustworthiness(&hd_d, &ld_d, f.k)?,
            NeighborhoodMetric::Continuity => continuity(&hd_d, &ld_d, f.k)?,
        };
        follow_up.push((*f, v));
    }

    Ok(MetricsReport {
        n,
        spearman: spearman_distance_score(&hd_d, &ld_d)?,
        stress: stress(&hd_d, &ld_d)?,
        mean_distance_ratio: mean_distance_ratio(&hd_d, &ld_d)?,
        trustworthiness: KScore {
            k,
            value: trustworthiness(&hd_d, &ld_d, k)?,
        },
        continuity: KScore {
            k,
            value: continuity(&hd_d, &ld_d, k)?,
        },
        silhouette,
        lof: LofSummary {
            k: lof_k,
            median: lof.median,
            threshold: lof.threshold,
            outlier_count: lof.outlier_count,
        },
        label_summary,
        centroids_2d,
        follow_up,
        subsample,
    })
}

type LabelStats = (Vec<(String, usize)>, Vec<(String, [f64; 2])>);

fn label_stats(embedding: &DataMatrix, labels: &[String]) -> LabelStats {
    let (names, ids) = label_index(labels);
    let mut counts = vec![0usize; names.len()];
    let mut sums = vec![[0.0f64; 2]; names.len()];
    for (i, &c) in ids.iter().enumerate() {
        counts[c] += 1;
        sums[c][0] += embedding.get(i, 0);
        sums[c][1] += embedding.get(i, 1);
    }
    let centroids = names
        .iter()
        .zip(&sums)
        .zip(&counts)
        .map(|((name, s), &c)| (name.clone(), [s[0] / c as f64, s[1] / c as f64]))
        .collect();
    let mut summary: Vec<(String, usize)> = names.into_iter().zip(counts).collect();
    // stable: ties keep first-appearance order
    summary.sort_by_key(|s| std::cmp::Reverse(s.1));
    (summary, centroids)
}

impl MetricsReport {
    /// The grouped metrics block of the master prompt, scores as 4-decimal
    /// strings.
    pub fn to_prompt_block(&self) -> Value {
        let mut global = Map::new();
        global.insert(
            "Spearman Correlation".into(),
            json!(format_score(self.spearman)),
        );
        global.insert("Stress-1".into(), json!(format_score(self.stress)));
        global.insert(
            "Mean Distance Ratio".into(),
            json!(format_score(self.mean_distance_ratio)),
        );

        let mut local = Map::new();
        local.insert(
            format!("Trustworthiness (k={})", self.trustworthiness.k),
            json!(format_score(self.trustworthiness.value)),
        );
        local.insert(
            format!("Continuity (k={})", self.continuity.k),
            json!(format_score(self.continuity.value)),
        );
        for (f, v) in &self.follow_up {
            local.insert(
                format!("{} (k={})", f.metric.display(), f.k),
                json!(format_score(*v)),
            );
        }

        let mut clustering = Map::new();
        clustering.insert(
            "Silhouette Score".into(),
            json!(self
                .silhouette
                .map_or_else(|| "N/A".to_string(), format_score)),
        );

        let mut outliers = Map::new();
        outliers.insert(
            format!("LOF Median (k={})", self.lof.k),
            json!(format_score(self.lof.median)),
        );
        outliers.insert(
            format!("LOF Outliers (score > {})", self.lof.threshold),
            json!(self.lof.outlier_count.to_string()),
        );

        let mut centroids = Map::new();
        for (name, c) in &self.centroids_2d {
            centroids.insert(
                name.clone(),
                json!([format_score(c[0]), format_score(c[1])]),
            );
        }

        let mut block = Map::new();
        block.insert(
            "Global Structure & HD<->2D Correlation".into(),
            Value::Object(global),
        );
        block.insert("Neighborhood Preservation".into(), Value::Object(local));
        block.insert(
            "Clustering & Label Agreement".into(),
            Value::Object(clustering),
        );
        block.insert("Outlier Detection".into(), Value::Object(outliers));
        block.insert("Cluster Centroids (2D)".into(), Value::Object(centroids));
        Value::Object(block)
    }

    pub fn label_summary_json(&self) -> Value {
        Value::Object(
            self.label_summary
                .iter()
                .map(|(k, v)| (k.clone(), json!(v)))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{gaussian_blobs, random_matrix};

    #[test]
    fn identity_embedding_report_is_complete() {
        let hd = gaussian_blobs(3, 10, 4, 8.0, 2).unwrap();
        let emb = hd.leading_columns(2);
        let r = assemble_report(&hd, &emb, hd.labels(), &MetricsConfig::default()).unwrap();
        assert_eq!(r.trustworthiness.k, 10);
        assert_eq!(r.continuity.k, 10);
        assert!(r.silhouette.is_some());
        assert_eq!(r.label_summary.iter().map(|(_, c)| c).sum::<usize>(), 30);
        assert_eq!(r.lof.k, 20);
    }

    #[test]
    fn label_summary_and_centroids() {
        let emb = DataMatrix::from_rows(&[[0.0, 0.0], [2.0, 2.0], [5.0, 1.0]]).unwrap();
        let labels: Vec<String> = ["A", "A", "B"].iter().map(|s| s.to_string()).collect();
        let r = assemble_report(&emb, &emb, Some(&labels), &MetricsConfig::default()).unwrap();
        assert_eq!(
            r.label_summary,
            vec![("A".to_string(), 2), ("B".to_string(), 1)]
        );
        assert_eq!(r.centroids_2d[0], ("A".to_string(), [1.0, 1.0]));
        assert_eq!(r.trustworthiness.k, 1);
    }

    #[test]
    fn missing_labels_leave_silhouette_absent() {
        let m = random_matrix(12, 2, 5);
        let r = assemble_report(&m, &m, None, &MetricsConfig::default()).unwrap();
        assert_eq!(r.silhouette, None);
        assert_eq!(
            r.to_prompt_block()["Clustering & Label Agreement"]["Silhouette Score"],
            "N/A"
        );
    }

    #[test]
    fn subsample_is_recorded_and_deterministic() {
        let hd = random_matrix(60, 3, 7);
        let emb = hd.leading_columns(2);
        let cfg = MetricsConfig {
            subsample_cap: 25,
            subsample_seed: 11,
            ..Default::default()
        };
        let a = assemble_report(&hd, &emb, None, &cfg).unwrap();
        let b = assemble_report(&hd, &emb, None, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a.subsample,
            Some(Subsample {
                seed: 11,
                size: 25,
                total: 60
            })
        );
    }

    #[test]
    fn prompt_block_formatting() {
        let hd = random_matrix(15, 3, 1);
        let r =
            assemble_report(&hd, &hd.leading_columns(2), None, &MetricsConfig::default()).unwrap();
        let block = r.to_prompt_block();
        let s = block["Global Structure & HD<->2D Correlation"]["Spearman Correlation"]
            .as_str()
            .unwrap();
        assert_eq!(s, format!("{:.4}", r.spearman));
        assert!(block["Neighborhood Preservation"]
            .get("Trustworthiness (k=7)")
            .is_some());
    }

    #[test]
    fn follow_up_parsing() {
        let f = FollowUpMetric::parse("Trustworthiness at k = 30").unwrap();
        assert_eq!(
            f,
            FollowUpMetric {
                metric: NeighborhoodMetric::Trustworthiness,
                k: 30
            }
        );
        assert_eq!(
            FollowUpMetric::parse("continuity (k=5)").map(|f| f.metric),
            Some(NeighborhoodMetric::Continuity)
        );
        assert_eq!(FollowUpMetric::parse("Silhouette per cluster"), None);
        assert_eq!(FollowUpMetric::parse("trustworthiness"), None);
    }

    #[test]
    fn follow_up_scores_appear_in_block() {
        let hd = random_matrix(40, 3, 1);
        let cfg = MetricsConfig {
            follow_up: vec![FollowUpMetric {
                metric: NeighborhoodMetric::Trustworthiness,
                k: 15,
            }],
            ..Default::default()
        };
        let r = assemble_report(&hd, &hd.leading_columns(2), None, &cfg).unwrap();
        assert!(r.to_prompt_block()["Neighborhood Preservation"]
            .get("Trustworthiness (k=15)")
            .is_some());
    }
}
