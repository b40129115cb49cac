use serde::{Deserialize, Serialize};

use super::distance::{pairwise_distances, DistanceMatrix};
use super::rank::RankMatrix;
use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// Upper bound on local reachability density; reached when a point and its
/// neighbors coincide.
pub const MAX_DENSITY: f64 = 1e12;

/// Default score above which a point counts as an outlier.
pub const DEFAULT_THRESHOLD: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LofResult {
    pub k: usize,
    pub scores: Vec<f64>,
    pub median: f64,
    pub threshold: f64,
    pub outlier_count: usize,
}

impl LofResult {
    pub fn outliers(&self) -> impl Iterator<Item = usize> + '_ {
        self.scores
            .iter()
            .enumerate()
            .filter(move |(_, &s)| s > self.threshold)
            .map(|(i, _)| i)
    }
}

pub fn lof_scores(embedding: &DataMatrix, k: usize, threshold: f64) -> Result<LofResult> {
    lof_from_distances(&pairwise_distances(embedding)?, k, threshold)
}

/// Local outlier factor with exactly `k` neighbors per point (ties in
/// distance broken by index).
pub fn lof_from_distances(d: &DistanceMatrix, k: usize, threshold: f64) -> Result<LofResult> {
    let n = d.len();
    if k == 0 || k >= n {
        return Err(Error::OutOfRange {
            name: "k",
            value: k.to_string(),
            range: format!("1 <= k < n = {n}"),
        });
    }
    let ranks = RankMatrix::from_distances(d);
    let k_distance: Vec<f64> = (0..n)
        .map(|i| d.get(i, ranks.nearest(i, k)[k - 1]))
        .collect();
    let density: Vec<f64> = (0..n)
        .map(|i| {
            let reach: f64 = ranks
                .nearest(i, k)
                .iter()
                .map(|&j| k_distance[j].max(d.get(i, j)))
                .sum::<f64>()
                / k as f64;
            if reach > 0.0 {
                (1.0 / reach).min(MAX_DENSITY)
            } else {
                MAX_DENSITY
            }
        })
        .collect();
    let scores: Vec<f64> = (0..n)
        .map(|i| {
            let mean = ranks.nearest(i, k).iter().map(|&j| density[j]).sum::<f64>() / k as f64;
            mean / density[i]
        })
        .collect();
    let outlier_count = scores.iter().filter(|&&s| s > threshold).count();
    Ok(LofResult {
        k,
        median: median(&scores),
        scores,
        threshold,
        outlier_count,
    })
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}
