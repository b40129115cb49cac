use super::distance::{pairwise_distances, DistanceMatrix};
use crate::data::{label_index, DataMatrix};
use crate::error::{Error, Result};

/// Mean silhouette of `embedding` under `labels`, or `None` when fewer than
/// two distinct labels exist.
pub fn silhouette(embedding: &DataMatrix, labels: &[String]) -> Result<Option<f64>> {
    if labels.len() != embedding.rows() {
        return Err(Error::Shape(format!(
            "{} labels for {} rows",
            labels.len(),
            embedding.rows()
        )));
    }
    if embedding.rows() < 2 {
        return Ok(None);
    }
    let d = pairwise_distances(embedding)?;
    let (_, ids) = label_index(labels);
    Ok(silhouette_from_distances(&d, &ids))
}

/// Silhouette over a precomputed distance matrix with integer cluster ids.
/// Members of singleton clusters score 0.
pub fn silhouette_from_distances(d: &DistanceMatrix, ids: &[usize]) -> Option<f64> {
    let n = d.len();
    let k = ids.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &c in ids {
        sizes[c] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return None;
    }
    let mut sums = vec![0.0; k];
    let mut total = 0.0;
    for i in 0..n {
        let own = ids[i];
        if sizes[own] == 1 {
            continue;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        let row = d.row(i);
        for j in 0..n {
            sums[ids[j]] += row[j];
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Some((total / n as f64).clamp(-1.0, 1.0))
}
