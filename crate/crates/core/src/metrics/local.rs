//! Neighborhood preservation: trustworthiness and continuity.

use super::distance::DistanceMatrix;
use super::rank::RankMatrix;
use crate::error::{Error, Result};

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || 2 * k >= n {
        return Err(Error::OutOfRange {
            name: "k",
            value: k.to_string(),
            range: format!("1 <= k < n/2 = {}", n as f64 / 2.0),
        });
    }
    Ok(())
}

/// Penalizes points that enter the `k`-neighborhood of `i` in `observed`
/// without being there in `reference`, weighted by their reference rank.
fn neighborhood_score(
    reference: &DistanceMatrix,
    observed: &DistanceMatrix,
    k: usize,
) -> Result<f64> {
    let n = reference.len();
    if observed.len() != n {
        return Err(Error::Shape(format!(
            "high-dimensional matrix has {n} points, embedding has {}",
            observed.len()
        )));
    }
    check_k(n, k)?;
    let ref_ranks = RankMatrix::from_distances(reference);
    let obs_ranks = RankMatrix::from_distances(observed);
    let mut penalty = 0usize;
    for i in 0..n {
        for &j in obs_ranks.nearest(i, k) {
            let r = ref_ranks.rank(i, j);
            if r > k {
                penalty += r - k;
            }
        }
    }
    let (n, k) = (n as f64, k as f64);
    Ok(1.0 - 2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0)) * penalty as f64)
}

/// Trustworthiness `T(k)`: precision of the embedding's `k`-neighborhoods.
pub fn trustworthiness(hd: &DistanceMatrix, ld: &DistanceMatrix, k: usize) -> Result<f64> {
    neighborhood_score(hd, ld, k)
}

/// Continuity `C(k)`: recall of the high-dimensional `k`-neighborhoods.
/// Identical to trustworthiness with the two spaces swapped.
pub fn continuity(hd: &DistanceMatrix, ld: &DistanceMatrix, k: usize) -> Result<f64> {
    neighborhood_score(ld, hd, k)
}
