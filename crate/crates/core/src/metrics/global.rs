//! Global structure scores over all unique point pairs.

use super::distance::DistanceMatrix;
use super::rank::{average_ranks, has_ties};
use crate::error::{Error, Result};

fn check_same_n(hd: &DistanceMatrix, ld: &DistanceMatrix) -> Result<usize> {
    if hd.len() != ld.len() {
        return Err(Error::Shape(format!(
            "high-dimensional matrix has {} points, embedding has {}",
            hd.len(),
            ld.len()
        )));
    }
    Ok(hd.len())
}

/// Spearman rank correlation between the pairwise distances of the two
/// spaces.
///
/// Without ties the closed form `1 - 6 Σ Δr² / (m (m² - 1))` is evaluated
/// over the `m = n(n-1)/2` pair ranks. With ties the Pearson correlation of
/// average ranks is used instead; the two agree when there are no ties.
pub fn spearman_distance_score(hd: &DistanceMatrix, ld: &DistanceMatrix) -> Result<f64> {
    let n = check_same_n(hd, ld)?;
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "rank correlation needs at least 3 points, got {n}"
        )));
    }
    let (a, b) = (hd.upper_triangle(), ld.upper_triangle());
    for (name, v) in [("high-dimensional", &a), ("embedding", &b)] {
        if v.iter().all(|&x| x == v[0]) {
            return Err(Error::Undefined(format!(
                "all {name} pair distances are equal, rank correlation has zero variance"
            )));
        }
    }
    let (ra, rb) = (average_ranks(&a), average_ranks(&b));
    let rho = if has_ties(&a) || has_ties(&b) {
        pearson(&ra, &rb)
    } else {
        let m = a.len() as f64;
        let sq: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y) * (x - y)).sum();
        1.0 - 6.0 * sq / (m * (m * m - 1.0))
    };
    Ok(rho.clamp(-1.0, 1.0))
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    sxy / (sxx * syy).sqrt()
}

/// Stress-1 between the mean-normalized distance matrices.
pub fn stress(hd: &DistanceMatrix, ld: &DistanceMatrix) -> Result<f64> {
    check_same_n(hd, ld)?;
    if hd.mean_distance() == 0.0 {
        return Err(Error::Undefined(
            "high-dimensional distances are all zero, stress denominator vanishes".into(),
        ));
    }
    let (h, l) = (
        hd.mean_normalized().upper_triangle(),
        ld.mean_normalized().upper_triangle(),
    );
    let num: f64 = h.iter().zip(&l).map(|(a, b)| (b - a) * (b - a)).sum();
    let den: f64 = h.iter().map(|a| a * a).sum();
    Ok((num / den).sqrt())
}

/// Mean of `d_LD / d_HD` over all pairs of the mean-normalized matrices, so
/// a uniform rescaling of either space leaves it at 1.
pub fn mean_distance_ratio(hd: &DistanceMatrix, ld: &DistanceMatrix) -> Result<f64> {
    let n = check_same_n(hd, ld)?;
    for i in 0..n {
        for j in (i + 1)..n {
            if hd.get(i, j) == 0.0 {
                return Err(Error::ZeroDistance { i, j });
            }
        }
    }
    let (h, l) = (
        hd.mean_normalized().upper_triangle(),
        ld.mean_normalized().upper_triangle(),
    );
    Ok(h.iter().zip(&l).map(|(a, b)| b / a).sum::<f64>() / h.len() as f64)
}
