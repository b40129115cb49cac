use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// Symmetric `n × n` matrix of nonnegative distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Wraps a full square matrix after checking symmetry, diagonal and sign.
    pub fn from_square(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::Shape(format!(
                "distance matrix for {n} points needs {} entries, got {}",
                n * n,
                values.len()
            )));
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::InvalidArgument(format!("nonzero diagonal at {i}")));
            }
            for j in (i + 1)..n {
                let (a, b) = (values[i * n + j], values[j * n + i]);
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "entry ({i},{j}) = {a} is not a finite nonnegative distance"
                    )));
                }
                if a != b {
                    return Err(Error::InvalidArgument(format!(
                        "matrix is not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(Self { n, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let values = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::from_square(n, values)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// Upper-triangle entries `(i < j)` in row-major order.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            out.extend_from_slice(&self.values[i * n + i + 1..(i + 1) * n]);
        }
        out
    }

    /// Mean off-diagonal distance.
    pub fn mean_distance(&self) -> f64 {
        let pairs = self.n * self.n.saturating_sub(1) / 2;
        if pairs == 0 {
            return 0.0;
        }
        self.upper_triangle().iter().sum::<f64>() / pairs as f64
    }

    /// Copy divided by the mean off-diagonal distance. An all-zero matrix is
    /// returned unchanged.
    pub fn mean_normalized(&self) -> Self {
        let mean = self.mean_distance();
        if mean == 0.0 {
            return self.clone();
        }
        Self {
            n: self.n,
            values: self.values.iter().map(|v| v / mean).collect(),
        }
    }
}

/// Exact Euclidean distances between all rows.
pub fn pairwise_distances(matrix: &DataMatrix) -> Result<DistanceMatrix> {
    let n = matrix.rows();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 points, got {n}"
        )));
    }
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        let a = matrix.row(i);
        for j in (i + 1)..n {
            let b = matrix.row(j);
            let d = a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    Ok(DistanceMatrix { n, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::random_matrix;

    #[test]
    fn three_four_five() {
        let m = DataMatrix::from_rows(&[[0.0, 0.0], [3.0, 4.0]]).unwrap();
        let d = pairwise_distances(&m).unwrap();
        assert_eq!(d.get(0, 1), 5.0);
        assert_eq!(d.get(1, 0), 5.0);
        assert_eq!(d.get(0, 0), 0.0);
    }

    #[test]
    fn identical_rows_have_zero_distance() {
        let m = DataMatrix::from_rows(&[[1.5, -2.0, 3.0]; 4]).unwrap();
        let d = pairwise_distances(&m).unwrap();
        assert!(d.upper_triangle().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_double_loop_oracle() {
        let m = random_matrix(8, 3, 42);
        let d = pairwise_distances(&m).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let mut s = 0.0;
                for c in 0..3 {
                    s += (m.get(i, c) - m.get(j, c)).powi(2);
                }
                assert!((d.get(i, j) - s.sqrt()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_point_rejected() {
        let m = DataMatrix::from_rows(&[[1.0]]).unwrap();
        assert!(pairwise_distances(&m).is_err());
    }

    #[test]
    fn asymmetric_square_rejected() {
        let err = DistanceMatrix::from_square(2, vec![0.0, 1.0, 2.0, 0.0]);
        assert!(err.is_err());
    }
}
