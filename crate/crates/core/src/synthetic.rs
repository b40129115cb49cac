//! Synthetic labeled datasets for tests, demos and smoke runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// Isotropic unit-variance Gaussian blobs whose centers sit on the vertices
/// of a regular simplex, so every pair of centers is exactly `separation`
/// standard deviations apart. Labels are `c0`, `c1`, ...
pub fn gaussian_blobs(
    clusters: usize,
    per_cluster: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<DataMatrix> {
    if clusters == 0 || per_cluster == 0 {
        return Err(Error::InvalidArgument(
            "blobs need at least one cluster and one point".into(),
        ));
    }
    if dim < clusters {
        return Err(Error::InvalidArgument(format!(
            "{clusters} equidistant centers need dim >= {clusters}, got {dim}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset = separation / std::f64::consts::SQRT_2;
    let mut values = Vec::with_capacity(clusters * per_cluster * dim);
    let mut labels = Vec::with_capacity(clusters * per_cluster);
    for c in 0..clusters {
        for _ in 0..per_cluster {
            for j in 0..dim {
                let z: f64 = StandardNormal.sample(&mut rng);
                values.push(z + if j == c { offset } else { 0.0 });
            }
            labels.push(format!("c{c}"));
        }
    }
    DataMatrix::new(clusters * per_cluster, dim, values)?.with_labels(labels)
}

/// `rows × cols` matrix of independent standard normals.
pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> DataMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..rows * cols)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    DataMatrix::new(rows, cols, values).expect("normals are finite")
}
