use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaSolver {
    /// Exact thin SVD.
    Full,
    /// Seeded randomized range finder followed by a small exact SVD.
    Randomized,
}

impl std::str::FromStr for PcaSolver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "randomized" => Ok(Self::Randomized),
            _ => Err(Error::Config(format!("unknown PCA solver `{s}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PcaFit {
    /// `n × k` projection of the centered data.
    pub projection: DataMatrix,
    /// `k × d` principal axes, one per row.
    pub components: DMatrix<f64>,
    /// Variance along each axis (sample variance, divisor `n - 1`).
    pub explained_variance: Vec<f64>,
    pub mean: Vec<f64>,
}

/// Projects rows onto the top principal components. Each component's sign
/// is fixed so its largest-magnitude loading is positive.
pub fn pca(
    matrix: &DataMatrix,
    n_components: usize,
    solver: PcaSolver,
    seed: u64,
) -> Result<DataMatrix> {
    Ok(pca_fit(matrix, n_components, solver, seed)?.projection)
}

pub fn pca_fit(
    matrix: &DataMatrix,
    n_components: usize,
    solver: PcaSolver,
    seed: u64,
) -> Result<PcaFit> {
    let (n, d) = (matrix.rows(), matrix.cols());
    let limit = n.min(d);
    if n_components == 0 || n_components > limit {
        return Err(Error::OutOfRange {
            name: "n_components",
            value: n_components.to_string(),
            range: format!("1..={limit} (min of {n} rows, {d} columns)"),
        });
    }
    let mut mean = vec![0.0; d];
    for r in matrix.iter_rows() {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| matrix.get(i, j) - mean[j]);

    let (mut axes, singular) = match solver {
        PcaSolver::Full => exact_axes(&centered, n_components),
        PcaSolver::Randomized => randomized_axes(&centered, n_components, seed),
    };
    for mut row in axes.row_iter_mut() {
        // first entry of largest magnitude
        let pivot = row.iter().fold(
            0.0f64,
            |best, &v| if v.abs() > best.abs() { v } else { best },
        );
        if pivot < 0.0 {
            row.neg_mut();
        }
    }
    let proj = &centered * axes.transpose();
    let mut values = Vec::with_capacity(n * n_components);
    for i in 0..n {
        for j in 0..n_components {
            values.push(proj[(i, j)]);
        }
    }
    let mut projection = DataMatrix::new(n, n_components, values)?;
    if let Some(l) = matrix.labels() {
        projection = projection.with_labels(l.iter().cloned())?;
    }
    let denom = (n.max(2) - 1) as f64;
    Ok(PcaFit {
        projection,
        components: axes,
        explained_variance: singular.iter().map(|s| s * s / denom).collect(),
        mean,
    })
}

/// Top-`k` right singular vectors (as rows) and singular values, sorted by
/// decreasing singular value.
fn exact_axes(x: &DMatrix<f64>, k: usize) -> (DMatrix<f64>, Vec<f64>) {
    let svd = x.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    let axes = DMatrix::from_fn(k, x.ncols(), |i, j| v_t[(order[i], j)]);
    let sv = order[..k].iter().map(|&i| svd.singular_values[i]).collect();
    (axes, sv)
}

fn randomized_axes(x: &DMatrix<f64>, k: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
    const OVERSAMPLE: usize = 10;
    const POWER_ITERS: usize = 4;
    let (n, d) = x.shape();
    let l = (k + OVERSAMPLE).min(n.min(d));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::from_fn(d, l, |_, _| StandardNormal.sample(&mut rng));
    let mut q = (x * omega).qr().q();
    for _ in 0..POWER_ITERS {
        let z = (x.transpose() * &q).qr().q();
        q = (x * z).qr().q();
    }
    let b = q.transpose() * x;
    exact_axes(&b, k)
}
