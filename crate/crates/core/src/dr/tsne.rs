//! Exact t-SNE with O(n²) gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::pca::{pca, PcaSolver};
use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// Optimizer settings. Defaults follow the reference implementation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneParams {
    pub perplexity: f64,
    pub learning_rate: f64,
    pub n_iter: usize,
    pub seed: u64,
    pub early_exaggeration: f64,
    /// Exaggerated iterations; `None` means `min(250, n_iter / 4)`.
    pub exaggeration_iters: Option<usize>,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub min_gain: f64,
    /// Standard deviation of the initial layout.
    pub init_std: f64,
    pub perplexity_tol: f64,
    pub max_search_steps: usize,
    /// Record the KL divergence every this many iterations.
    pub trace_every: usize,
}

impl Default for TsneParams {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            learning_rate: 200.0,
            n_iter: 1000,
            seed: 0,
            early_exaggeration: 12.0,
            exaggeration_iters: None,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            min_gain: 0.01,
            init_std: 1e-4,
            perplexity_tol: 1e-5,
            max_search_steps: 50,
            trace_every: 50,
        }
    }
}

impl TsneParams {
    pub fn exaggeration_phase(&self) -> usize {
        self.exaggeration_iters
            .unwrap_or((self.n_iter / 4).min(250))
            .min(self.n_iter)
    }
}

/// Diagnostics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneTrace {
    pub iterations: usize,
    pub exaggeration_iters: usize,
    /// KL(P || Q) with the un-exaggerated P right after the exaggeration
    /// phase.
    pub kl_after_exaggeration: f64,
    pub kl_final: f64,
    /// `(iteration, KL)` samples.
    pub kl_trace: Vec<(usize, f64)>,
    /// Largest deviation of any point's achieved perplexity from the target.
    pub max_perplexity_error: f64,
}

/// Conditional distribution `p_{j|i}` for one point, found by searching the
/// Gaussian precision until `exp(H)` matches the target perplexity.
#[derive(Debug, Clone)]
pub struct RowCalibration {
    pub probabilities: Vec<f64>,
    pub beta: f64,
    pub perplexity: f64,
}

/// `sq_dists` are squared distances to every *other* point.
pub fn calibrate_row(sq_dists: &[f64], target: f64, tol: f64, max_steps: usize) -> RowCalibration {
    let d_min = sq_dists.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = sq_dists.iter().map(|d| d - d_min).collect();
    let mean = shifted.iter().sum::<f64>() / shifted.len() as f64;
    let mut beta = if mean > 0.0 { 1.0 / mean } else { 1.0 };
    let mut probs = vec![0.0; shifted.len()];

    let eval = |beta: f64, probs: &mut [f64]| -> f64 {
        let mut sum = 0.0;
        let mut weighted = 0.0;
        for (p, &d) in probs.iter_mut().zip(&shifted) {
            *p = (-beta * d).exp();
            sum += *p;
            weighted += d * *p;
        }
        let entropy = sum.ln() + beta * weighted / sum;
        probs.iter_mut().for_each(|p| *p /= sum);
        entropy.exp()
    };

    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut perp = eval(beta, &mut probs);
    // Bracket first (doubling / halving), then bisect.
    let mut bracket_steps = 0;
    let mut bisect_steps = 0;
    while (perp - target).abs() >= tol {
        if perp > target {
            lo = beta;
        } else {
            hi = beta;
        }
        if hi.is_infinite() || lo == 0.0 {
            if bracket_steps == max_steps {
                break;
            }
            bracket_steps += 1;
            beta = if hi.is_infinite() {
                beta * 2.0
            } else {
                beta / 2.0
            };
        } else {
            if bisect_steps == max_steps {
                break;
            }
            bisect_steps += 1;
            beta = (lo + hi) / 2.0;
        }
        perp = eval(beta, &mut probs);
    }
    RowCalibration {
        probabilities: probs,
        beta,
        perplexity: perp,
    }
}

/// Symmetrized joint probabilities `P` (row-major `n × n`, zero diagonal,
/// summing to one) and the worst per-point perplexity error.
pub fn joint_probabilities(data: &DataMatrix, params: &TsneParams) -> (Vec<f64>, f64) {
    let n = data.rows();
    let mut cond = vec![0.0; n * n];
    let mut max_err = 0.0f64;
    let mut row = Vec::with_capacity(n - 1);
    for i in 0..n {
        row.clear();
        let a = data.row(i);
        for j in (0..n).filter(|&j| j != i) {
            row.push(
                a.iter()
                    .zip(data.row(j))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>(),
            );
        }
        let cal = calibrate_row(
            &row,
            params.perplexity,
            params.perplexity_tol,
            params.max_search_steps,
        );
        max_err = max_err.max((cal.perplexity - params.perplexity).abs());
        let mut it = cal.probabilities.into_iter();
        for j in (0..n).filter(|&j| j != i) {
            cond[i * n + j] = it.next().unwrap();
        }
    }
    let mut p = vec![0.0; n * n];
    let denom = 2.0 * n as f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let v = ((cond[i * n + j] + cond[j * n + i]) / denom).max(f64::MIN_POSITIVE);
            p[i * n + j] = v;
            p[j * n + i] = v;
        }
    }
    (p, max_err)
}

fn kl_divergence(p: &[f64], y: &[f64], n: usize) -> f64 {
    let mut num = vec![0.0; n * n];
    let mut z = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = y[2 * i] - y[2 * j];
            let dy = y[2 * i + 1] - y[2 * j + 1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = v;
            z += 2.0 * v;
        }
    }
    let mut kl = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let pij = p[i * n + j];
            if pij > 0.0 {
                let q = (num[i * n + j] / z).max(1e-12);
                kl += 2.0 * pij * (pij / q).ln();
            }
        }
    }
    kl
}

/// Runs exact t-SNE on `data` (already reduced by the caller) and returns
/// the `n × 2` layout with its trace.
pub fn tsne(data: &DataMatrix, params: &TsneParams) -> Result<(DataMatrix, TsneTrace)> {
    let n = data.rows();
    if params.perplexity.is_nan() || params.perplexity <= 0.0 || 3.0 * params.perplexity >= n as f64
    {
        return Err(Error::OutOfRange {
            name: "perplexity",
            value: params.perplexity.to_string(),
            range: format!("0 < perplexity < n/3 = {:.4}", n as f64 / 3.0),
        });
    }
    if params.learning_rate.is_nan() || params.learning_rate <= 0.0 || params.n_iter == 0 {
        return Err(Error::Config(
            "learning_rate and n_iter must be positive".into(),
        ));
    }
    let (p, max_perplexity_error) = joint_probabilities(data, params);
    let mut y = initial_layout(data, params)?;

    let exag_iters = params.exaggeration_phase();
    let mut update = vec![0.0; 2 * n];
    let mut gains = vec![1.0; 2 * n];
    let mut grad = vec![0.0; 2 * n];
    let mut num = vec![0.0; n * n];
    let mut kl_trace = Vec::new();
    let mut kl_after_exaggeration = f64::NAN;

    for iter in 0..params.n_iter {
        let exaggerating = iter < exag_iters;
        let exaggeration = if exaggerating {
            params.early_exaggeration
        } else {
            1.0
        };
        let momentum = if exaggerating {
            params.initial_momentum
        } else {
            params.final_momentum
        };

        let mut z = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = y[2 * i] - y[2 * j];
                let dy = y[2 * i + 1] - y[2 * j + 1];
                let v = 1.0 / (1.0 + dx * dx + dy * dy);
                num[i * n + j] = v;
                num[j * n + i] = v;
                z += 2.0 * v;
            }
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        for i in 0..n {
            let (mut gx, mut gy) = (0.0, 0.0);
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = num[i * n + j];
                let mult = (exaggeration * p[i * n + j] - w / z) * w;
                gx += mult * (y[2 * i] - y[2 * j]);
                gy += mult * (y[2 * i + 1] - y[2 * j + 1]);
            }
            grad[2 * i] = 4.0 * gx;
            grad[2 * i + 1] = 4.0 * gy;
        }
        for c in 0..2 * n {
            let gain: f64 = if (grad[c] > 0.0) != (update[c] > 0.0) {
                gains[c] + 0.2
            } else {
                gains[c] * 0.8
            };
            gains[c] = gain.max(params.min_gain);
            update[c] = momentum * update[c] - params.learning_rate * gains[c] * grad[c];
            y[c] += update[c];
        }
        let (mx, my) = (0..n).fold((0.0, 0.0), |(a, b), i| (a + y[2 * i], b + y[2 * i + 1]));
        for i in 0..n {
            y[2 * i] -= mx / n as f64;
            y[2 * i + 1] -= my / n as f64;
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                iteration: iter + 1,
            });
        }

        let done = iter + 1;
        if done == exag_iters {
            kl_after_exaggeration = kl_divergence(&p, &y, n);
        }
        if params.trace_every > 0 && done % params.trace_every == 0 {
            let kl = if done == exag_iters {
                kl_after_exaggeration
            } else {
                kl_divergence(&p, &y, n)
            };
            kl_trace.push((done, kl));
        }
    }
    let kl_final = kl_divergence(&p, &y, n);
    if exag_iters == 0 {
        kl_after_exaggeration = kl_final;
    }
    let mut layout = DataMatrix::new(n, 2, y)?;
    if let Some(l) = data.labels() {
        layout = layout.with_labels(l.iter().cloned())?;
    }
    Ok((
        layout,
        TsneTrace {
            iterations: params.n_iter,
            exaggeration_iters: exag_iters,
            kl_after_exaggeration,
            kl_final,
            kl_trace,
            max_perplexity_error,
        },
    ))
}

/// First two principal components rescaled so the first has standard
/// deviation `init_std`; seeded Gaussian noise when the data has no spread.
fn initial_layout(data: &DataMatrix, params: &TsneParams) -> Result<Vec<f64>> {
    let n = data.rows();
    if data.cols() >= 2 {
        let proj = pca(&data.without_labels(), 2, PcaSolver::Full, params.seed)?;
        let col0: Vec<f64> = (0..n).map(|i| proj.get(i, 0)).collect();
        let mean = col0.iter().sum::<f64>() / n as f64;
        let sd = (col0.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        if sd > 0.0 {
            let s = params.init_std / sd;
            return Ok(proj.values().iter().map(|v| v * s).collect());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    Ok((0..2 * n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            params.init_std * z
        })
        .collect())
}
