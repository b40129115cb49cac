//! 2D embeddings: PCA, exact t-SNE and external backends.

mod config;
pub mod external;
mod pca;
pub mod tsne;

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use config::{
    default_bounds, param_kind, parse_param, Bounds, DrConfig, Method, ParamKind, ParamValue,
    Warning,
};
pub use external::{BackendCommand, BackendRegistry};
pub use pca::{pca, pca_fit, PcaFit, PcaSolver};
pub use tsne::{TsneParams, TsneTrace};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbeddingDiagnostics {
    Pca { explained_variance: Vec<f64> },
    Tsne(TsneTrace),
    External { backend: String, command: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingResult {
    /// `n × 2` layout.
    pub coordinates: DataMatrix,
    /// Full effective configuration.
    pub config: DrConfig,
    /// Column count of the matrix the method actually consumed.
    pub input_dim: usize,
    pub diagnostics: EmbeddingDiagnostics,
    /// Wall time; not serialized so stored runs stay byte-stable.
    #[serde(skip)]
    pub elapsed: Duration,
}

fn solver(config: &DrConfig) -> Result<PcaSolver> {
    config
        .get("solver")
        .and_then(ParamValue::as_str)
        .unwrap_or("full")
        .parse()
}

/// The representation a method consumes and metrics compare against:
/// `n_pcs` principal components when the config asks for them (and the
/// data has more columns), the raw features otherwise. Returns the matrix
/// and its dimension annotation, e.g. `"20D (PCA)"`.
pub fn prepare_input(dataset: &DataMatrix, config: &DrConfig) -> Result<(DataMatrix, String)> {
    let d = dataset.cols();
    match config.get("n_pcs") {
        Some(_) => {
            let k = config.get_usize("n_pcs")?;
            if k == 0 {
                return Err(Error::Config("n_pcs must be positive".into()));
            }
            let k = k.min(d).min(dataset.rows());
            let reduced = pca(dataset, k, solver(config)?, config.seed())?;
            Ok((reduced, format!("{k}D (PCA)")))
        }
        None => Ok((dataset.clone(), format!("{d}D"))),
    }
}

/// Embeds an already prepared matrix.
pub fn embed_prepared(
    input: &DataMatrix,
    config: &DrConfig,
    backends: &BackendRegistry,
) -> Result<EmbeddingResult> {
    config.validate()?;
    let timer = Timer::start();
    let (coordinates, diagnostics) = match &config.method {
        Method::Pca => {
            let k = config.get_usize("n_components")?;
            if k != 2 {
                return Err(Error::Config(format!(
                    "n_components must be 2 for a 2D layout, got {k}"
                )));
            }
            let fit = pca_fit(input, 2, solver(config)?, config.seed())?;
            (
                fit.projection,
                EmbeddingDiagnostics::Pca {
                    explained_variance: fit.explained_variance,
                },
            )
        }
        Method::Tsne => {
            let params = TsneParams {
                perplexity: config.get_f64("perplexity")?,
                learning_rate: config.get_f64("learning_rate")?,
                n_iter: config.get_usize("n_iter")?,
                seed: config.seed(),
                early_exaggeration: config.get_f64("early_exaggeration").unwrap_or(12.0),
                ..Default::default()
            };
            let (y, trace) = tsne::tsne(input, &params)?;
            (y, EmbeddingDiagnostics::Tsne(trace))
        }
        Method::External(name) => {
            let command = backends.get(name).ok_or_else(|| Error::UnknownMethod {
                method: config.method.to_string(),
                registered: registered_methods(backends),
            })?;
            let params: BTreeMap<String, Value> = config
                .params
                .iter()
                .filter(|(k, _)| k.as_str() != "seed")
                .map(|(k, v)| {
                    (
                        k.clone(),
                        serde_json::to_value(v).expect("param serializes"),
                    )
                })
                .collect();
            let y = external::run_backend(name, command, &params, config.seed(), input, backends)?;
            let y = match input.labels() {
                Some(l) => y.with_labels(l.iter().cloned())?,
                None => y,
            };
            (
                y,
                EmbeddingDiagnostics::External {
                    backend: name.clone(),
                    command: std::iter::once(command.program.as_str())
                        .chain(command.args.iter().map(String::as_str))
                        .collect::<Vec<_>>()
                        .join(" "),
                },
            )
        }
    };
    Ok(EmbeddingResult {
        coordinates,
        config: config.clone(),
        input_dim: input.cols(),
        diagnostics,
        elapsed: timer.elapsed(),
    })
}

/// Preprocesses `dataset` for `config` and embeds it in 2D.
pub fn compute_embedding(
    dataset: &DataMatrix,
    config: &DrConfig,
    backends: &BackendRegistry,
) -> Result<EmbeddingResult> {
    let (input, _) = prepare_input(dataset, config)?;
    embed_prepared(&input, config, backends)
}

/// Runs a registered external backend on `matrix` as-is.
pub fn run_external_backend(
    matrix: &DataMatrix,
    config: &DrConfig,
    backends: &BackendRegistry,
) -> Result<EmbeddingResult> {
    if !matches!(config.method, Method::External(_)) {
        return Err(Error::Config(format!(
            "{} is not an external method",
            config.method
        )));
    }
    embed_prepared(matrix, config, backends)
}

fn registered_methods(backends: &BackendRegistry) -> String {
    let mut all = vec!["pca".to_string(), "tsne".to_string()];
    all.extend(backends.names());
    all.join(", ")
}

/// `Instant` is unavailable on wasm32-unknown-unknown.
struct Timer {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Timer {
    fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn elapsed(&self) -> Duration {
        #[cfg(not(target_arch = "wasm32"))]
        return self.start.elapsed();
        #[cfg(target_arch = "wasm32")]
        Duration::ZERO
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::gaussian_blobs;

    #[test]
    fn pca_dispatch_matches_projection() {
        let m = gaussian_blobs(2, 10, 4, 5.0, 1).unwrap();
        let cfg = DrConfig::pca(m.rows(), m.cols());
        let r = compute_embedding(&m, &cfg, &BackendRegistry::default()).unwrap();
        let direct = pca(&m, 2, PcaSolver::Full, 0).unwrap();
        assert_eq!(r.coordinates.values(), direct.values());
        assert_eq!(r.input_dim, 4);
    }

    #[test]
    fn tsne_consumes_n_pcs_columns() {
        let m = gaussian_blobs(3, 10, 30, 10.0, 1).unwrap();
        let mut cfg = DrConfig::tsne(m.rows(), m.cols());
        cfg.set_param_str("perplexity", "5").unwrap();
        cfg.set_param_str("n_iter", "250").unwrap();
        let (input, dim) = prepare_input(&m, &cfg).unwrap();
        assert_eq!(input.cols(), 20);
        assert_eq!(dim, "20D (PCA)");
        let a = compute_embedding(&m, &cfg, &BackendRegistry::default()).unwrap();
        let b = compute_embedding(&m, &cfg, &BackendRegistry::default()).unwrap();
        assert_eq!(a.input_dim, 20);
        assert_eq!(a.coordinates.values(), b.coordinates.values());
        assert_eq!(a.coordinates.rows(), 30);
    }

    #[test]
    fn unknown_external_lists_registered() {
        let m = gaussian_blobs(2, 10, 4, 5.0, 1).unwrap();
        let cfg = DrConfig::external("isomap", m.rows(), m.cols());
        let err = compute_embedding(&m, &cfg, &BackendRegistry::default()).unwrap_err();
        assert!(matches!(err, Error::UnknownMethod { .. }));
        assert!(err.to_string().contains("pca, tsne"));
    }
}
