//! WebAssembly entry points for the static demo page. Every operation takes
//! a JSON request and returns a JSON reply; the `*_json` functions hold the
//! logic and run natively too.

use serde::Deserialize;
use serde_json::{json, Value};
use vizrefine::agent::{explicit_composite_score, MockAgent, WeightVector};
use vizrefine::dr::{BackendRegistry, DrConfig};
use vizrefine::hierarchy::Dendrogram;
use vizrefine::metrics::MetricsConfig;
use vizrefine::orchestrator::{evaluate, run_pipeline, PipelineOptions, ScoreMode};
use vizrefine::render::{render_dendrogram, render_embedding, PlotSpec};
use vizrefine::synthetic::gaussian_blobs;
use vizrefine::DataMatrix;
use wasm_bindgen::prelude::*;

/// Exact t-SNE is quadratic; larger inputs would stall the page.
pub const MAX_POINTS: usize = 1000;

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Dataset {
    Blobs {
        clusters: usize,
        per_cluster: usize,
        dim: usize,
        separation: f64,
        seed: u64,
    },
    Csv {
        text: String,
        #[serde(default = "default_label_col")]
        label_col: String,
    },
}

fn default_label_col() -> String {
    "label".into()
}

impl Dataset {
    fn load(&self) -> Result<DataMatrix, String> {
        let data = match self {
            Self::Blobs {
                clusters,
                per_cluster,
                dim,
                separation,
                seed,
            } => gaussian_blobs(*clusters, *per_cluster, *dim, *separation, *seed),
            Self::Csv { text, label_col } => DataMatrix::read_csv_from(text.as_bytes(), label_col),
        }
        .map_err(|e| e.to_string())?;
        if data.rows() > MAX_POINTS {
            return Err(format!(
                "{} points exceed the demo limit of {MAX_POINTS}",
                data.rows()
            ));
        }
        Ok(data)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbedRequest {
    dataset: Dataset,
    #[serde(default = "default_method")]
    method: String,
    /// Textual overrides, e.g. `{"perplexity": "12"}`.
    #[serde(default)]
    params: serde_json::Map<String, Value>,
    #[serde(default = "default_preset")]
    preset: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RefineRequest {
    dataset: Dataset,
    #[serde(default)]
    params: serde_json::Map<String, Value>,
    #[serde(default = "default_preset")]
    preset: String,
    #[serde(default = "default_max_iter")]
    max_iter: usize,
}

fn default_method() -> String {
    "tsne".into()
}

fn default_preset() -> String {
    "gpt-5.2".into()
}

fn default_max_iter() -> usize {
    8
}

fn parse<T: for<'de> Deserialize<'de>>(request: &str) -> Result<T, String> {
    serde_json::from_str(request).map_err(|e| format!("bad request: {e}"))
}

fn config_for(
    method: &str,
    data: &DataMatrix,
    params: &serde_json::Map<String, Value>,
) -> Result<DrConfig, String> {
    let method = method
        .parse()
        .map_err(|e: vizrefine::Error| e.to_string())?;
    let mut config = DrConfig::for_method(method, data.rows(), data.cols());
    config.clamp_all();
    for (key, value) in params {
        if !config.is_known_param(key) {
            return Err(format!("`{key}` is not a parameter of {}", config.method));
        }
        let raw = match value {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        config.set_param_str(key, &raw).map_err(|e| e.to_string())?;
    }
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn weights(preset: &str) -> Result<WeightVector, String> {
    WeightVector::preset(preset).ok_or_else(|| format!("unknown weight preset `{preset}`"))
}

fn tree_svg(tree: Option<&Dendrogram>) -> Result<Value, String> {
    tree.map(|t| render_dendrogram(t, &PlotSpec::default()).map_err(|e| e.to_string()))
        .transpose()
        .map(|svg| json!(svg))
}

/// One embedding with its scatter plot, metrics, composite score and both
/// label-centroid dendrograms.
pub fn embed_json(request: &str) -> Result<String, String> {
    let req: EmbedRequest = parse(request)?;
    let data = req.dataset.load()?;
    let config = config_for(&req.method, &data, &req.params)?;
    let w = weights(&req.preset)?;
    let eval = evaluate(
        &data,
        &config,
        &MetricsConfig::default(),
        &BackendRegistry::default(),
        10,
    )
    .map_err(|e| e.to_string())?;
    let scatter =
        render_embedding(&eval.embedding, &PlotSpec::default()).map_err(|e| e.to_string())?;
    Ok(json!({
        "parameters": config.parameters_json(),
        "input_dimension": eval.input_dimension,
        "metrics": eval.report,
        "composite": explicit_composite_score(&eval.report, &w),
        "scatter_svg": scatter,
        "dendrogram_hd_svg": tree_svg(eval.hierarchy_hd.as_ref())?,
        "dendrogram_2d_svg": tree_svg(eval.hierarchy_2d.as_ref())?,
        "newick_hd": eval.hierarchy_hd.as_ref().map(Dendrogram::to_newick),
        "newick_2d": eval.hierarchy_2d.as_ref().map(Dendrogram::to_newick),
    })
    .to_string())
}

/// The refinement loop with the offline agent, scored explicitly.
pub fn refine_json(request: &str) -> Result<String, String> {
    let req: RefineRequest = parse(request)?;
    let data = req.dataset.load()?;
    let config = config_for("tsne", &data, &req.params)?;
    let options = PipelineOptions {
        max_iterations: req.max_iter.clamp(1, 20),
        mode: ScoreMode::Explicit,
        weights: weights(&req.preset)?,
        dataset_name: "demo".into(),
        ..Default::default()
    };
    let mut agent = MockAgent::new(options.weights.clone());
    let t = run_pipeline(&data, config, &mut agent, &options).map_err(|e| e.to_string())?;
    let records = t
        .records
        .iter()
        .map(|r| {
            Ok(json!({
                "iteration": r.iteration,
                "parameters": r.config.parameters_json(),
                "composite": r.composite,
                "rationale": r.diagnostic.score_rationale,
                "scatter_svg": render_embedding(&r.embedding, &PlotSpec::default()).map_err(|e| e.to_string())?,
            }))
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok(json!({
        "records": records,
        "best_iteration": t.best_record().map(|r| r.iteration),
        "stop_reason": t.stop_reason.to_string(),
        "failure": t.failure.map(|f| f.message),
    })
    .to_string())
}

/// Weight presets with their per-metric weights.
pub fn presets_json() -> String {
    let presets: serde_json::Map<String, Value> = vizrefine::agent::PRESET_NAMES
        .iter()
        .map(|name| (name.to_string(), json!(WeightVector::preset(name))))
        .collect();
    Value::Object(presets).to_string()
}

#[wasm_bindgen]
pub fn embed(request: &str) -> Result<String, JsError> {
    embed_json(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn refine(request: &str) -> Result<String, JsError> {
    refine_json(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn presets() -> String {
    presets_json()
}
