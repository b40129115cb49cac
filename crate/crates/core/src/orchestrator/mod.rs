//! The refinement loop: embed, score, ask the agent, apply, repeat.

mod export;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use export::{export_trajectory, load_trajectory, replay, ExportedFiles};

use crate::agent::{
    apply_recommendations, build_master_prompt, explicit_composite_score, Agent, AgentContext,
    Attempt, DiagnosticReport, HierarchyEntry, MasterPrompt, PlotAttachment, WeightVector,
};
use crate::data::DataMatrix;
use crate::dr::{
    embed_prepared, prepare_input, BackendRegistry, DrConfig, EmbeddingDiagnostics, Warning,
};
use crate::error::{Error, Result};
use crate::hierarchy::{centroid_dendrogram, kmeans, Dendrogram};
use crate::metrics::{assemble_report, FollowUpMetric, MetricsConfig, MetricsReport};
use crate::render::{render_embedding, PlotSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMode {
    /// The agent's own quality score, on `[0, 10]`.
    Implicit,
    /// The weighted composite, on `[0, 1]`.
    Explicit,
}

impl ScoreMode {
    pub fn default_epsilon(self) -> f64 {
        match self {
            Self::Implicit => 0.05,
            Self::Explicit => 0.005,
        }
    }
}

impl FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "implicit" => Ok(Self::Implicit),
            "explicit" => Ok(Self::Explicit),
            _ => Err(Error::Config(format!(
                "mode must be `implicit` or `explicit`, got `{s}`"
            ))),
        }
    }
}

impl fmt::Display for ScoreMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Implicit => "implicit",
            Self::Explicit => "explicit",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    AgentEmptyRecommendations,
    Error,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Converged => "converged",
            Self::MaxIterations => "max_iterations",
            Self::AgentEmptyRecommendations => "agent_empty_recommendations",
            Self::Error => "error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub max_iterations: usize,
    pub mode: ScoreMode,
    /// Defaults to the mode's own scale when absent.
    pub epsilon: Option<f64>,
    pub patience: usize,
    pub weights: WeightVector,
    pub metrics: MetricsConfig,
    pub plot: PlotSpec,
    /// Attach the scatter plot to each prompt.
    pub attach_plot: bool,
    /// Cluster count for dendrogram leaves on unlabeled data.
    pub kmeans_k: usize,
    pub dataset_name: String,
    #[serde(skip)]
    pub backends: BackendRegistry,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            max_iterations: 10,
            mode: ScoreMode::Implicit,
            epsilon: None,
            patience: 2,
            weights: WeightVector::preset("gpt-5.2").expect("preset exists"),
            metrics: MetricsConfig::default(),
            plot: PlotSpec::default(),
            attach_plot: false,
            kmeans_k: 10,
            dataset_name: "dataset".into(),
            backends: BackendRegistry::default(),
        }
    }
}

impl PipelineOptions {
    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or_else(|| self.mode.default_epsilon())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// SHA-256 over values and labels.
    pub sha256: String,
}

impl DatasetRef {
    pub fn of(name: &str, data: &DataMatrix) -> Self {
        let mut h = Sha256::new();
        h.update((data.rows() as u64).to_le_bytes());
        h.update((data.cols() as u64).to_le_bytes());
        for v in data.values() {
            h.update(v.to_le_bytes());
        }
        for l in data.labels().unwrap_or_default() {
            h.update(l.as_bytes());
            h.update([0]);
        }
        Self {
            name: name.to_string(),
            rows: data.rows(),
            cols: data.cols(),
            sha256: hex(&h.finalize()),
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything one iteration produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// From 1.
    pub iteration: usize,
    pub config: DrConfig,
    /// Annotation of the high-dimensional reference, e.g. `"20D (PCA)"`.
    pub input_dimension: String,
    pub embedding: DataMatrix,
    pub embedding_diagnostics: EmbeddingDiagnostics,
    pub report: MetricsReport,
    pub hierarchy_hd: Option<Dendrogram>,
    pub hierarchy_2d: Option<Dendrogram>,
    pub composite: f64,
    pub quality: f64,
    pub diagnostic: DiagnosticReport,
    pub raw_response: String,
    pub attempts: Vec<Attempt>,
    pub warnings: Vec<Warning>,
}

impl IterationRecord {
    pub fn score(&self, mode: ScoreMode) -> f64 {
        match mode {
            ScoreMode::Implicit => self.quality,
            ScoreMode::Explicit => self.composite,
        }
    }

    /// The prompt the agent saw, rebuilt from stored state.
    pub fn prompt(&self) -> MasterPrompt {
        build_master_prompt(
            &self.report,
            self.hierarchy_hd
                .as_ref()
                .map(|t| HierarchyEntry::new(t, self.input_dimension.clone())),
            self.hierarchy_2d
                .as_ref()
                .map(|t| HierarchyEntry::new(t, "2D")),
            &self.config,
            self.iteration,
        )
    }
}

/// The iteration that stopped the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub iteration: usize,
    pub config: DrConfig,
    pub message: String,
    /// Last agent reply, when the agent was the cause.
    pub raw_response: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub run_id: String,
    pub dataset: DatasetRef,
    pub mode: ScoreMode,
    pub agent: String,
    pub weights: WeightVector,
    pub metrics: MetricsConfig,
    pub plot: PlotSpec,
    pub records: Vec<IterationRecord>,
    /// Index into `records` of the best score; ties go to the earliest.
    pub best: Option<usize>,
    pub stop_reason: StopReason,
    pub failure: Option<Failure>,
}

impl Trajectory {
    pub fn scores(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.score(self.mode)).collect()
    }

    pub fn best_record(&self) -> Option<&IterationRecord> {
        self.best.map(|i| &self.records[i])
    }

    fn update_best(&mut self) {
        self.best = argmax_first(&self.scores());
    }
}

/// Index of the largest value, earliest on ties.
pub fn argmax_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convergence {
    Continue,
    /// Score changes stayed below epsilon for `patience` iterations.
    Converged,
    EmptyRecommendations,
}

/// True when the last `patience` consecutive score changes are all below
/// `epsilon` in magnitude.
pub fn scores_converged(scores: &[f64], epsilon: f64, patience: usize) -> bool {
    if patience == 0 {
        return !scores.is_empty();
    }
    scores.len() > patience
        && scores
            .windows(2)
            .rev()
            .take(patience)
            .all(|w| (w[1] - w[0]).abs() < epsilon)
}

pub fn check_convergence(trajectory: &Trajectory, epsilon: f64, patience: usize) -> Convergence {
    match trajectory.records.last() {
        Some(r) if r.diagnostic.recommendations.is_empty() => Convergence::EmptyRecommendations,
        Some(_) if scores_converged(&trajectory.scores(), epsilon, patience) => {
            Convergence::Converged
        }
        _ => Convergence::Continue,
    }
}

fn run_id(
    dataset: &DatasetRef,
    config: &DrConfig,
    agent: &str,
    options: &PipelineOptions,
) -> String {
    let mut h = Sha256::new();
    h.update(dataset.sha256.as_bytes());
    h.update(serde_json::to_vec(config).expect("config serializes"));
    h.update(agent.as_bytes());
    h.update(serde_json::to_vec(options).expect("options serialize"));
    hex(&h.finalize()[..8])
}

/// Leaf groups for the dendrograms: the labels, or k-means clusters when the
/// data is unlabeled.
fn dendrogram_groups(
    hd: &DataMatrix,
    labels: Option<&[String]>,
    k: usize,
    seed: u64,
) -> Result<Vec<String>> {
    if let Some(l) = labels {
        return Ok(l.to_vec());
    }
    let ids = kmeans(hd, k.min(hd.rows()).max(1), seed, 100)?;
    Ok(ids.into_iter().map(|c| format!("k{c}")).collect())
}

fn optional_tree(matrix: &DataMatrix, groups: &[String]) -> Option<Dendrogram> {
    centroid_dendrogram(matrix, groups)
        .inspect_err(|e| log::info!("no dendrogram: {e}"))
        .ok()
}

/// Embedding, report and trees for one configuration.
pub struct Evaluation {
    pub input_dimension: String,
    pub embedding: DataMatrix,
    pub embedding_diagnostics: EmbeddingDiagnostics,
    pub report: MetricsReport,
    pub hierarchy_hd: Option<Dendrogram>,
    pub hierarchy_2d: Option<Dendrogram>,
}

/// One-shot embed and score, no agent involved.
pub fn evaluate(
    dataset: &DataMatrix,
    config: &DrConfig,
    metrics: &MetricsConfig,
    backends: &BackendRegistry,
    kmeans_k: usize,
) -> Result<Evaluation> {
    let (hd, input_dimension) = prepare_input(dataset, config)?;
    let result = embed_prepared(&hd, config, backends)?;
    let embedding = result.coordinates;
    score_embedding(
        dataset,
        config,
        embedding,
        result.diagnostics,
        input_dimension,
        metrics,
        kmeans_k,
    )
}

/// Scores a stored embedding against its reference rebuilt from `dataset`.
pub fn score_embedding(
    dataset: &DataMatrix,
    config: &DrConfig,
    embedding: DataMatrix,
    embedding_diagnostics: EmbeddingDiagnostics,
    input_dimension: String,
    metrics: &MetricsConfig,
    kmeans_k: usize,
) -> Result<Evaluation> {
    let (hd, _) = prepare_input(dataset, config)?;
    let labels = dataset.labels();
    let report = assemble_report(&hd, &embedding, labels, metrics)?;
    let groups = dendrogram_groups(&hd, labels, kmeans_k, config.seed())?;
    Ok(Evaluation {
        input_dimension,
        hierarchy_hd: optional_tree(&hd, &groups),
        hierarchy_2d: optional_tree(&embedding, &groups),
        embedding,
        embedding_diagnostics,
        report,
    })
}

/// Runs the loop until convergence, empty recommendations, the iteration
/// cap, or a failure. Failures end the run with the partial trajectory.
pub fn run_pipeline(
    dataset: &DataMatrix,
    initial: DrConfig,
    agent: &mut dyn Agent,
    options: &PipelineOptions,
) -> Result<Trajectory> {
    initial.validate()?;
    if options.max_iterations == 0 {
        return Err(Error::Config("max_iterations must be at least 1".into()));
    }
    let dataset_ref = DatasetRef::of(&options.dataset_name, dataset);
    let agent_name = agent.name();
    let mut trajectory = Trajectory {
        run_id: run_id(&dataset_ref, &initial, &agent_name, options),
        dataset: dataset_ref,
        mode: options.mode,
        agent: agent_name,
        weights: options.weights.clone(),
        metrics: options.metrics.clone(),
        plot: options.plot.clone(),
        records: Vec::new(),
        best: None,
        stop_reason: StopReason::MaxIterations,
        failure: None,
    };
    let mut config = initial;
    let mut metrics = options.metrics.clone();

    for iteration in 1..=options.max_iterations {
        let fail = |message: String, raw_response: Option<String>, config: &DrConfig| Failure {
            iteration,
            config: config.clone(),
            message,
            raw_response,
        };
        let eval = match evaluate(
            dataset,
            &config,
            &metrics,
            &options.backends,
            options.kmeans_k,
        ) {
            Ok(e) => e,
            Err(e) => {
                log::error!("iteration {iteration}: {e}");
                trajectory.failure = Some(fail(e.to_string(), None, &config));
                trajectory.stop_reason = StopReason::Error;
                break;
            }
        };
        let mut record = IterationRecord {
            iteration,
            config: config.clone(),
            input_dimension: eval.input_dimension,
            embedding: eval.embedding,
            embedding_diagnostics: eval.embedding_diagnostics,
            report: eval.report,
            hierarchy_hd: eval.hierarchy_hd,
            hierarchy_2d: eval.hierarchy_2d,
            composite: 0.0,
            quality: 0.0,
            diagnostic: DiagnosticReport {
                quality_score: 0.0,
                score_rationale: String::new(),
                overall_assessment: Default::default(),
                dendrogram_comparison: Default::default(),
                visual_inspection: Default::default(),
                recommendations: Vec::new(),
                follow_up_metrics: Vec::new(),
                extra: Default::default(),
            },
            raw_response: String::new(),
            attempts: Vec::new(),
            warnings: Vec::new(),
        };
        let mut prompt = record.prompt();
        if options.attach_plot {
            match render_embedding(&record.embedding, &options.plot) {
                Ok(svg) => {
                    prompt.plot = Some(PlotAttachment {
                        media_type: "image/svg+xml".into(),
                        bytes: svg.into_bytes(),
                    })
                }
                Err(e) => log::warn!("plot not attached: {e}"),
            }
        }
        let reply = match agent.step(
            &prompt,
            AgentContext {
                report: &record.report,
                config: &config,
            },
        ) {
            Ok(r) => r,
            Err(e) => {
                log::error!("iteration {iteration}: {e}");
                let raw = match &e {
                    Error::AgentExhausted { last_raw, .. } => last_raw.clone(),
                    _ => None,
                };
                trajectory.failure = Some(fail(e.to_string(), raw, &config));
                trajectory.stop_reason = StopReason::Error;
                break;
            }
        };
        record.composite = explicit_composite_score(&record.report, &options.weights);
        record.quality = reply.diagnostic.quality_score;
        record.diagnostic = reply.diagnostic;
        record.raw_response = reply.raw;
        record.attempts = reply.attempts;
        record.warnings = reply.warnings;
        log::info!(
            "iteration {iteration}: composite {:.4}, quality {:.2}, {} recommendation(s)",
            record.composite,
            record.quality,
            record.diagnostic.recommendations.len()
        );

        let applied = apply_recommendations(&config, &record.diagnostic);
        record.warnings.extend(applied.warnings);
        metrics.follow_up = record
            .diagnostic
            .follow_up_metrics
            .iter()
            .filter_map(|t| FollowUpMetric::parse(t))
            .collect();
        trajectory.records.push(record);
        trajectory.update_best();

        match check_convergence(&trajectory, options.epsilon(), options.patience) {
            Convergence::EmptyRecommendations => {
                trajectory.stop_reason = StopReason::AgentEmptyRecommendations;
                break;
            }
            Convergence::Converged => {
                trajectory.stop_reason = StopReason::Converged;
                break;
            }
            Convergence::Continue => {}
        }
        config = applied.config;
    }
    Ok(trajectory)
}
