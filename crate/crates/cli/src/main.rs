//! `vizrefine`: refine dimensionality-reduction hyperparameters with an
//! agent in the loop, score a single configuration, or re-render a stored
//! run.

mod settings;
mod transport;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};
use vizrefine::agent::{
    explicit_composite_score, Agent, LlmAgent, MockAgent, WeightVector, PRESET_NAMES,
};
use vizrefine::orchestrator::{
    evaluate, export_trajectory, replay, run_pipeline, PipelineOptions, StopReason,
};
use vizrefine::render::{render_embedding, PlotSpec};

use settings::{AgentKind, DataArgs, RunArgs};
use transport::HttpTransport;

#[derive(Parser)]
#[command(name = "vizrefine", version, about)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the refinement loop and export every iteration.
    Run(RunArgs),
    /// Embed and score one configuration, printing the report as JSON.
    Evaluate(EvaluateArgs),
    /// Re-render the artifacts of a stored trajectory.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Also write the scatter plot here.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    /// A trajectory.json written by `run`.
    #[arg(long)]
    trajectory: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let args = args.resolved()?;
    let (data, name) = args.data.load()?;
    let initial = args.data.initial_config(&data)?;
    let endpoint = args.endpoint();
    let options = PipelineOptions {
        max_iterations: args.max_iter.unwrap_or(10),
        mode: args.mode()?,
        epsilon: args.epsilon,
        weights: args.weights()?,
        attach_plot: endpoint.attach_plot,
        dataset_name: name,
        backends: args.data.registry()?,
        ..Default::default()
    };
    let mut agent: Box<dyn Agent> = match args.agent.unwrap_or(AgentKind::Mock) {
        AgentKind::Mock => Box::new(MockAgent::new(options.weights.clone())),
        AgentKind::Llm => Box::new(LlmAgent {
            transport: HttpTransport::from_endpoint(&endpoint)?,
            endpoint,
        }),
    };
    let trajectory = run_pipeline(&data, initial, agent.as_mut(), &options)?;
    let out = args.out_dir();
    let files = export_trajectory(&trajectory, &out)?;

    println!(
        "run {} stopped: {}",
        trajectory.run_id, trajectory.stop_reason
    );
    for r in &trajectory.records {
        println!(
            "  iteration {:>2}  composite {:.4}  quality {:>5.2}  {}",
            r.iteration,
            r.composite,
            r.quality,
            r.config.parameters_json()
        );
    }
    if let Some(best) = trajectory.best_record() {
        println!(
            "best: iteration {} ({} score {:.4})",
            best.iteration,
            trajectory.mode,
            best.score(trajectory.mode)
        );
    }
    println!("{} files written to {}", files.all().len(), out.display());
    if trajectory.stop_reason == StopReason::Error {
        let failure = trajectory
            .failure
            .as_ref()
            .map_or("unknown failure", |f| f.message.as_str());
        eprintln!("error: iteration failed: {failure}");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn evaluate_once(args: EvaluateArgs) -> Result<ExitCode> {
    let data_args = args.data.resolved()?;
    let (data, _) = data_args.load()?;
    let config = data_args.initial_config(&data)?;
    let options = PipelineOptions::default();
    let eval = evaluate(
        &data,
        &config,
        &options.metrics,
        &data_args.registry()?,
        options.kmeans_k,
    )?;
    let composite: Map<String, Value> = PRESET_NAMES
        .iter()
        .map(|name| {
            let w = WeightVector::preset(name).expect("preset exists");
            (
                name.to_string(),
                json!(explicit_composite_score(&eval.report, &w)),
            )
        })
        .collect();
    let out = json!({
        "parameters": config.parameters_json(),
        "input_dimension": eval.input_dimension,
        "metrics": eval.report,
        "composite": composite,
        "hierarchy_hd": eval.hierarchy_hd.as_ref().map(|t| t.to_newick()),
        "hierarchy_2d": eval.hierarchy_2d.as_ref().map(|t| t.to_newick()),
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    if let Some(path) = args.svg {
        let svg = render_embedding(&eval.embedding, &PlotSpec::default())?;
        std::fs::write(&path, svg).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn replay_run(args: ReplayArgs) -> Result<ExitCode> {
    let (trajectory, files) = replay(&args.trajectory, &args.out)?;
    println!(
        "replayed run {} ({} iterations): {} files written to {}",
        trajectory.run_id,
        trajectory.records.len(),
        files.all().len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Evaluate(a) => evaluate_once(a),
        Command::Replay(a) => replay_run(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
