//! Prompt assembly, agents, diagnostic parsing and explicit scoring.

mod apply;
pub mod composite;
pub mod diagnostic;
pub mod llm;
pub mod mock;
mod prompt;

pub use apply::{apply_recommendations, Applied};
pub use composite::{explicit_composite_score, ScoredMetric, WeightVector, PRESET_NAMES};
pub use diagnostic::{
    parse_diagnostic, repair_json, validate_against, AgreementLevel, DendrogramComparison,
    DiagnosticReport, OverallAssessment, Priority, Recommendation, ValidatedDiagnostic,
    VisualInspection,
};
pub use llm::{llm_agent_step, Attempt, ChatTransport, EndpointConfig, TransportError};
pub use mock::{mock_agent_step, MockPolicy, MockStep};
pub use prompt::{build_master_prompt, HierarchyEntry, MasterPrompt, PlotAttachment};

use crate::dr::{DrConfig, Warning};
use crate::error::Result;
use crate::metrics::MetricsReport;

/// What an agent may look at beyond the prompt itself.
#[derive(Debug, Clone, Copy)]
pub struct AgentContext<'a> {
    pub report: &'a MetricsReport,
    pub config: &'a DrConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentReply {
    pub diagnostic: DiagnosticReport,
    /// The reply text exactly as received.
    pub raw: String,
    pub attempts: Vec<Attempt>,
    pub warnings: Vec<Warning>,
}

/// One diagnostician, called once per iteration.
pub trait Agent {
    fn name(&self) -> String;
    fn step(&mut self, prompt: &MasterPrompt, context: AgentContext<'_>) -> Result<AgentReply>;
}

/// Deterministic offline agent.
#[derive(Debug, Clone)]
pub struct MockAgent {
    pub weights: WeightVector,
    pub policy: MockPolicy,
    history: Vec<MockStep>,
}

impl MockAgent {
    pub fn new(weights: WeightVector) -> Self {
        Self {
            weights,
            policy: MockPolicy::default(),
            history: Vec::new(),
        }
    }

    pub fn history(&self) -> &[MockStep] {
        &self.history
    }
}

impl Agent for MockAgent {
    fn name(&self) -> String {
        "mock".into()
    }

    fn step(&mut self, prompt: &MasterPrompt, context: AgentContext<'_>) -> Result<AgentReply> {
        let (diagnostic, entry) = mock_agent_step(
            prompt,
            context.report,
            context.config,
            &self.weights,
            &self.history,
            &self.policy,
        );
        self.history.push(entry);
        Ok(AgentReply {
            raw: diagnostic.to_json(),
            diagnostic,
            attempts: vec![Attempt {
                number: 1,
                outcome: "ok".into(),
            }],
            warnings: Vec::new(),
        })
    }
}

/// Remote agent over a chat transport.
pub struct LlmAgent<T> {
    pub endpoint: EndpointConfig,
    pub transport: T,
}

impl<T: ChatTransport> Agent for LlmAgent<T> {
    fn name(&self) -> String {
        format!("llm:{}", self.endpoint.model)
    }

    fn step(&mut self, prompt: &MasterPrompt, context: AgentContext<'_>) -> Result<AgentReply> {
        let out = llm_agent_step(prompt, context.config, &self.endpoint, &mut self.transport)?;
        Ok(AgentReply {
            diagnostic: out.diagnostic.report,
            raw: out.raw,
            attempts: out.attempts,
            warnings: out.diagnostic.warnings,
        })
    }
}
