//! Chat-completion agent with validation and retry.

use base64::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::diagnostic::{parse_diagnostic, ValidatedDiagnostic};
use super::prompt::MasterPrompt;
use crate::dr::DrConfig;
use crate::error::{Error, Result};

/// Fixed system instruction. The wording is ours; only the reply schema is
/// prescribed.
pub const SYSTEM_PROMPT: &str = "You are an expert in dimensionality reduction diagnostics. \
You receive quality metrics of a 2D embedding, Newick trees of the high-dimensional and 2D \
cluster hierarchies, and the current hyperparameters. Compare the trees, inspect the metrics \
and any attached plot, then reply with a single JSON object and nothing else, with keys: \
quality_score (number from 0 to 10), score_rationale (string), overall_assessment \
{key_strengths: [string], key_weaknesses: [string], metric_analysis: object}, \
dendrogram_comparison {agreement_level: \"low\"|\"moderate\"|\"high\", key_similarities: [string], \
key_differences: [string]}, visual_inspection {cluster_separation: string, cluster_compactness: \
string, notable_patterns: [string], artifacts: [string]}, recommendations: [{parameter: \
\"<method>.<name>\", current_value: string, suggested_value: string, rationale: string, \
expected_impact: string, priority: \"high\"|\"medium\"|\"low\"}], follow_up_metrics: [string]. \
Return an empty recommendations list when no further change would help.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// e.g. `https://api.openai.com/v1`; `/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Name of the environment variable holding the credential.
    pub api_key_env: String,
    pub timeout_secs: u64,
    /// Attach the scatter plot for vision-capable models.
    pub attach_plot: bool,
    pub max_attempts: usize,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-5.2".into(),
            temperature: 0.0,
            max_tokens: 4096,
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 300,
            attach_plot: false,
            max_attempts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ContentPart {
    Text { text: String },
    ImageUrl { image_url: ImageUrl },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageUrl {
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: Vec<ContentPart>,
}

impl ChatMessage {
    pub fn text(role: &str, text: impl Into<String>) -> Self {
        Self {
            role: role.into(),
            content: vec![ContentPart::Text { text: text.into() }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub messages: Vec<ChatMessage>,
}

/// Transport failure (timeout, HTTP error, unreadable body).
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct TransportError(pub String);

/// Sends one chat request and returns the assistant's text.
pub trait ChatTransport {
    fn send(&mut self, request: &ChatRequest) -> std::result::Result<String, TransportError>;
}

/// Pulls `choices[0].message.content` out of a chat-completion body.
pub fn extract_reply(body: &Value) -> std::result::Result<String, TransportError> {
    if let Some(e) = body.get("error") {
        return Err(TransportError(format!("endpoint error: {e}")));
    }
    match &body["choices"][0]["message"]["content"] {
        Value::String(s) => Ok(s.clone()),
        Value::Array(parts) => Ok(parts.iter().filter_map(|p| p["text"].as_str()).collect()),
        _ => Err(TransportError(
            "response has no choices[0].message.content".into(),
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub number: usize,
    /// `ok`, or the transport or parse error.
    pub outcome: String,
}

/// Builds the first request for `prompt`.
pub fn initial_request(prompt: &MasterPrompt, endpoint: &EndpointConfig) -> ChatRequest {
    let mut user = ChatMessage::text(
        "user",
        format!(
            "Iteration {}. Current state:\n{}",
            prompt.iteration,
            prompt.to_json()
        ),
    );
    if endpoint.attach_plot {
        if let Some(plot) = &prompt.plot {
            user.content.push(ContentPart::ImageUrl {
                image_url: ImageUrl {
                    url: format!(
                        "data:{};base64,{}",
                        plot.media_type,
                        BASE64_STANDARD.encode(&plot.bytes)
                    ),
                },
            });
        }
    }
    ChatRequest {
        model: endpoint.model.clone(),
        temperature: endpoint.temperature,
        max_tokens: endpoint.max_tokens,
        messages: vec![ChatMessage::text("system", SYSTEM_PROMPT), user],
    }
}

/// Result of one agent step over the wire.
#[derive(Debug, Clone, PartialEq)]
pub struct LlmOutcome {
    pub diagnostic: ValidatedDiagnostic,
    pub raw: String,
    pub attempts: Vec<Attempt>,
}

/// Sends the prompt, retrying on transport failures and on unparseable
/// replies (the parse error is fed back to the model). Exhaustion carries
/// the last raw reply.
pub fn llm_agent_step(
    prompt: &MasterPrompt,
    config: &DrConfig,
    endpoint: &EndpointConfig,
    transport: &mut dyn ChatTransport,
) -> Result<LlmOutcome> {
    let mut request = initial_request(prompt, endpoint);
    let mut attempts = Vec::new();
    let mut last_raw = None;
    let mut last_error = String::from("no attempts made");
    for number in 1..=endpoint.max_attempts.max(1) {
        let raw = match transport.send(&request) {
            Ok(raw) => raw,
            Err(e) => {
                log::warn!("agent attempt {number}: transport error: {e}");
                last_error = format!("transport: {e}");
                attempts.push(Attempt {
                    number,
                    outcome: last_error.clone(),
                });
                continue;
            }
        };
        match parse_diagnostic(&raw, config) {
            Ok(diagnostic) => {
                attempts.push(Attempt {
                    number,
                    outcome: "ok".into(),
                });
                return Ok(LlmOutcome {
                    diagnostic,
                    raw,
                    attempts,
                });
            }
            Err(e) => {
                log::warn!("agent attempt {number}: {e}");
                last_error = e.to_string();
                attempts.push(Attempt {
                    number,
                    outcome: last_error.clone(),
                });
                request
                    .messages
                    .push(ChatMessage::text("assistant", raw.clone()));
                request.messages.push(ChatMessage::text(
                    "user",
                    format!(
                        "Your reply could not be used: {e}. Reply again with only the JSON object in the required schema."
                    ),
                ));
                last_raw = Some(raw);
            }
        }
    }
    Err(Error::AgentExhausted {
        attempts: attempts.len(),
        last_error,
        last_raw,
    })
}

/// Request body in the common chat-completions wire format.
pub fn request_body(request: &ChatRequest) -> Value {
    json!(request)
}
