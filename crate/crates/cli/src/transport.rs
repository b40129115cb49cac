//! Blocking HTTP transport for chat-completion endpoints.

use std::time::Duration;

use anyhow::{Context, Result};
use serde_json::Value;
use vizrefine::agent::llm::{extract_reply, request_body, ChatRequest};
use vizrefine::agent::{ChatTransport, EndpointConfig, TransportError};

pub struct HttpTransport {
    agent: ureq::Agent,
    url: String,
    api_key: String,
}

impl HttpTransport {
    /// Reads the credential from the endpoint's configured variable.
    pub fn from_endpoint(endpoint: &EndpointConfig) -> Result<Self> {
        let api_key = std::env::var(&endpoint.api_key_env).with_context(|| {
            format!(
                "agent credential variable {} is not set",
                endpoint.api_key_env
            )
        })?;
        Ok(Self {
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(endpoint.timeout_secs))
                .build(),
            url: format!(
                "{}/chat/completions",
                endpoint.base_url.trim_end_matches('/')
            ),
            api_key,
        })
    }
}

impl ChatTransport for HttpTransport {
    fn send(&mut self, request: &ChatRequest) -> Result<String, TransportError> {
        let response = self
            .agent
            .post(&self.url)
            .set("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(request_body(request));
        let body: Value = match response {
            Ok(r) => r
                .into_json()
                .map_err(|e| TransportError(format!("unreadable response body: {e}")))?,
            Err(ureq::Error::Status(code, r)) => {
                let text = r.into_string().unwrap_or_default();
                return Err(TransportError(format!("HTTP {code}: {text}")));
            }
            Err(e) => return Err(TransportError(e.to_string())),
        };
        extract_reply(&body)
    }
}
