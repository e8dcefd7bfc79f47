use std::time::Duration;

use log::warn;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::model::Cluster;

use super::prompt::{build_prompt, parse_shortlist};
use super::stub::{stub_shortlist, StubConfig};
use super::{EpochSnapshot, MigrationAction};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("agent transport failed: {0}")]
    Transport(String),
    #[error("agent response malformed: {0}")]
    BadResponse(String),
    #[error("agent reply has no usable shortlist")]
    Unparseable,
}

/// Chat-completion endpoint settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmClientConfig {
    /// Full URL of the chat-completions route.
    pub endpoint: String,
    pub model: String,
    /// Response timeout in seconds; defaults to 0.8 of the epoch interval.
    pub timeout: Option<f64>,
    pub retries: u32,
    /// Environment variable holding the bearer token, if any.
    pub token_env: String,
}

impl Default for LlmClientConfig {
    fn default() -> Self {
        LlmClientConfig {
            endpoint: "http://127.0.0.1:11434/v1/chat/completions".into(),
            model: "qwen3:32b".into(),
            timeout: None,
            retries: 1,
            token_env: "HAF_AGENT_TOKEN".into(),
        }
    }
}

pub struct LlmClient {
    cfg: LlmClientConfig,
    agent: ureq::Agent,
}

impl LlmClient {
    pub fn new(cfg: LlmClientConfig, epoch_interval: f64) -> Self {
        let timeout = Duration::from_secs_f64(cfg.timeout.unwrap_or(0.8 * epoch_interval).max(1e-3));
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        LlmClient { cfg, agent }
    }

    pub fn config(&self) -> &LlmClientConfig {
        &self.cfg
    }

    /// Sends one user message at temperature 0 and returns the reply text.
    pub fn complete(&self, prompt: &str) -> Result<String, AgentError> {
        let body = json!({
            "model": self.cfg.model,
            "temperature": 0,
            "messages": [{ "role": "user", "content": prompt }],
        });
        let mut last = AgentError::Transport("no attempt made".into());
        for attempt in 0..=self.cfg.retries {
            let mut req = self.agent.post(&self.cfg.endpoint).set("Content-Type", "application/json");
            if let Ok(token) = std::env::var(&self.cfg.token_env) {
                req = req.set("Authorization", &format!("Bearer {token}"));
            }
            match req.send_json(body.clone()) {
                Ok(resp) => {
                    let v: serde_json::Value =
                        resp.into_json().map_err(|e| AgentError::BadResponse(e.to_string()))?;
                    return v["choices"][0]["message"]["content"]
                        .as_str()
                        .map(str::to_owned)
                        .ok_or_else(|| AgentError::BadResponse("missing choices[0].message.content".into()));
                }
                Err(e) => {
                    warn!("agent request attempt {} failed: {e}", attempt + 1);
                    last = AgentError::Transport(e.to_string());
                }
            }
        }
        Err(last)
    }
}

/// Source of the ordered shortlist.
pub enum Agent {
    Stub(StubConfig),
    Llm { client: LlmClient, stub: StubConfig },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub shortlist: Vec<MigrationAction>,
    /// The external agent failed and the stub answered instead.
    pub degraded: bool,
    pub prompt: Option<String>,
    pub reply: Option<String>,
}

impl Agent {
    pub fn k(&self) -> usize {
        match self {
            Agent::Stub(c) | Agent::Llm { stub: c, .. } => c.k.max(1),
        }
    }

    pub fn is_stub(&self) -> bool {
        matches!(self, Agent::Stub(_))
    }

    pub fn propose(&self, cluster: &Cluster, snapshot: &EpochSnapshot, candidates: &[MigrationAction]) -> Proposal {
        match self {
            Agent::Stub(cfg) => Proposal {
                shortlist: stub_shortlist(snapshot, candidates, cfg),
                degraded: false,
                prompt: None,
                reply: None,
            },
            Agent::Llm { client, stub } => {
                let prompt = build_prompt(cluster, snapshot, candidates, self.k());
                let (shortlist, degraded, reply) =
                    llm_shortlist(&prompt, client, candidates, self.k(), || stub_shortlist(snapshot, candidates, stub));
                Proposal { shortlist, degraded, prompt: Some(prompt), reply }
            }
        }
    }
}

/// Asks the agent for a shortlist; any failure yields `fallback()` instead.
///
/// Returns the shortlist, whether it came from the fallback, and the raw reply.
pub fn llm_shortlist(
    prompt: &str,
    client: &LlmClient,
    candidates: &[MigrationAction],
    k: usize,
    fallback: impl FnOnce() -> Vec<MigrationAction>,
) -> (Vec<MigrationAction>, bool, Option<String>) {
    match client.complete(prompt) {
        Ok(reply) => match parse_shortlist(&reply, candidates.len(), k) {
            Some(ids) => (ids.into_iter().map(|i| candidates[i]).collect(), false, Some(reply)),
            None => {
                warn!("{}; using stub shortlist", AgentError::Unparseable);
                (fallback(), true, Some(reply))
            }
        },
        Err(e) => {
            warn!("{e}; using stub shortlist");
            (fallback(), true, None)
        }
    }
}
