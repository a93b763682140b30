//! HTTP refinement client configured from the environment.
//!
//! `REFINEMENT_ENDPOINT` is the URL requests are POSTed to and
//! `REFINEMENT_TOKEN`, when set, is sent as a bearer token. The body is the
//! JSON-encoded request; the reply is either `{"text": "..."}` or plain text.

use std::time::Duration;

use embodinav_core::tasks::{RefinementClient, RefinementError, RefinementRequest};

pub const ENDPOINT_VAR: &str = "REFINEMENT_ENDPOINT";
pub const TOKEN_VAR: &str = "REFINEMENT_TOKEN";

pub struct HttpRefinementClient {
    endpoint: String,
    token: Option<String>,
    agent: ureq::Agent,
}

impl HttpRefinementClient {
    pub fn new(endpoint: impl Into<String>, token: Option<String>, timeout: Duration) -> Self {
        Self {
            endpoint: endpoint.into(),
            token,
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }

    /// `None` when `REFINEMENT_ENDPOINT` is unset or empty.
    pub fn from_env(timeout: Duration) -> Option<Self> {
        let endpoint = std::env::var(ENDPOINT_VAR).ok().filter(|s| !s.trim().is_empty())?;
        let token = std::env::var(TOKEN_VAR).ok().filter(|s| !s.is_empty());
        Some(Self::new(endpoint, token, timeout))
    }
}

fn is_timeout(e: &ureq::Error) -> bool {
    match e {
        ureq::Error::Transport(t) => {
            let s = t.to_string().to_lowercase();
            s.contains("timed out") || s.contains("timeout")
        }
        ureq::Error::Status(..) => false,
    }
}

impl RefinementClient for HttpRefinementClient {
    fn complete(&self, request: &RefinementRequest) -> Result<String, RefinementError> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(t) = &self.token {
            req = req.set("Authorization", &format!("Bearer {t}"));
        }
        let body = serde_json::to_value(request).map_err(|e| RefinementError::Transport(e.to_string()))?;
        let resp = req.send_json(body).map_err(|e| {
            if is_timeout(&e) {
                RefinementError::ClientTimeout
            } else {
                RefinementError::Transport(e.to_string())
            }
        })?;
        let text = resp
            .into_string()
            .map_err(|e| RefinementError::Transport(e.to_string()))?;
        match serde_json::from_str::<serde_json::Value>(&text) {
            Ok(serde_json::Value::Object(m)) => match m.get("text") {
                Some(serde_json::Value::String(s)) => Ok(s.clone()),
                _ => Err(RefinementError::SchemaInvalid("reply object lacks a text field".into())),
            },
            _ => Ok(text),
        }
    }
}
