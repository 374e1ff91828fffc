use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::ContinuationScorer;
use crate::error::{Error, Result};

/// Request body: both fields are whitespace-joined token lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub prompt: String,
    pub continuation: String,
}

/// Response body: natural-log probability of each continuation token, as the server
/// tokenizes it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub token_logprobs: Vec<f64>,
}

/// Scores continuations with a hosted model over HTTP.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    endpoint: String,
    retries: usize,
    agent: ureq::Agent,
}

impl RemoteBackend {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
    pub const MAX_RETRIES: usize = 2;

    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: endpoint.to_string(),
            retries: Self::MAX_RETRIES,
            agent,
        }
    }

    /// Retries after transport failures, capped at [`RemoteBackend::MAX_RETRIES`].
    pub fn with_retries(mut self, retries: usize) -> Self {
        self.retries = retries.min(Self::MAX_RETRIES);
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn score(&self, request: &ScoreRequest) -> Result<ScoreResponse> {
        let mut attempt = 0;
        let mut resp = loop {
            match self.agent.post(&self.endpoint).send_json(request) {
                Ok(r) => break r,
                Err(_) if attempt < self.retries => attempt += 1,
                Err(e) => return Err(Error::Backend(format!("transport: {e}"))),
            }
        };
        let status = resp.status();
        if status != 200 {
            return Err(Error::Backend(format!("HTTP status {}", status.as_u16())));
        }
        resp.body_mut()
            .read_json::<ScoreResponse>()
            .map_err(|e| Error::Backend(format!("malformed response: {e}")))
    }
}

impl ContinuationScorer for RemoteBackend {
    fn token_logprobs(&self, prompt: &[String], continuation: &[String]) -> Result<Vec<f64>> {
        let resp = self.score(&ScoreRequest {
            prompt: prompt.join(" "),
            continuation: continuation.join(" "),
        })?;
        if resp.token_logprobs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Backend("non-finite log-probability".into()));
        }
        Ok(resp.token_logprobs)
    }
}
