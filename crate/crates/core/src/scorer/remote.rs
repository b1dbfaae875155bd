use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::wire::{DetokenizeRequest, DetokenizeResponse, ErrorResponse, LogprobsRequest, LogprobsResponse, VocabResponse};
use super::{LogProbRow, Scorer, ScorerError, ScorerVocab, TokenId};

/// Environment variable holding a bearer token sent with every request.
pub const AUTH_TOKEN_ENV: &str = "OPENRULE_SCORER_TOKEN";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    pub base_url: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// Extra attempts after a transport failure. HTTP errors are not retried.
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncate_top: Option<usize>,
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_retries() -> u32 {
    2
}

impl RemoteConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            timeout_ms: default_timeout_ms(),
            retries: default_retries(),
            truncate_top: None,
        }
    }
}

/// Client for a scorer service speaking the [`wire`](super::wire) protocol.
/// The vocabulary is fetched once at connect time.
pub struct RemoteScorer {
    agent: ureq::Agent,
    config: RemoteConfig,
    token: Option<String>,
    vocab: ScorerVocab,
}

impl RemoteScorer {
    /// Connect using the auth token from [`AUTH_TOKEN_ENV`], if set.
    pub fn connect(config: RemoteConfig) -> Result<Self, ScorerError> {
        Self::connect_with_token(config, std::env::var(AUTH_TOKEN_ENV).ok())
    }

    pub fn connect_with_token(config: RemoteConfig, token: Option<String>) -> Result<Self, ScorerError> {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build();
        let resp: VocabResponse = call(&agent, &config, token.as_deref(), "GET", "/v1/vocab", None::<&()>)?;
        let vocab = ScorerVocab::try_from(resp)?;
        Ok(Self { agent, config, token, vocab })
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, ScorerError> {
        call(&self.agent, &self.config, self.token.as_deref(), "POST", path, Some(body))
    }
}

fn call<B: Serialize, T: DeserializeOwned>(
    agent: &ureq::Agent,
    config: &RemoteConfig,
    token: Option<&str>,
    method: &str,
    path: &str,
    body: Option<&B>,
) -> Result<T, ScorerError> {
    let url = format!("{}{}", config.base_url.trim_end_matches('/'), path);
    let mut last_error = None;
    for _ in 0..=config.retries {
        let mut req = agent.request(method, &url);
        if let Some(token) = token {
            req = req.set("Authorization", &format!("Bearer {token}"));
        }
        let result = match body {
            Some(b) => req.send_json(b),
            None => req.call(),
        };
        match result {
            Ok(resp) => {
                return resp
                    .into_json::<T>()
                    .map_err(|e| ScorerError::Protocol(format!("{path}: malformed response: {e}")));
            }
            Err(ureq::Error::Status(code, resp)) => {
                let detail = resp
                    .into_json::<ErrorResponse>()
                    .map(|e| e.error)
                    .unwrap_or_else(|_| "no error body".into());
                return Err(ScorerError::Protocol(format!("{path}: HTTP {code}: {detail}")));
            }
            Err(ureq::Error::Transport(t)) => last_error = Some(t.to_string()),
        }
    }
    Err(ScorerError::Transport(format!("{url}: {}", last_error.unwrap_or_default())))
}

impl Scorer for RemoteScorer {
    fn vocab(&self) -> &ScorerVocab {
        &self.vocab
    }

    fn next_token_logprobs(&self, condition: &str, prefixes: &[&[TokenId]]) -> Result<Vec<LogProbRow>, ScorerError> {
        for prefix in prefixes {
            self.vocab.check_ids(prefix)?;
        }
        if prefixes.is_empty() {
            return Ok(Vec::new());
        }
        let request = LogprobsRequest {
            condition: condition.to_string(),
            prefixes: prefixes.iter().map(|p| p.to_vec()).collect(),
            truncate_top: self.config.truncate_top,
        };
        let resp: LogprobsResponse = self.post("/v1/logprobs", &request)?;
        if resp.rows.len() != prefixes.len() {
            return Err(ScorerError::Protocol(format!(
                "expected {} rows, got {}",
                prefixes.len(),
                resp.rows.len()
            )));
        }
        resp.rows.into_iter().map(|row| row.into_row(self.vocab.len())).collect()
    }

    fn detokenize(&self, tokens: &[TokenId]) -> Result<String, ScorerError> {
        self.vocab.check_ids(tokens)?;
        let resp: DetokenizeResponse =
            self.post("/v1/detokenize", &DetokenizeRequest { tokens: tokens.to_vec() })?;
        Ok(resp.text)
    }
}
