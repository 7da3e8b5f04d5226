use std::time::Duration;

use serde_json::json;
use vtteach_core::counterfactual::{
    render_messages, ClientError, CompletionClient, CompletionRequest, CompletionResponse, MockClient,
};

use crate::config::{ClientConfig, ClientKind};
use crate::session::{tagger, TeachingSession};
use crate::ServiceError;

/// Client for an OpenAI-compatible chat completions endpoint.
pub struct RemoteClient {
    http: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

impl RemoteClient {
    pub fn new(config: &ClientConfig) -> Result<Self, ServiceError> {
        let (config, api_key) = config.resolved();
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| ServiceError::Client(e.to_string()))?;
        Ok(RemoteClient {
            http,
            endpoint: config.endpoint,
            model: config.model,
            api_key,
        })
    }
}

impl CompletionClient for RemoteClient {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, ClientError> {
        let (system, user) = render_messages(&request.body);
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "seed": request.seed,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        });
        let mut req = self.http.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let transport = |e: reqwest::Error| {
            if e.is_timeout() {
                ClientError::Timeout
            } else {
                ClientError::Transport(e.to_string())
            }
        };
        let resp = req.send().map_err(transport)?;
        let status = resp.status();
        if !status.is_success() {
            return Err(ClientError::Transport(format!("HTTP {status}")));
        }
        let v: serde_json::Value = resp.json().map_err(transport)?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(|text| CompletionResponse { text: text.to_string() })
            .ok_or_else(|| ClientError::Transport("response has no message content".into()))
    }
}

/// The client a session's config asks for.
pub fn make_client(session: &TeachingSession) -> Result<Box<dyn CompletionClient>, ServiceError> {
    client_for(session, &session.config.client)
}

/// A client for `session` built from `config` instead of the session's own
/// client settings.
pub fn client_for(session: &TeachingSession, config: &ClientConfig) -> Result<Box<dyn CompletionClient>, ServiceError> {
    Ok(match config.kind {
        ClientKind::Mock => Box::new(MockClient::new(
            session.config.counterfactual.seed,
            session.lexicon.clone(),
            session.phrasebook.clone(),
            tagger().clone(),
        )),
        ClientKind::Remote => Box::new(RemoteClient::new(config)?),
    })
}
