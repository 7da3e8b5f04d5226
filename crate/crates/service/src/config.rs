use std::path::Path;

use serde::{Deserialize, Serialize};
use vtteach_core::counterfactual::CfConfig;
use vtteach_core::synthesis::SynthesisConfig;

use crate::ServiceError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClientKind {
    #[default]
    Mock,
    Remote,
}

/// Completion backend settings. Endpoint, model and key can be overridden
/// through `VTTEACH_ENDPOINT`, `VTTEACH_MODEL` and `VTTEACH_API_KEY`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClientConfig {
    pub kind: ClientKind,
    /// OpenAI-compatible chat completions URL.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout_secs: u64,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            kind: ClientKind::Mock,
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 60,
        }
    }
}

impl ClientConfig {
    /// Applies the environment overrides; the API key is resolved but never
    /// stored in the config itself.
    pub fn resolved(&self) -> (ClientConfig, Option<String>) {
        let mut c = self.clone();
        if let Ok(v) = std::env::var("VTTEACH_ENDPOINT") {
            c.endpoint = v;
        }
        if let Ok(v) = std::env::var("VTTEACH_MODEL") {
            c.model = v;
        }
        let key = std::env::var("VTTEACH_API_KEY")
            .ok()
            .or_else(|| std::env::var(&c.api_key_env).ok());
        (c, key)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub synthesis: SynthesisConfig,
    pub counterfactual: CfConfig,
    pub client: ClientConfig,
    /// Human annotations between automatic retrains.
    pub retrain_every: usize,
    /// Share of the corpus held out for evaluation.
    pub holdout_fraction: f64,
    pub split_seed: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            synthesis: SynthesisConfig::default(),
            counterfactual: CfConfig::default(),
            client: ClientConfig::default(),
            retrain_every: 10,
            holdout_fraction: 0.25,
            split_seed: 0,
        }
    }
}

impl SessionConfig {
    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ServiceError::BadRequest(format!("{}: {e}", path.display())))
    }

    /// One seed for the split, the learner and the counterfactual client.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.split_seed = seed;
        self.synthesis.seed = seed;
        self.counterfactual.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        self.synthesis
            .validate()
            .map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        if self.retrain_every == 0 {
            return Err(ServiceError::BadRequest("retrain_every must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(ServiceError::BadRequest(format!(
                "holdout_fraction {} outside [0, 1)",
                self.holdout_fraction
            )));
        }
        Ok(())
    }
}
