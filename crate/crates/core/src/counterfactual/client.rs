use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::prompt::{CandidatePayload, JudgePayload, VariationPayload};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    CandidatePhrases,
    GenerateVariation,
    JudgeLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "task", content = "payload", rename_all = "snake_case")]
pub enum RequestBody {
    CandidatePhrases(CandidatePayload),
    GenerateVariation(VariationPayload),
    JudgeLabel(JudgePayload),
}

impl RequestBody {
    pub fn task(&self) -> Task {
        match self {
            RequestBody::CandidatePhrases(_) => Task::CandidatePhrases,
            RequestBody::GenerateVariation(_) => Task::GenerateVariation,
            RequestBody::JudgeLabel(_) => Task::JudgeLabel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub seed: u64,
    /// 0 for the first try; bumped on every retry of the same payload.
    pub attempt: u32,
    pub body: RequestBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum ClientError {
    #[error("completion timed out")]
    Timeout,
    #[error("completion transport failed: {0}")]
    Transport(String),
    #[error("no recorded response for request")]
    NotRecorded,
}

/// A chat-completion backend. Responses are raw text; parsing happens on
/// the caller's side so every backend is held to the same checks.
pub trait CompletionClient: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, ClientError>;
}

/// One request with its outcome, as written to transcript files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub request: CompletionRequest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<CompletionResponse>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ClientError>,
}

pub fn transcript_to_jsonl(entries: &[TranscriptEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("transcript entries serialize"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("transcript line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("reading transcript {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub fn transcript_from_jsonl(text: &str) -> Result<Vec<TranscriptEntry>, TranscriptError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| TranscriptError::Parse {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

/// Serves responses from a recorded transcript, keyed by the exact request.
#[derive(Debug, Clone, Default)]
pub struct ReplayClient {
    answers: HashMap<String, Result<CompletionResponse, ClientError>>,
}

fn request_key(request: &CompletionRequest) -> String {
    serde_json::to_string(request).expect("requests serialize")
}

impl ReplayClient {
    pub fn new(entries: &[TranscriptEntry]) -> Self {
        let answers = entries
            .iter()
            .map(|e| {
                let outcome = match (&e.response, &e.error) {
                    (Some(r), _) => Ok(r.clone()),
                    (None, Some(err)) => Err(err.clone()),
                    (None, None) => Err(ClientError::NotRecorded),
                };
                (request_key(&e.request), outcome)
            })
            .collect();
        ReplayClient { answers }
    }

    pub fn load(path: &Path) -> Result<Self, TranscriptError> {
        let text = std::fs::read_to_string(path).map_err(|source| TranscriptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(ReplayClient::new(&transcript_from_jsonl(&text)?))
    }
}

impl CompletionClient for ReplayClient {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, ClientError> {
        self.answers
            .get(&request_key(request))
            .cloned()
            .unwrap_or(Err(ClientError::NotRecorded))
    }
}

/// Counts requests per task; handy in tests and for batch summaries.
pub fn task_counts(entries: &[TranscriptEntry]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for e in entries {
        let key = serde_json::to_value(e.request.body.task())
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default();
        *out.entry(key).or_insert(0) += 1;
    }
    out
}
