//! Label-flipping counterfactuals that keep matching the rule which made
//! the model assign the original label.

mod client;
mod generate;
mod mock;
mod prompt;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{AnnotatedSentence, LabelKey};
use crate::diff::EditScript;
use crate::par::Parallelism;
use crate::pattern::{MatchSpan, Pattern};

pub use client::{
    task_counts, transcript_from_jsonl, transcript_to_jsonl, ClientError, CompletionClient,
    CompletionRequest, CompletionResponse, ReplayClient, RequestBody, Task, TranscriptEntry,
    TranscriptError,
};
pub use generate::{
    contains_phrase, generate_candidate_phrases, generate_counterfactuals, generate_variations,
    get_symbolic_pattern, validate_record, CfBatch, CfContext, CfJob, Variation,
};
pub use mock::{MockClient, Phrasebook, PhrasebookEntry};
pub use prompt::{
    parse_label, parse_phrase_list, parse_variation, render_messages, CandidatePayload,
    JudgePayload, ParsedVariation, VariationPayload,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CfError {
    #[error("no rule of `{label}` matches sentence `{sentence}`")]
    NoRule { sentence: String, label: LabelKey },
    #[error("no candidate phrases to build variations from")]
    NoPhrases,
    #[error("target label equals the original label `{0}`")]
    SameLabel(LabelKey),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CfConfig {
    /// Candidate phrases turned into variations per target label.
    pub variations_per_label: usize,
    /// Extra attempts after a failed client call.
    pub retry_budget: u32,
    /// Records kept per (sentence, target label).
    pub max_per_target: usize,
    pub seed: u64,
    pub parallelism: Parallelism,
}

impl Default for CfConfig {
    fn default() -> Self {
        CfConfig {
            variations_per_label: 2,
            retry_budget: 2,
            max_per_target: 1,
            seed: 0,
            parallelism: Parallelism::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidatePhrase {
    pub text: String,
    pub target_label: LabelKey,
    /// Set by the local matcher, never by the client.
    pub satisfies_pattern: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CfStatus {
    Proposed,
    Accepted,
    Rejected,
    Relabeled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualRecord {
    pub id: String,
    pub original_id: String,
    pub original_text: String,
    pub original_label: LabelKey,
    pub target_label: LabelKey,
    pub text: String,
    pub sentence: AnnotatedSentence,
    pub included_phrase: CandidatePhrase,
    /// The original label's rule that matched the original sentence.
    pub pattern: Pattern,
    pub wildcard_cap: usize,
    /// First match of `pattern` on the counterfactual.
    pub matched_span: MatchSpan,
    pub edit_script: EditScript,
    pub judged_label: LabelKey,
    pub reason: String,
    pub status: CfStatus,
    /// Labels given when the record was accepted or relabeled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved_labels: Option<BTreeSet<LabelKey>>,
}
