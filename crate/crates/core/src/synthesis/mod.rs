//! Rule synthesis from annotations and the linear label model built on top
//! of the synthesized rules.

mod atoms;
mod bitset;
mod model;
mod search;

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{AnnotatedSentence, AnnotationStore, LabelKey};
use crate::metrics::precision_recall_f1;
use crate::par::Parallelism;
use crate::pattern::{MatchConfig, Pattern};

pub use atoms::enumerate_atoms;
pub use model::{
    evaluate, predict, score_sentence, train_label_model, LabelMetrics, LabelModel, MetricsReport,
    Prediction, WeightedPattern,
};
pub use search::{explore_sequences, synthesize_patterns};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthesisError {
    #[error("label `{0}` has no positive examples")]
    NoPositives(LabelKey),
    #[error("annotated sentence `{0}` is not available")]
    MissingSentence(String),
    #[error("invalid synthesis config: {0}")]
    InvalidConfig(String),
    #[error("test pool is empty")]
    EmptyTestPool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    pub max_sequence_len: usize,
    pub max_branches: usize,
    pub max_wildcards_per_seq: usize,
    pub beam_width: usize,
    /// Wildcard reach used for scoring, training and prediction.
    pub wildcard_cap: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// How many scored patterns a label keeps.
    pub max_patterns: usize,
    pub threshold: f64,
    pub parallelism: Parallelism,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            max_sequence_len: 3,
            max_branches: 3,
            max_wildcards_per_seq: 1,
            beam_width: 50,
            wildcard_cap: 3,
            epochs: 50,
            learning_rate: 0.1,
            seed: 0,
            max_patterns: 10,
            threshold: 0.5,
            parallelism: Parallelism::Auto,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        let positive = [
            ("max_sequence_len", self.max_sequence_len),
            ("max_branches", self.max_branches),
            ("beam_width", self.beam_width),
            ("wildcard_cap", self.wildcard_cap),
            ("epochs", self.epochs),
            ("max_patterns", self.max_patterns),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(SynthesisError::InvalidConfig(format!("{name} must be positive")));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(SynthesisError::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(SynthesisError::InvalidConfig("threshold must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn match_config(&self) -> MatchConfig {
        MatchConfig::capped(self.wildcard_cap)
    }
}

/// A rule with its fit on the training snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPattern {
    pub pattern: Pattern,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Positives matched.
    pub support: usize,
}

/// Exact confusion counts; ranking compares f1 as a rational so ties are
/// decided identically on every platform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Fit {
    pub tp: usize,
    pub fp: usize,
    pub positives: usize,
}

impl Fit {
    fn f1_parts(self) -> (usize, usize) {
        let fn_ = self.positives - self.tp;
        (2 * self.tp, 2 * self.tp + self.fp + fn_)
    }

    /// Compares f1 values exactly (0/0 counts as 0).
    pub fn cmp_f1(self, other: Fit) -> Ordering {
        let (a, b) = self.f1_parts();
        let (c, d) = other.f1_parts();
        let lhs = if b == 0 { 0 } else { a * d.max(1) };
        let rhs = if d == 0 { 0 } else { c * b.max(1) };
        lhs.cmp(&rhs)
    }

    pub fn is_zero(self) -> bool {
        self.tp == 0
    }

    pub fn scored(self, pattern: Pattern) -> ScoredPattern {
        let prf = precision_recall_f1(self.tp, self.fp, self.positives - self.tp);
        ScoredPattern {
            pattern,
            precision: prf.precision,
            recall: prf.recall,
            f1: prf.f1,
            support: self.tp,
        }
    }
}

/// One training example: a sentence and the labels it carries.
#[derive(Debug, Clone)]
pub struct Example<'a> {
    pub sentence: &'a AnnotatedSentence,
    pub labels: BTreeSet<LabelKey>,
}

/// Immutable view of the annotated sentences a model is trained on.
#[derive(Debug, Clone, Default)]
pub struct TrainingSnapshot<'a> {
    pub examples: Vec<Example<'a>>,
}

impl<'a> TrainingSnapshot<'a> {
    /// Every annotated sentence in the store, in id order. `lookup` resolves
    /// ids to sentences (corpus sentences and accepted counterfactuals).
    pub fn from_store<F>(store: &AnnotationStore, lookup: F) -> Result<Self, SynthesisError>
    where
        F: Fn(&str) -> Option<&'a AnnotatedSentence>,
    {
        let examples = store
            .iter()
            .map(|(id, ann)| {
                lookup(id)
                    .map(|sentence| Example {
                        sentence,
                        labels: ann.labels.clone(),
                    })
                    .ok_or_else(|| SynthesisError::MissingSentence(id.clone()))
            })
            .collect::<Result<_, _>>()?;
        Ok(TrainingSnapshot { examples })
    }

    pub fn positives(&self, label: &LabelKey) -> Vec<&'a AnnotatedSentence> {
        self.examples
            .iter()
            .filter(|e| e.labels.contains(label))
            .map(|e| e.sentence)
            .collect()
    }

    /// Sentences that carry some other label and not this one.
    pub fn negatives(&self, label: &LabelKey) -> Vec<&'a AnnotatedSentence> {
        self.examples
            .iter()
            .filter(|e| !e.labels.is_empty() && !e.labels.contains(label))
            .map(|e| e.sentence)
            .collect()
    }
}
