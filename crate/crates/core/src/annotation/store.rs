use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::labels::LabelKey;
use super::AnnotationError;

/// Where an annotation came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Human,
    CounterfactualAccepted,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub labels: BTreeSet<LabelKey>,
    pub source: Source,
    pub revision: u64,
}

/// Multi-label annotation store. Each mutation bumps a store-wide revision
/// counter, so revisions are strictly increasing and never reused.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationStore {
    known_ids: BTreeSet<String>,
    known_labels: BTreeSet<LabelKey>,
    entries: BTreeMap<String, Annotation>,
    revision: u64,
}

impl AnnotationStore {
    pub fn new<I, L>(ids: I, labels: L) -> Self
    where
        I: IntoIterator<Item = String>,
        L: IntoIterator<Item = LabelKey>,
    {
        AnnotationStore {
            known_ids: ids.into_iter().collect(),
            known_labels: labels.into_iter().collect(),
            entries: BTreeMap::new(),
            revision: 0,
        }
    }

    /// Makes a sentence that is not part of the corpus (an accepted
    /// counterfactual) addressable.
    pub fn register_sentence(&mut self, id: &str) {
        self.known_ids.insert(id.to_string());
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn set_labels(
        &mut self,
        sentence_id: &str,
        labels: BTreeSet<LabelKey>,
        source: Source,
    ) -> Result<u64, AnnotationError> {
        if !self.known_ids.contains(sentence_id) {
            return Err(AnnotationError::NotFound(format!("sentence `{sentence_id}`")));
        }
        if let Some(bad) = labels.iter().find(|l| !self.known_labels.contains(*l)) {
            return Err(AnnotationError::NotFound(format!("label `{bad}`")));
        }
        self.revision += 1;
        self.entries.insert(
            sentence_id.to_string(),
            Annotation {
                labels,
                source,
                revision: self.revision,
            },
        );
        Ok(self.revision)
    }

    pub fn get(&self, sentence_id: &str) -> Option<&Annotation> {
        self.entries.get(sentence_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Annotation)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sentences_by_label(&self, label: &LabelKey) -> Result<Vec<String>, AnnotationError> {
        if !self.known_labels.contains(label) {
            return Err(AnnotationError::NotFound(format!("label `{label}`")));
        }
        Ok(self
            .entries
            .iter()
            .filter(|(_, a)| a.labels.contains(label))
            .map(|(id, _)| id.clone())
            .collect())
    }

    /// Known sentence ids without any annotation, in id order.
    pub fn unlabeled(&self) -> Vec<String> {
        self.known_ids
            .iter()
            .filter(|id| !self.entries.contains_key(*id))
            .cloned()
            .collect()
    }

    /// A copy of the store restricted to annotations whose source passes `keep`.
    pub fn filtered(&self, keep: impl Fn(Source) -> bool) -> AnnotationStore {
        AnnotationStore {
            known_ids: self.known_ids.clone(),
            known_labels: self.known_labels.clone(),
            entries: self
                .entries
                .iter()
                .filter(|(_, a)| keep(a.source))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            revision: self.revision,
        }
    }
}
