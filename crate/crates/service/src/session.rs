//! Session state and the operations that change it.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vtteach_core::annotation::{
    holdout_split, load_corpus, AnnotatedSentence, AnnotationError, AnnotationStore, Corpus, LabelKey, LabelSet,
    Source, SynonymLexicon, TaggerResources,
};
use vtteach_core::counterfactual::{
    generate_counterfactuals, CfContext, CfJob, CfStatus, CompletionClient, CounterfactualRecord, Phrasebook,
    TranscriptEntry,
};
use vtteach_core::pattern::{match_sentence, parse_pattern, MatchConfig, Pattern};
use vtteach_core::synthesis::{
    evaluate, predict, score_sentence, synthesize_patterns, train_label_model, LabelModel, MetricsReport,
    Prediction, SynthesisError, TrainingSnapshot,
};

use crate::config::SessionConfig;
use crate::ServiceError;

pub(crate) fn tagger() -> &'static TaggerResources {
    static TAGGER: OnceLock<TaggerResources> = OnceLock::new();
    TAGGER.get_or_init(TaggerResources::builtin)
}

impl From<AnnotationError> for ServiceError {
    fn from(e: AnnotationError) -> Self {
        match e {
            AnnotationError::NotFound(m) => ServiceError::NotFound(m),
            AnnotationError::Conflict(m) => ServiceError::Conflict(m),
            AnnotationError::Io { .. } => ServiceError::Io(e.to_string()),
            other => ServiceError::BadRequest(other.to_string()),
        }
    }
}

/// Everything a session is built from.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionInputs {
    pub corpus: Corpus,
    pub labels: LabelSet,
    pub lexicon: SynonymLexicon,
    pub phrasebook: Phrasebook,
}

impl SessionInputs {
    pub fn load(
        corpus: &Path,
        labels: &Path,
        lexicon: &Path,
        phrasebook: Option<&Path>,
    ) -> Result<Self, ServiceError> {
        Ok(SessionInputs {
            corpus: load_corpus(corpus, tagger())?,
            labels: LabelSet::load(labels)?,
            lexicon: SynonymLexicon::load(lexicon)?,
            phrasebook: match phrasebook {
                Some(p) => Phrasebook::load(p)?,
                None => Phrasebook::default(),
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    /// Reached the annotation count.
    Auto,
    Explicit,
    Simulation,
}

/// One retrain, with held-out scores for models trained with and without
/// accepted counterfactuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrainEvent {
    pub revision: u64,
    pub trigger: Trigger,
    pub human_annotations: usize,
    pub counterfactual_annotations: usize,
    /// Rules of the active models, canonical text, best first.
    pub rules: BTreeMap<LabelKey, Vec<String>>,
    pub with_cf: Option<MetricsReport>,
    pub without_cf: Option<MetricsReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notices: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Reject,
    Relabel { labels: BTreeSet<LabelKey> },
}

/// A state change, as recorded in the operation log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mutation {
    SubmitLabels {
        sentence_id: String,
        labels: BTreeSet<LabelKey>,
        source: Source,
    },
    Retrain,
    QueueCounterfactuals {
        sentence_id: String,
        records: Vec<CounterfactualRecord>,
    },
    ResolveCounterfactual {
        cf_id: String,
        decision: Decision,
    },
}

/// What a mutation produced, beyond the new revision.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Applied {
    pub revision: u64,
    pub retrain: Option<RetrainEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedSpan {
    /// `None` for a user-supplied filter pattern.
    pub label: Option<LabelKey>,
    pub pattern: String,
    pub start: usize,
    pub end: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub sentence_id: String,
    pub text: String,
    pub suggested: Vec<Prediction>,
    pub spans: Vec<MatchedSpan>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataStatus {
    #[default]
    All,
    Labeled,
    Unlabeled,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataQuery {
    pub page: usize,
    pub page_size: Option<usize>,
    pub pattern: Option<String>,
    pub label: Option<LabelKey>,
    pub status: DataStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataItem {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<BTreeSet<LabelKey>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Source>,
    pub suggested: Vec<LabelKey>,
    pub spans: Vec<MatchedSpan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPage {
    pub total: usize,
    pub page: usize,
    pub page_size: usize,
    pub items: Vec<DataItem>,
}

/// Result of generating counterfactuals for one sentence, before queueing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Generated {
    pub records: Vec<CounterfactualRecord>,
    pub transcript: Vec<TranscriptEntry>,
    pub notices: Vec<String>,
    /// True when the records were already queued.
    pub cached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeachingSession {
    pub id: String,
    pub revision: u64,
    pub config: SessionConfig,
    pub labels: LabelSet,
    pub lexicon: SynonymLexicon,
    pub phrasebook: Phrasebook,
    pub corpus: Corpus,
    pub train_pool: Vec<String>,
    pub test_pool: Vec<String>,
    pub store: AnnotationStore,
    /// Trained on human and accepted counterfactual annotations.
    pub models: Vec<LabelModel>,
    pub models_without_cf: Vec<LabelModel>,
    pub queue: Vec<CounterfactualRecord>,
    pub history: Vec<RetrainEvent>,
    /// Human annotations since the last retrain.
    pub since_retrain: usize,
}

const DEFAULT_PAGE_SIZE: usize = 20;

impl TeachingSession {
    /// Fresh session. Without `name`, the id is derived from the inputs and
    /// config, so recreating from the same files gives the same session.
    pub fn create(inputs: SessionInputs, config: SessionConfig, name: Option<&str>) -> Result<Self, ServiceError> {
        config.validate()?;
        if inputs.corpus.is_empty() {
            return Err(ServiceError::BadRequest("corpus is empty".into()));
        }
        if inputs.labels.is_empty() {
            return Err(ServiceError::BadRequest("label set is empty".into()));
        }
        let (train_pool, test_pool) = holdout_split(&inputs.corpus, config.holdout_fraction, config.split_seed)?;
        let store = AnnotationStore::new(train_pool.iter().cloned(), inputs.labels.keys());
        let id = match name {
            Some(n) if valid_id(n) => n.to_string(),
            Some(n) => return Err(ServiceError::BadRequest(format!("invalid session name `{n}`"))),
            None => {
                let mut h = Sha256::new();
                h.update(inputs.corpus.to_jsonl());
                h.update(serde_json::to_vec(&inputs.labels).expect("labels serialize"));
                h.update(inputs.lexicon.to_jsonl());
                h.update(serde_json::to_vec(&inputs.phrasebook).expect("phrasebook serializes"));
                h.update(serde_json::to_vec(&config).expect("config serializes"));
                format!("s{}", &hex::encode(h.finalize())[..12])
            }
        };
        Ok(TeachingSession {
            id,
            revision: 0,
            config,
            labels: inputs.labels,
            lexicon: inputs.lexicon,
            phrasebook: inputs.phrasebook,
            corpus: inputs.corpus,
            train_pool,
            test_pool,
            store,
            models: Vec::new(),
            models_without_cf: Vec::new(),
            queue: Vec::new(),
            history: Vec::new(),
            since_retrain: 0,
        })
    }

    pub fn inputs(&self) -> SessionInputs {
        SessionInputs {
            corpus: self.corpus.clone(),
            labels: self.labels.clone(),
            lexicon: self.lexicon.clone(),
            phrasebook: self.phrasebook.clone(),
        }
    }

    pub fn label_keys(&self) -> Vec<LabelKey> {
        self.labels.keys()
    }

    /// Corpus sentences plus queued counterfactuals that were accepted or
    /// relabeled.
    pub fn sentence(&self, id: &str) -> Option<&AnnotatedSentence> {
        self.corpus.get(id).or_else(|| {
            self.queue
                .iter()
                .find(|r| r.id == id && matches!(r.status, CfStatus::Accepted | CfStatus::Relabeled))
                .map(|r| &r.sentence)
        })
    }

    pub fn apply(&mut self, m: &Mutation) -> Result<Applied, ServiceError> {
        match m {
            Mutation::SubmitLabels {
                sentence_id,
                labels,
                source,
            } => self.submit_labels(sentence_id, labels.clone(), *source),
            Mutation::Retrain => {
                let ev = self.retrain(Trigger::Explicit)?;
                Ok(Applied {
                    revision: self.revision,
                    retrain: Some(ev),
                })
            }
            Mutation::QueueCounterfactuals { sentence_id, records } => {
                self.enqueue(sentence_id, records.clone())?;
                Ok(Applied {
                    revision: self.revision,
                    retrain: None,
                })
            }
            Mutation::ResolveCounterfactual { cf_id, decision } => {
                self.resolve(cf_id, decision)?;
                Ok(Applied {
                    revision: self.revision,
                    retrain: None,
                })
            }
        }
    }

    fn check_trainable(&self, sentence_id: &str) -> Result<(), ServiceError> {
        if self.test_pool.iter().any(|t| t == sentence_id) {
            return Err(ServiceError::BadRequest(format!("sentence `{sentence_id}` is held out for evaluation")));
        }
        if !self.corpus.contains(sentence_id) {
            return Err(ServiceError::NotFound(format!("sentence `{sentence_id}`")));
        }
        Ok(())
    }

    /// Stores labels for a corpus sentence. Human and oracle annotations
    /// count toward the retrain trigger.
    fn submit_labels(
        &mut self,
        sentence_id: &str,
        labels: BTreeSet<LabelKey>,
        source: Source,
    ) -> Result<Applied, ServiceError> {
        if source == Source::CounterfactualAccepted {
            return Err(ServiceError::BadRequest(
                "counterfactual labels are stored by resolving the counterfactual".into(),
            ));
        }
        self.check_trainable(sentence_id)?;
        self.store.set_labels(sentence_id, labels, source)?;
        self.revision += 1;
        self.since_retrain += 1;
        let retrain = if self.since_retrain >= self.config.retrain_every {
            Some(self.retrain(Trigger::Auto)?)
        } else {
            None
        };
        Ok(Applied {
            revision: self.revision,
            retrain,
        })
    }

    /// Labels a sentence without the retrain trigger; the simulation
    /// retrains once per round instead.
    pub(crate) fn label_quietly(&mut self, sentence_id: &str, labels: BTreeSet<LabelKey>) -> Result<(), ServiceError> {
        self.check_trainable(sentence_id)?;
        self.store.set_labels(sentence_id, labels, Source::Oracle)?;
        self.revision += 1;
        Ok(())
    }

    fn counts(&self) -> (usize, usize) {
        let cf = self
            .store
            .iter()
            .filter(|(_, a)| a.source == Source::CounterfactualAccepted)
            .count();
        (self.store.len() - cf, cf)
    }

    /// Learns one model per label from the store. Labels without positives
    /// are skipped with a notice.
    pub(crate) fn fit(&self, include_cf: bool) -> Result<(Vec<LabelModel>, Vec<String>), ServiceError> {
        let store = if include_cf {
            self.store.clone()
        } else {
            self.store.filtered(|s| s != Source::CounterfactualAccepted)
        };
        let snapshot = TrainingSnapshot::from_store(&store, |id| self.sentence(id))
            .map_err(|e| ServiceError::Internal(e.to_string()))?;
        let cfg = &self.config.synthesis;
        let mut models = Vec::new();
        let mut notices = Vec::new();
        for label in self.label_keys() {
            match synthesize_patterns(&label, &snapshot, &self.lexicon, cfg) {
                Ok(p) if p.is_empty() => notices.push(format!("label `{label}`: no rule fits; skipped")),
                Ok(p) => models.push(train_label_model(&label, &p, &snapshot, &self.lexicon, cfg)),
                Err(SynthesisError::NoPositives(_)) => {
                    notices.push(format!("label `{label}` has no positive annotations; skipped"))
                }
                Err(e) => return Err(ServiceError::BadRequest(e.to_string())),
            }
        }
        Ok((models, notices))
    }

    /// Held-out scores of `models`; `None` when no held-out sentence has
    /// gold labels.
    pub fn score(&self, models: &[LabelModel]) -> Option<MetricsReport> {
        let pool: Vec<(&AnnotatedSentence, &BTreeSet<LabelKey>)> = self
            .test_pool
            .iter()
            .filter_map(|id| Some((self.corpus.get(id)?, self.corpus.gold(id)?)))
            .collect();
        evaluate(models, &pool, &self.lexicon).ok()
    }

    pub fn retrain(&mut self, trigger: Trigger) -> Result<RetrainEvent, ServiceError> {
        let (models, mut notices) = self.fit(true)?;
        let (without, _) = self.fit(false)?;
        let with_cf = self.score(&models);
        let without_cf = self.score(&without);
        if with_cf.is_none() {
            notices.push("no gold labels in the held-out pool; metrics skipped".into());
        }
        for n in &notices {
            tracing::info!(session = %self.id, "{n}");
        }
        let (human, cf) = self.counts();
        let rules = models
            .iter()
            .map(|m| {
                let r = m.patterns.iter().map(|p| p.scored.pattern.canonical()).collect();
                (m.label.clone(), r)
            })
            .collect();
        self.models = models;
        self.models_without_cf = without;
        self.since_retrain = 0;
        self.revision += 1;
        let ev = RetrainEvent {
            revision: self.revision,
            trigger,
            human_annotations: human,
            counterfactual_annotations: cf,
            rules,
            with_cf,
            without_cf,
            notices,
        };
        self.history.push(ev.clone());
        Ok(ev)
    }

    fn match_config(&self) -> MatchConfig {
        self.config.synthesis.match_config()
    }

    fn rule_spans(&self, sentence: &AnnotatedSentence) -> Vec<MatchedSpan> {
        let cfg = self.match_config();
        let mut out = Vec::new();
        for m in &self.models {
            for wp in &m.patterns {
                if let Some(span) = match_sentence(&wp.scored.pattern, sentence, &self.lexicon, &cfg)
                    .into_iter()
                    .next()
                {
                    out.push(MatchedSpan {
                        label: Some(m.label.clone()),
                        pattern: wp.scored.pattern.canonical(),
                        start: span.start,
                        end: span.end,
                        color: self.labels.color_of(&m.label).map(String::from),
                    });
                }
            }
        }
        out
    }

    fn filter_spans(&self, pattern: &Pattern, sentence: &AnnotatedSentence) -> Vec<MatchedSpan> {
        match_sentence(pattern, sentence, &self.lexicon, &self.match_config())
            .into_iter()
            .map(|s| MatchedSpan {
                label: None,
                pattern: pattern.canonical(),
                start: s.start,
                end: s.end,
                color: None,
            })
            .collect()
    }

    fn parse_filter(filter: Option<&str>) -> Result<Option<Pattern>, ServiceError> {
        filter
            .map(|f| parse_pattern(f).map_err(|e| ServiceError::BadRequest(format!("pattern syntax: {e}"))))
            .transpose()
    }

    /// Unlabeled training sentences with the model's guesses. With a filter,
    /// only sentences the filter matches, with the filter's spans.
    pub fn suggestions(&self, filter: Option<&str>) -> Result<Vec<Suggestion>, ServiceError> {
        let filter = Self::parse_filter(filter)?;
        let mut out = Vec::new();
        for id in &self.train_pool {
            if self.store.get(id).is_some() {
                continue;
            }
            let s = self.corpus.get(id).expect("pool ids come from the corpus");
            let spans = match &filter {
                Some(p) => {
                    let spans = self.filter_spans(p, s);
                    if spans.is_empty() {
                        continue;
                    }
                    spans
                }
                None => self.rule_spans(s),
            };
            out.push(Suggestion {
                sentence_id: id.clone(),
                text: s.raw_text.clone(),
                suggested: predict(&self.models, s, &self.lexicon),
                spans,
            });
        }
        Ok(out)
    }

    pub fn data(&self, q: &DataQuery) -> Result<DataPage, ServiceError> {
        let filter = Self::parse_filter(q.pattern.as_deref())?;
        let page_size = q.page_size.unwrap_or(DEFAULT_PAGE_SIZE).max(1);
        let mut items = Vec::new();
        for id in &self.train_pool {
            let s = self.corpus.get(id).expect("pool ids come from the corpus");
            let ann = self.store.get(id);
            let keep_status = match q.status {
                DataStatus::All => true,
                DataStatus::Labeled => ann.is_some(),
                DataStatus::Unlabeled => ann.is_none(),
            };
            let keep_label = q
                .label
                .as_ref()
                .is_none_or(|l| ann.is_some_and(|a| a.labels.contains(l)));
            if !keep_status || !keep_label {
                continue;
            }
            let spans = match &filter {
                Some(p) => {
                    let spans = self.filter_spans(p, s);
                    if spans.is_empty() {
                        continue;
                    }
                    spans
                }
                None => self.rule_spans(s),
            };
            items.push(DataItem {
                id: id.clone(),
                text: s.raw_text.clone(),
                labels: ann.map(|a| a.labels.clone()),
                source: ann.map(|a| a.source),
                suggested: predict(&self.models, s, &self.lexicon)
                    .into_iter()
                    .map(|p| p.label)
                    .collect(),
                spans,
            });
        }
        let total = items.len();
        let items = items.into_iter().skip(q.page * page_size).take(page_size).collect();
        Ok(DataPage {
            total,
            page: q.page,
            page_size,
            items,
        })
    }

    /// Counterfactuals for every label of an annotated sentence against the
    /// labels it does not carry. Already queued records are returned as is.
    pub fn generate(&self, sentence_id: &str, client: &dyn CompletionClient) -> Result<Generated, ServiceError> {
        self.check_trainable(sentence_id)?;
        let ann = self
            .store
            .get(sentence_id)
            .filter(|a| !a.labels.is_empty())
            .ok_or_else(|| ServiceError::BadRequest(format!("sentence `{sentence_id}` has no labels")))?;
        let queued: Vec<CounterfactualRecord> = self
            .queue
            .iter()
            .filter(|r| r.original_id == sentence_id)
            .cloned()
            .collect();
        if !queued.is_empty() {
            return Ok(Generated {
                records: queued,
                cached: true,
                ..Generated::default()
            });
        }
        let sentence = self.corpus.get(sentence_id).expect("checked above");
        let jobs: Vec<CfJob<'_>> = ann
            .labels
            .iter()
            .map(|l| CfJob {
                sentence,
                original_label: l.clone(),
                exclude: ann.labels.clone(),
            })
            .collect();
        let labels = self.label_keys();
        let ctx = CfContext {
            client,
            lexicon: &self.lexicon,
            tagger: tagger(),
            labels: &labels,
            config: &self.config.counterfactual,
        };
        let batch = generate_counterfactuals(&ctx, &jobs, &self.models);
        let mut notices = batch.warnings;
        if batch.records.is_empty() {
            notices.push(format!("no counterfactuals for `{sentence_id}`"));
        }
        Ok(Generated {
            records: batch.records,
            transcript: batch.transcript,
            notices,
            cached: false,
        })
    }

    fn enqueue(&mut self, sentence_id: &str, records: Vec<CounterfactualRecord>) -> Result<(), ServiceError> {
        self.check_trainable(sentence_id)?;
        for r in &records {
            if r.original_id != sentence_id {
                return Err(ServiceError::BadRequest(format!("record `{}` is not about `{sentence_id}`", r.id)));
            }
            if self.queue.iter().any(|q| q.id == r.id) {
                return Err(ServiceError::Conflict(format!("counterfactual `{}` already queued", r.id)));
            }
        }
        if !records.is_empty() {
            self.queue.extend(records);
            self.revision += 1;
        }
        Ok(())
    }

    fn resolve(&mut self, cf_id: &str, decision: &Decision) -> Result<(), ServiceError> {
        let idx = self
            .queue
            .iter()
            .position(|r| r.id == cf_id)
            .ok_or_else(|| ServiceError::NotFound(format!("counterfactual `{cf_id}`")))?;
        if self.queue[idx].status != CfStatus::Proposed {
            return Err(ServiceError::Conflict(format!("counterfactual `{cf_id}` already resolved")));
        }
        let (status, labels) = match decision {
            Decision::Accept => (CfStatus::Accepted, Some(BTreeSet::from([self.queue[idx].target_label.clone()]))),
            Decision::Reject => (CfStatus::Rejected, None),
            Decision::Relabel { labels } => (CfStatus::Relabeled, Some(labels.clone())),
        };
        if let Some(labels) = &labels {
            if let Some(bad) = labels.iter().find(|l| !self.labels.contains(l)) {
                return Err(ServiceError::NotFound(format!("label `{bad}`")));
            }
            self.store.register_sentence(cf_id);
            self.store
                .set_labels(cf_id, labels.clone(), Source::CounterfactualAccepted)?;
        }
        let r = &mut self.queue[idx];
        r.status = status;
        r.resolved_labels = labels;
        self.revision += 1;
        Ok(())
    }

    /// Distance of the closest model score to its threshold; infinite
    /// without models.
    pub fn margin(&self, sentence: &AnnotatedSentence) -> f64 {
        let thresholds: BTreeMap<&LabelKey, f64> = self.models.iter().map(|m| (&m.label, m.threshold)).collect();
        score_sentence(&self.models, sentence, &self.lexicon)
            .iter()
            .map(|p| (p.score - thresholds[&p.label]).abs())
            .fold(f64::INFINITY, f64::min)
    }
}

fn valid_id(s: &str) -> bool {
    !s.is_empty() && s.len() <= 64 && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}
