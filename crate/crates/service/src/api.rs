//! Request/response protocol shared by the HTTP server and the CLI.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use vtteach_core::annotation::{LabelId, LabelKey, Source};
use vtteach_core::counterfactual::{CfStatus, CounterfactualRecord};
use vtteach_core::diff::{render_counterfactual, RenderSpan};
use vtteach_core::synthesis::WeightedPattern;

use crate::config::SessionConfig;
use crate::persist::SessionDir;
use crate::remote::make_client;
use crate::session::{
    DataPage, DataQuery, Decision, Mutation, RetrainEvent, SessionInputs, Suggestion, TeachingSession,
};
use crate::simulation::{run_seeds, summarize, ClientFactory, KeywordOracle, SimulationScript, SimulationSummary};
use crate::ServiceError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum Request {
    CreateSession {
        corpus: PathBuf,
        labels: PathBuf,
        lexicon: PathBuf,
        #[serde(default)]
        phrasebook: Option<PathBuf>,
        #[serde(default)]
        config: Option<SessionConfig>,
        #[serde(default)]
        name: Option<String>,
    },
    GetSession {
        session: String,
    },
    GetData {
        session: String,
        #[serde(flatten)]
        query: DataQuery,
    },
    SubmitLabels {
        session: String,
        sentence_id: String,
        labels: BTreeSet<LabelKey>,
        #[serde(default)]
        source: Option<Source>,
        #[serde(default)]
        expected_revision: Option<u64>,
    },
    Retrain {
        session: String,
        #[serde(default)]
        expected_revision: Option<u64>,
    },
    GetPatterns {
        session: String,
    },
    Suggestions {
        session: String,
        #[serde(default)]
        filter: Option<String>,
    },
    RequestCounterfactuals {
        session: String,
        sentence_id: String,
    },
    GetCounterfactuals {
        session: String,
        #[serde(default)]
        status: Option<CfStatus>,
    },
    ResolveCounterfactual {
        session: String,
        cf_id: String,
        decision: Decision,
        #[serde(default)]
        expected_revision: Option<u64>,
    },
    GetMetrics {
        session: String,
    },
    RunSimulation {
        session: String,
        keywords: PathBuf,
        #[serde(default = "default_rounds")]
        rounds: usize,
        #[serde(default = "default_budget")]
        budget: usize,
        #[serde(default = "default_seeds")]
        seeds: Vec<u64>,
    },
}

fn default_rounds() -> usize {
    5
}

fn default_budget() -> usize {
    10
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl Request {
    pub fn op(&self) -> &'static str {
        match self {
            Request::CreateSession { .. } => "create_session",
            Request::GetSession { .. } => "get_session",
            Request::GetData { .. } => "get_data",
            Request::SubmitLabels { .. } => "submit_labels",
            Request::Retrain { .. } => "retrain",
            Request::GetPatterns { .. } => "get_patterns",
            Request::Suggestions { .. } => "suggestions",
            Request::RequestCounterfactuals { .. } => "request_counterfactuals",
            Request::GetCounterfactuals { .. } => "get_counterfactuals",
            Request::ResolveCounterfactual { .. } => "resolve_counterfactual",
            Request::GetMetrics { .. } => "get_metrics",
            Request::RunSimulation { .. } => "run_simulation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionInfo {
    pub session: String,
    pub revision: u64,
    pub labels: Vec<LabelId>,
    pub train_sentences: usize,
    pub test_sentences: usize,
    pub annotations: usize,
    pub queued_counterfactuals: usize,
    pub retrains: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Submitted {
    pub revision: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retrain: Option<RetrainEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelRules {
    pub label: LabelKey,
    pub color: Option<String>,
    pub bias: f64,
    pub threshold: f64,
    pub rules: Vec<WeightedPattern>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Patterns {
    pub revision: u64,
    pub labels: Vec<LabelRules>,
}

impl Patterns {
    pub fn of(s: &TeachingSession) -> Self {
        let labels = s
            .models
            .iter()
            .map(|m| LabelRules {
                label: m.label.clone(),
                color: s.labels.color_of(&m.label).map(String::from),
                bias: m.bias,
                threshold: m.threshold,
                rules: m.patterns.clone(),
            })
            .collect();
        Patterns {
            revision: s.revision,
            labels,
        }
    }
}

/// A counterfactual with its render spans, theme-colored by the original
/// label.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CfItem {
    pub record: CounterfactualRecord,
    pub spans: Vec<RenderSpan>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterfactuals {
    pub revision: u64,
    /// Keyed by original sentence id.
    pub groups: BTreeMap<String, Vec<CfItem>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notices: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub revision: u64,
    pub status: CfStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub revision: u64,
    pub history: Vec<RetrainEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Response {
    Session(SessionInfo),
    Data(DataPage),
    Submitted(Submitted),
    Retrained(RetrainEvent),
    Patterns(Patterns),
    Suggestions(Vec<Suggestion>),
    Counterfactuals(Counterfactuals),
    Resolved(Resolved),
    Metrics(Metrics),
    Simulation(SimulationSummary),
}

struct Handle {
    dir: SessionDir,
    current: RwLock<Arc<TeachingSession>>,
    writer: Mutex<()>,
}

/// Sessions under one root directory, each in `<root>/<id>/`.
///
/// Reads work on a shared snapshot; writes are serialized per session and
/// swap in the new state only after it is on disk.
pub struct Service {
    root: PathBuf,
    handles: Mutex<BTreeMap<String, Arc<Handle>>>,
    client_factory: Box<ClientFactory>,
}

impl Service {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Service {
            root: root.into(),
            handles: Mutex::new(BTreeMap::new()),
            client_factory: Box::new(make_client),
        }
    }

    /// Replaces how completion clients are built (tests, replays).
    pub fn with_client_factory(mut self, f: Box<ClientFactory>) -> Self {
        self.client_factory = f;
        self
    }

    fn handle_for(&self, id: &str) -> Result<Arc<Handle>, ServiceError> {
        let mut handles = self.handles.lock().expect("handle map lock");
        if let Some(h) = handles.get(id) {
            return Ok(h.clone());
        }
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(ServiceError::NotFound(format!("session `{id}`")));
        }
        let dir = SessionDir::open(self.root.join(id))?;
        let session = dir.load()?;
        let h = Arc::new(Handle {
            dir,
            current: RwLock::new(Arc::new(session)),
            writer: Mutex::new(()),
        });
        handles.insert(id.to_string(), h.clone());
        Ok(h)
    }

    pub fn snapshot(&self, id: &str) -> Result<Arc<TeachingSession>, ServiceError> {
        let h = self.handle_for(id)?;
        let s = h.current.read().expect("session lock").clone();
        Ok(s)
    }

    /// Applies `m` to a copy of the session, commits it, then publishes it.
    fn mutate<T>(
        &self,
        id: &str,
        expected: Option<u64>,
        f: impl FnOnce(&mut TeachingSession, &SessionDir) -> Result<(Mutation, T), ServiceError>,
    ) -> Result<T, ServiceError> {
        let h = self.handle_for(id)?;
        let _w = h.writer.lock().expect("writer lock");
        let base = h.current.read().expect("session lock").clone();
        if let Some(rev) = expected {
            if rev != base.revision {
                return Err(ServiceError::Conflict(format!(
                    "stale revision {rev}, session is at {}",
                    base.revision
                )));
            }
        }
        let mut next = (*base).clone();
        let (m, out) = f(&mut next, &h.dir)?;
        h.dir.commit(&m, &next)?;
        *h.current.write().expect("session lock") = Arc::new(next);
        Ok(out)
    }

    fn info(s: &TeachingSession) -> SessionInfo {
        SessionInfo {
            session: s.id.clone(),
            revision: s.revision,
            labels: s.labels.iter().cloned().collect(),
            train_sentences: s.train_pool.len(),
            test_sentences: s.test_pool.len(),
            annotations: s.store.len(),
            queued_counterfactuals: s.queue.len(),
            retrains: s.history.len(),
        }
    }

    fn items(s: &TeachingSession, records: Vec<CounterfactualRecord>) -> Result<BTreeMap<String, Vec<CfItem>>, ServiceError> {
        let mut groups: BTreeMap<String, Vec<CfItem>> = BTreeMap::new();
        for record in records {
            let color = s.labels.color_of(&record.original_label).unwrap_or("#000000");
            let spans = render_counterfactual(&record, color).map_err(|e| ServiceError::Internal(e.to_string()))?;
            groups
                .entry(record.original_id.clone())
                .or_default()
                .push(CfItem { record, spans });
        }
        Ok(groups)
    }

    pub fn handle(&self, req: Request) -> Result<Response, ServiceError> {
        match req {
            Request::CreateSession {
                corpus,
                labels,
                lexicon,
                phrasebook,
                config,
                name,
            } => {
                let inputs = SessionInputs::load(&corpus, &labels, &lexicon, phrasebook.as_deref())?;
                let session = TeachingSession::create(inputs, config.unwrap_or_default(), name.as_deref())?;
                let _guard = self.handles.lock().expect("handle map lock");
                SessionDir::create(self.root.join(&session.id), &session)?;
                Ok(Response::Session(Self::info(&session)))
            }
            Request::GetSession { session } => Ok(Response::Session(Self::info(&*self.snapshot(&session)?))),
            Request::GetData { session, query } => Ok(Response::Data(self.snapshot(&session)?.data(&query)?)),
            Request::SubmitLabels {
                session,
                sentence_id,
                labels,
                source,
                expected_revision,
            } => {
                let out = self.mutate(&session, expected_revision, |s, _| {
                    let m = Mutation::SubmitLabels {
                        sentence_id,
                        labels,
                        source: source.unwrap_or(Source::Human),
                    };
                    let applied = s.apply(&m)?;
                    Ok((
                        m,
                        Submitted {
                            revision: applied.revision,
                            retrain: applied.retrain,
                        },
                    ))
                })?;
                Ok(Response::Submitted(out))
            }
            Request::Retrain {
                session,
                expected_revision,
            } => {
                let ev = self.mutate(&session, expected_revision, |s, _| {
                    let applied = s.apply(&Mutation::Retrain)?;
                    Ok((Mutation::Retrain, applied.retrain.expect("retrain reports an event")))
                })?;
                Ok(Response::Retrained(ev))
            }
            Request::GetPatterns { session } => Ok(Response::Patterns(Patterns::of(&*self.snapshot(&session)?))),
            Request::Suggestions { session, filter } => {
                Ok(Response::Suggestions(self.snapshot(&session)?.suggestions(filter.as_deref())?))
            }
            Request::RequestCounterfactuals { session, sentence_id } => {
                let snap = self.snapshot(&session)?;
                let g = {
                    let client = (self.client_factory)(&snap)?;
                    snap.generate(&sentence_id, client.as_ref())?
                };
                if g.cached || g.records.is_empty() {
                    return Ok(Response::Counterfactuals(Counterfactuals {
                        revision: snap.revision,
                        groups: Self::items(&snap, g.records)?,
                        notices: g.notices,
                    }));
                }
                let records = g.records.clone();
                let transcript = g.transcript;
                let revision = self.mutate(&session, Some(snap.revision), |s, dir| {
                    dir.append_transcript(&transcript)?;
                    let m = Mutation::QueueCounterfactuals {
                        sentence_id: sentence_id.clone(),
                        records,
                    };
                    Ok((m.clone(), s.apply(&m)?.revision))
                })?;
                let s = self.snapshot(&session)?;
                Ok(Response::Counterfactuals(Counterfactuals {
                    revision,
                    groups: Self::items(&s, g.records)?,
                    notices: g.notices,
                }))
            }
            Request::GetCounterfactuals { session, status } => {
                let s = self.snapshot(&session)?;
                let records = s
                    .queue
                    .iter()
                    .filter(|r| status.is_none_or(|st| r.status == st))
                    .cloned()
                    .collect();
                Ok(Response::Counterfactuals(Counterfactuals {
                    revision: s.revision,
                    groups: Self::items(&s, records)?,
                    notices: Vec::new(),
                }))
            }
            Request::ResolveCounterfactual {
                session,
                cf_id,
                decision,
                expected_revision,
            } => {
                let out = self.mutate(&session, expected_revision, |s, _| {
                    let m = Mutation::ResolveCounterfactual {
                        cf_id: cf_id.clone(),
                        decision,
                    };
                    let revision = s.apply(&m)?.revision;
                    let status = s
                        .queue
                        .iter()
                        .find(|r| r.id == cf_id)
                        .map(|r| r.status)
                        .expect("resolved record exists");
                    Ok((m, Resolved { revision, status }))
                })?;
                Ok(Response::Resolved(out))
            }
            Request::GetMetrics { session } => {
                let s = self.snapshot(&session)?;
                Ok(Response::Metrics(Metrics {
                    revision: s.revision,
                    history: s.history.clone(),
                }))
            }
            Request::RunSimulation {
                session,
                keywords,
                rounds,
                budget,
                seeds,
            } => {
                let s = self.snapshot(&session)?;
                let script = SimulationScript::from_gold(&s, KeywordOracle::load(&keywords)?, rounds, budget, 0);
                let reports = run_seeds(
                    &s,
                    &script,
                    &seeds,
                    self.client_factory.as_ref(),
                    s.config.synthesis.parallelism,
                )?;
                Ok(Response::Simulation(summarize(reports)))
            }
        }
    }
}
