//! Teaching sessions: annotation, retraining, counterfactual review,
//! persistence, the simulated annotator and the HTTP API.

pub mod api;
pub mod config;
pub mod http;
pub mod persist;
pub mod remote;
pub mod session;
pub mod simulation;

use thiserror::Error;

pub use api::{Request, Response, Service};
pub use config::{ClientConfig, ClientKind, SessionConfig};
pub use persist::{session_from_json, session_to_json, SessionDir};
pub use remote::{client_for, make_client, RemoteClient};
pub use session::{
    Applied, DataItem, DataPage, DataQuery, DataStatus, Decision, Generated, MatchedSpan, Mutation, RetrainEvent,
    SessionInputs, Suggestion, TeachingSession, Trigger,
};
pub use simulation::{
    render_table, run_seeds, run_simulation, summarize, ClientFactory, Condition, ConditionReport, KeywordOracle,
    RoundReport, SeedRow, SimulationReport, SimulationScript, SimulationSummary,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ServiceError {
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("completion client: {0}")]
    Client(String),
    #[error("io: {0}")]
    Io(String),
    #[error("internal: {0}")]
    Internal(String),
}

impl ServiceError {
    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::NotFound(_) => "not_found",
            ServiceError::Conflict(_) => "conflict",
            ServiceError::Client(_) => "client",
            ServiceError::Io(_) => "io",
            ServiceError::Internal(_) => "internal",
        }
    }
}
