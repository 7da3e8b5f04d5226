//! On-disk layout of a session directory:
//!
//! - `initial.json`: the session as created;
//! - `ops.jsonl`: every mutation since, one per line;
//! - `session.json`: the current state, replaced atomically after each op;
//! - `transcript.jsonl`: completion client traffic.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use vtteach_core::counterfactual::{transcript_to_jsonl, TranscriptEntry};

use crate::session::{Mutation, TeachingSession};
use crate::ServiceError;

const INITIAL: &str = "initial.json";
const SESSION: &str = "session.json";
const OPS: &str = "ops.jsonl";
const TRANSCRIPT: &str = "transcript.jsonl";

fn io(path: &Path, e: std::io::Error) -> ServiceError {
    ServiceError::Io(format!("{}: {e}", path.display()))
}

/// Canonical session file text.
pub fn session_to_json(session: &TeachingSession) -> String {
    let mut s = serde_json::to_string_pretty(session).expect("session serializes");
    s.push('\n');
    s
}

pub fn session_from_json(text: &str) -> Result<TeachingSession, ServiceError> {
    serde_json::from_str(text).map_err(|e| ServiceError::Internal(format!("corrupt session file: {e}")))
}

/// Writes `text` next to `path`, syncs, then renames over `path`.
fn write_atomic(path: &Path, text: &str) -> Result<(), ServiceError> {
    let tmp = path.with_extension("json.tmp");
    let mut f = File::create(&tmp).map_err(|e| io(&tmp, e))?;
    f.write_all(text.as_bytes()).map_err(|e| io(&tmp, e))?;
    f.sync_all().map_err(|e| io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io(path, e))
}

fn append_line(path: &Path, text: &str) -> Result<(), ServiceError> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| io(path, e))?;
    f.sync_data().map_err(|e| io(path, e))
}

#[derive(Debug, Clone)]
pub struct SessionDir {
    path: PathBuf,
}

impl SessionDir {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let path = path.into();
        if !path.join(SESSION).is_file() {
            return Err(ServiceError::NotFound(format!("no session at {}", path.display())));
        }
        Ok(SessionDir { path })
    }

    /// Starts a new directory for `session`; refuses to overwrite one.
    pub fn create(path: impl Into<PathBuf>, session: &TeachingSession) -> Result<Self, ServiceError> {
        let path = path.into();
        if path.join(SESSION).exists() {
            return Err(ServiceError::Conflict(format!("session already exists at {}", path.display())));
        }
        fs::create_dir_all(&path).map_err(|e| io(&path, e))?;
        let dir = SessionDir { path };
        let text = session_to_json(session);
        write_atomic(&dir.path.join(INITIAL), &text)?;
        File::create(dir.path.join(OPS)).map_err(|e| io(&dir.path, e))?;
        write_atomic(&dir.path.join(SESSION), &text)?;
        Ok(dir)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn load(&self) -> Result<TeachingSession, ServiceError> {
        let p = self.path.join(SESSION);
        session_from_json(&fs::read_to_string(&p).map_err(|e| io(&p, e))?)
    }

    pub fn save(&self, session: &TeachingSession) -> Result<(), ServiceError> {
        write_atomic(&self.path.join(SESSION), &session_to_json(session))
    }

    /// Logs `m` and saves the state it led to.
    pub fn commit(&self, m: &Mutation, session: &TeachingSession) -> Result<(), ServiceError> {
        let mut line = serde_json::to_string(m).expect("mutation serializes");
        line.push('\n');
        append_line(&self.path.join(OPS), &line)?;
        self.save(session)
    }

    pub fn append_transcript(&self, entries: &[TranscriptEntry]) -> Result<(), ServiceError> {
        if entries.is_empty() {
            return Ok(());
        }
        append_line(&self.path.join(TRANSCRIPT), &transcript_to_jsonl(entries))
    }

    pub fn mutations(&self) -> Result<Vec<Mutation>, ServiceError> {
        let p = self.path.join(OPS);
        let text = fs::read_to_string(&p).map_err(|e| io(&p, e))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| {
                serde_json::from_str(l)
                    .map_err(|e| ServiceError::Internal(format!("{} line {}: {e}", p.display(), i + 1)))
            })
            .collect()
    }

    /// Rebuilds the current state from the initial snapshot and the log.
    pub fn replay(&self) -> Result<TeachingSession, ServiceError> {
        let p = self.path.join(INITIAL);
        let mut session = session_from_json(&fs::read_to_string(&p).map_err(|e| io(&p, e))?)?;
        for m in self.mutations()? {
            session.apply(&m)?;
        }
        Ok(session)
    }
}
