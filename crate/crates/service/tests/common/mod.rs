#![allow(dead_code)]

use std::path::PathBuf;

use vtteach_service::{KeywordOracle, SessionConfig, SessionInputs, TeachingSession};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn inputs(corpus: &str) -> SessionInputs {
    SessionInputs::load(
        &fixture(corpus),
        &fixture("labels.jsonl"),
        &fixture("lexicon.jsonl"),
        Some(&fixture("phrasebook.jsonl")),
    )
    .unwrap()
}

pub fn session(corpus: &str, config: SessionConfig) -> TeachingSession {
    TeachingSession::create(inputs(corpus), config, Some("t")).unwrap()
}

pub fn keywords() -> KeywordOracle {
    KeywordOracle::load(&fixture("oracle_keywords.json")).unwrap()
}
