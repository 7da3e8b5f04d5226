//! Corpus ingestion, token annotation, the soft-match lexicon, labels and the
//! multi-label annotation store.

mod corpus;
mod labels;
mod lexicon;
mod store;
mod tagger;
mod token;

pub use corpus::{holdout_split, ingest_corpus, load_corpus, Corpus, CorpusRecord};
pub use labels::{LabelId, LabelKey, LabelSet};
pub use lexicon::{LexiconRecord, SynonymLexicon};
pub use store::{Annotation, AnnotationStore, Source};
pub use tagger::{annotate_text, tokenize, GazetteerEntry, PosSuffixRule, SuffixRule, TaggerResources};
pub use token::{detokenize, AnnotatedSentence, EntityTag, EntityType, Pos, SpanRole, Token};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("sentence `{id}` has empty text")]
    EmptyText { id: String },
    #[error("sentence `{id}`: {msg}")]
    InvalidSentence { id: String, msg: String },
    #[error("invalid label set: {0}")]
    InvalidLabels(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
