//! The pattern language: POS tags, `[stem]`, `(soft)` matches, `$ENTITY`
//! types and `*` wildcards, combined with `+` (contiguous sequence) and `|`
//! (alternation, binding looser than `+`).

mod ast;
mod matcher;
mod parser;

pub use ast::{Pattern, PatternAtom, Sequence};
pub use matcher::{check_pattern, match_sentence, matches, MatchConfig, MatchSpan};
pub use parser::parse_pattern;
pub(crate) use parser::valid_word as is_pattern_word;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("syntax error in `{pattern}` at column {column}: {msg}")]
    Syntax {
        pattern: String,
        column: usize,
        msg: String,
    },
}

/// Canonical printing; `parse_pattern(&print_pattern(p)) == p`.
pub fn print_pattern(pattern: &Pattern) -> String {
    pattern.canonical()
}
