use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AnnotationError;

/// One line of a synonym lexicon file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconRecord {
    pub head: String,
    pub members: Vec<String>,
}

/// Soft-match vocabulary: headword lemma to the set of lemmas it matches.
///
/// Every stored set contains its own headword. Lookups of absent headwords
/// yield the singleton set, so a soft match never matches less than a stem
/// match on the same word.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynonymLexicon {
    entries: BTreeMap<String, BTreeSet<String>>,
    /// Headwords added at runtime (e.g. from a completion client) rather than
    /// loaded from the shipped file.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    session_local: BTreeSet<String>,
}

impl SynonymLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert<I, S>(&mut self, head: &str, members: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let head = head.to_lowercase();
        let set = self.entries.entry(head.clone()).or_default();
        set.insert(head);
        set.extend(members.into_iter().map(|m| m.as_ref().to_lowercase()));
    }

    /// Adds members for `head` and marks the headword as session-local.
    pub fn extend_session_local<I, S>(&mut self, head: &str, members: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.insert(head, members);
        self.session_local.insert(head.to_lowercase());
    }

    pub fn is_session_local(&self, head: &str) -> bool {
        self.session_local.contains(&head.to_lowercase())
    }

    /// Soft-match set for `word` (case-insensitive). Always contains the
    /// lowercased word itself.
    pub fn soft_match_set(&self, word: &str) -> BTreeSet<String> {
        let key = word.to_lowercase();
        match self.entries.get(&key) {
            Some(set) => set.clone(),
            None => BTreeSet::from([key]),
        }
    }

    /// Membership test without cloning the set.
    pub fn soft_matches(&self, word: &str, lemma: &str) -> bool {
        let key = word.to_lowercase();
        let lemma = lemma.to_lowercase();
        match self.entries.get(&key) {
            Some(set) => set.contains(&lemma),
            None => key == lemma,
        }
    }

    /// Members of `word`'s set other than the word itself, sorted.
    pub fn expansions(&self, word: &str) -> Vec<String> {
        let key = word.to_lowercase();
        self.soft_match_set(&key)
            .into_iter()
            .filter(|m| *m != key)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses a JSON-lines lexicon (`{"head": .., "members": [..]}` per line).
    pub fn from_jsonl(text: &str) -> Result<Self, AnnotationError> {
        let mut lex = SynonymLexicon::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: LexiconRecord =
                serde_json::from_str(line).map_err(|e| AnnotationError::Parse {
                    line: idx + 1,
                    msg: e.to_string(),
                })?;
            if rec.head.trim().is_empty() || rec.head.chars().any(char::is_whitespace) {
                return Err(AnnotationError::Parse {
                    line: idx + 1,
                    msg: "lexicon headword must be a single nonempty word".into(),
                });
            }
            lex.insert(&rec.head, &rec.members);
        }
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Self, AnnotationError> {
        let text = std::fs::read_to_string(path).map_err(|e| AnnotationError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_jsonl(&text)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (head, members) in &self.entries {
            let rec = LexiconRecord {
                head: head.clone(),
                members: members.iter().filter(|m| *m != head).cloned().collect(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("lexicon record serializes"));
            out.push('\n');
        }
        out
    }
}
