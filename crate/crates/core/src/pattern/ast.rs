use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::annotation::{EntityType, Pos};

/// One atom of a pattern sequence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PatternAtom {
    /// `VERB`, `NOUN`, ... (never `Pos::Other`).
    PosTag(Pos),
    /// `[word]`: the token's lemma equals the word.
    Stem(String),
    /// `(word)`: the token's lemma is in the word's soft-match set.
    Soft(String),
    /// `$TYPE`: one whole entity run of that type.
    Entity(EntityType),
    /// `*`: any run of tokens, possibly empty.
    Wildcard,
}

impl PatternAtom {
    pub fn is_wildcard(&self) -> bool {
        matches!(self, PatternAtom::Wildcard)
    }
}

impl fmt::Display for PatternAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternAtom::PosTag(p) => write!(f, "{p}"),
            PatternAtom::Stem(w) => write!(f, "[{w}]"),
            PatternAtom::Soft(w) => write!(f, "({w})"),
            PatternAtom::Entity(e) => write!(f, "${e}"),
            PatternAtom::Wildcard => f.write_str("*"),
        }
    }
}

/// Atoms joined by `+`, matched over contiguous tokens.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sequence(pub Vec<PatternAtom>);

impl Sequence {
    pub fn atoms(&self) -> &[PatternAtom] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn wildcard_count(&self) -> usize {
        self.0.iter().filter(|a| a.is_wildcard()).count()
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("+")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

/// Parsed pattern: an alternation (`|`) of sequences.
///
/// Invariants: at least one branch, every branch nonempty, no branch made of
/// wildcards only. Construct through [`Pattern::new`] or the parser.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pattern {
    branches: Vec<Sequence>,
}

impl Pattern {
    pub fn new(branches: Vec<Sequence>) -> Option<Pattern> {
        let ok = !branches.is_empty()
            && branches
                .iter()
                .all(|s| !s.is_empty() && s.0.iter().any(|a| !a.is_wildcard()) && atoms_valid(s));
        ok.then_some(Pattern { branches })
    }

    pub fn sequence(atoms: Vec<PatternAtom>) -> Option<Pattern> {
        Pattern::new(vec![Sequence(atoms)])
    }

    pub fn branches(&self) -> &[Sequence] {
        &self.branches
    }

    /// Total atom count over all branches; the "length" used in tie-breaks.
    pub fn atom_count(&self) -> usize {
        self.branches.iter().map(Sequence::len).sum()
    }

    /// Canonical string: no spaces, `+` inside sequences, `|` between branches.
    pub fn canonical(&self) -> String {
        self.to_string()
    }

    /// Same pattern with branches sorted by canonical text and duplicates
    /// removed. Alternation is commutative, so this is a semantic identity.
    pub fn normalized(&self) -> Pattern {
        let mut branches = self.branches.clone();
        branches.sort_by_key(|s| s.to_string());
        branches.dedup();
        Pattern { branches }
    }

    pub fn soft_words(&self) -> Vec<&str> {
        let mut words: Vec<&str> = self
            .branches
            .iter()
            .flat_map(|s| s.0.iter())
            .filter_map(|a| match a {
                PatternAtom::Soft(w) => Some(w.as_str()),
                _ => None,
            })
            .collect();
        words.sort_unstable();
        words.dedup();
        words
    }
}

fn atoms_valid(s: &Sequence) -> bool {
    s.0.iter().all(|a| match a {
        PatternAtom::PosTag(p) => *p != Pos::Other,
        PatternAtom::Stem(w) | PatternAtom::Soft(w) => super::parser::valid_word(w),
        _ => true,
    })
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.branches.iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Patterns travel as their canonical string everywhere.
impl Serialize for Pattern {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Pattern {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_pattern(&s).map_err(serde::de::Error::custom)
    }
}
