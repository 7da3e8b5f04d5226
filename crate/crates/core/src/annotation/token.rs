use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::AnnotationError;

/// Coarse part-of-speech tag.
///
/// The eight named tags are the ones patterns can refer to; `Other` absorbs
/// punctuation and every tag outside that set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pos {
    Verb,
    Propn,
    Noun,
    Adj,
    Adv,
    Aux,
    Pron,
    Num,
    Other,
}

impl Pos {
    /// Tags a pattern may name, in canonical order.
    pub const PATTERN_TAGS: [Pos; 8] = [
        Pos::Verb,
        Pos::Propn,
        Pos::Noun,
        Pos::Adj,
        Pos::Adv,
        Pos::Aux,
        Pos::Pron,
        Pos::Num,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Pos::Verb => "VERB",
            Pos::Propn => "PROPN",
            Pos::Noun => "NOUN",
            Pos::Adj => "ADJ",
            Pos::Adv => "ADV",
            Pos::Aux => "AUX",
            Pos::Pron => "PRON",
            Pos::Num => "NUM",
            Pos::Other => "OTHER",
        }
    }

    /// Parses one of the eight pattern tags. `OTHER` is deliberately rejected.
    pub fn from_pattern_tag(s: &str) -> Option<Pos> {
        Pos::PATTERN_TAGS.iter().copied().find(|p| p.as_str() == s)
    }

    /// Lenient mapping used for externally supplied token tags: anything
    /// unrecognised becomes `Other`.
    pub fn from_tag_lenient(s: &str) -> Pos {
        Pos::from_pattern_tag(&s.to_ascii_uppercase()).unwrap_or(Pos::Other)
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Pos {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Pos {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(Pos::from_tag_lenient(&s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntityType {
    Person,
    Location,
    Date,
    Org,
}

impl EntityType {
    pub const ALL: [EntityType; 4] = [
        EntityType::Person,
        EntityType::Location,
        EntityType::Date,
        EntityType::Org,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityType::Person => "PERSON",
            EntityType::Location => "LOCATION",
            EntityType::Date => "DATE",
            EntityType::Org => "ORG",
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityType {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EntityType::ALL
            .iter()
            .copied()
            .find(|e| e.as_str() == s)
            .ok_or(())
    }
}

impl Serialize for EntityType {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EntityType {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse()
            .map_err(|_| serde::de::Error::custom(format!("unknown entity type `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SpanRole {
    Begin,
    Inside,
}

/// Entity tag carried by a token, written `B-TYPE` / `I-TYPE` on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityTag {
    pub kind: EntityType,
    pub role: SpanRole,
}

impl EntityTag {
    pub fn begin(kind: EntityType) -> Self {
        EntityTag { kind, role: SpanRole::Begin }
    }

    pub fn inside(kind: EntityType) -> Self {
        EntityTag { kind, role: SpanRole::Inside }
    }
}

impl fmt::Display for EntityTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.role {
            SpanRole::Begin => "B",
            SpanRole::Inside => "I",
        };
        write!(f, "{prefix}-{}", self.kind)
    }
}

impl FromStr for EntityTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (prefix, kind) = s
            .split_once('-')
            .ok_or_else(|| format!("entity tag `{s}` lacks a B-/I- prefix"))?;
        let role = match prefix {
            "B" => SpanRole::Begin,
            "I" => SpanRole::Inside,
            _ => return Err(format!("entity tag `{s}` has prefix other than B/I")),
        };
        let kind = kind
            .parse()
            .map_err(|_| format!("unknown entity type in `{s}`"))?;
        Ok(EntityTag { kind, role })
    }
}

impl Serialize for EntityTag {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EntityTag {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A single token with its linguistic annotation. Field names follow the
/// corpus wire format (`t`, `l`, `p`, `e`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    #[serde(rename = "t")]
    pub text: String,
    #[serde(rename = "l")]
    pub lemma: String,
    #[serde(rename = "p")]
    pub pos: Pos,
    #[serde(rename = "e", default, skip_serializing_if = "Option::is_none")]
    pub entity: Option<EntityTag>,
}

impl Token {
    pub fn new(text: impl Into<String>, lemma: impl Into<String>, pos: Pos) -> Self {
        Token {
            text: text.into(),
            lemma: lemma.into(),
            pos,
            entity: None,
        }
    }

    pub fn with_entity(mut self, tag: EntityTag) -> Self {
        self.entity = Some(tag);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    pub id: String,
    pub raw_text: String,
    pub tokens: Vec<Token>,
}

impl AnnotatedSentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token_texts(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.text.clone()).collect()
    }

    /// Checks the token-level invariants: nonempty whitespace-free lemmas,
    /// well-formed entity runs, and token texts covering `raw_text`.
    pub fn validate(&self) -> Result<(), AnnotationError> {
        let fail = |msg: String| AnnotationError::InvalidSentence {
            id: self.id.clone(),
            msg,
        };
        let mut prev: Option<EntityTag> = None;
        for (i, tok) in self.tokens.iter().enumerate() {
            if tok.lemma.is_empty() || tok.lemma.chars().any(char::is_whitespace) {
                return Err(fail(format!("token {i} has an empty or spaced lemma")));
            }
            if tok.lemma.chars().any(char::is_uppercase) {
                return Err(fail(format!("token {i} lemma `{}` is not lowercase", tok.lemma)));
            }
            if tok.text.is_empty() || tok.text.chars().any(char::is_whitespace) {
                return Err(fail(format!("token {i} has empty or spaced text")));
            }
            if let Some(tag) = tok.entity {
                if tag.role == SpanRole::Inside && prev.map(|p| p.kind) != Some(tag.kind) {
                    return Err(fail(format!("token {i} continues an entity run that never began")));
                }
            }
            prev = tok.entity;
        }
        let joined: String = self.tokens.iter().map(|t| t.text.as_str()).collect();
        if joined != strip_whitespace(&self.raw_text) {
            return Err(fail("token texts do not reconstruct the raw text".into()));
        }
        Ok(())
    }

    /// Maximal entity runs as `(start, end, type)`, half-open.
    pub fn entity_runs(&self) -> Vec<(usize, usize, EntityType)> {
        let mut runs = Vec::new();
        let mut i = 0;
        while i < self.tokens.len() {
            match self.tokens[i].entity {
                Some(tag) if tag.role == SpanRole::Begin => {
                    let mut j = i + 1;
                    while j < self.tokens.len()
                        && self.tokens[j].entity == Some(EntityTag::inside(tag.kind))
                    {
                        j += 1;
                    }
                    runs.push((i, j, tag.kind));
                    i = j;
                }
                _ => i += 1,
            }
        }
        runs
    }
}

pub(crate) fn strip_whitespace(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

const CLOSING_PUNCT: &[&str] = &[".", ",", "!", "?", ";", ":", ")", "]", "'s", "%"];
const OPENING_PUNCT: &[&str] = &["(", "[", "$"];

/// Joins token texts back into readable text: no space before closing
/// punctuation or after opening punctuation.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    let mut glue_next = true;
    for tok in tokens {
        let tok = tok.as_ref();
        if !glue_next && !CLOSING_PUNCT.contains(&tok) {
            out.push(' ');
        }
        out.push_str(tok);
        glue_next = OPENING_PUNCT.contains(&tok);
    }
    out
}
