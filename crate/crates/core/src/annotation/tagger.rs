//! Deterministic fallback annotator: whitespace/punctuation tokenization,
//! table-driven lemmas and POS tags, and a longest-match entity gazetteer.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::token::{AnnotatedSentence, EntityTag, EntityType, Pos, Token};
use super::AnnotationError;

const BUILTIN_RESOURCES: &str = include_str!("../../resources/tagger.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuffixRule {
    pub suffix: String,
    pub replace: String,
    /// Minimum number of characters that must remain before the suffix.
    pub min_stem: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PosSuffixRule {
    pub suffix: String,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GazetteerEntry {
    pub phrase: String,
    pub kind: EntityType,
}

/// Tables backing [`annotate_text`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggerResources {
    /// Lowercase base form or surface form to tag.
    pub pos_lexicon: BTreeMap<String, Pos>,
    /// Irregular surface forms to lemma (`was` -> `be`).
    pub lemma_exceptions: BTreeMap<String, String>,
    /// Tried in order; first applicable rule wins.
    pub lemma_suffix_rules: Vec<SuffixRule>,
    pub pos_suffix_rules: Vec<PosSuffixRule>,
    pub gazetteer: Vec<GazetteerEntry>,
}

impl TaggerResources {
    /// The resource tables shipped with the crate.
    pub fn builtin() -> Self {
        serde_json::from_str(BUILTIN_RESOURCES).expect("builtin tagger resources are valid JSON")
    }

    pub fn from_json(text: &str) -> Result<Self, AnnotationError> {
        serde_json::from_str(text).map_err(|e| AnnotationError::Parse {
            line: e.line(),
            msg: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, AnnotationError> {
        let text = std::fs::read_to_string(path).map_err(|e| AnnotationError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    pub fn lemma_of(&self, surface: &str) -> String {
        let lower = surface.to_lowercase();
        if is_punct_token(&lower) {
            return lower;
        }
        if let Some(lemma) = self.lemma_exceptions.get(&lower) {
            return lemma.clone();
        }
        if self.pos_lexicon.contains_key(&lower) {
            return lower;
        }
        for rule in &self.lemma_suffix_rules {
            if let Some(stem) = lower.strip_suffix(rule.suffix.as_str()) {
                if stem.chars().count() >= rule.min_stem {
                    return format!("{stem}{}", rule.replace);
                }
            }
        }
        lower
    }

    fn pos_of(&self, surface: &str, lemma: &str, index: usize) -> Pos {
        if is_punct_token(surface) {
            return Pos::Other;
        }
        let lower = surface.to_lowercase();
        if let Some(&pos) = self.pos_lexicon.get(&lower).or_else(|| self.pos_lexicon.get(lemma)) {
            return pos;
        }
        if lower.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',')
            && lower.chars().any(|c| c.is_ascii_digit())
        {
            return Pos::Num;
        }
        if index > 0 && surface.chars().next().is_some_and(char::is_uppercase) {
            return Pos::Propn;
        }
        self.pos_suffix_rules
            .iter()
            .find(|r| lower.ends_with(r.suffix.as_str()) && lower.len() > r.suffix.len() + 1)
            .map(|r| r.pos)
            .unwrap_or(Pos::Other)
    }

    fn gazetteer_phrases(&self) -> Vec<(Vec<String>, EntityType)> {
        self.gazetteer
            .iter()
            .map(|g| {
                let toks = tokenize(&g.phrase).into_iter().map(|t| t.to_lowercase()).collect();
                (toks, g.kind)
            })
            .collect()
    }
}

fn is_punct_char(c: char) -> bool {
    c.is_ascii_punctuation() || matches!(c, '“' | '”' | '‘' | '’' | '…')
}

fn is_punct_token(s: &str) -> bool {
    !s.is_empty() && s.chars().all(is_punct_char)
}

/// Splits on whitespace, then peels leading and trailing punctuation off each
/// chunk as separate one-character tokens.
pub fn tokenize(raw: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in raw.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut lo = 0;
        let mut hi = chars.len();
        while lo < hi && is_punct_char(chars[lo]) {
            lo += 1;
        }
        while hi > lo && is_punct_char(chars[hi - 1]) {
            hi -= 1;
        }
        out.extend(chars[..lo].iter().map(|c| c.to_string()));
        if lo < hi {
            out.push(chars[lo..hi].iter().collect());
        }
        out.extend(chars[hi..].iter().map(|c| c.to_string()));
    }
    out
}

/// Annotates raw text with the fallback tagger.
///
/// Total on any text containing at least one non-whitespace character; the
/// empty (or all-whitespace) string is a precondition violation.
pub fn annotate_text(
    id: &str,
    raw: &str,
    resources: &TaggerResources,
) -> Result<AnnotatedSentence, AnnotationError> {
    let texts = tokenize(raw);
    if texts.is_empty() {
        return Err(AnnotationError::EmptyText { id: id.to_string() });
    }
    let mut tokens: Vec<Token> = texts
        .iter()
        .enumerate()
        .map(|(i, text)| {
            let lemma = resources.lemma_of(text);
            let pos = resources.pos_of(text, &lemma, i);
            Token::new(text.clone(), lemma, pos)
        })
        .collect();

    let phrases = resources.gazetteer_phrases();
    let lowered: Vec<String> = texts.iter().map(|t| t.to_lowercase()).collect();
    let mut i = 0;
    while i < tokens.len() {
        let best = phrases
            .iter()
            .filter(|(p, _)| !p.is_empty() && lowered[i..].starts_with(p))
            .max_by_key(|(p, _)| p.len());
        match best {
            Some((phrase, kind)) => {
                for (k, tok) in tokens[i..i + phrase.len()].iter_mut().enumerate() {
                    tok.entity = Some(if k == 0 {
                        EntityTag::begin(*kind)
                    } else {
                        EntityTag::inside(*kind)
                    });
                    if tok.pos == Pos::Other && tok.text.chars().any(char::is_alphabetic) {
                        tok.pos = Pos::Propn;
                    }
                }
                i += phrase.len();
            }
            None => i += 1,
        }
    }

    Ok(AnnotatedSentence {
        id: id.to_string(),
        raw_text: raw.to_string(),
        tokens,
    })
}
