//! Deterministic offline stand-in for a chat-completion backend.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annotation::{
    annotate_text, detokenize, tokenize, AnnotationError, LabelKey, Pos, SynonymLexicon,
    TaggerResources,
};
use crate::pattern::{matches, parse_pattern, MatchConfig};

use super::client::{ClientError, CompletionClient, CompletionRequest, CompletionResponse, RequestBody};
use super::prompt::{CandidatePayload, JudgePayload, VariationPayload};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhrasebookEntry {
    pub label: LabelKey,
    pub phrases: Vec<String>,
}

/// Seed phrases per label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Phrasebook {
    pub entries: BTreeMap<LabelKey, Vec<String>>,
}

impl Phrasebook {
    pub fn from_jsonl(text: &str) -> Result<Self, AnnotationError> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: PhrasebookEntry = serde_json::from_str(line).map_err(|err| AnnotationError::Parse {
                line: i + 1,
                msg: err.to_string(),
            })?;
            entries.insert(e.label, e.phrases);
        }
        Ok(Phrasebook { entries })
    }

    pub fn load(path: &Path) -> Result<Self, AnnotationError> {
        let text = std::fs::read_to_string(path).map_err(|source| AnnotationError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Phrasebook::from_jsonl(&text)
    }
}

fn is_content(pos: Pos) -> bool {
    matches!(pos, Pos::Noun | Pos::Adj | Pos::Verb | Pos::Propn)
}

fn is_vowel_start(word: &str) -> bool {
    word.chars()
        .next()
        .is_some_and(|c| "aeiouAEIOU".contains(c))
}

/// Phrasebook-driven client.
///
/// - candidate phrases: the target label's phrases, rotated by the seed,
///   keeping those the request's pattern accepts;
/// - variations: the phrase replaces the span to modify, with a fixed set of
///   touch-ups to the neighbouring function words;
/// - judging: the label of the last keyword in the sentence, where keywords
///   are content lemmas that occur in exactly one label's phrases.
pub struct MockClient {
    seed: u64,
    lexicon: SynonymLexicon,
    phrasebook: Phrasebook,
    tagger: TaggerResources,
    keywords: BTreeMap<String, LabelKey>,
}

impl MockClient {
    pub fn new(seed: u64, lexicon: SynonymLexicon, phrasebook: Phrasebook, tagger: TaggerResources) -> Self {
        let mut owners: BTreeMap<String, BTreeSet<LabelKey>> = BTreeMap::new();
        for (label, phrases) in &phrasebook.entries {
            for p in phrases {
                if let Ok(s) = annotate_text("kw", p, &tagger) {
                    for t in s.tokens.iter().filter(|t| is_content(t.pos)) {
                        owners.entry(t.lemma.clone()).or_default().insert(label.clone());
                    }
                }
            }
        }
        let keywords = owners
            .into_iter()
            .filter(|(_, ls)| ls.len() == 1)
            .map(|(k, ls)| (k, ls.into_iter().next().expect("one owner")))
            .collect();
        MockClient {
            seed,
            lexicon,
            phrasebook,
            tagger,
            keywords,
        }
    }

    fn candidates(&self, p: &CandidatePayload) -> String {
        let phrases = self
            .phrasebook
            .entries
            .get(&LabelKey::new(&p.target_label))
            .cloned()
            .unwrap_or_default();
        let Ok(pattern) = parse_pattern(&p.pattern) else {
            return "[]".into();
        };
        let n = phrases.len().max(1);
        let offset = (self.seed % n as u64) as usize;
        let kept: Vec<String> = phrases
            .iter()
            .cycle()
            .skip(offset)
            .take(phrases.len())
            .filter(|ph| {
                annotate_text("ph", ph, &self.tagger)
                    .is_ok_and(|s| matches(&pattern, &s, &self.lexicon, &MatchConfig::default()))
            })
            .cloned()
            .collect();
        format!("[{}]", kept.join(", "))
    }

    fn lemma(&self, word: &str) -> String {
        self.tagger.lemma_of(word)
    }

    fn variation(&self, p: &VariationPayload) -> String {
        let orig = tokenize(&p.original_sentence);
        let target = tokenize(&p.phrase_to_modify);
        let phrase = tokenize(&p.phrase_to_include);
        let lower = |v: &[String]| v.iter().map(|t| t.to_lowercase()).collect::<Vec<_>>();
        let (lo, lt) = (lower(&orig), lower(&target));
        let found = (!lt.is_empty() && lt.len() <= lo.len())
            .then(|| (0..=lo.len() - lt.len()).find(|&i| lo[i..i + lt.len()] == lt[..]))
            .flatten();
        let text = match found {
            None => p.original_sentence.clone(),
            Some(start) => {
                let end = start + lt.len();
                let mut left: Vec<String> = orig[..start].to_vec();
                let right = &orig[end..];
                self.touch_up(&mut left, &phrase);
                let mut out = left;
                out.extend(phrase.iter().cloned());
                out.extend(right.iter().cloned());
                detokenize(&out)
            }
        };
        format!(
            "modified sentence: '{}'\nreason: 'the new wording is about {}'\nlabel: {}",
            text, p.target_label, p.target_label
        )
    }

    /// Adjusts function words directly left of the splice point.
    fn touch_up(&self, left: &mut Vec<String>, phrase: &[String]) {
        let Some(prev) = left.last().cloned() else {
            return;
        };
        let first = phrase.first().map(String::as_str).unwrap_or("");
        match prev.to_lowercase().as_str() {
            "a" | "an" => {
                let article = if is_vowel_start(first) { "an" } else { "a" };
                let cased = if prev.starts_with(char::is_uppercase) {
                    let mut c = article.to_string();
                    c[..1].make_ascii_uppercase();
                    c
                } else {
                    article.to_string()
                };
                *left.last_mut().expect("nonempty") = cased;
            }
            _ if self.lemma(&prev) == "be" && self.is_clause(phrase) => {
                left.pop();
                left.push("and".into());
                left.push("the".into());
            }
            _ => {}
        }
    }

    /// A phrase with its own subject and verb, like "service was great".
    fn is_clause(&self, phrase: &[String]) -> bool {
        phrase.len() >= 2 && {
            let verb = self.lemma(&phrase[1]);
            verb == "be" || verb == "have"
        }
    }

    fn judge(&self, p: &JudgePayload) -> String {
        let Ok(s) = annotate_text("j", &p.sentence, &self.tagger) else {
            return "label: none".into();
        };
        let allowed: BTreeSet<&str> = p.labels.iter().map(String::as_str).collect();
        let last = s
            .tokens
            .iter()
            .rev()
            .filter_map(|t| self.keywords.get(&t.lemma))
            .find(|l| allowed.is_empty() || allowed.contains(l.as_str()));
        match last {
            Some(l) => format!("label: {l}"),
            None => "label: none".into(),
        }
    }
}

impl CompletionClient for MockClient {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, ClientError> {
        let text = match &request.body {
            RequestBody::CandidatePhrases(p) => self.candidates(p),
            RequestBody::GenerateVariation(p) => self.variation(p),
            RequestBody::JudgeLabel(p) => self.judge(p),
        };
        Ok(CompletionResponse { text })
    }
}
