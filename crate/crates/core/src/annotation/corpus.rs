use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::labels::LabelKey;
use super::tagger::{annotate_text, TaggerResources};
use super::token::{AnnotatedSentence, Token};
use super::AnnotationError;

/// One line of a corpus file. `labels` is an optional gold annotation used
/// for held-out evaluation and scripted annotators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<Token>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<BTreeSet<LabelKey>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "CorpusRepr", into = "CorpusRepr")]
pub struct Corpus {
    sentences: Vec<AnnotatedSentence>,
    gold: BTreeMap<String, BTreeSet<LabelKey>>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct CorpusRepr {
    sentences: Vec<AnnotatedSentence>,
    #[serde(default)]
    gold: BTreeMap<String, BTreeSet<LabelKey>>,
}

impl From<CorpusRepr> for Corpus {
    fn from(r: CorpusRepr) -> Self {
        let index = r
            .sentences
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id.clone(), i))
            .collect();
        Corpus {
            sentences: r.sentences,
            gold: r.gold,
            index,
        }
    }
}

impl From<Corpus> for CorpusRepr {
    fn from(c: Corpus) -> Self {
        CorpusRepr {
            sentences: c.sentences,
            gold: c.gold,
        }
    }
}

impl Corpus {
    /// Builds a corpus from already-annotated sentences, rejecting duplicate ids.
    pub fn from_sentences(sentences: Vec<AnnotatedSentence>) -> Result<Self, AnnotationError> {
        let mut corpus = Corpus::default();
        for s in sentences {
            corpus.push(s, None)?;
        }
        Ok(corpus)
    }

    fn push(
        &mut self,
        sentence: AnnotatedSentence,
        gold: Option<BTreeSet<LabelKey>>,
    ) -> Result<(), AnnotationError> {
        if self.index.contains_key(&sentence.id) {
            return Err(AnnotationError::Conflict(format!("duplicate sentence id `{}`", sentence.id)));
        }
        self.index.insert(sentence.id.clone(), self.sentences.len());
        if let Some(g) = gold {
            self.gold.insert(sentence.id.clone(), g);
        }
        self.sentences.push(sentence);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&AnnotatedSentence> {
        self.index.get(id).map(|&i| &self.sentences[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn sentences(&self) -> &[AnnotatedSentence] {
        &self.sentences
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().map(|s| s.id.as_str())
    }

    pub fn gold(&self, id: &str) -> Option<&BTreeSet<LabelKey>> {
        self.gold.get(id)
    }

    pub fn gold_labels(&self) -> &BTreeMap<String, BTreeSet<LabelKey>> {
        &self.gold
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Serializes back to the line format, always including tokens.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.sentences {
            let rec = CorpusRecord {
                id: s.id.clone(),
                text: s.raw_text.clone(),
                tokens: Some(s.tokens.clone()),
                labels: self.gold.get(&s.id).cloned(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("corpus record serializes"));
            out.push('\n');
        }
        out
    }
}

/// Reads a line-delimited corpus. Records without tokens go through the
/// fallback annotator; records with tokens are validated and kept verbatim.
pub fn ingest_corpus(text: &str, resources: &TaggerResources) -> Result<Corpus, AnnotationError> {
    let mut corpus = Corpus::default();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CorpusRecord = serde_json::from_str(line).map_err(|e| AnnotationError::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        if rec.id.is_empty() {
            return Err(AnnotationError::Parse {
                line: line_no,
                msg: "record has an empty id".into(),
            });
        }
        let sentence = match rec.tokens {
            Some(tokens) => {
                let s = AnnotatedSentence {
                    id: rec.id,
                    raw_text: rec.text,
                    tokens,
                };
                s.validate().map_err(|e| AnnotationError::Parse {
                    line: line_no,
                    msg: e.to_string(),
                })?;
                s
            }
            None => annotate_text(&rec.id, &rec.text, resources).map_err(|e| {
                AnnotationError::Parse {
                    line: line_no,
                    msg: e.to_string(),
                }
            })?,
        };
        corpus.push(sentence, rec.labels)?;
    }
    Ok(corpus)
}

pub fn load_corpus(path: &Path, resources: &TaggerResources) -> Result<Corpus, AnnotationError> {
    let text = std::fs::read_to_string(path).map_err(|e| AnnotationError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    ingest_corpus(&text, resources)
}

/// Deterministic disjoint split into `(train_pool, test_pool)`, each in
/// corpus order. The test pool holds `round(fraction * n)` sentences.
pub fn holdout_split(
    corpus: &Corpus,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>), AnnotationError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(AnnotationError::InvalidArgument(format!(
            "holdout fraction {fraction} outside [0, 1]"
        )));
    }
    let n = corpus.len();
    let n_test = (fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test_idx: BTreeSet<usize> = order[..n_test].iter().copied().collect();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, s) in corpus.sentences.iter().enumerate() {
        if test_idx.contains(&i) {
            test.push(s.id.clone());
        } else {
            train.push(s.id.clone());
        }
    }
    Ok((train, test))
}
