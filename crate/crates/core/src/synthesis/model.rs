use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotatedSentence, LabelKey, SynonymLexicon};
use crate::metrics::{precision_recall_f1, Prf};
use crate::pattern::{matches, MatchConfig};

use super::{ScoredPattern, SynthesisConfig, SynthesisError, TrainingSnapshot};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedPattern {
    #[serde(flatten)]
    pub scored: ScoredPattern,
    pub weight: f64,
}

/// One-vs-rest logistic model over binary "rule matches" features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelModel {
    pub label: LabelKey,
    pub patterns: Vec<WeightedPattern>,
    pub bias: f64,
    pub threshold: f64,
    pub wildcard_cap: usize,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl LabelModel {
    fn features(&self, sentence: &AnnotatedSentence, lexicon: &SynonymLexicon) -> Vec<f64> {
        let cfg = MatchConfig::capped(self.wildcard_cap);
        self.patterns
            .iter()
            .map(|p| f64::from(u8::from(matches(&p.scored.pattern, sentence, lexicon, &cfg))))
            .collect()
    }

    /// Squashed score in (0, 1).
    pub fn score(&self, sentence: &AnnotatedSentence, lexicon: &SynonymLexicon) -> f64 {
        let z: f64 = self
            .features(sentence, lexicon)
            .iter()
            .zip(&self.patterns)
            .map(|(x, p)| x * p.weight)
            .sum::<f64>()
            + self.bias;
        sigmoid(z)
    }
}

/// Fits weights for `patterns` on every annotated sentence of the snapshot
/// (target: the sentence carries `label`). Training is seeded SGD on the
/// logistic loss, starting from zero weights; the example order is
/// reshuffled each epoch.
pub fn train_label_model(
    label: &LabelKey,
    patterns: &[ScoredPattern],
    snapshot: &TrainingSnapshot<'_>,
    lexicon: &SynonymLexicon,
    config: &SynthesisConfig,
) -> LabelModel {
    let mut model = LabelModel {
        label: label.clone(),
        patterns: patterns
            .iter()
            .map(|p| WeightedPattern {
                scored: p.clone(),
                weight: 0.0,
            })
            .collect(),
        bias: 0.0,
        threshold: config.threshold,
        wildcard_cap: config.wildcard_cap,
    };
    model
        .patterns
        .sort_by(|a, b| b.scored.f1.total_cmp(&a.scored.f1));
    let data: Vec<(Vec<f64>, f64)> = snapshot
        .examples
        .iter()
        .map(|e| {
            (
                model.features(e.sentence, lexicon),
                f64::from(u8::from(e.labels.contains(label))),
            )
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let lr = config.learning_rate;
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (x, y) = &data[i];
            let z: f64 = x
                .iter()
                .zip(&model.patterns)
                .map(|(xi, p)| xi * p.weight)
                .sum::<f64>()
                + model.bias;
            let g = sigmoid(z) - y;
            for (xi, p) in x.iter().zip(model.patterns.iter_mut()) {
                p.weight -= lr * g * xi;
            }
            model.bias -= lr * g;
        }
    }
    model
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: LabelKey,
    pub score: f64,
}

/// Scores of every model for one sentence, in label order.
pub fn score_sentence(
    models: &[LabelModel],
    sentence: &AnnotatedSentence,
    lexicon: &SynonymLexicon,
) -> Vec<Prediction> {
    let mut out: Vec<Prediction> = models
        .iter()
        .map(|m| Prediction {
            label: m.label.clone(),
            score: m.score(sentence, lexicon),
        })
        .collect();
    out.sort_by(|a, b| a.label.cmp(&b.label));
    out
}

/// Labels whose model score reaches its threshold; independent per label.
pub fn predict(
    models: &[LabelModel],
    sentence: &AnnotatedSentence,
    lexicon: &SynonymLexicon,
) -> Vec<Prediction> {
    let thresholds: BTreeMap<&LabelKey, f64> =
        models.iter().map(|m| (&m.label, m.threshold)).collect();
    score_sentence(models, sentence, lexicon)
        .into_iter()
        .filter(|p| p.score >= thresholds[&p.label])
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    #[serde(flatten)]
    pub prf: Prf,
}

impl LabelMetrics {
    fn finish(&mut self) {
        self.prf = precision_recall_f1(self.tp, self.fp, self.fn_);
    }
}

/// Held-out scores. Zero denominators count as 0.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub sentences: usize,
    pub per_label: BTreeMap<LabelKey, LabelMetrics>,
    pub micro: LabelMetrics,
    /// Learned rules per label, canonical text, best first.
    pub rules: BTreeMap<LabelKey, Vec<String>>,
}

/// Scores `models` against gold labels. Labels present in the gold data but
/// lacking a model count their occurrences as misses.
pub fn evaluate(
    models: &[LabelModel],
    test_pool: &[(&AnnotatedSentence, &BTreeSet<LabelKey>)],
    lexicon: &SynonymLexicon,
) -> Result<MetricsReport, SynthesisError> {
    if test_pool.is_empty() {
        return Err(SynthesisError::EmptyTestPool);
    }
    let mut labels: BTreeSet<LabelKey> = models.iter().map(|m| m.label.clone()).collect();
    for (_, gold) in test_pool {
        labels.extend(gold.iter().cloned());
    }
    let mut per_label: BTreeMap<LabelKey, LabelMetrics> =
        labels.iter().map(|l| (l.clone(), LabelMetrics::default())).collect();
    for (sentence, gold) in test_pool {
        let predicted: BTreeSet<LabelKey> = predict(models, sentence, lexicon)
            .into_iter()
            .map(|p| p.label)
            .collect();
        for l in &labels {
            let m = per_label.get_mut(l).expect("label registered");
            match (predicted.contains(l), gold.contains(l)) {
                (true, true) => m.tp += 1,
                (true, false) => m.fp += 1,
                (false, true) => m.fn_ += 1,
                (false, false) => {}
            }
        }
    }
    let mut micro = LabelMetrics::default();
    for m in per_label.values_mut() {
        m.finish();
        micro.tp += m.tp;
        micro.fp += m.fp;
        micro.fn_ += m.fn_;
    }
    micro.finish();
    Ok(MetricsReport {
        sentences: test_pool.len(),
        per_label,
        micro,
        rules: models
            .iter()
            .map(|m| {
                (
                    m.label.clone(),
                    m.patterns.iter().map(|p| p.scored.pattern.canonical()).collect(),
                )
            })
            .collect(),
    })
}
