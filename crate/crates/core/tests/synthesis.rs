mod common;

use std::collections::BTreeSet;

use vtteach_core::annotation::{annotate_text, AnnotatedSentence, LabelKey, SynonymLexicon, TaggerResources};
use vtteach_core::par::Parallelism;
use vtteach_core::pattern::{matches, parse_pattern, MatchConfig, Pattern, PatternAtom, Sequence};
use vtteach_core::synthesis::{
    enumerate_atoms, evaluate, explore_sequences, predict, synthesize_patterns, train_label_model,
    Example, LabelModel, ScoredPattern, SynthesisConfig, TrainingSnapshot, WeightedPattern,
};

use common::*;

fn snapshot_of(corpus: &vtteach_core::annotation::Corpus) -> TrainingSnapshot<'_> {
    let store = gold_store(corpus, &labels());
    TrainingSnapshot::from_store(&store, |id| corpus.get(id)).unwrap()
}

fn ann(id: &str, text: &str) -> AnnotatedSentence {
    annotate_text(id, text, &TaggerResources::builtin()).unwrap()
}

#[test]
fn products_rule_on_breakfast_fixture() {
    let corpus = corpus("breakfast_corpus.jsonl");
    let snap = snapshot_of(&corpus);
    let got = synthesize_patterns(&"products".into(), &snap, &lexicon(), &SynthesisConfig::default()).unwrap();
    assert_eq!(got[0].pattern.canonical(), "(delicious)|(good)");
    assert_eq!((got[0].precision, got[0].recall, got[0].f1, got[0].support), (1.0, 1.0, 1.0, 2));
    // Ordered by f1, then size, then text.
    for w in got.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        assert!(
            a.f1 > b.f1
                || (a.f1 == b.f1 && a.pattern.atom_count() < b.pattern.atom_count())
                || (a.f1 == b.f1
                    && a.pattern.atom_count() == b.pattern.atom_count()
                    && a.pattern.canonical() < b.pattern.canonical())
        );
    }
}

#[test]
fn weep_rule_is_reachable_with_defaults() {
    let s = ann("w", "she began to weep over the child");
    let snap = TrainingSnapshot {
        examples: vec![Example {
            sentence: &s,
            labels: keys(&["environment"]),
        }],
    };
    let explored =
        explore_sequences(&"environment".into(), &snap, &lexicon(), &SynthesisConfig::default()).unwrap();
    let hit = explored
        .iter()
        .find(|p| p.pattern.canonical() == "(weep)+*+NOUN")
        .expect("rule reached by the search");
    assert_eq!(hit.f1, 1.0);
}

#[test]
fn inseparable_labels_cap_precision() {
    // The same texts appear once as positives and once as negatives, so any
    // rule matching a positive also matches its twin: precision 1/2, recall
    // at most 1, f1 at most 2/3.
    let texts = ["The bread was good", "The coffee was bad"];
    let pos: Vec<AnnotatedSentence> = texts.iter().enumerate().map(|(i, t)| ann(&format!("p{i}"), t)).collect();
    let neg: Vec<AnnotatedSentence> = texts.iter().enumerate().map(|(i, t)| ann(&format!("n{i}"), t)).collect();
    let mut examples: Vec<Example> = pos.iter().map(|s| Example { sentence: s, labels: keys(&["price"]) }).collect();
    examples.extend(neg.iter().map(|s| Example { sentence: s, labels: keys(&["products"]) }));
    let snap = TrainingSnapshot { examples };
    let got = synthesize_patterns(&"price".into(), &snap, &lexicon(), &SynthesisConfig::default()).unwrap();
    assert!(!got.is_empty());
    for p in &got {
        assert!((p.precision - 0.5).abs() < 1e-12, "{}", p.pattern);
        assert!(p.f1 <= 2.0 / 3.0 + 1e-12);
    }
}

#[test]
fn no_positives_is_an_error() {
    let corpus = corpus("breakfast_corpus.jsonl");
    let snap = snapshot_of(&corpus);
    assert!(synthesize_patterns(&"missing".into(), &snap, &lexicon(), &SynthesisConfig::default()).is_err());
}

fn recompute(p: &Pattern, label: &LabelKey, snap: &TrainingSnapshot<'_>, lx: &SynonymLexicon) -> (f64, f64, usize) {
    let cfg = MatchConfig::capped(3);
    let pos = snap.positives(label);
    let neg = snap.negatives(label);
    let tp = pos.iter().filter(|s| matches(p, s, lx, &cfg)).count();
    let fp = neg.iter().filter(|s| matches(p, s, lx, &cfg)).count();
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = tp as f64 / pos.len() as f64;
    (precision, recall, tp)
}

#[test]
fn stored_scores_match_recomputation() {
    let corpus = corpus("yelp_synthetic.jsonl");
    let snap = snapshot_of(&corpus);
    let lx = lexicon();
    for label in labels().keys() {
        let got = synthesize_patterns(&label, &snap, &lx, &SynthesisConfig::default()).unwrap();
        assert!(!got.is_empty());
        for sp in got {
            let (p, r, tp) = recompute(&sp.pattern, &label, &snap, &lx);
            assert_eq!(sp.support, tp, "{}", sp.pattern);
            assert!((sp.precision - p).abs() < 1e-12, "{}", sp.pattern);
            assert!((sp.recall - r).abs() < 1e-12, "{}", sp.pattern);
            let h = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            assert!((sp.f1 - h).abs() < 1e-12);
        }
    }
}

#[test]
fn parallel_and_sequential_agree() {
    let corpus = corpus("yelp_synthetic.jsonl");
    let snap = snapshot_of(&corpus);
    let lx = lexicon();
    for label in labels().keys() {
        let par = synthesize_patterns(&label, &snap, &lx, &SynthesisConfig::default()).unwrap();
        let seq_cfg = SynthesisConfig {
            parallelism: Parallelism::Sequential,
            ..SynthesisConfig::default()
        };
        let seq = synthesize_patterns(&label, &snap, &lx, &seq_cfg).unwrap();
        assert_eq!(par, seq);
    }
}

/// Every sequence over `atoms` and `*` up to `max_len`, scored with the
/// plain matcher.
fn exhaustive_best_f1(
    atoms: &[PatternAtom],
    max_len: usize,
    max_wild: usize,
    pos: &[&AnnotatedSentence],
    neg: &[&AnnotatedSentence],
    lx: &SynonymLexicon,
) -> f64 {
    let mut alphabet = atoms.to_vec();
    alphabet.push(PatternAtom::Wildcard);
    let mut frontier: Vec<Vec<PatternAtom>> = vec![vec![]];
    let mut best = 0.0f64;
    let cfg = MatchConfig::capped(3);
    for _ in 0..max_len {
        let mut next = Vec::new();
        for prefix in &frontier {
            for a in &alphabet {
                let mut seq = prefix.clone();
                seq.push(a.clone());
                if seq.iter().filter(|x| x.is_wildcard()).count() > max_wild {
                    continue;
                }
                if let Some(p) = Pattern::new(vec![Sequence(seq.clone())]) {
                    let tp = pos.iter().filter(|s| matches(&p, s, lx, &cfg)).count();
                    let fp = neg.iter().filter(|s| matches(&p, s, lx, &cfg)).count();
                    let fn_ = pos.len() - tp;
                    let f1 = if tp == 0 { 0.0 } else { 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64 };
                    best = best.max(f1);
                }
                next.push(seq);
            }
        }
        frontier = next;
    }
    best
}

#[test]
fn wide_beam_equals_exhaustive_search() {
    let corpus = corpus("breakfast_corpus.jsonl");
    let snap = snapshot_of(&corpus);
    let lx = lexicon();
    for label in ["products", "price", "service", "environment"] {
        let label = LabelKey::from(label);
        let pos = snap.positives(&label);
        let neg = snap.negatives(&label);
        let atoms = enumerate_atoms(&pos, &lx).unwrap();
        let cfg = SynthesisConfig {
            beam_width: 100_000,
            max_branches: 1,
            ..SynthesisConfig::default()
        };
        let got = synthesize_patterns(&label, &snap, &lx, &cfg).unwrap();
        let want = exhaustive_best_f1(&atoms, cfg.max_sequence_len, cfg.max_wildcards_per_seq, &pos, &neg, &lx);
        assert!((got[0].f1 - want).abs() < 1e-12, "{label}: {} vs {want}", got[0].f1);
    }
}

#[test]
fn alternation_extension_never_lowers_recall() {
    let corpus = corpus("yelp_synthetic.jsonl");
    let snap = snapshot_of(&corpus);
    let lx = lexicon();
    let label = LabelKey::from("price");
    let got = synthesize_patterns(&label, &snap, &lx, &SynthesisConfig::default()).unwrap();
    for sp in got.iter().filter(|p| p.pattern.branches().len() > 1) {
        let branches = sp.pattern.branches();
        let head = Pattern::new(branches[..branches.len() - 1].to_vec()).unwrap();
        let (_, r_head, _) = recompute(&head, &label, &snap, &lx);
        assert!(sp.recall >= r_head);
    }
}

#[test]
fn synthesis_is_deterministic() {
    let corpus = corpus("yelp_synthetic.jsonl");
    let snap = snapshot_of(&corpus);
    let cfg = SynthesisConfig::default();
    let a = synthesize_patterns(&"service".into(), &snap, &lexicon(), &cfg).unwrap();
    let b = synthesize_patterns(&"service".into(), &snap, &lexicon(), &cfg).unwrap();
    assert_eq!(a, b);
}

fn train_breakfast(label: &str) -> (LabelModel, Vec<(bool, bool)>) {
    let corpus = corpus("breakfast_corpus.jsonl");
    let snap = snapshot_of(&corpus);
    let lx = lexicon();
    let cfg = SynthesisConfig::default();
    let label = LabelKey::from(label);
    let pats = synthesize_patterns(&label, &snap, &lx, &cfg).unwrap();
    let model = train_label_model(&label, &pats, &snap, &lx, &cfg);
    let outcomes = snap
        .examples
        .iter()
        .map(|e| (model.score(e.sentence, &lx) >= model.threshold, e.labels.contains(&label)))
        .collect();
    (model, outcomes)
}

#[test]
fn separable_rule_fits_training_data() {
    let (model, outcomes) = train_breakfast("products");
    assert!(outcomes.iter().all(|(p, y)| p == y), "{outcomes:?}");
    assert!(model.patterns.iter().all(|p| p.weight.is_finite()));
    for w in model.patterns.windows(2) {
        assert!(w[0].scored.f1 >= w[1].scored.f1);
    }
}

#[test]
fn training_is_deterministic() {
    assert_eq!(train_breakfast("price").0, train_breakfast("price").0);
}

#[test]
fn silent_features_fall_back_to_majority() {
    let corpus = corpus("breakfast_corpus.jsonl");
    let snap = snapshot_of(&corpus);
    let lx = lexicon();
    let never = ScoredPattern {
        pattern: parse_pattern("[zzzz]").unwrap(),
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
        support: 0,
    };
    let cfg = SynthesisConfig::default();
    // 2 of 9 sentences carry "products": the majority is "absent".
    let m = train_label_model(&"products".into(), std::slice::from_ref(&never), &snap, &lx, &cfg);
    assert_eq!(m.patterns[0].weight, 0.0);
    assert!(m.bias < 0.0);
    assert!(snap.examples.iter().all(|e| m.score(e.sentence, &lx) < m.threshold));

    let a = ann("a", "fine");
    let b = ann("b", "fine");
    let c = ann("c", "fine");
    let snap = TrainingSnapshot {
        examples: vec![
            Example { sentence: &a, labels: keys(&["price"]) },
            Example { sentence: &b, labels: keys(&["price"]) },
            Example { sentence: &c, labels: keys(&["service"]) },
        ],
    };
    let m = train_label_model(&"price".into(), &[never], &snap, &lx, &cfg);
    assert!(m.score(&a, &lx) >= m.threshold);
}

fn fixed_model(label: &str, pattern: &str) -> LabelModel {
    LabelModel {
        label: label.into(),
        patterns: vec![WeightedPattern {
            scored: ScoredPattern {
                pattern: parse_pattern(pattern).unwrap(),
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
                support: 1,
            },
            weight: 10.0,
        }],
        bias: -5.0,
        threshold: 0.5,
        wildcard_cap: 3,
    }
}

#[test]
fn predict_is_one_vs_rest() {
    let lx = lexicon();
    let models = vec![fixed_model("products", "(delicious)"), fixed_model("price", "[expensive]")];
    let s = ann("s", "The wings were delicious .");
    let got: Vec<String> = predict(&models, &s, &lx).into_iter().map(|p| p.label.0).collect();
    assert_eq!(got, ["products"]);
    let both = ann("t", "delicious but expensive");
    assert_eq!(predict(&models, &both, &lx).len(), 2);
    assert!(predict(&models, &ann("u", "nothing here"), &lx).is_empty());
    assert!(predict(&[], &s, &lx).is_empty());
}

#[test]
fn evaluate_counts_fixture() {
    let lx = SynonymLexicon::new();
    let models = vec![fixed_model("price", "[good]")];
    let texts = ["good a", "good b", "good c", "good d", "bad e", "bad f"];
    let sentences: Vec<AnnotatedSentence> =
        texts.iter().enumerate().map(|(i, t)| ann(&format!("e{i}"), t)).collect();
    let yes = keys(&["price"]);
    let no = BTreeSet::new();
    let gold = [&yes, &yes, &yes, &no, &yes, &yes];
    let pool: Vec<_> = sentences.iter().zip(gold).collect();
    let report = evaluate(&models, &pool, &lx).unwrap();
    let m = &report.micro;
    assert_eq!((m.tp, m.fp, m.fn_), (3, 1, 2));
    assert_eq!(m.prf.precision, 0.75);
    assert_eq!(m.prf.recall, 0.6);
    assert!((m.prf.f1 - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(report.rules[&LabelKey::from("price")], ["[good]"]);
}

#[test]
fn evaluate_edge_cases() {
    let lx = SynonymLexicon::new();
    assert!(evaluate(&[], &[], &lx).is_err());
    let s = ann("s", "good");
    let gold = keys(&["price"]);
    let none = evaluate(&[], &[(&s, &gold)], &lx).unwrap();
    assert_eq!((none.micro.prf.precision, none.micro.prf.recall), (0.0, 0.0));
    let perfect = evaluate(&[fixed_model("price", "[good]")], &[(&s, &gold)], &lx).unwrap();
    assert_eq!(perfect.micro.prf.f1, 1.0);
}
