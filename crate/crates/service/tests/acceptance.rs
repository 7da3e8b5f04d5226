//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines are always printed.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vtteach_core::annotation::{tokenize, LabelKey, Source};
use vtteach_core::counterfactual::{transcript_to_jsonl, CfStatus, CounterfactualRecord};
use vtteach_core::diff::{word_diff, EditOp};
use vtteach_core::metrics::{
    cohen_kappa, fleiss_kappa, multilabel_cohen_kappa, multilabel_fleiss_kappa, precision_recall_f1,
};
use vtteach_core::par::Parallelism;
use vtteach_core::pattern::{match_sentence, matches, parse_pattern, print_pattern, MatchConfig};
use vtteach_service::{
    make_client, run_seeds, session_from_json, session_to_json, summarize, Decision, Mutation, Request, Service,
    SessionConfig, SessionDir, SimulationScript, TeachingSession,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn matcher_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let lex = oracles::lexicon();
    let caps = [None, Some(0), Some(1), Some(2), Some(3)];
    let (mut agree, mut nonempty) = (0, 0);
    let trials = 10_000;
    for _ in 0..trials {
        let s = oracles::random_sentence(&mut rng, 8);
        let p = oracles::random_pattern(&mut rng, 3);
        let cap = *caps.choose(&mut rng).unwrap();
        let config = MatchConfig { wildcard_cap: cap };
        let got: BTreeSet<(usize, usize)> = match_sentence(&p, &s, &lex, &config)
            .iter()
            .map(|m| (m.start, m.end))
            .collect();
        let want = oracles::oracle_spans(&p, &s, cap);
        if got == want && matches(&p, &s, &lex, &config) == !want.is_empty() {
            agree += 1;
        }
        nonempty += usize::from(!want.is_empty());
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(agree == trials, || format!("{agree}/{trials} agree"))?;
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!("{agree}/{trials} agree ({nonempty} with matches) in {secs:.1}s"))
}

const QUOTED: [&str; 13] = [
    "(delicious)|(good)",
    "(friendly)+*+NOUN",
    "[sense] | (frightened)",
    "(little) | (dread)",
    "(great)+(place)",
    "(atmosphere)|(area)",
    "(cozy)|[dining]",
    "PROPN|(mourn)",
    "(frighten)|(stand)",
    "(small)",
    "(sister)",
    "$PERSON",
    "(price)+*",
];

fn parser_round_trip() -> Outcome {
    let mut ok = 0;
    let mut bad = Vec::new();
    for text in QUOTED {
        let round = parse_pattern(text).ok().and_then(|p| {
            let printed = print_pattern(&p);
            parse_pattern(&printed).ok().map(|q| (p, q, printed))
        });
        match round {
            Some((p, q, printed)) if p == q && print_pattern(&q) == printed => ok += 1,
            _ => bad.push(text),
        }
    }
    ensure(ok == QUOTED.len(), || format!("{ok}/13; failing: {bad:?}"))?;
    Ok(format!("{ok}/13"))
}

fn diff_minimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ok = 0;
    for _ in 0..1000 {
        let a = oracles::random_tokens(&mut rng, 15);
        let b = oracles::random_tokens(&mut rng, 15);
        let script = word_diff(&a, &b);
        let sum: usize = script
            .runs
            .iter()
            .filter(|r| r.op != EditOp::Keep)
            .map(|r| r.tokens.len())
            .sum();
        if script.cost == oracles::indel_distance(&a, &b)
            && sum == script.cost
            && script.original() == a
            && script.counterfactual() == b
        {
            ok += 1;
        }
    }
    ensure(ok == 1000, || format!("{ok}/1000 minimal"))?;
    let ex = word_diff(&tokenize("Breakfast was delicious"), &tokenize("Breakfast was pretty cheap"));
    let runs: Vec<(EditOp, String)> = ex.runs.iter().map(|r| (r.op, r.tokens.join(" "))).collect();
    let want = vec![
        (EditOp::Keep, "Breakfast was".to_string()),
        (EditOp::Delete, "delicious".to_string()),
        (EditOp::Insert, "pretty cheap".to_string()),
    ];
    ensure(runs == want && ex.cost == 3, || format!("worked example gave {runs:?}"))?;
    Ok("1000/1000 minimal; worked example keep/delete/insert, cost 3".into())
}

/// Raw soft-match table from the lexicon file, read without the library.
fn raw_lexicon() -> BTreeMap<String, BTreeSet<String>> {
    let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for line in fs::read_to_string(common::fixture("lexicon.jsonl")).unwrap().lines() {
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let head = v["head"].as_str().unwrap().to_lowercase();
        let set = out.entry(head.clone()).or_default();
        set.insert(head);
        for m in v["members"].as_array().unwrap() {
            set.insert(m.as_str().unwrap().to_lowercase());
        }
    }
    out
}

fn generate_all() -> (Vec<CounterfactualRecord>, Vec<u8>, TeachingSession) {
    let mut s = common::session(
        "breakfast_corpus.jsonl",
        SessionConfig {
            holdout_fraction: 0.0,
            ..SessionConfig::default()
        },
    );
    let gold: Vec<(String, BTreeSet<LabelKey>)> =
        s.corpus.gold_labels().iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    for (id, labels) in &gold {
        s.apply(&Mutation::SubmitLabels {
            sentence_id: id.clone(),
            labels: labels.clone(),
            source: Source::Human,
        })
        .unwrap();
    }
    s.apply(&Mutation::Retrain).unwrap();
    let client = make_client(&s).unwrap();
    let mut records = Vec::new();
    let mut transcript = Vec::new();
    for (id, labels) in &gold {
        if labels.is_empty() {
            continue;
        }
        let g = s.generate(id, client.as_ref()).unwrap();
        transcript.extend(transcript_to_jsonl(&g.transcript).into_bytes());
        records.extend(g.records);
    }
    (records, transcript, s)
}

fn counterfactual_soundness() -> Outcome {
    let lex = raw_lexicon();
    let soft = |w: &str, lemma: &str| {
        let w = w.to_lowercase();
        let lemma = lemma.to_lowercase();
        lex.get(&w).map_or(w == lemma, |set| set.contains(&lemma))
    };
    let (records, t1, s) = generate_all();
    let (again, t2, _) = generate_all();
    ensure(!records.is_empty(), || "no records generated".into())?;
    let mut valid = 0;
    let mut bad = Vec::new();
    for r in &records {
        let cap = Some(r.wildcard_cap);
        let spans = oracles::oracle_spans_with(&r.pattern, &r.sentence, cap, &soft);
        let original = s.corpus.get(&r.original_id).unwrap();
        let rule_of_original = s
            .models
            .iter()
            .find(|m| m.label == r.original_label)
            .is_some_and(|m| m.patterns.iter().any(|p| p.scored.pattern == r.pattern));
        let words: Vec<String> = r.sentence.tokens.iter().map(|t| t.text.to_lowercase()).collect();
        let phrase: Vec<String> = tokenize(&r.included_phrase.text).iter().map(|w| w.to_lowercase()).collect();
        let has_phrase = !phrase.is_empty() && words.windows(phrase.len()).any(|w| w == phrase.as_slice());
        let checks = [
            r.text == r.sentence.raw_text,
            rule_of_original,
            !oracles::oracle_spans_with(&r.pattern, original, cap, &soft).is_empty(),
            spans.contains(&(r.matched_span.start, r.matched_span.end)),
            r.judged_label == r.target_label,
            r.target_label != r.original_label,
            has_phrase,
            r.status == CfStatus::Proposed,
        ];
        if checks.iter().all(|&c| c) {
            valid += 1;
        } else {
            bad.push((r.id.clone(), checks));
        }
    }
    ensure(valid == records.len(), || format!("{valid}/{} valid; failing {bad:?}", records.len()))?;
    ensure(records == again, || "records differ between runs".into())?;
    ensure(!t1.is_empty() && t1 == t2, || "transcripts differ between runs".into())?;
    Ok(format!(
        "{valid}/{} records valid; transcripts identical ({} bytes)",
        records.len(),
        t1.len()
    ))
}

fn simulation_direction() -> Outcome {
    let started = Instant::now();
    let template = common::session("yelp_synthetic.jsonl", SessionConfig::default());
    let script = SimulationScript::from_gold(&template, common::keywords(), 5, 10, 0);
    let seeds: Vec<u64> = (0..10).collect();
    let reports = run_seeds(&template, &script, &seeds, &make_client, Parallelism::Auto).map_err(|e| e.to_string())?;
    let summary = summarize(reports);
    let secs = started.elapsed().as_secs_f64();
    let detail = format!(
        "with_cf >= without_cf on {}/10 seeds in {secs:.1}s",
        summary.with_cf_not_worse
    );
    ensure(summary.with_cf_not_worse >= 7 && secs < 300.0, || detail.clone())?;
    Ok(detail)
}

fn metrics_fixtures() -> Outcome {
    let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
    let mut checked = 0;
    let mut bad = Vec::new();
    let mut check = |name: &str, got: f64, want: f64| {
        checked += 1;
        if !close(got, want) {
            bad.push(format!("{name}: {got} vs {want}"));
        }
    };
    for ((tp, fp, fn_), name) in [((3, 1, 2), "prf a"), ((7, 3, 1), "prf b"), ((0, 0, 4), "prf c")] {
        let got = precision_recall_f1(tp, fp, fn_);
        let (p, r, f) = oracles::prf(tp as u64, fp as u64, fn_ as u64);
        check(name, got.precision, p);
        check(name, got.recall, r);
        check(name, got.f1, f);
    }
    let chars = |s: &str| s.chars().collect::<Vec<_>>();
    check("cohen binary", cohen_kappa(&chars("yynnynyynn"), &chars("ynnnyyyynn")).unwrap(), 3.0 / 5.0);
    check("cohen three", cohen_kappa(&chars("aabbccabca"), &chars("abbbcaabcc")).unwrap(), 37.0 / 67.0);
    let a = format!("{}{}", "y".repeat(25), "n".repeat(25));
    let b = format!("{}{}{}{}", "y".repeat(20), "n".repeat(5), "y".repeat(10), "n".repeat(15));
    check("cohen table", cohen_kappa(&chars(&a), &chars(&b)).unwrap(), 0.4);
    let big = vec![
        vec![0, 0, 0, 0, 14],
        vec![0, 2, 6, 4, 2],
        vec![0, 0, 3, 5, 6],
        vec![0, 3, 9, 2, 0],
        vec![2, 2, 8, 1, 1],
        vec![7, 7, 0, 0, 0],
        vec![3, 2, 6, 3, 0],
        vec![2, 5, 3, 2, 2],
        vec![6, 5, 2, 1, 0],
        vec![0, 2, 2, 3, 7],
    ];
    check("fleiss 14x5", fleiss_kappa(&big).unwrap(), 4211.0 / 20059.0);
    check("fleiss binary", fleiss_kappa(&[vec![3, 0], vec![2, 1], vec![1, 2], vec![0, 3]]).unwrap(), 1.0 / 3.0);
    let t = [vec![2, 1, 0], vec![0, 2, 1], vec![1, 1, 1], vec![3, 0, 0], vec![0, 0, 3]];
    check("fleiss three", fleiss_kappa(&t).unwrap(), 43.0 / 148.0);
    let sets = |items: &[&[&'static str]]| -> Vec<BTreeSet<&'static str>> {
        items.iter().map(|x| x.iter().copied().collect()).collect()
    };
    let a = sets(&[&["food"], &["food", "price"], &["service"], &[], &["price"], &["food", "service"]]);
    let b = sets(&[&["food"], &["price"], &["service", "food"], &["price"], &["price"], &["food", "service"]]);
    check("multilabel cohen", multilabel_cohen_kappa(&["food", "price", "service"], &a, &b).unwrap(), 2.0 / 3.0);
    let r = vec![
        sets(&[&["a"], &["a"], &["a", "b"]]),
        sets(&[&["b"], &["b"], &[]]),
        sets(&[&["a", "b"], &["a"], &["b"]]),
        sets(&[&[], &["a"], &[]]),
    ];
    check("multilabel fleiss", multilabel_fleiss_kappa(&["a", "b"], &r).unwrap(), 16.0 / 105.0);
    ensure(bad.is_empty(), || bad.join("; "))?;
    Ok(format!("{checked} values within 1e-9"))
}

const LABELS: [&str; 4] = ["price", "service", "environment", "products"];

fn random_labels(rng: &mut ChaCha8Rng) -> BTreeSet<LabelKey> {
    let n = rng.gen_range(0..3);
    (0..n).map(|_| LabelKey::from(*LABELS.choose(rng).unwrap())).collect()
}

fn random_request(rng: &mut ChaCha8Rng, svc: &Service, id: &str) -> Request {
    let sentence = format!("f{:02}", rng.gen_range(1..=14));
    match rng.gen_range(0..9) {
        0..=3 => Request::SubmitLabels {
            session: id.into(),
            sentence_id: sentence,
            labels: random_labels(rng),
            source: None,
            expected_revision: None,
        },
        4 => Request::Retrain {
            session: id.into(),
            expected_revision: None,
        },
        5 | 6 => Request::RequestCounterfactuals {
            session: id.into(),
            sentence_id: sentence,
        },
        _ => {
            let snap = svc.snapshot(id).unwrap();
            let open: Vec<&CounterfactualRecord> = snap.queue.iter().filter(|r| r.status == CfStatus::Proposed).collect();
            let cf_id = open.choose(rng).map_or("missing".to_string(), |r| r.id.clone());
            let decision = match rng.gen_range(0..3) {
                0 => Decision::Accept,
                1 => Decision::Reject,
                _ => Decision::Relabel {
                    labels: random_labels(rng),
                },
            };
            Request::ResolveCounterfactual {
                session: id.into(),
                cf_id,
                decision,
                expected_revision: None,
            }
        }
    }
}

fn persistence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut ops, mut refused, mut queued) = (0, 0, 0);
    for case in 0..100 {
        let root = tempfile::tempdir().unwrap();
        let svc = Service::new(root.path());
        let config = SessionConfig {
            retrain_every: 3,
            holdout_fraction: if case % 2 == 0 { 0.25 } else { 0.0 },
            ..SessionConfig::default()
        };
        let created = svc
            .handle(Request::CreateSession {
                corpus: common::fixture("breakfast_corpus.jsonl"),
                labels: common::fixture("labels.jsonl"),
                lexicon: common::fixture("lexicon.jsonl"),
                phrasebook: Some(common::fixture("phrasebook.jsonl")),
                config: Some(config),
                name: Some("p".into()),
            })
            .map_err(|e| e.to_string())?;
        drop(created);
        let file = root.path().join("p").join("session.json");
        for _ in 0..rng.gen_range(1..24) {
            let before = fs::read(&file).unwrap();
            let req = random_request(&mut rng, &svc, "p");
            ops += 1;
            if svc.handle(req).is_err() {
                refused += 1;
                ensure(fs::read(&file).unwrap() == before, || format!("case {case}: refused op changed the file"))?;
            }
        }
        queued += svc.snapshot("p").unwrap().queue.len();
        let text = fs::read_to_string(&file).unwrap();
        let loaded = session_from_json(&text).map_err(|e| e.to_string())?;
        ensure(session_to_json(&loaded) == text, || format!("case {case}: save/load/save differs"))?;
        ensure(loaded == *svc.snapshot("p").unwrap(), || format!("case {case}: loaded state differs"))?;
        let replayed = SessionDir::open(root.path().join("p")).and_then(|d| d.replay()).map_err(|e| e.to_string())?;
        ensure(session_to_json(&replayed) == text, || format!("case {case}: replay differs"))?;
    }
    Ok(format!(
        "100/100 sequences byte-identical ({ops} ops, {refused} refused, {queued} counterfactuals queued)"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("matcher oracle equivalence", matcher_oracle),
        ("parser round-trip", parser_round_trip),
        ("diff minimality", diff_minimality),
        ("counterfactual soundness", counterfactual_soundness),
        ("simulation direction", simulation_direction),
        ("metrics fixtures", metrics_fixtures),
        ("persistence", persistence),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, f) in criteria {
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = started.elapsed();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{}]", secs(took)),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{}]", secs(took));
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}
