use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use serde_json::json;
use vtteach_core::annotation::{load_corpus, tokenize, LabelKey, Source, SynonymLexicon, TaggerResources};
use vtteach_core::counterfactual::{transcript_from_jsonl, transcript_to_jsonl, CounterfactualRecord, ReplayClient};
use vtteach_core::diff::{word_diff, EditOp, EditScript};
use vtteach_core::metrics::{multilabel_cohen_kappa, precision_recall_f1};
use vtteach_core::pattern::{match_sentence, parse_pattern};
use vtteach_core::synthesis::MetricsReport;
use vtteach_service::api::Patterns;
use vtteach_service::{
    client_for, make_client, render_table, run_seeds, summarize, KeywordOracle, Mutation, Request, Response,
    RetrainEvent, Service, ServiceError, SessionConfig, SessionInputs, SimulationScript, TeachingSession,
};

use crate::{Cli, Command, Failure, InputArgs};

type Out = Result<String, Failure>;

pub fn run(cli: &Cli) -> Out {
    match &cli.command {
        Command::Ingest { corpus, out } => ingest(cli, corpus, out.as_deref()),
        Command::Synth { inputs, session } => match session {
            Some(dir) => synth_session(cli, dir),
            None => synth(cli, inputs),
        },
        Command::Match { pattern, corpus, lexicon } => match_cmd(cli, pattern, corpus, lexicon.as_deref()),
        Command::Cf {
            inputs,
            session,
            sentence,
            transcript,
            replay,
        } => match session {
            Some(dir) => {
                if transcript.is_some() {
                    return Err(Failure::usage(
                        "--transcript applies without --session; sessions keep their own transcript.jsonl",
                    ));
                }
                cf_session(cli, dir, sentence, replay.as_deref())
            }
            None => cf(cli, inputs, sentence, transcript.as_deref(), replay.as_deref()),
        },
        Command::Diff { a, b } => Ok(diff(cli, a, b)),
        Command::Eval {
            session,
            corpus,
            predictions,
        } => match (session, corpus, predictions) {
            (Some(dir), None, None) => eval_session(cli, dir),
            (None, Some(c), Some(p)) => eval_predictions(cli, c, p),
            _ => Err(Failure::usage("eval takes either --session or --corpus with --predictions")),
        },
        Command::Simulate {
            inputs,
            keywords,
            seeds,
            rounds,
            budget,
        } => simulate(cli, inputs, keywords, *seeds, *rounds, *budget),
        Command::Serve { root, addr } => serve(cli, root, *addr),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output serializes");
    s.push('\n');
    s
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, Failure> {
    p.as_deref().ok_or_else(|| Failure::usage(format!("missing --{flag}")))
}

fn load_inputs(a: &InputArgs) -> Result<SessionInputs, Failure> {
    Ok(SessionInputs::load(
        required(&a.corpus, "corpus")?,
        required(&a.labels, "labels")?,
        required(&a.lexicon, "lexicon")?,
        a.phrasebook.as_deref(),
    )?)
}

/// Root and id of a session directory.
fn locate(dir: &Path) -> Result<(PathBuf, String), Failure> {
    let id = dir
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Failure::usage(format!("not a session directory: {}", dir.display())))?;
    let root = match dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    Ok((root, id.to_string()))
}

fn service(cli: &Cli, root: PathBuf, replay: Option<&Path>) -> Result<Service, Failure> {
    let svc = Service::new(root);
    if let Some(path) = replay {
        let text = std::fs::read_to_string(path)?;
        let entries = transcript_from_jsonl(&text).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        return Ok(svc.with_client_factory(Box::new(move |_| Ok(Box::new(ReplayClient::new(&entries))))));
    }
    match cli.client {
        Some(kind) => Ok(svc.with_client_factory(Box::new(move |s| {
            let mut c = s.config.client.clone();
            c.kind = kind.into();
            client_for(s, &c)
        }))),
        None => Ok(svc),
    }
}

/// A session with every training sentence's gold labels and one retrain.
fn trained(inputs: SessionInputs, config: SessionConfig) -> Result<(TeachingSession, RetrainEvent), Failure> {
    let config = SessionConfig {
        retrain_every: usize::MAX,
        ..config
    };
    let mut s = TeachingSession::create(inputs, config, Some("cli"))?;
    for id in s.train_pool.clone() {
        if let Some(labels) = s.corpus.gold(&id).cloned() {
            s.apply(&Mutation::SubmitLabels {
                sentence_id: id,
                labels,
                source: Source::Oracle,
            })?;
        }
    }
    let ev = s.apply(&Mutation::Retrain)?.retrain.expect("retrain reports an event");
    Ok((s, ev))
}

fn ingest(cli: &Cli, corpus: &Path, out: Option<&Path>) -> Out {
    let corpus = load_corpus(corpus, &TaggerResources::builtin()).map_err(ServiceError::from)?;
    if let Some(path) = out {
        std::fs::write(path, corpus.to_jsonl())?;
        return Ok(if cli.json {
            to_json(&json!({"sentences": corpus.len(), "out": path}))
        } else {
            format!("{} sentences -> {}\n", corpus.len(), path.display())
        });
    }
    if cli.json {
        return Ok(corpus.to_jsonl());
    }
    let mut s = String::new();
    for sent in corpus.sentences() {
        let tagged: Vec<String> = sent.tokens.iter().map(|t| format!("{}/{}", t.text, t.pos)).collect();
        writeln!(s, "{}\t{}", sent.id, tagged.join(" ")).unwrap();
    }
    Ok(s)
}

fn metrics_line(m: &MetricsReport) -> String {
    format!(
        "held-out micro P {:.4} R {:.4} F1 {:.4} on {} sentences",
        m.micro.prf.precision, m.micro.prf.recall, m.micro.prf.f1, m.sentences
    )
}

fn render_patterns(p: &Patterns, ev: &RetrainEvent) -> String {
    let mut s = String::new();
    for l in &p.labels {
        writeln!(
            s,
            "{} ({})  bias {:.4}  threshold {:.2}",
            l.label,
            l.color.as_deref().unwrap_or("-"),
            l.bias,
            l.threshold
        )
        .unwrap();
        for r in &l.rules {
            writeln!(s, "  {:>8.4}  f1 {:.3}  {}", r.weight, r.scored.f1, r.scored.pattern).unwrap();
        }
    }
    for n in &ev.notices {
        writeln!(s, "note: {n}").unwrap();
    }
    if let Some(m) = &ev.with_cf {
        writeln!(s, "{}", metrics_line(m)).unwrap();
    }
    s
}

fn synth(cli: &Cli, inputs: &InputArgs) -> Out {
    let (s, ev) = trained(load_inputs(inputs)?, cli.session_config()?)?;
    let p = Patterns::of(&s);
    Ok(if cli.json {
        to_json(&json!({"patterns": p, "retrain": ev}))
    } else {
        render_patterns(&p, &ev)
    })
}

fn synth_session(cli: &Cli, dir: &Path) -> Out {
    let (root, id) = locate(dir)?;
    let svc = service(cli, root, None)?;
    let Response::Retrained(ev) = svc.handle(Request::Retrain {
        session: id.clone(),
        expected_revision: None,
    })?
    else {
        unreachable!("retrain answers with its event")
    };
    let Response::Patterns(p) = svc.handle(Request::GetPatterns { session: id })? else {
        unreachable!("get_patterns answers with patterns")
    };
    Ok(if cli.json {
        to_json(&json!({"patterns": p, "retrain": ev}))
    } else {
        render_patterns(&p, &ev)
    })
}

fn match_cmd(cli: &Cli, pattern: &str, corpus: &Path, lexicon: Option<&Path>) -> Out {
    let pattern = parse_pattern(pattern).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
    let lexicon = match lexicon {
        Some(p) => SynonymLexicon::load(p).map_err(ServiceError::from)?,
        None => SynonymLexicon::new(),
    };
    let corpus = load_corpus(corpus, &TaggerResources::builtin()).map_err(ServiceError::from)?;
    let config = cli.session_config()?.synthesis.match_config();
    let mut hits = Vec::new();
    for sent in corpus.sentences() {
        let spans = match_sentence(&pattern, sent, &lexicon, &config);
        if spans.is_empty() {
            continue;
        }
        let spans: Vec<_> = spans
            .iter()
            .map(|m| {
                let text: Vec<&str> = sent.tokens[m.start..m.end].iter().map(|t| t.text.as_str()).collect();
                json!({"start": m.start, "end": m.end, "text": text.join(" ")})
            })
            .collect();
        hits.push(json!({"id": sent.id, "text": sent.raw_text, "spans": spans}));
    }
    if cli.json {
        return Ok(to_json(&json!({"pattern": pattern.canonical(), "matches": hits})));
    }
    let mut s = String::new();
    for h in &hits {
        let spans: Vec<String> = h["spans"]
            .as_array()
            .unwrap()
            .iter()
            .map(|m| format!("[{},{}) {}", m["start"], m["end"], m["text"].as_str().unwrap()))
            .collect();
        writeln!(s, "{}\t{}\t{}", h["id"].as_str().unwrap(), h["text"].as_str().unwrap(), spans.join("; ")).unwrap();
    }
    writeln!(s, "{} of {} sentences match {}", hits.len(), corpus.len(), pattern.canonical()).unwrap();
    Ok(s)
}

fn script_lines(script: &EditScript, indent: &str) -> String {
    let (top, bottom) = script.aligned_rows();
    let runs: Vec<String> = script
        .runs
        .iter()
        .map(|r| {
            let op = match r.op {
                EditOp::Keep => "keep",
                EditOp::Delete => "delete",
                EditOp::Insert => "insert",
            };
            format!("{op}[{}]", r.tokens.join(" "))
        })
        .collect();
    format!(
        "{indent}{top}\n{indent}{bottom}\n{indent}{}\n{indent}cost {}\n",
        runs.join(" "),
        script.cost
    )
}

fn diff(cli: &Cli, a: &str, b: &str) -> String {
    let script = word_diff(&tokenize(a), &tokenize(b));
    if cli.json {
        let (top, bottom) = script.aligned_rows();
        to_json(&json!({"script": script, "rows": [top, bottom]}))
    } else {
        script_lines(&script, "")
    }
}

fn render_records(records: &[CounterfactualRecord], notices: &[String]) -> String {
    let mut s = String::new();
    for r in records {
        writeln!(
            s,
            "{}  {} -> {}  \"{}\"  (rule {}, phrase \"{}\")",
            r.id, r.original_label, r.target_label, r.text, r.pattern, r.included_phrase.text
        )
        .unwrap();
        s.push_str(&script_lines(&r.edit_script, "    "));
    }
    for n in notices {
        writeln!(s, "note: {n}").unwrap();
    }
    if records.is_empty() {
        s.push_str("no counterfactuals\n");
    }
    s
}

fn cf(cli: &Cli, inputs: &InputArgs, sentence: &str, transcript: Option<&Path>, replay: Option<&Path>) -> Out {
    let (s, _) = trained(load_inputs(inputs)?, cli.session_config()?)?;
    let client = match replay {
        Some(p) => Box::new(ReplayClient::load(p).map_err(|e| ServiceError::BadRequest(e.to_string()))?),
        None => make_client(&s)?,
    };
    let g = s.generate(sentence, client.as_ref())?;
    if let Some(path) = transcript {
        use std::io::Write as _;
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        f.write_all(transcript_to_jsonl(&g.transcript).as_bytes())?;
    }
    Ok(if cli.json {
        to_json(&json!({"records": g.records, "notices": g.notices}))
    } else {
        render_records(&g.records, &g.notices)
    })
}

fn cf_session(cli: &Cli, dir: &Path, sentence: &str, replay: Option<&Path>) -> Out {
    let (root, id) = locate(dir)?;
    let svc = service(cli, root, replay)?;
    let Response::Counterfactuals(c) = svc.handle(Request::RequestCounterfactuals {
        session: id,
        sentence_id: sentence.into(),
    })?
    else {
        unreachable!("request_counterfactuals answers with counterfactuals")
    };
    if cli.json {
        return Ok(to_json(&c));
    }
    let records: Vec<CounterfactualRecord> = c.groups.into_values().flatten().map(|i| i.record).collect();
    Ok(render_records(&records, &c.notices))
}

fn eval_session(cli: &Cli, dir: &Path) -> Out {
    let (root, id) = locate(dir)?;
    let Response::Metrics(m) = service(cli, root, None)?.handle(Request::GetMetrics { session: id })? else {
        unreachable!("get_metrics answers with metrics")
    };
    if cli.json {
        return Ok(to_json(&m));
    }
    let f1 = |r: &Option<MetricsReport>| r.as_ref().map_or("-".to_string(), |r| format!("{:.4}", r.micro.prf.f1));
    let mut s = String::from("revision  trigger      human  cf  f1_with_cf  f1_without_cf\n");
    for ev in &m.history {
        let trigger = serde_json::to_value(ev.trigger).unwrap();
        writeln!(
            s,
            "{:>8}  {:<11}  {:>5}  {:>2}  {:>10}  {:>13}",
            ev.revision,
            trigger.as_str().unwrap(),
            ev.human_annotations,
            ev.counterfactual_annotations,
            f1(&ev.with_cf),
            f1(&ev.without_cf)
        )
        .unwrap();
    }
    Ok(s)
}

#[derive(Deserialize)]
struct PredictionLine {
    id: String,
    labels: BTreeSet<LabelKey>,
}

fn eval_predictions(cli: &Cli, corpus: &Path, predictions: &Path) -> Out {
    let corpus = load_corpus(corpus, &TaggerResources::builtin()).map_err(ServiceError::from)?;
    let gold = corpus.gold_labels();
    if gold.is_empty() {
        return Err(ServiceError::BadRequest("corpus has no gold labels".into()).into());
    }
    let mut predicted: BTreeMap<String, BTreeSet<LabelKey>> = BTreeMap::new();
    for (n, line) in std::fs::read_to_string(predictions)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let p: PredictionLine = serde_json::from_str(line)
            .map_err(|e| ServiceError::BadRequest(format!("{}:{}: {e}", predictions.display(), n + 1)))?;
        if !gold.contains_key(&p.id) {
            return Err(ServiceError::NotFound(format!("sentence `{}` has no gold labels", p.id)).into());
        }
        predicted.insert(p.id, p.labels);
    }
    let empty = BTreeSet::new();
    let labels: BTreeSet<LabelKey> = gold.values().chain(predicted.values()).flatten().cloned().collect();
    let labels: Vec<LabelKey> = labels.into_iter().collect();
    let mut rows = Vec::new();
    let (mut tp_all, mut fp_all, mut fn_all) = (0, 0, 0);
    for l in &labels {
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for (id, g) in gold {
            let p = predicted.get(id).unwrap_or(&empty);
            match (g.contains(l), p.contains(l)) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => {}
            }
        }
        tp_all += tp;
        fp_all += fp;
        fn_all += fn_;
        rows.push((l.to_string(), tp, fp, fn_, precision_recall_f1(tp, fp, fn_)));
    }
    let micro = precision_recall_f1(tp_all, fp_all, fn_all);
    let a: Vec<BTreeSet<LabelKey>> = gold.values().cloned().collect();
    let b: Vec<BTreeSet<LabelKey>> = gold.keys().map(|id| predicted.get(id).unwrap_or(&empty).clone()).collect();
    let kappa = multilabel_cohen_kappa(&labels, &a, &b).ok();
    if cli.json {
        let per_label: Vec<_> = rows
            .iter()
            .map(|(l, tp, fp, fn_, prf)| json!({"label": l, "tp": tp, "fp": fp, "fn": fn_, "prf": prf}))
            .collect();
        return Ok(to_json(&json!({
            "sentences": gold.len(),
            "per_label": per_label,
            "micro": {"tp": tp_all, "fp": fp_all, "fn": fn_all, "prf": micro},
            "cohen_kappa": kappa,
        })));
    }
    let mut s = String::from("label            tp   fp   fn  precision  recall      f1\n");
    let mut row = |name: &str, tp: usize, fp: usize, fn_: usize, prf: vtteach_core::metrics::Prf| {
        writeln!(
            s,
            "{name:<14}  {tp:>4} {fp:>4} {fn_:>4}  {:>9.4}  {:>6.4}  {:>6.4}",
            prf.precision, prf.recall, prf.f1
        )
        .unwrap();
    };
    for (l, tp, fp, fn_, prf) in &rows {
        row(l, *tp, *fp, *fn_, *prf);
    }
    row("micro", tp_all, fp_all, fn_all, micro);
    match kappa {
        Some(k) => writeln!(s, "cohen kappa (label-averaged) {k:.4}").unwrap(),
        None => writeln!(s, "cohen kappa undefined").unwrap(),
    }
    Ok(s)
}

fn simulate(cli: &Cli, inputs: &InputArgs, keywords: &Path, seeds: u64, rounds: usize, budget: usize) -> Out {
    let config = cli.session_config()?;
    let parallelism = config.synthesis.parallelism;
    let template = TeachingSession::create(load_inputs(inputs)?, config, Some("sim"))?;
    let base = cli.seed.unwrap_or(0);
    let script = SimulationScript::from_gold(&template, KeywordOracle::load(keywords)?, rounds, budget, base);
    let seeds: Vec<u64> = (base..base + seeds).collect();
    let reports = run_seeds(&template, &script, &seeds, &make_client, parallelism)?;
    let summary = summarize(reports);
    Ok(if cli.json {
        to_json(&summary)
    } else {
        render_table(&summary)
    })
}

fn serve(cli: &Cli, root: &Path, addr: std::net::SocketAddr) -> Out {
    std::fs::create_dir_all(root)?;
    let svc = Arc::new(service(cli, root.to_path_buf(), None)?);
    let rt = tokio::runtime::Runtime::new()?;
    eprintln!("serving {} on http://{addr}/api", root.display());
    rt.block_on(vtteach_service::http::serve(addr, svc))?;
    Ok(String::new())
}
