//! Scripted annotator loop comparing training with and without accepted
//! counterfactuals.
//!
//! Each condition starts from a cold copy of the template reseeded with the
//! script's seed. A round labels `budget` unlabeled training sentences, most
//! uncertain first (smallest score margin to a threshold, ties by id), with
//! the oracle's labels, then retrains. Under `with_cf` it also retrains, asks
//! for counterfactuals on the round's sentences, resolves every one of them
//! with the keyword oracle, and retrains again.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use vtteach_core::annotation::{LabelKey, Source};
use vtteach_core::counterfactual::{CfStatus, CompletionClient, CounterfactualRecord};
use vtteach_core::par::{self, Parallelism};
use vtteach_core::synthesis::MetricsReport;

use crate::session::{Decision, Mutation, TeachingSession};
use crate::ServiceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    WithoutCf,
    WithCf,
}

/// Labels a counterfactual by the keyword lemmas it contains.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KeywordOracle(pub BTreeMap<LabelKey, BTreeSet<String>>);

impl KeywordOracle {
    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ServiceError::BadRequest(format!("{}: {e}", path.display())))
    }

    pub fn labels_of(&self, record: &CounterfactualRecord) -> BTreeSet<LabelKey> {
        let lemmas: BTreeSet<String> = record.sentence.tokens.iter().map(|t| t.lemma.to_lowercase()).collect();
        self.0
            .iter()
            .filter(|(_, kws)| kws.iter().any(|k| lemmas.contains(k)))
            .map(|(l, _)| l.clone())
            .collect()
    }

    pub fn decide(&self, record: &CounterfactualRecord) -> Decision {
        let labels = self.labels_of(record);
        if labels.is_empty() {
            Decision::Reject
        } else if labels.len() == 1 && labels.contains(&record.target_label) {
            Decision::Accept
        } else {
            Decision::Relabel { labels }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationScript {
    /// Gold labels for every training sentence.
    pub oracle: BTreeMap<String, BTreeSet<LabelKey>>,
    pub keywords: KeywordOracle,
    pub rounds: usize,
    pub budget: usize,
    pub conditions: Vec<Condition>,
    pub seed: u64,
}

impl SimulationScript {
    /// Script whose oracle is the corpus's own gold labels.
    pub fn from_gold(template: &TeachingSession, keywords: KeywordOracle, rounds: usize, budget: usize, seed: u64) -> Self {
        SimulationScript {
            oracle: template.corpus.gold_labels().clone(),
            keywords,
            rounds,
            budget,
            conditions: vec![Condition::WithoutCf, Condition::WithCf],
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub labeled: usize,
    pub counterfactuals_accepted: usize,
    pub counterfactuals_rejected: usize,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: Condition,
    /// Round 0 is the cold start.
    pub rounds: Vec<RoundReport>,
}

impl ConditionReport {
    pub fn final_f1(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.metrics.micro.prf.f1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub conditions: Vec<ConditionReport>,
}

impl SimulationReport {
    pub fn final_f1(&self, c: Condition) -> Option<f64> {
        self.conditions.iter().find(|r| r.condition == c).map(ConditionReport::final_f1)
    }
}

/// Builds the completion client a simulated session uses.
pub type ClientFactory = dyn Fn(&TeachingSession) -> Result<Box<dyn CompletionClient>, ServiceError> + Send + Sync;

fn check_oracle(s: &TeachingSession, script: &SimulationScript) -> Result<(), ServiceError> {
    if let Some(id) = s.train_pool.iter().find(|id| !script.oracle.contains_key(*id)) {
        return Err(ServiceError::BadRequest(format!("oracle has no labels for `{id}`")));
    }
    if s.test_pool.iter().all(|id| s.corpus.gold(id).is_none()) {
        return Err(ServiceError::BadRequest("held-out pool has no gold labels".into()));
    }
    Ok(())
}

fn pick(s: &TeachingSession, budget: usize) -> Vec<String> {
    let mut pool: Vec<(f64, &String)> = s
        .train_pool
        .iter()
        .filter(|id| s.store.get(id).is_none())
        .map(|id| (s.margin(s.corpus.get(id).expect("pool ids are in the corpus")), id))
        .collect();
    pool.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    pool.into_iter().take(budget).map(|(_, id)| id.clone()).collect()
}

fn refit(s: &mut TeachingSession, include_cf: bool) -> Result<MetricsReport, ServiceError> {
    let (models, _) = s.fit(include_cf)?;
    s.models = models;
    s.score(&s.models).ok_or_else(|| ServiceError::Internal("held-out pool vanished".into()))
}

fn run_condition(
    template: &TeachingSession,
    script: &SimulationScript,
    condition: Condition,
    make_client: &ClientFactory,
) -> Result<ConditionReport, ServiceError> {
    let mut s = TeachingSession::create(template.inputs(), template.config.clone().with_seed(script.seed), Some("sim"))?;
    check_oracle(&s, script)?;
    let client = make_client(&s)?;
    let with_cf = condition == Condition::WithCf;
    let mut rounds = vec![RoundReport {
        round: 0,
        labeled: 0,
        counterfactuals_accepted: 0,
        counterfactuals_rejected: 0,
        metrics: s.score(&[]).expect("checked above"),
    }];
    for round in 1..=script.rounds {
        let picks = pick(&s, script.budget);
        for id in &picks {
            s.label_quietly(id, script.oracle[id].clone())?;
        }
        let mut metrics = refit(&mut s, with_cf)?;
        if with_cf {
            for id in &picks {
                if s.store.get(id).is_some_and(|a| a.labels.is_empty()) {
                    continue;
                }
                let g = s.generate(id, client.as_ref())?;
                if !g.cached {
                    s.apply(&Mutation::QueueCounterfactuals {
                        sentence_id: id.clone(),
                        records: g.records,
                    })?;
                }
            }
            let open: Vec<(String, Decision)> = s
                .queue
                .iter()
                .filter(|r| r.status == CfStatus::Proposed)
                .map(|r| (r.id.clone(), script.keywords.decide(r)))
                .collect();
            for (cf_id, decision) in open {
                s.apply(&Mutation::ResolveCounterfactual { cf_id, decision })?;
            }
            metrics = refit(&mut s, true)?;
        }
        let cf = |st: CfStatus| s.queue.iter().filter(|r| r.status == st).count();
        rounds.push(RoundReport {
            round,
            labeled: s.store.iter().filter(|(_, a)| a.source == Source::Oracle).count(),
            counterfactuals_accepted: cf(CfStatus::Accepted) + cf(CfStatus::Relabeled),
            counterfactuals_rejected: cf(CfStatus::Rejected),
            metrics,
        });
    }
    Ok(ConditionReport { condition, rounds })
}

pub fn run_simulation(
    template: &TeachingSession,
    script: &SimulationScript,
    make_client: &ClientFactory,
) -> Result<SimulationReport, ServiceError> {
    let mut conditions = script.conditions.clone();
    conditions.sort();
    conditions.dedup();
    let conditions = conditions
        .into_iter()
        .map(|c| run_condition(template, script, c, make_client))
        .collect::<Result<_, _>>()?;
    Ok(SimulationReport {
        seed: script.seed,
        conditions,
    })
}

/// One report per seed, in seed order. Seeds run in parallel.
pub fn run_seeds(
    template: &TeachingSession,
    script: &SimulationScript,
    seeds: &[u64],
    make_client: &ClientFactory,
    mode: Parallelism,
) -> Result<Vec<SimulationReport>, ServiceError> {
    par::map(seeds, mode, |&seed| {
        let mut sc = script.clone();
        sc.seed = seed;
        run_simulation(template, &sc, make_client)
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub seed: u64,
    pub without_cf: f64,
    pub with_cf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub rows: Vec<SeedRow>,
    /// Seeds where the counterfactual condition ends at least as high.
    pub with_cf_not_worse: usize,
    pub reports: Vec<SimulationReport>,
}

pub fn summarize(reports: Vec<SimulationReport>) -> SimulationSummary {
    let rows: Vec<SeedRow> = reports
        .iter()
        .map(|r| SeedRow {
            seed: r.seed,
            without_cf: r.final_f1(Condition::WithoutCf).unwrap_or(0.0),
            with_cf: r.final_f1(Condition::WithCf).unwrap_or(0.0),
        })
        .collect();
    SimulationSummary {
        with_cf_not_worse: rows.iter().filter(|r| r.with_cf >= r.without_cf).count(),
        rows,
        reports,
    }
}

/// Per-seed final F1 table, then per-round means.
pub fn render_table(summary: &SimulationSummary) -> String {
    let mut out = String::from("seed  without_cf  with_cf\n");
    for r in &summary.rows {
        out.push_str(&format!("{:>4}  {:>10.4}  {:>7.4}\n", r.seed, r.without_cf, r.with_cf));
    }
    out.push_str(&format!(
        "with_cf >= without_cf on {}/{} seeds\n",
        summary.with_cf_not_worse,
        summary.rows.len()
    ));
    let n_rounds = summary
        .reports
        .iter()
        .flat_map(|r| r.conditions.iter().map(|c| c.rounds.len()))
        .max()
        .unwrap_or(0);
    if n_rounds > 0 && !summary.reports.is_empty() {
        out.push_str("\nround  mean_without_cf  mean_with_cf\n");
        for round in 0..n_rounds {
            let mean = |c: Condition| {
                let xs: Vec<f64> = summary
                    .reports
                    .iter()
                    .filter_map(|r| r.conditions.iter().find(|x| x.condition == c))
                    .filter_map(|x| x.rounds.get(round))
                    .map(|x| x.metrics.micro.prf.f1)
                    .collect();
                if xs.is_empty() {
                    0.0
                } else {
                    xs.iter().sum::<f64>() / xs.len() as f64
                }
            };
            out.push_str(&format!(
                "{:>5}  {:>15.4}  {:>12.4}\n",
                round,
                mean(Condition::WithoutCf),
                mean(Condition::WithCf)
            ));
        }
    }
    out
}
