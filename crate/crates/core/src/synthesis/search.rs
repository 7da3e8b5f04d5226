use std::cmp::Ordering;
use std::collections::BTreeSet;

use crate::annotation::{AnnotatedSentence, LabelKey, SynonymLexicon};
use crate::par;
use crate::pattern::{Pattern, PatternAtom, Sequence};

use super::atoms::enumerate_atoms;
use super::bitset::{EndSets, Evaluator};
use super::{Fit, ScoredPattern, SynthesisConfig, SynthesisError, TrainingSnapshot};

/// Sentence-membership bitset over positives followed by negatives.
type Hits = Vec<u64>;

struct Scorer {
    ev: Evaluator,
    positives: usize,
}

impl Scorer {
    fn hits(&self, state: &[u64]) -> Hits {
        let flags = self.ev.matched(state);
        let mut out = vec![0u64; flags.len() / 64 + 1];
        for (i, f) in flags.into_iter().enumerate() {
            if f {
                out[i / 64] |= 1 << (i % 64);
            }
        }
        out
    }

    fn fit(&self, hits: &[u64]) -> Fit {
        let mut tp = 0;
        let mut fp = 0;
        for (w, &word) in hits.iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let i = w * 64 + bits.trailing_zeros() as usize;
                if i < self.positives {
                    tp += 1;
                } else {
                    fp += 1;
                }
                bits &= bits - 1;
            }
        }
        Fit {
            tp,
            fp,
            positives: self.positives,
        }
    }
}

struct Explored {
    seq: Sequence,
    canonical: String,
    fit: Fit,
    hits: Hits,
}

struct Node {
    explored: Explored,
    state: EndSets,
}

fn rank(a_fit: Fit, a_len: usize, a_text: &str, b_fit: Fit, b_len: usize, b_text: &str) -> Ordering {
    b_fit
        .cmp_f1(a_fit)
        .then(a_len.cmp(&b_len))
        .then_with(|| a_text.cmp(b_text))
}

fn rank_explored(a: &Explored, b: &Explored) -> Ordering {
    rank(a.fit, a.seq.len(), &a.canonical, b.fit, b.seq.len(), &b.canonical)
}

fn node(scorer: &Scorer, seq: Sequence, state: EndSets) -> Option<Node> {
    let hits = scorer.hits(&state);
    let fit = scorer.fit(&hits);
    if fit.is_zero() {
        return None;
    }
    Some(Node {
        explored: Explored {
            canonical: seq.to_string(),
            seq,
            fit,
            hits,
        },
        state,
    })
}

struct Search<'a> {
    scorer: Scorer,
    atoms: Vec<PatternAtom>,
    config: &'a SynthesisConfig,
}

impl Search<'_> {
    fn new<'s>(
        label: &LabelKey,
        snapshot: &TrainingSnapshot<'s>,
        lexicon: &SynonymLexicon,
        config: &'s SynthesisConfig,
    ) -> Result<Search<'s>, SynthesisError> {
        config.validate()?;
        let positives = snapshot.positives(label);
        if positives.is_empty() {
            return Err(SynthesisError::NoPositives(label.clone()));
        }
        let negatives = snapshot.negatives(label);
        let atoms = enumerate_atoms(&positives, lexicon)?;
        let all: Vec<&AnnotatedSentence> = positives.iter().chain(&negatives).copied().collect();
        Ok(Search {
            scorer: Scorer {
                ev: Evaluator::new(&all, &atoms, lexicon, config.wildcard_cap),
                positives: positives.len(),
            },
            atoms,
            config,
        })
    }

    /// Bottom-up beam search over sequences. Returns every scored sequence
    /// with a nonzero fit, in rank order.
    fn explore(&self) -> Vec<Explored> {
        let mode = self.config.parallelism;
        let initial = self.scorer.ev.initial();
        let mut explored = Vec::new();
        let mut level: Vec<Node> = par::map(&self.atoms, mode, |atom| {
            node(
                &self.scorer,
                Sequence(vec![atom.clone()]),
                self.scorer.ev.step(&initial, atom),
            )
        })
        .into_iter()
        .flatten()
        .collect();

        for k in 1..=self.config.max_sequence_len {
            level.sort_by(|a, b| rank_explored(&a.explored, &b.explored));
            let survivors: Vec<Node> = if level.len() > self.config.beam_width {
                let rest = level.split_off(self.config.beam_width);
                explored.extend(rest.into_iter().map(|n| n.explored));
                level
            } else {
                level
            };
            if k == self.config.max_sequence_len {
                explored.extend(survivors.into_iter().map(|n| n.explored));
                break;
            }
            let mut jobs: Vec<(usize, PatternAtom)> = Vec::new();
            for (i, parent) in survivors.iter().enumerate() {
                let seq = &parent.explored.seq;
                for atom in &self.atoms {
                    jobs.push((i, atom.clone()));
                }
                let last_is_wild = seq.atoms().last().is_some_and(PatternAtom::is_wildcard);
                if seq.wildcard_count() < self.config.max_wildcards_per_seq && !last_is_wild {
                    jobs.push((i, PatternAtom::Wildcard));
                }
            }
            level = par::map(&jobs, mode, |(i, atom)| {
                let parent = &survivors[*i];
                let mut atoms = parent.explored.seq.0.clone();
                atoms.push(atom.clone());
                node(&self.scorer, Sequence(atoms), self.scorer.ev.step(&parent.state, atom))
            })
            .into_iter()
            .flatten()
            .collect();
            explored.extend(survivors.into_iter().map(|n| n.explored));
        }
        explored.sort_by(rank_explored);
        explored
    }
}

struct Candidate {
    pattern: Pattern,
    canonical: String,
    fit: Fit,
}

fn union(a: &[u64], b: &[u64]) -> Hits {
    a.iter().zip(b).map(|(x, y)| x | y).collect()
}

/// Greedy alternation from `seed`: repeatedly add the branch that gives the
/// best union f1, as long as f1 strictly improves.
fn grow(scorer: &Scorer, pool: &[&Explored], seed: usize, max_branches: usize) -> Option<Candidate> {
    let mut chosen = vec![seed];
    let mut hits = pool[seed].hits.clone();
    let mut fit = pool[seed].fit;
    while chosen.len() < max_branches {
        let mut best: Option<(usize, Fit, Hits)> = None;
        for (j, cand) in pool.iter().enumerate() {
            if chosen.contains(&j) {
                continue;
            }
            let u = union(&hits, &cand.hits);
            let f = scorer.fit(&u);
            if f.tp <= fit.tp || f.cmp_f1(fit) != Ordering::Greater {
                continue;
            }
            if best.as_ref().is_none_or(|(_, bf, _)| f.cmp_f1(*bf) == Ordering::Greater) {
                best = Some((j, f, u));
            }
        }
        match best {
            Some((j, f, u)) => {
                chosen.push(j);
                fit = f;
                hits = u;
            }
            None => break,
        }
    }
    if chosen.len() < 2 {
        return None;
    }
    let pattern = Pattern::new(chosen.iter().map(|&j| pool[j].seq.clone()).collect())
        .expect("branches come from valid sequences")
        .normalized();
    Some(Candidate {
        canonical: pattern.canonical(),
        pattern,
        fit,
    })
}

/// Every sequence the beam search scores with a nonzero fit, best first.
/// Exposed so callers can inspect what the search space reaches.
pub fn explore_sequences(
    label: &LabelKey,
    snapshot: &TrainingSnapshot<'_>,
    lexicon: &SynonymLexicon,
    config: &SynthesisConfig,
) -> Result<Vec<ScoredPattern>, SynthesisError> {
    let search = Search::new(label, snapshot, lexicon, config)?;
    Ok(search
        .explore()
        .into_iter()
        .map(|e| e.fit.scored(Pattern::new(vec![e.seq]).expect("valid sequence")))
        .collect())
}

/// Learns up to `max_patterns` rules for `label`.
///
/// Positives are the sentences carrying `label`; negatives are sentences
/// carrying some other label and not this one. Sequences are found by beam
/// search, then alternations are grown greedily from the best sequences.
/// Results are ordered by f1 (descending), then atom count, then canonical
/// text, and only rules matching at least one positive are returned.
pub fn synthesize_patterns(
    label: &LabelKey,
    snapshot: &TrainingSnapshot<'_>,
    lexicon: &SynonymLexicon,
    config: &SynthesisConfig,
) -> Result<Vec<ScoredPattern>, SynthesisError> {
    let search = Search::new(label, snapshot, lexicon, config)?;
    let explored = search.explore();
    // A trailing wildcard never changes what a sequence matches; such
    // sequences only serve as stepping stones during search.
    let pool: Vec<&Explored> = explored
        .iter()
        .filter(|e| !e.seq.atoms().last().is_some_and(PatternAtom::is_wildcard))
        .collect();

    let seeds: Vec<usize> = (0..pool.len().min(config.max_patterns)).collect();
    let alternations = if config.max_branches > 1 {
        par::map(&seeds, config.parallelism, |&s| {
            grow(&search.scorer, &pool, s, config.max_branches)
        })
    } else {
        Vec::new()
    };

    let mut candidates: Vec<Candidate> = pool
        .iter()
        .map(|e| Candidate {
            pattern: Pattern::new(vec![e.seq.clone()]).expect("valid sequence"),
            canonical: e.canonical.clone(),
            fit: e.fit,
        })
        .chain(alternations.into_iter().flatten())
        .collect();
    candidates.sort_by(|a, b| {
        rank(
            a.fit,
            a.pattern.atom_count(),
            &a.canonical,
            b.fit,
            b.pattern.atom_count(),
            &b.canonical,
        )
    });
    let mut seen = BTreeSet::new();
    Ok(candidates
        .into_iter()
        .filter(|c| seen.insert(c.canonical.clone()))
        .take(config.max_patterns)
        .map(|c| c.fit.scored(c.pattern))
        .collect())
}
