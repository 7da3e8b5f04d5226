//! Incremental pattern evaluation over a fixed sentence set.
//!
//! For a sequence prefix the evaluator keeps, per sentence, the set of token
//! positions where some match of the prefix can end (bit `e` set means some
//! start `s` has the prefix consuming exactly `[s, e)`). Appending an atom
//! maps that set forward, so a beam level only pays for one atom per
//! candidate instead of re-matching whole sequences.

use std::collections::HashMap;

use crate::annotation::{AnnotatedSentence, EntityType, SynonymLexicon};
use crate::pattern::PatternAtom;
#[cfg(test)]
use crate::pattern::{Pattern, Sequence};

#[derive(Debug, Clone, Copy)]
struct Segment {
    offset: usize,
    words: usize,
    /// Token count; valid positions are `0..=n`.
    n: usize,
}

/// End-position sets for every sentence, laid out back to back.
pub(crate) type EndSets = Vec<u64>;

pub(crate) struct Evaluator {
    segments: Vec<Segment>,
    total_words: usize,
    masks: HashMap<PatternAtom, Vec<u64>>,
    runs: Vec<Vec<(usize, usize, EntityType)>>,
    cap: usize,
}

fn set_bit(v: &mut [u64], i: usize) {
    v[i / 64] |= 1 << (i % 64);
}

fn bit(v: &[u64], i: usize) -> bool {
    v[i / 64] >> (i % 64) & 1 == 1
}

fn token_atom_hits(
    atom: &PatternAtom,
    sentence: &AnnotatedSentence,
    lexicon: &SynonymLexicon,
) -> Vec<bool> {
    sentence
        .tokens
        .iter()
        .map(|t| {
            let lemma = t.lemma.to_lowercase();
            match atom {
                PatternAtom::PosTag(p) => t.pos == *p,
                PatternAtom::Stem(w) => lemma == w.to_lowercase(),
                PatternAtom::Soft(w) => lexicon.soft_matches(w, &lemma),
                PatternAtom::Entity(_) | PatternAtom::Wildcard => false,
            }
        })
        .collect()
}

impl Evaluator {
    /// Precomputes token masks for every non-wildcard, non-entity atom in
    /// `atoms`. Wildcards consume at most `cap` tokens.
    pub(crate) fn new(
        sentences: &[&AnnotatedSentence],
        atoms: &[PatternAtom],
        lexicon: &SynonymLexicon,
        cap: usize,
    ) -> Self {
        let mut segments = Vec::with_capacity(sentences.len());
        let mut offset = 0;
        for s in sentences {
            let words = s.len() / 64 + 1;
            segments.push(Segment {
                offset,
                words,
                n: s.len(),
            });
            offset += words;
        }
        let mut ev = Evaluator {
            segments,
            total_words: offset,
            masks: HashMap::new(),
            runs: sentences.iter().map(|s| s.entity_runs()).collect(),
            cap,
        };
        for atom in atoms {
            if matches!(atom, PatternAtom::Wildcard | PatternAtom::Entity(_))
                || ev.masks.contains_key(atom)
            {
                continue;
            }
            let mut mask = vec![0u64; ev.total_words];
            for (seg, s) in ev.segments.iter().zip(sentences) {
                for (i, hit) in token_atom_hits(atom, s, lexicon).into_iter().enumerate() {
                    if hit {
                        set_bit(&mut mask[seg.offset..seg.offset + seg.words], i);
                    }
                }
            }
            ev.masks.insert(atom.clone(), mask);
        }
        ev
    }

    #[cfg(test)]
    pub(crate) fn sentence_count(&self) -> usize {
        self.segments.len()
    }

    /// Every position of every sentence: the state before any atom.
    pub(crate) fn initial(&self) -> EndSets {
        let mut v = vec![0u64; self.total_words];
        for seg in &self.segments {
            let w = &mut v[seg.offset..seg.offset + seg.words];
            for i in 0..=seg.n {
                set_bit(w, i);
            }
        }
        v
    }

    fn shift_one(&self, state: &mut [u64]) {
        for seg in &self.segments {
            let w = &mut state[seg.offset..seg.offset + seg.words];
            for k in (0..w.len()).rev() {
                let carry = if k > 0 { w[k - 1] >> 63 } else { 0 };
                w[k] = (w[k] << 1) | carry;
            }
            // Drop anything past position n.
            let top = seg.n + 1;
            let last = top / 64;
            if last < w.len() {
                w[last] &= (1u64 << (top % 64)) - 1;
                for x in &mut w[last + 1..] {
                    *x = 0;
                }
            }
        }
    }

    /// End positions after consuming `atom` from any end position in `state`.
    ///
    /// Panics if `atom` is a token atom the evaluator was not built with.
    pub(crate) fn step(&self, state: &[u64], atom: &PatternAtom) -> EndSets {
        match atom {
            PatternAtom::Wildcard => {
                let mut acc = state.to_vec();
                let mut cur = state.to_vec();
                let widest = self.segments.iter().map(|s| s.n).max().unwrap_or(0);
                for _ in 0..self.cap.min(widest) {
                    self.shift_one(&mut cur);
                    for (a, c) in acc.iter_mut().zip(&cur) {
                        *a |= c;
                    }
                }
                acc
            }
            PatternAtom::Entity(kind) => {
                let mut out = vec![0u64; self.total_words];
                for (seg, runs) in self.segments.iter().zip(&self.runs) {
                    let src = &state[seg.offset..seg.offset + seg.words];
                    for &(s, e, k) in runs {
                        if k == *kind && bit(src, s) {
                            set_bit(&mut out[seg.offset..seg.offset + seg.words], e);
                        }
                    }
                }
                out
            }
            _ => {
                let mask = self
                    .masks
                    .get(atom)
                    .unwrap_or_else(|| panic!("atom {atom} was not precomputed"));
                let mut out: Vec<u64> = state.iter().zip(mask).map(|(a, b)| a & b).collect();
                self.shift_one(&mut out);
                out
            }
        }
    }

    #[cfg(test)]
    pub(crate) fn eval_sequence(&self, seq: &Sequence) -> EndSets {
        let mut state = self.initial();
        for atom in seq.atoms() {
            state = self.step(&state, atom);
        }
        state
    }

    /// Per-sentence "has any match" flags for a final state.
    pub(crate) fn matched(&self, state: &[u64]) -> Vec<bool> {
        self.segments
            .iter()
            .map(|seg| state[seg.offset..seg.offset + seg.words].iter().any(|&w| w != 0))
            .collect()
    }

    #[cfg(test)]
    pub(crate) fn eval_pattern(&self, pattern: &Pattern) -> Vec<bool> {
        let mut hit = vec![false; self.sentence_count()];
        for seq in pattern.branches() {
            for (h, m) in hit.iter_mut().zip(self.matched(&self.eval_sequence(seq))) {
                *h |= m;
            }
        }
        hit
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{annotate_text, EntityTag, Pos, TaggerResources, Token};
    use crate::pattern::{matches, parse_pattern, MatchConfig};
    use proptest::prelude::*;

    fn lexicon() -> SynonymLexicon {
        let mut lx = SynonymLexicon::new();
        lx.insert("good", ["great", "nice"]);
        lx
    }

    #[test]
    fn long_sentence_crosses_word_boundary() {
        let text = (0..70).map(|i| if i == 66 { "bread" } else { "x" }).collect::<Vec<_>>().join(" ");
        let s = annotate_text("l", &text, &TaggerResources::builtin()).unwrap();
        let p = parse_pattern("[x]+*+[bread]").unwrap();
        let atoms: Vec<PatternAtom> = p.branches()[0].atoms().to_vec();
        let ev = Evaluator::new(&[&s], &atoms, &lexicon(), 3);
        assert_eq!(ev.eval_pattern(&p), vec![true]);
        let ev1 = Evaluator::new(&[&s], &atoms, &lexicon(), 0);
        assert_eq!(ev1.eval_pattern(&p), vec![true]);
        let far = parse_pattern("[bread]+*+[bread]").unwrap();
        let ev2 = Evaluator::new(&[&s], far.branches()[0].atoms(), &lexicon(), 3);
        assert_eq!(ev2.eval_pattern(&far), vec![false]);
    }

    const WORDS: [&str; 6] = ["good", "great", "bread", "was", "the", "nice"];
    const TAGS: [Pos; 4] = [Pos::Noun, Pos::Adj, Pos::Aux, Pos::Other];

    fn arb_sentence() -> impl Strategy<Value = AnnotatedSentence> {
        prop::collection::vec((0..WORDS.len(), 0..TAGS.len(), 0..6usize), 0..9).prop_map(|toks| {
            let mut tokens: Vec<Token> = Vec::new();
            let mut prev_ent: Option<EntityType> = None;
            for (w, t, e) in toks {
                let mut tok = Token::new(WORDS[w], WORDS[w], TAGS[t]);
                // 0..3 no entity, 3 begin DATE, 4 continue or begin PERSON, 5 begin PERSON
                let ent = match e {
                    3 => Some(EntityTag::begin(EntityType::Date)),
                    4 => match prev_ent {
                        Some(k) => Some(EntityTag::inside(k)),
                        None => Some(EntityTag::begin(EntityType::Person)),
                    },
                    5 => Some(EntityTag::begin(EntityType::Person)),
                    _ => None,
                };
                prev_ent = ent.map(|t| t.kind);
                if let Some(tag) = ent {
                    tok = tok.with_entity(tag);
                }
                tokens.push(tok);
            }
            let raw = tokens.iter().map(|t| t.text.clone()).collect::<Vec<_>>().join(" ");
            AnnotatedSentence {
                id: "p".into(),
                raw_text: raw,
                tokens,
            }
        })
    }

    fn arb_atom() -> impl Strategy<Value = PatternAtom> {
        prop_oneof![
            (0..WORDS.len()).prop_map(|i| PatternAtom::Stem(WORDS[i].into())),
            (0..WORDS.len()).prop_map(|i| PatternAtom::Soft(WORDS[i].into())),
            (0..3usize).prop_map(|i| PatternAtom::PosTag(TAGS[i])),
            prop_oneof![Just(EntityType::Date), Just(EntityType::Person)].prop_map(PatternAtom::Entity),
            Just(PatternAtom::Wildcard),
        ]
    }

    fn arb_pattern() -> impl Strategy<Value = Pattern> {
        prop::collection::vec(prop::collection::vec(arb_atom(), 1..5), 1..3).prop_filter_map(
            "wildcard-only branch",
            |bs| Pattern::new(bs.into_iter().map(Sequence).collect()),
        )
    }

    proptest! {
        #[test]
        fn agrees_with_matcher(
            pattern in arb_pattern(),
            sentences in prop::collection::vec(arb_sentence(), 1..5),
            cap in 0..4usize,
        ) {
            let refs: Vec<&AnnotatedSentence> = sentences.iter().collect();
            let atoms: Vec<PatternAtom> =
                pattern.branches().iter().flat_map(|s| s.atoms().iter().cloned()).collect();
            let ev = Evaluator::new(&refs, &atoms, &lexicon(), cap);
            let got = ev.eval_pattern(&pattern);
            let want: Vec<bool> = sentences
                .iter()
                .map(|s| matches(&pattern, s, &lexicon(), &MatchConfig::capped(cap)))
                .collect();
            prop_assert_eq!(got, want);
        }
    }
}
