use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotatedSentence, EntityType, SynonymLexicon};

use super::ast::{Pattern, PatternAtom, Sequence};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Maximum tokens one wildcard may consume; `None` means unbounded
    /// within the sentence.
    pub wildcard_cap: Option<usize>,
}

impl MatchConfig {
    pub fn capped(cap: usize) -> Self {
        MatchConfig {
            wildcard_cap: Some(cap),
        }
    }
}

/// A matched token span `[start, end)` with the sub-span each atom of the
/// matching branch consumed. Sub-spans tile the span in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchSpan {
    pub sentence_id: String,
    pub start: usize,
    pub end: usize,
    pub branch: usize,
    pub atoms: Vec<(usize, usize)>,
}

impl MatchSpan {
    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Per-sentence view used by the matcher: token lemmas and entity runs
/// resolved once.
struct View<'a> {
    sentence: &'a AnnotatedSentence,
    lemmas: Vec<String>,
    run_at: BTreeMap<usize, (usize, EntityType)>,
}

impl<'a> View<'a> {
    fn new(sentence: &'a AnnotatedSentence) -> Self {
        View {
            sentence,
            lemmas: sentence.tokens.iter().map(|t| t.lemma.to_lowercase()).collect(),
            run_at: sentence
                .entity_runs()
                .into_iter()
                .map(|(s, e, k)| (s, (e, k)))
                .collect(),
        }
    }

    fn n(&self) -> usize {
        self.lemmas.len()
    }

    /// End positions reachable by consuming `atom` from `pos`.
    fn atom_ends(
        &self,
        atom: &PatternAtom,
        pos: usize,
        lexicon: &SynonymLexicon,
        cap: usize,
    ) -> Vec<usize> {
        let n = self.n();
        match atom {
            PatternAtom::Wildcard => (pos..=n.min(pos.saturating_add(cap))).collect(),
            _ if pos >= n => Vec::new(),
            PatternAtom::PosTag(tag) => {
                if self.sentence.tokens[pos].pos == *tag {
                    vec![pos + 1]
                } else {
                    Vec::new()
                }
            }
            PatternAtom::Stem(w) => {
                if self.lemmas[pos] == w.to_lowercase() {
                    vec![pos + 1]
                } else {
                    Vec::new()
                }
            }
            PatternAtom::Soft(w) => {
                if lexicon.soft_matches(w, &self.lemmas[pos]) {
                    vec![pos + 1]
                } else {
                    Vec::new()
                }
            }
            PatternAtom::Entity(kind) => match self.run_at.get(&pos) {
                Some(&(end, k)) if k == *kind => vec![end],
                _ => Vec::new(),
            },
        }
    }
}

struct Candidate {
    branch: usize,
    atoms: Vec<(usize, usize)>,
}

impl Candidate {
    fn fixed_len(&self, seq: &Sequence) -> usize {
        seq.atoms()
            .iter()
            .zip(&self.atoms)
            .filter(|(a, _)| !a.is_wildcard())
            .map(|(_, (s, e))| e - s)
            .sum()
    }
}

#[allow(clippy::too_many_arguments)]
fn extend(
    view: &View<'_>,
    seq: &Sequence,
    idx: usize,
    pos: usize,
    lexicon: &SynonymLexicon,
    cap: usize,
    trail: &mut Vec<(usize, usize)>,
    out: &mut Vec<Vec<(usize, usize)>>,
) {
    if idx == seq.len() {
        out.push(trail.clone());
        return;
    }
    for end in view.atom_ends(&seq.atoms()[idx], pos, lexicon, cap) {
        trail.push((pos, end));
        extend(view, seq, idx + 1, end, lexicon, cap, trail, out);
        trail.pop();
    }
}

fn any_completion(
    view: &View<'_>,
    seq: &Sequence,
    idx: usize,
    pos: usize,
    lexicon: &SynonymLexicon,
    cap: usize,
) -> bool {
    if idx == seq.len() {
        return true;
    }
    view.atom_ends(&seq.atoms()[idx], pos, lexicon, cap)
        .into_iter()
        .any(|end| any_completion(view, seq, idx + 1, end, lexicon, cap))
}

/// All distinct `(start, end)` spans matched by any branch, leftmost first
/// and, for a shared start, most extended first.
///
/// When several branches or wildcard splits produce the same `(start, end)`,
/// the one whose non-wildcard atoms cover the most tokens wins, then the
/// lower branch index, then the lexicographically smallest split.
pub fn match_sentence(
    pattern: &Pattern,
    sentence: &AnnotatedSentence,
    lexicon: &SynonymLexicon,
    config: &MatchConfig,
) -> Vec<MatchSpan> {
    let view = View::new(sentence);
    let n = view.n();
    let cap = config.wildcard_cap.unwrap_or(n);
    let mut best: BTreeMap<(usize, usize), (usize, Candidate)> = BTreeMap::new();
    for (b, seq) in pattern.branches().iter().enumerate() {
        for start in 0..=n {
            let mut found = Vec::new();
            extend(&view, seq, 0, start, lexicon, cap, &mut Vec::new(), &mut found);
            for atoms in found {
                let end = atoms.last().map_or(start, |a| a.1);
                let cand = Candidate { branch: b, atoms };
                let fixed = cand.fixed_len(seq);
                let key = (start, end);
                let better = match best.get(&key) {
                    None => true,
                    Some((f, c)) => {
                        (std::cmp::Reverse(fixed), cand.branch, &cand.atoms)
                            < (std::cmp::Reverse(*f), c.branch, &c.atoms)
                    }
                };
                if better {
                    best.insert(key, (fixed, cand));
                }
            }
        }
    }
    let mut spans: Vec<MatchSpan> = best
        .into_iter()
        .map(|((start, end), (_, c))| MatchSpan {
            sentence_id: sentence.id.clone(),
            start,
            end,
            branch: c.branch,
            atoms: c.atoms,
        })
        .collect();
    spans.sort_by_key(|s| (s.start, std::cmp::Reverse(s.end)));
    spans
}

/// True iff [`match_sentence`] would return at least one span.
pub fn matches(
    pattern: &Pattern,
    sentence: &AnnotatedSentence,
    lexicon: &SynonymLexicon,
    config: &MatchConfig,
) -> bool {
    let view = View::new(sentence);
    let n = view.n();
    let cap = config.wildcard_cap.unwrap_or(n);
    pattern
        .branches()
        .iter()
        .any(|seq| (0..=n).any(|start| any_completion(&view, seq, 0, start, lexicon, cap)))
}

/// Alias naming the check as used during counterfactual filtering.
pub fn check_pattern(
    pattern: &Pattern,
    sentence: &AnnotatedSentence,
    lexicon: &SynonymLexicon,
) -> bool {
    matches(pattern, sentence, lexicon, &MatchConfig::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{annotate_text, EntityTag, Pos, TaggerResources, Token};
    use crate::pattern::parse_pattern;

    fn annotate(text: &str) -> AnnotatedSentence {
        annotate_text("s", text, &TaggerResources::builtin()).unwrap()
    }

    fn lexicon() -> SynonymLexicon {
        SynonymLexicon::from_jsonl(
            r#"{"head":"price","members":["purchase","pricey","cheap","cost","pricing"]}"#,
        )
        .unwrap()
    }

    fn spans(p: &str, s: &AnnotatedSentence) -> Vec<(usize, usize)> {
        match_sentence(&parse_pattern(p).unwrap(), s, &lexicon(), &MatchConfig::default())
            .into_iter()
            .map(|m| (m.start, m.end))
            .collect()
    }

    #[test]
    fn alternation_hits_single_token() {
        let s = annotate("Breakfast was delicious");
        assert_eq!(spans("(delicious)|(good)", &s), [(2, 3)]);
    }

    #[test]
    fn trailing_wildcard_extends_to_sentence_end_first() {
        let s = annotate("Too many other places to shop with better prices .");
        let got = spans("(price)+*", &s);
        assert_eq!(got, [(8, 10), (8, 9)]);
        let first = &match_sentence(
            &parse_pattern("(price)+*").unwrap(),
            &s,
            &lexicon(),
            &MatchConfig::default(),
        )[0];
        let words: Vec<&str> = s.tokens[first.range()].iter().map(|t| t.text.as_str()).collect();
        assert_eq!(words, ["prices", "."]);
    }

    #[test]
    fn no_verb_means_no_match() {
        let s = annotate("The bread was good");
        assert!(spans("VERB+NOUN", &s).is_empty());
    }

    #[test]
    fn entity_consumes_whole_run() {
        let s = annotate("We visited Houston, TX last week");
        let m = match_sentence(
            &parse_pattern("$LOCATION").unwrap(),
            &s,
            &lexicon(),
            &MatchConfig::default(),
        );
        assert_eq!(m.len(), 1);
        assert_eq!((m[0].start, m[0].end), (2, 5));
        assert_eq!(m[0].atoms, [(2, 5)]);
    }

    #[test]
    fn stem_matches_inflections_through_lemma() {
        let s = annotate("She had a nice time");
        assert_eq!(spans("[have]", &s), [(1, 2)]);
        assert_eq!(spans("[HAVE]", &s), [(1, 2)]);
    }

    #[test]
    fn wildcard_prefix_with_noun() {
        let s = annotate("The bread was good");
        assert!(matches(
            &parse_pattern("*+NOUN").unwrap(),
            &s,
            &lexicon(),
            &MatchConfig::default()
        ));
    }

    #[test]
    fn empty_sentence_never_matches() {
        let s = AnnotatedSentence {
            id: "e".into(),
            raw_text: String::new(),
            tokens: vec![],
        };
        for p in ["NOUN", "*+NOUN", "(x)|$DATE", "[a]+*"] {
            assert!(!matches(&parse_pattern(p).unwrap(), &s, &lexicon(), &MatchConfig::default()));
        }
    }

    #[test]
    fn duplicate_spans_prefer_longest_fixed_atoms() {
        // Both branches produce (0, 2); the one with more non-wildcard
        // coverage wins.
        let s = AnnotatedSentence {
            id: "d".into(),
            raw_text: "week Monday".into(),
            tokens: vec![
                Token::new("week", "week", Pos::Noun),
                Token::new("Monday", "monday", Pos::Propn).with_entity(EntityTag::begin(EntityType::Date)),
            ],
        };
        let m = match_sentence(
            &parse_pattern("NOUN+*|NOUN+$DATE").unwrap(),
            &s,
            &lexicon(),
            &MatchConfig::default(),
        );
        let full = m.iter().find(|m| (m.start, m.end) == (0, 2)).unwrap();
        assert_eq!(full.branch, 1);
        assert_eq!(full.atoms, [(0, 1), (1, 2)]);
    }

    #[test]
    fn wildcard_cap_limits_gap() {
        let s = annotate("she began to weep over the child");
        let p = parse_pattern("(weep)+*+NOUN").unwrap();
        assert!(matches(&p, &s, &lexicon(), &MatchConfig::capped(2)));
        assert!(!matches(&p, &s, &lexicon(), &MatchConfig::capped(1)));
    }

    #[test]
    fn sub_spans_tile_the_span() {
        let s = annotate("Too many other places to shop with better prices .");
        for p in ["ADJ+*+NOUN", "*+(price)+*", "PRON|ADJ+ADJ"] {
            for m in match_sentence(&parse_pattern(p).unwrap(), &s, &lexicon(), &MatchConfig::default()) {
                assert_eq!(m.atoms.first().unwrap().0, m.start);
                assert_eq!(m.atoms.last().unwrap().1, m.end);
                for w in m.atoms.windows(2) {
                    assert_eq!(w[0].1, w[1].0);
                }
            }
        }
    }
}
