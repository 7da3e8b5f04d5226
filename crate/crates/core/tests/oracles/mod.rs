//! Brute-force reference implementations and random input generators,
//! shared by the core tests and the acceptance run.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use vtteach_core::annotation::{AnnotatedSentence, EntityTag, EntityType, Pos, SpanRole, SynonymLexicon, Token};
use vtteach_core::pattern::{Pattern, PatternAtom, Sequence};

pub const LEMMAS: [&str; 9] = ["good", "great", "nice", "food", "bread", "be", "the", "cheap", "paris"];

/// Soft-match table: head -> members (the head matches itself too).
pub const SYNONYMS: [(&str, &[&str]); 3] = [
    ("good", &["great", "nice"]),
    ("food", &["bread"]),
    ("cheap", &["good"]),
];

pub fn lexicon() -> SynonymLexicon {
    let mut lex = SynonymLexicon::new();
    for (head, members) in SYNONYMS {
        lex.insert(head, members.iter().copied());
    }
    lex
}

fn soft_ok(word: &str, lemma: &str) -> bool {
    let word = word.to_lowercase();
    let lemma = lemma.to_lowercase();
    match SYNONYMS.iter().find(|(h, _)| *h == word) {
        Some((h, members)) => *h == lemma || members.contains(&lemma.as_str()),
        None => word == lemma,
    }
}

fn random_case(rng: &mut impl Rng, w: &str) -> String {
    match rng.gen_range(0..4) {
        0 => w.to_uppercase(),
        1 => {
            let mut c = w.chars();
            c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
        }
        _ => w.to_string(),
    }
}

const ALL_POS: [Pos; 9] = [
    Pos::Verb,
    Pos::Propn,
    Pos::Noun,
    Pos::Adj,
    Pos::Adv,
    Pos::Aux,
    Pos::Pron,
    Pos::Num,
    Pos::Other,
];

/// A sentence of `1..=max_len` tokens over a tiny vocabulary, with a few
/// entity runs.
pub fn random_sentence(rng: &mut impl Rng, max_len: usize) -> AnnotatedSentence {
    let n = rng.gen_range(1..=max_len);
    let mut tokens: Vec<Token> = (0..n)
        .map(|_| {
            let lemma = *LEMMAS.choose(rng).unwrap();
            let pos = *ALL_POS[..5].choose(rng).unwrap();
            let pos = if rng.gen_bool(0.2) { *ALL_POS.choose(rng).unwrap() } else { pos };
            Token::new(random_case(rng, lemma), lemma, pos)
        })
        .collect();
    let mut i = 0;
    while i < n {
        if rng.gen_bool(0.25) {
            let kind = *EntityType::ALL[..2].choose(rng).unwrap();
            let len = rng.gen_range(1..=3).min(n - i);
            tokens[i].entity = Some(EntityTag::begin(kind));
            for t in &mut tokens[i + 1..i + len] {
                t.entity = Some(EntityTag::inside(kind));
            }
            i += len;
        } else {
            i += 1;
        }
    }
    let raw_text = tokens.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ");
    AnnotatedSentence {
        id: "r".into(),
        raw_text,
        tokens,
    }
}

fn random_atom(rng: &mut impl Rng, allow_wildcard: bool) -> PatternAtom {
    let top = if allow_wildcard { 5 } else { 4 };
    match rng.gen_range(0..top) {
        0 => PatternAtom::PosTag(*Pos::PATTERN_TAGS[..5].choose(rng).unwrap()),
        1 => {
            let w = *LEMMAS.choose(rng).unwrap();
            PatternAtom::Stem(random_case(rng, w))
        }
        2 => {
            let w = *LEMMAS.choose(rng).unwrap();
            PatternAtom::Soft(random_case(rng, w))
        }
        3 => PatternAtom::Entity(*EntityType::ALL[..2].choose(rng).unwrap()),
        _ => PatternAtom::Wildcard,
    }
}

/// A pattern with `1..=max_atoms` atoms in total, split over one or more
/// branches.
pub fn random_pattern(rng: &mut impl Rng, max_atoms: usize) -> Pattern {
    let total = rng.gen_range(1..=max_atoms);
    let n_branches = rng.gen_range(1..=total);
    let mut sizes = vec![1; n_branches];
    for _ in n_branches..total {
        let k = rng.gen_range(0..n_branches);
        sizes[k] += 1;
    }
    let branches = sizes
        .into_iter()
        .map(|k| {
            let mut atoms: Vec<PatternAtom> = (0..k).map(|_| random_atom(rng, true)).collect();
            if atoms.iter().all(PatternAtom::is_wildcard) {
                let at = rng.gen_range(0..k);
                atoms[at] = random_atom(rng, false);
            }
            Sequence(atoms)
        })
        .collect();
    Pattern::new(branches).expect("generated pattern is valid")
}

/// Soft-match test over a raw head -> members table.
pub type SoftFn<'a> = &'a dyn Fn(&str, &str) -> bool;

/// Can `atom` consume exactly `tokens[i..k]`?
pub fn piece_ok(atom: &PatternAtom, s: &AnnotatedSentence, i: usize, k: usize, cap: Option<usize>) -> bool {
    piece_ok_with(atom, s, i, k, cap, &soft_ok)
}

pub fn piece_ok_with(
    atom: &PatternAtom,
    s: &AnnotatedSentence,
    i: usize,
    k: usize,
    cap: Option<usize>,
    soft: SoftFn<'_>,
) -> bool {
    let len = k - i;
    let t = &s.tokens;
    match atom {
        PatternAtom::Wildcard => cap.is_none_or(|c| len <= c),
        PatternAtom::PosTag(p) => len == 1 && t[i].pos == *p,
        PatternAtom::Stem(w) => len == 1 && t[i].lemma.to_lowercase() == w.to_lowercase(),
        PatternAtom::Soft(w) => len == 1 && soft(w, &t[i].lemma),
        PatternAtom::Entity(kind) => {
            let inside = Some(EntityTag {
                kind: *kind,
                role: SpanRole::Inside,
            });
            len >= 1
                && t[i].entity == Some(EntityTag::begin(*kind))
                && t[i + 1..k].iter().all(|x| x.entity == inside)
                && (k == t.len() || t[k].entity != inside)
        }
    }
}

fn fits(atoms: &[PatternAtom], s: &AnnotatedSentence, i: usize, j: usize, cap: Option<usize>, soft: SoftFn<'_>) -> bool {
    match atoms.split_first() {
        None => i == j,
        Some((a, rest)) => (i..=j).any(|k| piece_ok_with(a, s, i, k, cap, soft) && fits(rest, s, k, j, cap, soft)),
    }
}

/// Every `(start, end)` some branch matches exactly, found by trying every
/// split of every sub-span.
pub fn oracle_spans(p: &Pattern, s: &AnnotatedSentence, cap: Option<usize>) -> BTreeSet<(usize, usize)> {
    oracle_spans_with(p, s, cap, &soft_ok)
}

pub fn oracle_spans_with(
    p: &Pattern,
    s: &AnnotatedSentence,
    cap: Option<usize>,
    soft: SoftFn<'_>,
) -> BTreeSet<(usize, usize)> {
    let n = s.tokens.len();
    let mut out = BTreeSet::new();
    for seq in p.branches() {
        for i in 0..=n {
            for j in i..=n {
                if fits(seq.atoms(), s, i, j, cap, soft) {
                    out.insert((i, j));
                }
            }
        }
    }
    out
}

/// Insert/delete-only edit distance.
pub fn indel_distance<S: PartialEq>(a: &[S], b: &[S]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            d[i][j] = if a[i - 1] == b[j - 1] {
                d[i - 1][j - 1]
            } else {
                1 + d[i - 1][j].min(d[i][j - 1])
            };
        }
    }
    d[a.len()][b.len()]
}

pub fn random_tokens(rng: &mut impl Rng, max_len: usize) -> Vec<String> {
    let n = rng.gen_range(0..=max_len);
    (0..n).map(|_| ["a", "b", "c", "d"].choose(rng).unwrap().to_string()).collect()
}

/// Exact (rational) precision, recall and F1 as floats.
pub fn prf(tp: u64, fp: u64, fn_: u64) -> (f64, f64, f64) {
    let div = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    (div(tp, tp + fp), div(tp, tp + fn_), div(2 * tp, 2 * tp + fp + fn_))
}
