use std::collections::BTreeSet;

use crate::annotation::{AnnotatedSentence, LabelKey, Pos, SynonymLexicon};
use crate::pattern::PatternAtom;

use super::SynthesisError;

/// Candidate atoms drawn from the positives alone: `[lemma]` and `(lemma)`
/// for every content token, every POS tag present and every entity type
/// present. Sorted by canonical text.
pub fn enumerate_atoms(
    positives: &[&AnnotatedSentence],
    _lexicon: &SynonymLexicon,
) -> Result<Vec<PatternAtom>, SynthesisError> {
    if positives.is_empty() {
        return Err(SynthesisError::NoPositives(LabelKey::new("")));
    }
    let mut atoms = BTreeSet::new();
    for s in positives {
        for t in &s.tokens {
            if t.pos == Pos::Other {
                continue;
            }
            atoms.insert(PatternAtom::PosTag(t.pos));
            let lemma = t.lemma.to_lowercase();
            if crate::pattern::is_pattern_word(&lemma) {
                atoms.insert(PatternAtom::Stem(lemma.clone()));
                atoms.insert(PatternAtom::Soft(lemma));
            }
        }
        for (_, _, kind) in s.entity_runs() {
            atoms.insert(PatternAtom::Entity(kind));
        }
    }
    let mut out: Vec<PatternAtom> = atoms.into_iter().collect();
    out.sort_by_cached_key(|a| a.to_string());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{annotate_text, EntityType, TaggerResources};

    fn ann(text: &str) -> AnnotatedSentence {
        annotate_text("a", text, &TaggerResources::builtin()).unwrap()
    }

    #[test]
    fn breakfast_atoms() {
        let s = ann("Breakfast was delicious");
        let atoms = enumerate_atoms(&[&s], &SynonymLexicon::new()).unwrap();
        assert!(atoms.contains(&PatternAtom::Soft("delicious".into())));
        assert!(atoms.contains(&PatternAtom::Stem("breakfast".into())));
        assert!(atoms.contains(&PatternAtom::PosTag(Pos::Noun)));
        assert!(!atoms.iter().any(|a| matches!(a, PatternAtom::Entity(_))));
        let names: Vec<String> = atoms.iter().map(ToString::to_string).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
    }

    #[test]
    fn person_entity_is_enumerated() {
        let s = ann("Alice was very friendly");
        let atoms = enumerate_atoms(&[&s], &SynonymLexicon::new()).unwrap();
        assert!(atoms.contains(&PatternAtom::Entity(EntityType::Person)));
    }

    #[test]
    fn punctuation_contributes_nothing() {
        let s = ann("prices .");
        let atoms = enumerate_atoms(&[&s], &SynonymLexicon::new()).unwrap();
        assert_eq!(atoms.len(), 3);
    }

    #[test]
    fn empty_positives_is_error() {
        assert!(enumerate_atoms(&[], &SynonymLexicon::new()).is_err());
    }
}
