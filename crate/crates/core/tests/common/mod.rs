#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use vtteach_core::annotation::{
    load_corpus, AnnotationStore, Corpus, LabelKey, LabelSet, Source, SynonymLexicon,
    TaggerResources,
};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn corpus(name: &str) -> Corpus {
    load_corpus(&fixture(name), &TaggerResources::builtin()).unwrap()
}

pub fn lexicon() -> SynonymLexicon {
    SynonymLexicon::load(&fixture("lexicon.jsonl")).unwrap()
}

pub fn labels() -> LabelSet {
    LabelSet::load(&fixture("labels.jsonl")).unwrap()
}

/// Store with every gold-labeled sentence of `corpus` annotated.
pub fn gold_store(corpus: &Corpus, labels: &LabelSet) -> AnnotationStore {
    let mut store = AnnotationStore::new(corpus.ids().map(String::from), labels.keys());
    for (id, gold) in corpus.gold_labels() {
        store.set_labels(id, gold.clone(), Source::Human).unwrap();
    }
    store
}

pub fn keys(xs: &[&str]) -> BTreeSet<LabelKey> {
    xs.iter().map(|x| LabelKey::from(*x)).collect()
}
