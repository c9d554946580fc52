//! Seeded random inputs for oracle comparisons.

use k2t_core::{ConceptId, KnowledgeGraph, RelationSet, Triple};
use rand::seq::SliceRandom;
use rand::Rng;

pub const RELATIONS: &[&str] = &["AtLocation", "IsA", "UsedFor", "Causes", "Synonym"];

pub fn concept(s: &str) -> ConceptId {
    ConceptId::normalize(s).unwrap()
}

/// A graph on up to `max_nodes` nodes with up to `max_edges` triples,
/// including the odd self-loop and parallel edge.
pub fn random_graph<R: Rng>(
    rng: &mut R,
    max_nodes: usize,
    max_edges: usize,
) -> (KnowledgeGraph, Vec<ConceptId>) {
    let n = rng.gen_range(2..=max_nodes);
    let nodes: Vec<ConceptId> = (0..n).map(|i| concept(&format!("n{i}"))).collect();
    let edges = rng.gen_range(1..=max_edges);
    let triples: Vec<Triple> = (0..edges)
        .map(|_| {
            let h = nodes.choose(rng).unwrap().clone();
            let t = if rng.gen_bool(0.05) {
                h.clone()
            } else {
                nodes.choose(rng).unwrap().clone()
            };
            Triple::new(h, *RELATIONS.choose(rng).unwrap(), t)
        })
        .collect();
    (
        KnowledgeGraph::from_triples(RelationSet::default_set(), triples).unwrap(),
        nodes,
    )
}

/// 1..=4 endpoints drawn from `nodes`, sometimes with a concept the graph
/// does not contain.
pub fn random_endpoints<R: Rng>(rng: &mut R, nodes: &[ConceptId]) -> Vec<ConceptId> {
    let k = rng.gen_range(1..=4);
    let mut out: Vec<ConceptId> = (0..k).map(|_| nodes.choose(rng).unwrap().clone()).collect();
    if rng.gen_bool(0.1) {
        out.push(concept("absent node"));
    }
    out
}

const WORDS: &[&str] = &[
    "red", "apple", "tree", "the", "a", "of", "river", "bank", "go", "walk", "big", "city",
    "light", "house",
];

fn decorate<R: Rng>(rng: &mut R, word: &str) -> String {
    let mut w = word.to_string();
    if rng.gen_bool(0.15) {
        w = w.to_uppercase();
    }
    match rng.gen_range(0..10) {
        0 => format!("{w},"),
        1 => format!("({w}"),
        2 => format!("{w}."),
        _ => w,
    }
}

/// Random text plus a graph whose lexicon holds random phrases of 1..=5
/// words (some beyond the default n-gram cap).
pub fn random_text_and_lexicon<R: Rng>(rng: &mut R) -> (String, KnowledgeGraph) {
    let len = rng.gen_range(0..=25);
    let sep = if rng.gen_bool(0.2) { "  " } else { " " };
    let words: Vec<&str> = (0..len).map(|_| *WORDS.choose(rng).unwrap()).collect();
    let text = words
        .into_iter()
        .map(|w| decorate(rng, w))
        .collect::<Vec<_>>()
        .join(sep);
    let hub = concept("zz hub");
    let phrases = rng.gen_range(1..=20);
    let triples: Vec<Triple> = (0..phrases)
        .map(|_| {
            let n = rng.gen_range(1..=5);
            let words: Vec<&str> = (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect();
            Triple::new(concept(&words.join(" ")), "RelatedTo", hub.clone())
        })
        .collect();
    (
        text,
        KnowledgeGraph::from_triples(RelationSet::default_set(), triples).unwrap(),
    )
}

const CORPUS_WORDS: &[&str] = &[
    "cat", "dog", "sat", "mat", "ran", "park", "the", "on", "big", "red", "ball", "sun", "hot",
    "day", "silk",
];

/// Up to `max_sentences` short sentences of corpus words.
pub fn random_sentences<R: Rng>(rng: &mut R, max_sentences: usize) -> Vec<String> {
    let n = rng.gen_range(1..=max_sentences);
    (0..n)
        .map(|_| {
            let len = rng.gen_range(1..=12);
            let words: Vec<&str> = (0..len)
                .map(|_| *CORPUS_WORDS.choose(rng).unwrap())
                .collect();
            format!("{}.", words.join(" "))
        })
        .collect()
}

/// A query and up to two required phrases, often lifted from `sentences`
/// so that the filter passes for at least one of them.
pub fn random_query<R: Rng>(
    rng: &mut R,
    sentences: &[Vec<String>],
) -> (Vec<String>, Vec<Vec<String>>) {
    let qlen = rng.gen_range(1..=5);
    let query = (0..qlen)
        .map(|_| CORPUS_WORDS.choose(rng).unwrap().to_string())
        .collect();
    let required = (0..rng.gen_range(0..=2))
        .map(|_| {
            if rng.gen_bool(0.7) {
                let s = sentences.choose(rng).unwrap();
                let start = rng.gen_range(0..s.len());
                let end = rng.gen_range(start + 1..=(start + 3).min(s.len()));
                s[start..end].to_vec()
            } else {
                vec![CORPUS_WORDS.choose(rng).unwrap().to_string()]
            }
        })
        .collect();
    (query, required)
}
