mod support;

use k2t_core::corpus::build_index;
use k2t_core::text::tokenize;
use k2t_core::{Bm25Index, Bm25Params};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::gen::{random_query, random_sentences};
use support::oracles::bm25_rank;

fn ranked(index: &Bm25Index, q: &[String], req: &[Vec<String>]) -> Vec<(u32, f64)> {
    index
        .search(q, req, usize::MAX)
        .into_iter()
        .map(|h| (h.sentence.id, h.score))
        .collect()
}

fn docs(index: &Bm25Index) -> Vec<(u32, Vec<String>)> {
    index
        .sentences()
        .iter()
        .map(|s| (s.id, s.tokens.clone()))
        .collect()
}

#[test]
fn search_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..100 {
        let corpus = random_sentences(&mut rng, 100);
        let params = *[Bm25Params::default(), Bm25Params { k1: 2.0, b: 0.3 }]
            .choose(&mut rng)
            .unwrap();
        let index = build_index([corpus.join(" ").as_str()], params).unwrap();
        assert_eq!(index.num_docs(), corpus.len());
        let toks: Vec<Vec<String>> = docs(&index).into_iter().map(|d| d.1).collect();
        for _ in 0..3 {
            let (q, req) = random_query(&mut rng, &toks);
            let got = ranked(&index, &q, &req);
            let want = bm25_rank(&docs(&index), &q, &req, params.k1, params.b);
            let ids = |v: &[(u32, f64)]| v.iter().map(|x| x.0).collect::<Vec<_>>();
            assert_eq!(ids(&got), ids(&want), "case {case} q {q:?} req {req:?}");
            for (g, w) in got.iter().zip(&want) {
                assert!((g.1 - w.1).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn hand_computed_score() {
    let index = build_index(
        ["the cat sat on the mat. the dog sat. a cat ran"],
        Bm25Params::default(),
    )
    .unwrap();
    let s = index.score(&tokenize("cat sat cat"), 0).unwrap();
    // 2 * ln(1.6) * 2.2 / 2.65
    assert!((s - 0.780_383_384_4).abs() < 1e-6, "{s}");
}

/// With one query term every score is idf times a per-sentence factor, and
/// duplication changes neither avgdl nor the sign of idf.
#[test]
fn duplicating_the_corpus_keeps_single_term_rankings() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..100 {
        let corpus = random_sentences(&mut rng, 40).join(" ");
        let once = build_index([corpus.as_str()], Bm25Params::default()).unwrap();
        let twice = build_index([corpus.as_str(), corpus.as_str()], Bm25Params::default()).unwrap();
        let n = once.num_docs() as u32;
        let toks: Vec<Vec<String>> = docs(&once).into_iter().map(|d| d.1).collect();
        let (q, _) = random_query(&mut rng, &toks);
        let q = vec![q[0].clone()];
        let a: Vec<u32> = ranked(&once, &q, &[]).into_iter().map(|x| x.0).collect();
        let b: Vec<u32> = ranked(&twice, &q, &[])
            .into_iter()
            .map(|x| x.0)
            .filter(|&id| id < n)
            .collect();
        assert_eq!(a, b);
    }
}

/// The idf ratio between terms of different df shifts when N doubles, so
/// multi-term rankings are not duplication invariant.
#[test]
fn duplication_can_reorder_multi_term_rankings() {
    let corpus = "y y. x y w. x. w y.";
    let once = build_index([corpus], Bm25Params::default()).unwrap();
    let twice = build_index([corpus, corpus], Bm25Params::default()).unwrap();
    let q = tokenize("x y");
    let a: Vec<u32> = ranked(&once, &q, &[]).into_iter().map(|x| x.0).collect();
    let b: Vec<u32> = ranked(&twice, &q, &[])
        .into_iter()
        .map(|x| x.0)
        .filter(|&id| id < 4)
        .collect();
    assert_eq!(a, vec![1, 2, 0, 3]);
    assert_eq!(b, vec![2, 1, 0, 3]);
}

#[test]
fn saved_index_answers_identically() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..20 {
        let corpus = random_sentences(&mut rng, 60).join(" ");
        let index = build_index([corpus.as_str()], Bm25Params::default()).unwrap();
        let mut bytes = Vec::new();
        index.save(&mut bytes).unwrap();
        let loaded = Bm25Index::load(bytes.as_slice()).unwrap();
        assert_eq!(loaded, index);
        let toks: Vec<Vec<String>> = docs(&index).into_iter().map(|d| d.1).collect();
        let (q, req) = random_query(&mut rng, &toks);
        assert_eq!(ranked(&loaded, &q, &req), ranked(&index, &q, &req));
        let mut again = Vec::new();
        loaded.save(&mut again).unwrap();
        assert_eq!(again, bytes);
    }
}
