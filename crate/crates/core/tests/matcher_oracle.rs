mod support;

use std::collections::HashSet;

use k2t_core::{match_concepts, MatcherConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::gen::random_text_and_lexicon;
use support::oracles::{brute_matches, MentionKey};

fn check(seed: u64, cases: usize, vary_config: bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let (text, graph) = random_text_and_lexicon(&mut rng);
        let mut cfg = MatcherConfig::default();
        if vary_config {
            cfg.max_ngram = rng.gen_range(1..=5);
            cfg.suppress_stopword_singletons = rng.gen_bool(0.5);
        }
        let lexicon: HashSet<String> = graph.lexicon().iter().map(|c| c.to_string()).collect();
        let stop: HashSet<String> = cfg.stopwords.iter().cloned().collect();
        let got: Vec<MentionKey> = match_concepts(&text, &graph, &cfg)
            .into_iter()
            .map(|m| (m.concept.to_string(), m.start, m.end))
            .collect();
        let want = brute_matches(
            &text,
            &lexicon,
            cfg.max_ngram,
            &stop,
            cfg.suppress_stopword_singletons,
        );
        assert_eq!(got, want, "case {case}: {text:?}");
    }
}

#[test]
fn default_config_matches_brute_force() {
    check(3, 200, false);
}

#[test]
fn varied_config_matches_brute_force() {
    check(5, 200, true);
}
