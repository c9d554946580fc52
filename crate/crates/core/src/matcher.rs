//! Exact n-gram grounding of free text onto graph concepts.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::ckg::{ConceptId, KnowledgeGraph};
use crate::text::tokenize;

static DEFAULT_MATCHER: &str = include_str!("../data/matcher.json");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatcherConfig {
    pub max_ngram: usize,
    pub stopwords: Vec<String>,
    pub suppress_stopword_singletons: bool,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_MATCHER).expect("shipped matcher config is valid")
    }
}

impl MatcherConfig {
    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }
}

/// A concept found in the text, with its token span `[start, end)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConceptMention {
    pub concept: ConceptId,
    pub start: usize,
    pub end: usize,
}

impl ConceptMention {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    fn strictly_inside(&self, other: &ConceptMention) -> bool {
        other.start <= self.start && self.end <= other.end && other.len() > self.len()
    }
}

/// Concept matcher bound to a graph lexicon and a config.
pub struct ConceptMatcher<'g> {
    graph: &'g KnowledgeGraph,
    max_ngram: usize,
    stopwords: HashSet<String>,
    suppress_singletons: bool,
}

impl<'g> ConceptMatcher<'g> {
    pub fn new(graph: &'g KnowledgeGraph, config: &MatcherConfig) -> Self {
        Self {
            graph,
            max_ngram: config.max_ngram.max(1),
            stopwords: config.stopwords.iter().map(|s| s.to_lowercase()).collect(),
            suppress_singletons: config.suppress_stopword_singletons,
        }
    }

    /// All maximal exact matches, sorted by `(start, -length)`.
    ///
    /// Performs at most `tokens × max_ngram` lexicon probes. A match is
    /// dropped when a longer match covers its span; overlapping matches of
    /// equal length are both kept.
    pub fn find(&self, text: &str) -> Vec<ConceptMention> {
        let tokens = tokenize(text);
        let mut found = Vec::new();
        for start in 0..tokens.len() {
            let mut key = String::new();
            for end in start + 1..=(start + self.max_ngram).min(tokens.len()) {
                if end > start + 1 {
                    key.push(' ');
                }
                key.push_str(&tokens[end - 1]);
                if end == start + 1
                    && self.suppress_singletons
                    && self.stopwords.contains(key.as_str())
                {
                    continue;
                }
                if let Some(concept) = self.graph.lookup(&key) {
                    found.push(ConceptMention {
                        concept: concept.clone(),
                        start,
                        end,
                    });
                }
            }
        }

        // Containment is transitive, so filtering against all matches is the
        // same as filtering against the kept ones. Only spans starting at or
        // before a match can contain it, and `found` is ordered by start,
        // which bounds the scan.
        let mut keep = vec![true; found.len()];
        for (i, m) in found.iter().enumerate() {
            keep[i] = !found
                .iter()
                .take_while(|o| o.start <= m.start)
                .any(|o| m.strictly_inside(o));
        }
        let mut out: Vec<ConceptMention> = found
            .into_iter()
            .zip(keep)
            .filter_map(|(m, k)| k.then_some(m))
            .collect();
        out.sort_by(|a, b| a.start.cmp(&b.start).then(b.len().cmp(&a.len())));
        out
    }

    /// Distinct concepts mentioned in `text`, in mention order.
    pub fn concepts(&self, text: &str) -> Vec<ConceptId> {
        let mut seen = HashSet::new();
        self.find(text)
            .into_iter()
            .filter(|m| seen.insert(m.concept.clone()))
            .map(|m| m.concept)
            .collect()
    }
}

/// Convenience wrapper over [`ConceptMatcher::find`].
pub fn match_concepts(
    text: &str,
    graph: &KnowledgeGraph,
    config: &MatcherConfig,
) -> Vec<ConceptMention> {
    ConceptMatcher::new(graph, config).find(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ckg::{RelationSet, Triple};

    fn graph(concepts: &[&str]) -> KnowledgeGraph {
        let hub = ConceptId::normalize("zz hub").unwrap();
        let triples = concepts
            .iter()
            .map(|c| Triple::new(ConceptId::normalize(c).unwrap(), "RelatedTo", hub.clone()));
        KnowledgeGraph::from_triples(RelationSet::default_set(), triples).unwrap()
    }

    fn surfaces(ms: &[ConceptMention]) -> Vec<&str> {
        ms.iter().map(|m| m.concept.as_str()).collect()
    }

    #[test]
    fn empty_text() {
        let g = graph(&["hike"]);
        assert!(match_concepts("", &g, &MatcherConfig::default()).is_empty());
    }

    #[test]
    fn longest_match_swallows_contained() {
        let g = graph(&["hike", "long hike"]);
        let ms = match_concepts("a really long hike", &g, &MatcherConfig::default());
        assert_eq!(
            ms,
            vec![ConceptMention {
                concept: ConceptId::normalize("long hike").unwrap(),
                start: 2,
                end: 4
            }]
        );
    }

    #[test]
    fn question_with_stopword_concepts() {
        let g = graph(&["people", "talking", "confession"]);
        let ms = match_concepts(
            "What could people do that involves talking?",
            &g,
            &MatcherConfig::default(),
        );
        assert_eq!(surfaces(&ms), vec!["people", "talking"]);
        assert_eq!((ms[1].start, ms[1].end), (6, 7));
    }

    #[test]
    fn stopword_singletons_toggle() {
        let g = graph(&["do", "people"]);
        let mut cfg = MatcherConfig::default();
        assert_eq!(
            surfaces(&match_concepts("people do", &g, &cfg)),
            vec!["people"]
        );
        cfg.suppress_stopword_singletons = false;
        assert_eq!(
            surfaces(&match_concepts("people do", &g, &cfg)),
            vec!["people", "do"]
        );
    }

    #[test]
    fn overlapping_equal_length_kept() {
        let g = graph(&["new york", "york city"]);
        let ms = match_concepts("new york city", &g, &MatcherConfig::default());
        assert_eq!(surfaces(&ms), vec!["new york", "york city"]);
    }

    #[test]
    fn ngram_limit_respected() {
        let g = graph(&["a b c d e"]);
        let mut cfg = MatcherConfig {
            suppress_stopword_singletons: false,
            ..Default::default()
        };
        assert!(match_concepts("a b c d e", &g, &cfg).is_empty());
        cfg.max_ngram = 5;
        assert_eq!(match_concepts("a b c d e", &g, &cfg).len(), 1);
    }

    #[test]
    fn case_and_punctuation_insensitive() {
        let g = graph(&["see beautiful views"]);
        let ms = match_concepts("You SEE beautiful views!", &g, &MatcherConfig::default());
        assert_eq!(surfaces(&ms), vec!["see beautiful views"]);
    }
}
