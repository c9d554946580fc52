//! Bounded simple-path enumeration between question and candidate concepts.
//!
//! Edges are traversed in either direction. Each step records the stored
//! (canonical) triple and whether it was walked head-to-tail or backwards,
//! so rendering never depends on traversal direction.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ckg::{ConceptId, KnowledgeGraph, Triple};

pub const DEFAULT_MAX_HOPS: usize = 2;
pub const DEFAULT_MAX_PATHS: usize = 100;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PathError {
    #[error("hop limit must be at least 1")]
    ZeroHops,
    #[error("{0} concept set is empty")]
    EmptyConcepts(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Traversal {
    /// Entered at the head, left at the tail.
    Canonical,
    /// Entered at the tail, left at the head.
    Reversed,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PathStep {
    pub triple: Triple,
    pub traversal: Traversal,
}

impl PathStep {
    pub fn entry(&self) -> &ConceptId {
        match self.traversal {
            Traversal::Canonical => &self.triple.head,
            Traversal::Reversed => &self.triple.tail,
        }
    }

    pub fn exit(&self) -> &ConceptId {
        match self.traversal {
            Traversal::Canonical => &self.triple.tail,
            Traversal::Reversed => &self.triple.head,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KnowledgePath {
    pub source: ConceptId,
    pub target: ConceptId,
    pub steps: Vec<PathStep>,
}

impl KnowledgePath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Visited nodes, source first.
    pub fn nodes(&self) -> Vec<&ConceptId> {
        let mut nodes = vec![&self.source];
        nodes.extend(self.steps.iter().map(PathStep::exit));
        nodes
    }

    /// Compact signature such as `walk<-MotivatedByGoal<-hike->HasSubevent->see beautiful views`.
    pub fn signature(&self) -> String {
        self.to_string()
    }

    /// Structural validity: nonempty, connected, simple, endpoints match.
    pub fn is_well_formed(&self) -> bool {
        let Some(first) = self.steps.first() else {
            return false;
        };
        if first.entry() != &self.source || self.steps.last().unwrap().exit() != &self.target {
            return false;
        }
        if self.steps.windows(2).any(|w| w[0].exit() != w[1].entry()) {
            return false;
        }
        let nodes = self.nodes();
        let distinct: BTreeSet<_> = nodes.iter().collect();
        distinct.len() == nodes.len()
    }
}

impl Ord for KnowledgePath {
    fn cmp(&self, other: &Self) -> Ordering {
        self.steps
            .len()
            .cmp(&other.steps.len())
            .then_with(|| self.source.cmp(&other.source))
            .then_with(|| self.target.cmp(&other.target))
            .then_with(|| self.steps.cmp(&other.steps))
    }
}

impl PartialOrd for KnowledgePath {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for KnowledgePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.source)?;
        for step in &self.steps {
            match step.traversal {
                Traversal::Canonical => write!(f, "->{}->{}", step.triple.relation, step.exit())?,
                Traversal::Reversed => write!(f, "<-{}<-{}", step.triple.relation, step.exit())?,
            }
        }
        Ok(())
    }
}

/// Enumeration output: the ordered (possibly capped) paths.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSet {
    pub paths: Vec<KnowledgePath>,
    /// Set when paths beyond `max_paths` were dropped.
    pub truncated: bool,
    /// Number of paths found before the cap.
    pub total: usize,
}

/// All simple paths of 1..=`max_hops` steps from any question concept to
/// any candidate concept, ordered by (length, source, target, steps) and
/// capped at `max_paths`.
///
/// Concepts absent from the graph are ignored. Self-loop triples are never
/// used. Paths may pass through other question or candidate concepts.
pub fn enumerate_paths(
    graph: &KnowledgeGraph,
    question_concepts: &[ConceptId],
    candidate_concepts: &[ConceptId],
    max_hops: usize,
    max_paths: usize,
) -> Result<PathSet, PathError> {
    let mut all = enumerate_all(graph, question_concepts, candidate_concepts, max_hops)?;
    let total = all.len();
    let truncated = total > max_paths;
    all.truncate(max_paths);
    Ok(PathSet {
        paths: all,
        truncated,
        total,
    })
}

/// Uncapped enumeration, sorted.
pub fn enumerate_all(
    graph: &KnowledgeGraph,
    question_concepts: &[ConceptId],
    candidate_concepts: &[ConceptId],
    max_hops: usize,
) -> Result<Vec<KnowledgePath>, PathError> {
    if max_hops < 1 {
        return Err(PathError::ZeroHops);
    }
    if question_concepts.is_empty() {
        return Err(PathError::EmptyConcepts("question"));
    }
    if candidate_concepts.is_empty() {
        return Err(PathError::EmptyConcepts("candidate"));
    }

    let sources: BTreeSet<u32> = question_concepts
        .iter()
        .filter_map(|c| graph.index_of(c))
        .collect();
    let targets: BTreeSet<u32> = candidate_concepts
        .iter()
        .filter_map(|c| graph.index_of(c))
        .collect();

    let mut out = Vec::new();
    if targets.is_empty() {
        return Ok(out);
    }
    for &source in &sources {
        let mut walker = Walker {
            graph,
            targets: &targets,
            max_hops,
            on_path: vec![false; graph.lexicon().len()],
            steps: Vec::with_capacity(max_hops),
            source,
            out: &mut out,
        };
        walker.on_path[source as usize] = true;
        walker.descend(source);
    }
    out.sort();
    Ok(out)
}

struct Walker<'a> {
    graph: &'a KnowledgeGraph,
    targets: &'a BTreeSet<u32>,
    max_hops: usize,
    on_path: Vec<bool>,
    steps: Vec<(u32, Traversal)>,
    source: u32,
    out: &'a mut Vec<KnowledgePath>,
}

impl Walker<'_> {
    fn descend(&mut self, node: u32) {
        if self.steps.len() == self.max_hops {
            return;
        }
        for inc in self.graph.incidences(node) {
            if inc.other == node || self.on_path[inc.other as usize] {
                continue;
            }
            let traversal = if inc.outgoing {
                Traversal::Canonical
            } else {
                Traversal::Reversed
            };
            self.steps.push((inc.triple, traversal));
            self.on_path[inc.other as usize] = true;
            if self.targets.contains(&inc.other) {
                self.emit(inc.other);
            }
            self.descend(inc.other);
            self.on_path[inc.other as usize] = false;
            self.steps.pop();
        }
    }

    fn emit(&mut self, target: u32) {
        let steps = self
            .steps
            .iter()
            .map(|&(t, traversal)| PathStep {
                triple: self.graph.triple_at(t).clone(),
                traversal,
            })
            .collect();
        self.out.push(KnowledgePath {
            source: self.graph.concept_at(self.source).clone(),
            target: self.graph.concept_at(target).clone(),
            steps,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ckg::RelationSet;

    fn c(s: &str) -> ConceptId {
        ConceptId::normalize(s).unwrap()
    }

    fn g(triples: &[(&str, &str, &str)]) -> KnowledgeGraph {
        KnowledgeGraph::from_triples(
            RelationSet::default_set(),
            triples.iter().map(|(h, r, t)| Triple::new(c(h), *r, c(t))),
        )
        .unwrap()
    }

    #[test]
    fn two_hop_puzzle_path() {
        let graph = g(&[
            ("puzzle", "IsA", "problem"),
            ("problem", "Synonym", "challenge"),
        ]);
        let set = enumerate_paths(&graph, &[c("puzzle")], &[c("challenge")], 2, 100).unwrap();
        assert_eq!(set.paths.len(), 1);
        assert_eq!(
            set.paths[0].signature(),
            "puzzle->IsA->problem->Synonym->challenge"
        );
        assert!(set.paths[0].is_well_formed());
        assert!(!set.truncated);

        let one = enumerate_paths(&graph, &[c("puzzle")], &[c("challenge")], 1, 100).unwrap();
        assert!(one.paths.is_empty());
    }

    #[test]
    fn reversed_edges_are_walked() {
        let graph = g(&[
            ("hike", "MotivatedByGoal", "walk"),
            ("hike", "HasSubevent", "see beautiful views"),
        ]);
        let set =
            enumerate_paths(&graph, &[c("walk")], &[c("see beautiful views")], 2, 100).unwrap();
        assert_eq!(set.paths.len(), 1);
        let p = &set.paths[0];
        assert_eq!(
            p.signature(),
            "walk<-MotivatedByGoal<-hike->HasSubevent->see beautiful views"
        );
        assert_eq!(p.steps[0].traversal, Traversal::Reversed);
        assert_eq!(p.steps[1].traversal, Traversal::Canonical);
    }

    #[test]
    fn argument_errors() {
        let graph = g(&[("a", "IsA", "b")]);
        assert_eq!(
            enumerate_paths(&graph, &[c("a")], &[c("b")], 0, 10),
            Err(PathError::ZeroHops)
        );
        assert_eq!(
            enumerate_paths(&graph, &[], &[c("b")], 1, 10),
            Err(PathError::EmptyConcepts("question"))
        );
        assert_eq!(
            enumerate_paths(&graph, &[c("a")], &[], 1, 10),
            Err(PathError::EmptyConcepts("candidate"))
        );
    }

    #[test]
    fn self_loops_and_same_endpoint_excluded() {
        let graph = g(&[("a", "RelatedTo", "a"), ("a", "IsA", "b")]);
        let set = enumerate_paths(&graph, &[c("a")], &[c("a"), c("b")], 3, 10).unwrap();
        assert_eq!(set.paths.len(), 1);
        assert_eq!(set.paths[0].signature(), "a->IsA->b");
    }

    #[test]
    fn truncation_keeps_smallest() {
        let graph = g(&[
            ("a", "IsA", "b"),
            ("a", "UsedFor", "b"),
            ("a", "IsA", "m"),
            ("m", "IsA", "b"),
        ]);
        let full = enumerate_paths(&graph, &[c("a")], &[c("b")], 2, 100).unwrap();
        assert_eq!(full.total, 3);
        let capped = enumerate_paths(&graph, &[c("a")], &[c("b")], 2, 2).unwrap();
        assert!(capped.truncated);
        assert_eq!(capped.paths, full.paths[..2].to_vec());
        assert!(capped.paths.iter().all(|p| p.len() == 1));
    }

    #[test]
    fn unknown_concepts_yield_nothing() {
        let graph = g(&[("a", "IsA", "b")]);
        let set = enumerate_paths(&graph, &[c("zzz")], &[c("b")], 2, 10).unwrap();
        assert!(set.paths.is_empty());
    }
}
