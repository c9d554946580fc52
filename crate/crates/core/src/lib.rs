//! Knowledge-to-text pipeline for multiple-choice commonsense QA.
//!
//! Stages, in order:
//!
//! 1. [`ckg`]: load a ConceptNet-style triple graph.
//! 2. [`matcher`]: ground question and candidate text to concepts.
//! 3. [`paths`]: enumerate bounded simple paths between those concepts.
//! 4. [`transform`]: turn paths into sentences (template, paraphrase,
//!    corpus retrieval through [`corpus`]).
//! 5. [`harness`]: assemble scored sequences, pick answers, report accuracy.

pub mod ckg;
pub mod corpus;
pub mod harness;
pub mod matcher;
pub mod parallel;
pub mod paths;
pub mod plugin;
pub mod text;
pub mod transform;

pub use ckg::{
    ingest_triples, ConceptId, Direction, KnowledgeGraph, RelationSet, RelationType, Triple,
};
pub use corpus::{split_sentences, Bm25Index, Bm25Params, Sentence};
pub use matcher::{match_concepts, ConceptMatcher, ConceptMention, MatcherConfig};
pub use paths::{enumerate_paths, KnowledgePath, PathSet, PathStep, Traversal};
pub use transform::{
    render_template, transform, KnowledgeDescription, Limits, Method, Paraphraser, RuleParaphraser,
};
