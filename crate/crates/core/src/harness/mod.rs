//! Multiple-choice QA harness.
//!
//! For each example the harness grounds the question and every candidate
//! onto graph concepts, enumerates connecting paths, turns them into a
//! knowledge description per candidate, assembles
//! `(knowledge, sep, question, sep, candidate)` sequences and picks the
//! best-scored candidate.

pub mod dataset;
pub mod report;
pub mod scorer;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ckg::{ConceptId, KnowledgeGraph};
use crate::corpus::Bm25Index;
use crate::matcher::{ConceptMatcher, MatcherConfig};
use crate::paths::{enumerate_paths, PathError, PathSet, DEFAULT_MAX_HOPS, DEFAULT_MAX_PATHS};
use crate::transform::{
    transform, DescriptionSentence, KnowledgeDescription, Limits, Method, Origin, Paraphraser,
    TransformDeps, TransformError, DEFAULT_TOP_M,
};

pub use dataset::{
    load_dataset, load_golden_knowledge, Candidate, DatasetError, Example, SKILLS_SIDECAR,
};
pub use report::{evaluate, summary_text, EvalOptions, EvaluationReport, EvaluationRun};
pub use scorer::{
    assemble_sequence, lexical_overlap_score, AssembledSequence, ExternalScorer, LexicalScorer,
    ScoreError, Scorer, DEFAULT_SEPARATOR,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Paths(#[from] PathError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("no example has a gold label and a score; nothing to evaluate")]
    NothingToEvaluate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub method: Method,
    pub max_hops: usize,
    pub max_paths: usize,
    pub top_m: usize,
    pub limits: Limits,
    pub separator: String,
    pub matcher: MatcherConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            method: Method::Template,
            max_hops: DEFAULT_MAX_HOPS,
            max_paths: DEFAULT_MAX_PATHS,
            top_m: DEFAULT_TOP_M,
            limits: Limits::default(),
            separator: DEFAULT_SEPARATOR.to_string(),
            matcher: MatcherConfig::default(),
        }
    }
}

/// Knowledge produced for one candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateKnowledge {
    pub label: String,
    pub text: String,
    pub concepts: Vec<ConceptId>,
    pub paths: PathSet,
    pub description: KnowledgeDescription,
}

/// Knowledge produced for one example.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleKnowledge {
    pub id: String,
    pub question_concepts: Vec<ConceptId>,
    pub candidates: Vec<CandidateKnowledge>,
    /// Golden mode only: the example had no explanation.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub golden_missing: bool,
}

impl ExampleKnowledge {
    pub fn descriptions(&self) -> Vec<&KnowledgeDescription> {
        self.candidates.iter().map(|c| &c.description).collect()
    }
}

/// Immutable wiring of every stage; shareable across threads.
pub struct Pipeline<'a> {
    config: PipelineConfig,
    graph: Option<&'a KnowledgeGraph>,
    matcher: Option<ConceptMatcher<'a>>,
    paraphraser: &'a dyn Paraphraser,
    index: Option<&'a Bm25Index>,
    golden: Option<&'a BTreeMap<String, String>>,
}

impl<'a> Pipeline<'a> {
    pub fn new(
        config: PipelineConfig,
        graph: Option<&'a KnowledgeGraph>,
        paraphraser: &'a dyn Paraphraser,
        index: Option<&'a Bm25Index>,
        golden: Option<&'a BTreeMap<String, String>>,
    ) -> Result<Self, HarnessError> {
        let method = config.method;
        if config.max_hops < 1 {
            return Err(HarnessError::Config("hop limit must be at least 1".into()));
        }
        if config.top_m < 1 {
            return Err(HarnessError::Config("M must be at least 1".into()));
        }
        if method.needs_graph() && graph.is_none() {
            return Err(HarnessError::Config(format!(
                "method {method} needs a graph"
            )));
        }
        if method.needs_index() && index.is_none() {
            return Err(HarnessError::Config(format!(
                "method {method} needs a sentence index"
            )));
        }
        if method == Method::Golden && golden.is_none() {
            return Err(HarnessError::Config(
                "golden method needs an explanations file".into(),
            ));
        }
        let matcher = graph
            .filter(|_| method.needs_graph())
            .map(|g| ConceptMatcher::new(g, &config.matcher));
        Ok(Self {
            config,
            graph,
            matcher,
            paraphraser,
            index,
            golden,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn method(&self) -> Method {
        self.config.method
    }

    /// Ground, retrieve and describe every candidate of `example` with the
    /// given hop limit.
    pub fn describe(
        &self,
        example: &Example,
        max_hops: usize,
    ) -> Result<ExampleKnowledge, HarnessError> {
        let method = self.config.method;
        match method {
            Method::None => Ok(self.without_paths(example, Vec::new(), |c| {
                KnowledgeDescription::empty(&c.label, method)
            })),
            Method::Golden => {
                let golden = self.golden.expect("validated in new");
                let explanation = golden.get(&example.id);
                let mut out = self.without_paths(example, Vec::new(), |c| match explanation {
                    Some(text) if !text.is_empty() => KnowledgeDescription {
                        candidate: c.label.clone(),
                        method,
                        sentences: vec![DescriptionSentence {
                            text: text.clone(),
                            origin: Origin::Golden,
                        }],
                        warnings: 0,
                    },
                    _ => KnowledgeDescription::empty(&c.label, method),
                });
                out.golden_missing = explanation.is_none();
                Ok(out)
            }
            _ => self.describe_from_paths(example, max_hops),
        }
    }

    fn without_paths(
        &self,
        example: &Example,
        question_concepts: Vec<ConceptId>,
        describe: impl Fn(&Candidate) -> KnowledgeDescription,
    ) -> ExampleKnowledge {
        ExampleKnowledge {
            id: example.id.clone(),
            question_concepts,
            candidates: example
                .candidates
                .iter()
                .map(|c| CandidateKnowledge {
                    label: c.label.clone(),
                    text: c.text.clone(),
                    concepts: Vec::new(),
                    paths: PathSet::default(),
                    description: describe(c),
                })
                .collect(),
            golden_missing: false,
        }
    }

    fn describe_from_paths(
        &self,
        example: &Example,
        max_hops: usize,
    ) -> Result<ExampleKnowledge, HarnessError> {
        let graph = self.graph.expect("validated in new");
        let matcher = self.matcher.as_ref().expect("validated in new");
        let deps = TransformDeps {
            relations: graph.relations(),
            surfaces: graph.surfaces(),
            paraphraser: self.paraphraser,
            top_m: self.config.top_m,
            index: self.index,
        };
        let question_concepts = matcher.concepts(&example.stem);
        let mut candidates = Vec::with_capacity(example.candidates.len());
        for cand in &example.candidates {
            let concepts = matcher.concepts(&cand.text);
            let paths = if question_concepts.is_empty() || concepts.is_empty() {
                PathSet::default()
            } else {
                enumerate_paths(
                    graph,
                    &question_concepts,
                    &concepts,
                    max_hops,
                    self.config.max_paths,
                )?
            };
            let description = transform(
                &cand.label,
                &paths.paths,
                self.config.method,
                &deps,
                self.config.limits,
            )?;
            candidates.push(CandidateKnowledge {
                label: cand.label.clone(),
                text: cand.text.clone(),
                concepts,
                paths,
                description,
            });
        }
        Ok(ExampleKnowledge {
            id: example.id.clone(),
            question_concepts,
            candidates,
            golden_missing: false,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub label: String,
    pub score: f64,
}

/// Scores for one example and the chosen label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrediction {
    pub example_id: String,
    pub scores: Vec<CandidateScore>,
    pub chosen: String,
    pub gold: Option<String>,
    pub correct: bool,
    /// More than one candidate shares the maximal score.
    pub tied: bool,
}

/// Index of the maximal score; ties go to the lexicographically smallest
/// label. Returns `(index, tied)`.
pub fn argmax_label(labels: &[&str], scores: &[f64]) -> (usize, bool) {
    assert_eq!(labels.len(), scores.len());
    assert!(!scores.is_empty());
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let winners: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] == best).collect();
    let chosen = *winners
        .iter()
        .min_by(|&&a, &&b| labels[a].cmp(labels[b]))
        .expect("nonempty");
    (chosen, winners.len() > 1)
}

/// Assemble one sequence per candidate, score them and pick the argmax.
/// Candidates without a description get empty knowledge.
pub fn predict(
    example: &Example,
    descriptions: &[&KnowledgeDescription],
    scorer: &dyn Scorer,
    separator: &str,
) -> Result<ScoredPrediction, ScoreError> {
    let sequences = example
        .candidates
        .iter()
        .map(|c| {
            let knowledge = descriptions
                .iter()
                .find(|d| d.candidate == c.label)
                .map(|d| d.text())
                .unwrap_or_default();
            assemble_sequence(example, &c.label, &knowledge, separator)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let scores = scorer.score(&example.id, &sequences)?;
    if scores.len() != sequences.len() {
        return Err(ScoreError::Protocol(format!(
            "scorer returned {} scores for {} candidates",
            scores.len(),
            sequences.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(ScoreError::Protocol(format!("non-finite score {bad}")));
    }
    let labels: Vec<&str> = example
        .candidates
        .iter()
        .map(|c| c.label.as_str())
        .collect();
    let (best, tied) = argmax_label(&labels, &scores);
    let chosen = labels[best].to_string();
    Ok(ScoredPrediction {
        example_id: example.id.clone(),
        scores: labels
            .iter()
            .zip(&scores)
            .map(|(l, s)| CandidateScore {
                label: l.to_string(),
                score: *s,
            })
            .collect(),
        correct: example.gold.as_deref() == Some(chosen.as_str()),
        gold: example.gold.clone(),
        chosen,
        tied,
    })
}
