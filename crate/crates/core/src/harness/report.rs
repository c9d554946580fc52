//! Accuracy evaluation and report assembly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::parallel::map_ordered;
use crate::transform::Method;

use super::dataset::{Candidate, Example};
use super::scorer::{ScoreError, Scorer};
use super::{predict, ExampleKnowledge, HarnessError, Pipeline, ScoredPrediction};

/// Hop limits covered by an ablation run.
pub const ABLATION_HOPS: [usize; 3] = [1, 2, 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvalOptions {
    /// Worker threads; 1 runs sequentially.
    pub jobs: usize,
    /// Also evaluate every hop limit in [`ABLATION_HOPS`].
    pub ablate_hops: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            jobs: 1,
            ablate_hops: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

impl Accuracy {
    fn new(correct: usize, total: usize) -> Self {
        Self {
            correct,
            total,
            accuracy: if total == 0 {
                0.0
            } else {
                correct as f64 / total as f64
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopAccuracy {
    pub hops: usize,
    #[serde(flatten)]
    pub accuracy: Accuracy,
}

/// One wrong prediction with the knowledge both sides saw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorCase {
    pub id: String,
    pub question: String,
    pub candidates: Vec<Candidate>,
    pub gold: String,
    pub chosen: String,
    pub gold_knowledge: Vec<String>,
    pub chosen_knowledge: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub method: Method,
    pub max_hops: usize,
    pub examples: usize,
    pub evaluated: usize,
    pub correct: usize,
    pub overall_accuracy: f64,
    /// Examples count once under every tag they carry.
    pub per_skill: BTreeMap<String, Accuracy>,
    /// Filled only by hop ablation runs.
    pub per_hop: Vec<HopAccuracy>,
    pub ties: usize,
    pub unscored: usize,
    pub without_gold: usize,
    pub golden_missing: usize,
    pub errors: Vec<ErrorCase>,
}

/// Report plus every prediction of the main run, in dataset order.
#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationRun {
    pub report: EvaluationReport,
    pub predictions: Vec<ScoredPrediction>,
}

enum Outcome {
    Scored(ScoredPrediction, ExampleKnowledge),
    Unscored,
}

fn run_once(
    dataset: &[Example],
    pipeline: &Pipeline<'_>,
    scorer: &dyn Scorer,
    max_hops: usize,
    jobs: usize,
) -> Result<Vec<Outcome>, HarnessError> {
    let separator = pipeline.config().separator.as_str();
    let results = map_ordered(jobs, dataset, |ex| -> Result<Outcome, HarnessError> {
        let knowledge = pipeline.describe(ex, max_hops)?;
        match predict(ex, &knowledge.descriptions(), scorer, separator) {
            Ok(p) => Ok(Outcome::Scored(p, knowledge)),
            Err(e @ ScoreError::Timeout(_)) => {
                warn!(example = %ex.id, error = %e, "leaving example unscored");
                Ok(Outcome::Unscored)
            }
            Err(e) => Err(e.into()),
        }
    });
    results.into_iter().collect()
}

fn accuracy_of(dataset: &[Example], outcomes: &[Outcome]) -> Accuracy {
    let mut correct = 0;
    let mut total = 0;
    for (ex, o) in dataset.iter().zip(outcomes) {
        if let (Some(_), Outcome::Scored(p, _)) = (&ex.gold, o) {
            total += 1;
            correct += usize::from(p.correct);
        }
    }
    Accuracy::new(correct, total)
}

/// Evaluate `dataset` end to end.
///
/// Examples without a gold label are predicted but excluded from accuracy;
/// examples whose scorer call timed out are counted as unscored and
/// excluded. Any other scorer failure aborts the run.
pub fn evaluate(
    dataset: &[Example],
    pipeline: &Pipeline<'_>,
    scorer: &dyn Scorer,
    options: EvalOptions,
) -> Result<EvaluationRun, HarnessError> {
    let max_hops = pipeline.config().max_hops;
    let outcomes = run_once(dataset, pipeline, scorer, max_hops, options.jobs)?;

    let overall = accuracy_of(dataset, &outcomes);
    if overall.total == 0 {
        return Err(HarnessError::NothingToEvaluate);
    }

    let per_hop = if options.ablate_hops {
        let mut per_hop = Vec::with_capacity(ABLATION_HOPS.len());
        for hops in ABLATION_HOPS {
            let accuracy = if hops == max_hops {
                overall.clone()
            } else {
                let o = run_once(dataset, pipeline, scorer, hops, options.jobs)?;
                accuracy_of(dataset, &o)
            };
            per_hop.push(HopAccuracy { hops, accuracy });
        }
        per_hop
    } else {
        Vec::new()
    };

    let mut skill_counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut ties = 0;
    let mut unscored = 0;
    let mut golden_missing = 0;
    let mut errors = Vec::new();
    let mut predictions = Vec::new();

    for (ex, outcome) in dataset.iter().zip(outcomes) {
        let (pred, knowledge) = match outcome {
            Outcome::Scored(p, k) => (p, k),
            Outcome::Unscored => {
                unscored += 1;
                continue;
            }
        };
        ties += usize::from(pred.tied);
        golden_missing += usize::from(knowledge.golden_missing);
        if let Some(gold) = &ex.gold {
            let tags: BTreeSet<&String> = ex.skills.iter().collect();
            for tag in tags {
                let entry = skill_counts.entry(tag.clone()).or_default();
                entry.0 += usize::from(pred.correct);
                entry.1 += 1;
            }
            if !pred.correct {
                let knowledge_of = |label: &str| -> Vec<String> {
                    knowledge
                        .candidates
                        .iter()
                        .find(|c| c.label == label)
                        .map(|c| {
                            c.description
                                .texts()
                                .into_iter()
                                .map(String::from)
                                .collect()
                        })
                        .unwrap_or_default()
                };
                errors.push(ErrorCase {
                    id: ex.id.clone(),
                    question: ex.stem.clone(),
                    candidates: ex.candidates.clone(),
                    gold: gold.clone(),
                    chosen: pred.chosen.clone(),
                    gold_knowledge: knowledge_of(gold),
                    chosen_knowledge: knowledge_of(&pred.chosen),
                });
            }
        }
        predictions.push(pred);
    }

    let report = EvaluationReport {
        method: pipeline.method(),
        max_hops,
        examples: dataset.len(),
        evaluated: overall.total,
        correct: overall.correct,
        overall_accuracy: overall.accuracy,
        per_skill: skill_counts
            .into_iter()
            .map(|(k, (c, t))| (k, Accuracy::new(c, t)))
            .collect(),
        per_hop,
        ties,
        unscored,
        without_gold: dataset.iter().filter(|e| e.gold.is_none()).count(),
        golden_missing,
        errors,
    };
    Ok(EvaluationRun {
        report,
        predictions,
    })
}

/// Human-readable summary of a report.
pub fn summary_text(report: &EvaluationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "method:    {}", report.method);
    let _ = writeln!(s, "max hops:  {}", report.max_hops);
    let _ = writeln!(
        s,
        "accuracy:  {:.4} ({}/{})",
        report.overall_accuracy, report.correct, report.evaluated
    );
    let _ = writeln!(
        s,
        "examples:  {} (unscored {}, without gold {}, ties {})",
        report.examples, report.unscored, report.without_gold, report.ties
    );
    if report.golden_missing > 0 {
        let _ = writeln!(s, "missing golden explanations: {}", report.golden_missing);
    }
    if !report.per_hop.is_empty() {
        let _ = writeln!(s, "per hop limit:");
        for h in &report.per_hop {
            let _ = writeln!(
                s,
                "  K={}  {:.4} ({}/{})",
                h.hops, h.accuracy.accuracy, h.accuracy.correct, h.accuracy.total
            );
        }
    }
    if !report.per_skill.is_empty() {
        let _ = writeln!(s, "per skill:");
        for (tag, a) in &report.per_skill {
            let _ = writeln!(
                s,
                "  {tag:<20} {:.4} ({}/{})",
                a.accuracy, a.correct, a.total
            );
        }
    }
    let _ = writeln!(s, "errors:    {}", report.errors.len());
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{AssembledSequence, PipelineConfig};
    use crate::transform::IdentityParaphraser;

    fn ex(id: &str, gold: &str, skills: &[&str]) -> Example {
        Example {
            id: id.into(),
            stem: "q".into(),
            candidates: ["A", "B"]
                .iter()
                .map(|l| Candidate {
                    label: l.to_string(),
                    text: l.to_lowercase(),
                })
                .collect(),
            gold: Some(gold.into()),
            skills: skills.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Always prefers candidate A, except for ids starting with "t" which
    /// time out.
    struct PreferA;
    impl Scorer for PreferA {
        fn score(&self, id: &str, batch: &[AssembledSequence]) -> Result<Vec<f64>, ScoreError> {
            if id.starts_with('t') {
                return Err(ScoreError::Timeout(id.into()));
            }
            Ok(batch
                .iter()
                .map(|s| if s.label == "A" { 1.0 } else { 0.0 })
                .collect())
        }
    }

    fn pipeline(p: &IdentityParaphraser) -> Pipeline<'_> {
        let cfg = PipelineConfig {
            method: Method::None,
            ..Default::default()
        };
        Pipeline::new(cfg, None, p, None, None).unwrap()
    }

    #[test]
    fn accuracy_arithmetic() {
        let para = IdentityParaphraser;
        let data = vec![
            ex("1", "A", &["Spatial"]),
            ex("2", "A", &["Spatial"]),
            ex("3", "A", &["Spatial"]),
            ex("4", "B", &["Spatial"]),
            ex("5", "A", &["Spatial", "Causal"]),
        ];
        let run = evaluate(&data, &pipeline(&para), &PreferA, EvalOptions::default()).unwrap();
        let r = &run.report;
        assert_eq!(r.overall_accuracy, 0.8);
        assert_eq!(r.per_skill["Spatial"].accuracy, 0.8);
        assert_eq!(r.per_skill["Causal"].accuracy, 1.0);
        assert_eq!(r.errors.len(), 1);
        assert_eq!(r.errors[0].id, "4");
        assert_eq!(r.errors[0].chosen, "A");
        assert!(r.per_hop.is_empty());

        let data3 = vec![
            ex("1", "A", &[]),
            ex("2", "B", &[]),
            ex("3", "A", &[]),
            ex("4", "B", &[]),
            ex("5", "A", &[]),
        ];
        let r = evaluate(&data3, &pipeline(&para), &PreferA, EvalOptions::default())
            .unwrap()
            .report;
        assert_eq!(r.overall_accuracy, 0.6);
    }

    #[test]
    fn timeouts_are_unscored_and_excluded() {
        let para = IdentityParaphraser;
        let data = vec![ex("1", "A", &[]), ex("t2", "A", &[]), ex("3", "B", &[])];
        let r = evaluate(&data, &pipeline(&para), &PreferA, EvalOptions::default())
            .unwrap()
            .report;
        assert_eq!(r.unscored, 1);
        assert_eq!(r.evaluated, 2);
        assert_eq!(r.overall_accuracy, 0.5);
    }

    #[test]
    fn nothing_to_evaluate() {
        let para = IdentityParaphraser;
        let mut e = ex("1", "A", &[]);
        e.gold = None;
        assert!(matches!(
            evaluate(&[e], &pipeline(&para), &PreferA, EvalOptions::default()),
            Err(HarnessError::NothingToEvaluate)
        ));
        assert!(matches!(
            evaluate(
                &[ex("t1", "A", &[])],
                &pipeline(&para),
                &PreferA,
                EvalOptions::default()
            ),
            Err(HarnessError::NothingToEvaluate)
        ));
    }

    #[test]
    fn ablation_has_three_entries() {
        let para = IdentityParaphraser;
        let data = vec![ex("1", "A", &[])];
        let r = evaluate(
            &data,
            &pipeline(&para),
            &PreferA,
            EvalOptions {
                jobs: 1,
                ablate_hops: true,
            },
        )
        .unwrap()
        .report;
        assert_eq!(
            r.per_hop.iter().map(|h| h.hops).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
        assert!(summary_text(&r).contains("K=3"));
    }
}
