//! Candidate scoring: sequence assembly, the built-in lexical scorer and
//! the external scorer protocol client.

use std::collections::BTreeSet;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plugin::{Plugin, PluginError};
use crate::text::tokenize;

use super::dataset::Example;

pub const DEFAULT_SEPARATOR: &str = "[SEP]";
pub const SCORER_PROTOCOL: &str = "k2t-scorer";
pub const SCORER_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScoreError {
    /// The example is left unscored and the run continues.
    #[error("scorer timed out on example {0}")]
    Timeout(String),
    #[error("scorer protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Transport(PluginError),
    #[error("unknown candidate label {0:?}")]
    UnknownLabel(String),
}

impl ScoreError {
    pub fn is_recoverable(&self) -> bool {
        matches!(self, ScoreError::Timeout(_))
    }
}

/// `(K_k, sep, Q, sep, A_k)` for one candidate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssembledSequence {
    pub label: String,
    pub knowledge: String,
    pub separator: String,
    pub question: String,
    pub candidate: String,
}

impl AssembledSequence {
    /// Segments joined by single spaces. An empty knowledge segment leaves
    /// no leading space.
    pub fn flat_text(&self) -> String {
        let tail = format!(
            "{sep} {q} {sep} {a}",
            sep = self.separator,
            q = self.question,
            a = self.candidate
        );
        if self.knowledge.is_empty() {
            tail
        } else {
            format!("{} {tail}", self.knowledge)
        }
    }
}

pub fn assemble_sequence(
    example: &Example,
    label: &str,
    knowledge: &str,
    separator: &str,
) -> Result<AssembledSequence, ScoreError> {
    let cand = example
        .candidate(label)
        .ok_or_else(|| ScoreError::UnknownLabel(label.to_string()))?;
    Ok(AssembledSequence {
        label: cand.label.clone(),
        knowledge: knowledge.to_string(),
        separator: separator.to_string(),
        question: example.stem.clone(),
        candidate: cand.text.clone(),
    })
}

/// Maps the sequences of one example to one score per candidate.
pub trait Scorer: Send + Sync {
    fn score(&self, example_id: &str, batch: &[AssembledSequence]) -> Result<Vec<f64>, ScoreError>;
}

fn unique_tokens(text: &str) -> BTreeSet<String> {
    tokenize(text).into_iter().collect()
}

/// `|A ∩ K| + 0.1 · |A ∩ Q|` over unique normalized tokens.
pub fn lexical_overlap_score(seq: &AssembledSequence) -> f64 {
    let answer = unique_tokens(&seq.candidate);
    let knowledge = unique_tokens(&seq.knowledge);
    let question = unique_tokens(&seq.question);
    let with_k = answer.intersection(&knowledge).count() as f64;
    let with_q = answer.intersection(&question).count() as f64;
    with_k + 0.1 * with_q
}

/// Built-in baseline scorer.
#[derive(Clone, Copy, Debug, Default)]
pub struct LexicalScorer;

impl Scorer for LexicalScorer {
    fn score(
        &self,
        _example_id: &str,
        batch: &[AssembledSequence],
    ) -> Result<Vec<f64>, ScoreError> {
        Ok(batch.iter().map(lexical_overlap_score).collect())
    }
}

#[derive(Serialize)]
pub struct ScoreRequestItem<'a> {
    pub label: &'a str,
    pub knowledge: &'a str,
    pub question: &'a str,
    pub candidate: &'a str,
}

#[derive(Serialize)]
pub struct ScoreRequest<'a> {
    pub id: &'a str,
    pub separator: &'a str,
    pub items: Vec<ScoreRequestItem<'a>>,
}

impl<'a> ScoreRequest<'a> {
    pub fn new(example_id: &'a str, batch: &'a [AssembledSequence]) -> Self {
        Self {
            id: example_id,
            separator: batch
                .first()
                .map_or(DEFAULT_SEPARATOR, |s| s.separator.as_str()),
            items: batch
                .iter()
                .map(|s| ScoreRequestItem {
                    label: &s.label,
                    knowledge: &s.knowledge,
                    question: &s.question,
                    candidate: &s.candidate,
                })
                .collect(),
        }
    }
}

/// Validate a response line against the request it answers.
pub fn parse_score_response(
    line: &str,
    example_id: &str,
    arity: usize,
) -> Result<Vec<f64>, ScoreError> {
    let value: serde_json::Value = serde_json::from_str(line)
        .map_err(|e| ScoreError::Protocol(format!("unparseable response {line:?}: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| ScoreError::Protocol(format!("response is not an object: {line:?}")))?;
    match obj.get("id").and_then(|v| v.as_str()) {
        Some(id) if id == example_id => {}
        other => {
            return Err(ScoreError::Protocol(format!(
                "response id {other:?} does not match request {example_id:?}"
            )))
        }
    }
    if let Some(err) = obj.get("error") {
        return Err(ScoreError::Protocol(format!(
            "scorer reported error: {err}"
        )));
    }
    let scores = obj
        .get("scores")
        .and_then(|v| v.as_array())
        .ok_or_else(|| ScoreError::Protocol("response has no scores array".into()))?;
    if scores.len() != arity {
        return Err(ScoreError::Protocol(format!(
            "expected {arity} scores, got {}",
            scores.len()
        )));
    }
    scores
        .iter()
        .map(|v| match v.as_f64() {
            Some(x) if x.is_finite() => Ok(x),
            _ => Err(ScoreError::Protocol(format!("non-finite score {v}"))),
        })
        .collect()
}

/// Scorer reached over the plugin transport.
pub struct ExternalScorer {
    plugin: Plugin,
}

impl ExternalScorer {
    pub fn connect(endpoint: &str, timeout: Duration) -> Result<Self, PluginError> {
        Ok(Self {
            plugin: Plugin::connect(endpoint, SCORER_PROTOCOL, SCORER_VERSION, timeout)?,
        })
    }
}

impl Scorer for ExternalScorer {
    fn score(&self, example_id: &str, batch: &[AssembledSequence]) -> Result<Vec<f64>, ScoreError> {
        let request = serde_json::to_string(&ScoreRequest::new(example_id, batch))
            .expect("request serializes");
        let line = self.plugin.exchange(&request).map_err(|e| match e {
            PluginError::Timeout(_) => ScoreError::Timeout(example_id.to_string()),
            other => ScoreError::Transport(other),
        })?;
        parse_score_response(&line, example_id, batch.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::dataset::Candidate;

    fn seq(k: &str, q: &str, a: &str) -> AssembledSequence {
        AssembledSequence {
            label: "A".into(),
            knowledge: k.into(),
            separator: DEFAULT_SEPARATOR.into(),
            question: q.into(),
            candidate: a.into(),
        }
    }

    fn example() -> Example {
        Example {
            id: "e".into(),
            stem: "q?".into(),
            candidates: vec![
                Candidate {
                    label: "A".into(),
                    text: "a".into(),
                },
                Candidate {
                    label: "B".into(),
                    text: "b".into(),
                },
            ],
            gold: Some("A".into()),
            skills: vec![],
        }
    }

    #[test]
    fn flat_text_layout() {
        let s = assemble_sequence(&example(), "A", "k.", "[SEP]").unwrap();
        assert_eq!(s.flat_text(), "k. [SEP] q? [SEP] a");
        let s = assemble_sequence(&example(), "A", "", "[SEP]").unwrap();
        assert_eq!(s.flat_text(), "[SEP] q? [SEP] a");
        assert_eq!(s.knowledge, "");
        assert!(matches!(
            assemble_sequence(&example(), "Z", "", "[SEP]"),
            Err(ScoreError::UnknownLabel(_))
        ));
    }

    #[test]
    fn shared_prefix_across_candidates() {
        let a = assemble_sequence(&example(), "A", "same", "<s>").unwrap();
        let b = assemble_sequence(&example(), "B", "same", "<s>").unwrap();
        assert_eq!(
            (a.separator.as_str(), a.question.as_str()),
            (b.separator.as_str(), b.question.as_str())
        );
    }

    #[test]
    fn lexical_formula() {
        assert_eq!(
            lexical_overlap_score(&seq("", "what now", "confession")),
            0.0
        );
        assert_eq!(
            lexical_overlap_score(&seq("confession involves talking.", "q", "confession")),
            1.0
        );
        let s = lexical_overlap_score(&seq("red big apple", "is the apple tasty", "big apple"));
        assert!((s - 2.1).abs() < 1e-12);
    }

    #[test]
    fn response_validation() {
        assert_eq!(
            parse_score_response(r#"{"id":"e","scores":[1,0.5]}"#, "e", 2).unwrap(),
            vec![1.0, 0.5]
        );
        for bad in [
            r#"{"id":"x","scores":[1,0]}"#,
            r#"{"id":"e","scores":[1]}"#,
            r#"{"id":"e","scores":[1,null]}"#,
            r#"{"id":"e","scores":[1,"NaN"]}"#,
            r#"{"id":"e","error":"boom"}"#,
            r#"[1,2]"#,
            "garbage",
        ] {
            assert!(
                matches!(
                    parse_score_response(bad, "e", 2),
                    Err(ScoreError::Protocol(_))
                ),
                "{bad}"
            );
        }
    }

    #[test]
    fn request_wire_format() {
        let batch = vec![seq("k", "q", "a")];
        let json = serde_json::to_string(&ScoreRequest::new("id1", &batch)).unwrap();
        assert_eq!(
            json,
            r#"{"id":"id1","separator":"[SEP]","items":[{"label":"A","knowledge":"k","question":"q","candidate":"a"}]}"#
        );
    }
}
