//! Knowledge paths to textual descriptions.
//!
//! Three algorithms turn a path into sentences:
//!
//! * template: one sentence per step from the relation's template, always
//!   rendered from the stored triple regardless of traversal direction;
//! * paraphrase: the template sentences rewritten by a [`Paraphraser`],
//!   keeping the top `M` outputs per sentence;
//! * retrieval: the best BM25 corpus sentence that mentions every concept
//!   on the path, queried with the path's template text.
//!
//! The full description concatenates template, paraphrase and retrieval
//! output in that order.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::ckg::{ConceptId, RelationSet};
use crate::corpus::Bm25Index;
use crate::paths::KnowledgePath;
use crate::plugin::{Plugin, PluginError};
use crate::text::{as_sentence, tokenize};

static DEFAULT_RULES: &str = include_str!("../data/rewrite_rules.json");

pub const DEFAULT_TOP_M: usize = 1;
pub const DEFAULT_MAX_TOKENS: usize = 256;
pub const DEFAULT_MAX_SENTENCES: usize = 64;

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("relation {0} has no template in the relation config")]
    UnknownRelation(String),
    #[error("method {0} requires a sentence index")]
    MissingIndex(Method),
    #[error("method {0} cannot be produced from knowledge paths")]
    NotAPathMethod(Method),
    #[error("M must be at least 1")]
    ZeroTopM,
    #[error("invalid rewrite rules: {0}")]
    Rules(String),
}

#[derive(Debug, Error)]
pub enum ParaphraseError {
    #[error(transparent)]
    Plugin(#[from] PluginError),
    #[error("paraphraser protocol violation: {0}")]
    Protocol(String),
}

/// How knowledge text is produced for a candidate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// No knowledge text.
    None,
    Template,
    Paraphrase,
    Retrieval,
    /// Template, paraphrase and retrieval concatenated.
    Full,
    /// Human-written explanation per question.
    Golden,
}

impl Method {
    pub fn needs_index(self) -> bool {
        matches!(self, Method::Retrieval | Method::Full)
    }

    pub fn needs_graph(self) -> bool {
        !matches!(self, Method::None | Method::Golden)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Template => "template",
            Method::Paraphrase => "paraphrase",
            Method::Retrieval => "retrieval",
            Method::Full => "full",
            Method::Golden => "golden",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "none" => Method::None,
            "template" => Method::Template,
            "paraphrase" => Method::Paraphrase,
            "retrieval" => Method::Retrieval,
            "full" => Method::Full,
            "golden" => Method::Golden,
            other => return Err(format!("unknown method {other:?}")),
        })
    }
}

/// Where a description sentence came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Origin {
    Template { path: String },
    Paraphrase { path: String },
    Retrieval { path: String, sentence_id: u32 },
    Golden,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptionSentence {
    pub text: String,
    pub origin: Origin,
}

/// Knowledge text attached to one answer candidate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeDescription {
    pub candidate: String,
    pub method: Method,
    pub sentences: Vec<DescriptionSentence>,
    /// Paraphraser failures that fell back to the original sentence.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub warnings: usize,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

impl KnowledgeDescription {
    pub fn empty(candidate: impl Into<String>, method: Method) -> Self {
        Self {
            candidate: candidate.into(),
            method,
            sentences: Vec::new(),
            warnings: 0,
        }
    }

    /// Sentences joined by single spaces; this is the K_k segment.
    pub fn text(&self) -> String {
        self.sentences
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn texts(&self) -> Vec<&str> {
        self.sentences.iter().map(|s| s.text.as_str()).collect()
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(|s| tokenize(&s.text).len()).sum()
    }
}

/// Template rendering of one path: one sentence per step.
///
/// `surfaces` maps concepts to display casing; concepts missing from it are
/// rendered with their normalized id.
pub fn render_template(
    path: &KnowledgePath,
    relations: &RelationSet,
    surfaces: &BTreeMap<ConceptId, String>,
) -> Result<Vec<String>, TransformError> {
    let display = |c: &ConceptId| -> String {
        surfaces
            .get(c)
            .cloned()
            .unwrap_or_else(|| c.as_str().to_string())
    };
    path.steps
        .iter()
        .map(|step| {
            let rel = relations
                .get(&step.triple.relation)
                .ok_or_else(|| TransformError::UnknownRelation(step.triple.relation.clone()))?;
            Ok(as_sentence(&rel.render(
                &display(&step.triple.head),
                &display(&step.triple.tail),
            )))
        })
        .collect()
}

/// Produces up to `m` paraphrases of a sentence, best first.
pub trait Paraphraser: Send + Sync {
    fn paraphrase(&self, sentence: &str, m: usize) -> Result<Vec<String>, ParaphraseError>;
}

/// Returns every sentence unchanged.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityParaphraser;

impl Paraphraser for IdentityParaphraser {
    fn paraphrase(&self, sentence: &str, m: usize) -> Result<Vec<String>, ParaphraseError> {
        Ok(if m == 0 {
            Vec::new()
        } else {
            vec![sentence.to_string()]
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteRule {
    pub pattern: String,
    pub replacement: String,
}

/// Deterministic phrase-rewrite paraphraser.
///
/// The best paraphrase applies every rule in order; the following ones
/// apply a single rule each. Rules match whole words only, case-sensitively.
/// Sentences no rule touches yield no paraphrase.
#[derive(Clone, Debug)]
pub struct RuleParaphraser {
    rules: Vec<RewriteRule>,
}

impl Default for RuleParaphraser {
    fn default() -> Self {
        Self::from_json(DEFAULT_RULES).expect("shipped rewrite rules are valid")
    }
}

impl RuleParaphraser {
    pub fn new(rules: Vec<RewriteRule>) -> Result<Self, TransformError> {
        if let Some(r) = rules.iter().find(|r| r.pattern.trim().is_empty()) {
            return Err(TransformError::Rules(format!(
                "empty pattern (replacement {:?})",
                r.replacement
            )));
        }
        Ok(Self { rules })
    }

    pub fn from_json(json: &str) -> Result<Self, TransformError> {
        let rules: Vec<RewriteRule> =
            serde_json::from_str(json).map_err(|e| TransformError::Rules(e.to_string()))?;
        Self::new(rules)
    }

    pub fn rules(&self) -> &[RewriteRule] {
        &self.rules
    }
}

fn replace_words(text: &str, pattern: &str, replacement: &str) -> String {
    if pattern.is_empty() {
        return text.to_string();
    }
    let is_word = |c: char| c.is_alphanumeric();
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    let mut prev: Option<char> = None;
    while let Some(pos) = rest.find(pattern) {
        let before = rest[..pos].chars().next_back().or(prev);
        let after = rest[pos + pattern.len()..].chars().next();
        let bounded = !before.is_some_and(is_word) && !after.is_some_and(is_word);
        let cut = if bounded {
            pos + pattern.len()
        } else {
            pos + rest[pos..].chars().next().map_or(1, char::len_utf8)
        };
        out.push_str(&rest[..pos]);
        out.push_str(if bounded {
            replacement
        } else {
            &rest[pos..cut]
        });
        prev = rest[..cut].chars().next_back();
        rest = &rest[cut..];
    }
    out.push_str(rest);
    out
}

impl Paraphraser for RuleParaphraser {
    fn paraphrase(&self, sentence: &str, m: usize) -> Result<Vec<String>, ParaphraseError> {
        let mut variants: Vec<String> = Vec::new();
        let mut push = |v: String| {
            if v != sentence && !variants.contains(&v) {
                variants.push(v);
            }
        };
        let all = self.rules.iter().fold(sentence.to_string(), |acc, r| {
            replace_words(&acc, &r.pattern, &r.replacement)
        });
        push(all);
        for r in &self.rules {
            push(replace_words(sentence, &r.pattern, &r.replacement));
        }
        variants.truncate(m);
        Ok(variants)
    }
}

pub const PARAPHRASER_PROTOCOL: &str = "k2t-paraphraser";
pub const PARAPHRASER_VERSION: u32 = 1;

/// Paraphraser behind the plugin transport.
///
/// Request `{"id": n, "sentence": text, "m": M}`, response
/// `{"id": n, "paraphrases": [text, ...]}`.
pub struct ExternalParaphraser {
    plugin: Plugin,
    next_id: std::sync::atomic::AtomicU64,
}

#[derive(Serialize)]
struct ParaphraseRequest<'a> {
    id: u64,
    sentence: &'a str,
    m: usize,
}

#[derive(Deserialize)]
struct ParaphraseResponse {
    id: u64,
    paraphrases: Vec<String>,
}

impl ExternalParaphraser {
    pub fn connect(endpoint: &str, timeout: Duration) -> Result<Self, PluginError> {
        Ok(Self {
            plugin: Plugin::connect(endpoint, PARAPHRASER_PROTOCOL, PARAPHRASER_VERSION, timeout)?,
            next_id: Default::default(),
        })
    }
}

impl Paraphraser for ExternalParaphraser {
    fn paraphrase(&self, sentence: &str, m: usize) -> Result<Vec<String>, ParaphraseError> {
        let id = self
            .next_id
            .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        let request = serde_json::to_string(&ParaphraseRequest { id, sentence, m })
            .expect("request serializes");
        let line = self.plugin.exchange(&request)?;
        let resp: ParaphraseResponse = serde_json::from_str(&line)
            .map_err(|e| ParaphraseError::Protocol(format!("{e}: {line:?}")))?;
        if resp.id != id {
            return Err(ParaphraseError::Protocol(format!(
                "response id {} for request {id}",
                resp.id
            )));
        }
        let mut out = resp.paraphrases;
        out.truncate(m);
        Ok(out)
    }
}

/// Per input sentence, the paraphraser's top-`m` outputs in order; the
/// original sentence is kept when the paraphraser yields nothing or fails.
/// Returns the sentences and the number of failures.
pub fn paraphrase_description(
    template_sentences: &[String],
    paraphraser: &dyn Paraphraser,
    m: usize,
) -> Result<(Vec<String>, usize), TransformError> {
    if m == 0 {
        return Err(TransformError::ZeroTopM);
    }
    let mut out = Vec::new();
    let mut failures = 0;
    for sentence in template_sentences {
        match paraphraser.paraphrase(sentence, m) {
            Ok(mut variants) if !variants.is_empty() => {
                variants.truncate(m);
                out.extend(variants);
            }
            Ok(_) => out.push(sentence.clone()),
            Err(err) => {
                warn!(sentence = %sentence, error = %err, "paraphraser failed, keeping original");
                failures += 1;
                out.push(sentence.clone());
            }
        }
    }
    Ok((out, failures))
}

/// Token phrases that a retrieved sentence must contain: every node on the
/// path, each as a contiguous token run.
pub fn required_phrases(path: &KnowledgePath) -> Vec<Vec<String>> {
    let mut seen = HashSet::new();
    path.nodes()
        .into_iter()
        .filter(|c| seen.insert(*c))
        .map(ConceptId::tokens)
        .filter(|t| !t.is_empty())
        .collect()
}

/// Rank-1 sentence for the path, queried with its template text.
pub fn retrieve_description(
    path: &KnowledgePath,
    template_sentences: &[String],
    index: &Bm25Index,
) -> Option<(u32, String)> {
    let query = tokenize(&template_sentences.join(" "));
    index
        .search(&query, &required_phrases(path), 1)
        .into_iter()
        .next()
        .map(|hit| (hit.sentence.id, hit.sentence.text.clone()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub max_sentences: usize,
    pub max_tokens: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_sentences: DEFAULT_MAX_SENTENCES,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

/// Everything the transformation reads. All borrowed state is immutable.
#[derive(Clone, Copy)]
pub struct TransformDeps<'a> {
    pub relations: &'a RelationSet,
    pub surfaces: &'a BTreeMap<ConceptId, String>,
    pub paraphraser: &'a dyn Paraphraser,
    pub top_m: usize,
    pub index: Option<&'a Bm25Index>,
}

/// Build the description for one candidate from its ordered paths.
///
/// Identical sentences are kept once (first occurrence wins) and trailing
/// whole sentences are dropped to honor `limits`.
pub fn transform(
    candidate: &str,
    paths: &[KnowledgePath],
    method: Method,
    deps: &TransformDeps<'_>,
    limits: Limits,
) -> Result<KnowledgeDescription, TransformError> {
    if method == Method::Golden {
        return Err(TransformError::NotAPathMethod(method));
    }
    if method.needs_index() && deps.index.is_none() {
        return Err(TransformError::MissingIndex(method));
    }
    if method == Method::None || paths.is_empty() {
        return Ok(KnowledgeDescription::empty(candidate, method));
    }

    let want_template = matches!(method, Method::Template | Method::Full);
    let want_paraphrase = matches!(method, Method::Paraphrase | Method::Full);
    let want_retrieval = matches!(method, Method::Retrieval | Method::Full);

    let mut template = Vec::new();
    let mut paraphrase = Vec::new();
    let mut retrieval = Vec::new();
    let mut warnings = 0;

    for path in paths {
        let sig = path.signature();
        let rendered = render_template(path, deps.relations, deps.surfaces)?;
        if want_paraphrase {
            let (texts, failed) = paraphrase_description(&rendered, deps.paraphraser, deps.top_m)?;
            warnings += failed;
            paraphrase.extend(texts.into_iter().map(|text| DescriptionSentence {
                text,
                origin: Origin::Paraphrase { path: sig.clone() },
            }));
        }
        if want_retrieval {
            let index = deps.index.expect("checked above");
            if let Some((sentence_id, text)) = retrieve_description(path, &rendered, index) {
                retrieval.push(DescriptionSentence {
                    text,
                    origin: Origin::Retrieval {
                        path: sig.clone(),
                        sentence_id,
                    },
                });
            }
        }
        if want_template {
            template.extend(rendered.into_iter().map(|text| DescriptionSentence {
                text,
                origin: Origin::Template { path: sig.clone() },
            }));
        }
    }

    let mut seen = HashSet::new();
    let mut sentences = Vec::new();
    let mut tokens = 0;
    for s in template.into_iter().chain(paraphrase).chain(retrieval) {
        if !seen.insert(s.text.clone()) {
            continue;
        }
        let n = tokenize(&s.text).len();
        if sentences.len() == limits.max_sentences || tokens + n > limits.max_tokens {
            break;
        }
        tokens += n;
        sentences.push(s);
    }

    Ok(KnowledgeDescription {
        candidate: candidate.to_string(),
        method,
        sentences,
        warnings,
    })
}
