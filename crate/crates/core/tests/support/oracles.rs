//! Brute-force reference implementations. Each one follows the documented
//! contract as literally as possible and shares no code with the library
//! beyond the tokenizer and plain data types.

use std::collections::{BTreeSet, HashSet};

use k2t_core::paths::{KnowledgePath, Traversal};
use k2t_core::text::tokenize;
use k2t_core::{ConceptId, Triple};

/// `(head, relation, tail, reversed)` for one step.
pub type StepKey = (String, String, String, bool);
/// `(source, target, steps)`.
pub type PathKey = (String, String, Vec<StepKey>);

pub fn path_key(p: &KnowledgePath) -> PathKey {
    (
        p.source.as_str().to_string(),
        p.target.as_str().to_string(),
        p.steps
            .iter()
            .map(|s| {
                (
                    s.triple.head.as_str().to_string(),
                    s.triple.relation.clone(),
                    s.triple.tail.as_str().to_string(),
                    s.traversal == Traversal::Reversed,
                )
            })
            .collect(),
    )
}

/// Every simple path of 1..=`k` edges from a source to a target, found by
/// scanning the full triple list at every step.
pub fn all_paths(
    triples: &[Triple],
    sources: &[ConceptId],
    targets: &[ConceptId],
    k: usize,
) -> BTreeSet<PathKey> {
    let targets: HashSet<&str> = targets.iter().map(ConceptId::as_str).collect();
    let sources: BTreeSet<&str> = sources.iter().map(ConceptId::as_str).collect();
    let mut out = BTreeSet::new();
    for s in sources {
        let mut visited = vec![s.to_string()];
        let mut steps = Vec::new();
        dfs(triples, &targets, k, s, &mut visited, &mut steps, &mut out);
    }
    out
}

fn dfs(
    triples: &[Triple],
    targets: &HashSet<&str>,
    k: usize,
    source: &str,
    visited: &mut Vec<String>,
    steps: &mut Vec<StepKey>,
    out: &mut BTreeSet<PathKey>,
) {
    if steps.len() == k {
        return;
    }
    let here = visited.last().unwrap().clone();
    for t in triples {
        let (h, r, tl) = (t.head.as_str(), t.relation.as_str(), t.tail.as_str());
        if h == tl {
            continue;
        }
        for (from, to, reversed) in [(h, tl, false), (tl, h, true)] {
            if from != here || visited.iter().any(|v| v == to) {
                continue;
            }
            visited.push(to.to_string());
            steps.push((h.to_string(), r.to_string(), tl.to_string(), reversed));
            if targets.contains(to) {
                out.insert((source.to_string(), to.to_string(), steps.clone()));
            }
            dfs(triples, targets, k, source, visited, steps, out);
            steps.pop();
            visited.pop();
        }
    }
}

/// `(concept, start, end)`.
pub type MentionKey = (String, usize, usize);

/// Scan every n-gram, keep lexicon hits, drop suppressed stopword
/// singletons, then drop any hit strictly inside another hit.
pub fn brute_matches(
    text: &str,
    lexicon: &HashSet<String>,
    max_ngram: usize,
    stopwords: &HashSet<String>,
    suppress_singletons: bool,
) -> Vec<MentionKey> {
    let tokens = tokenize(text);
    let mut hits = Vec::new();
    for i in 0..tokens.len() {
        for j in i + 1..=tokens.len() {
            if j - i > max_ngram {
                continue;
            }
            let phrase = tokens[i..j].join(" ");
            if suppress_singletons && j - i == 1 && stopwords.contains(&phrase) {
                continue;
            }
            if lexicon.contains(&phrase) {
                hits.push((phrase, i, j));
            }
        }
    }
    let inside =
        |a: &MentionKey, b: &MentionKey| b.1 <= a.1 && a.2 <= b.2 && (a.1, a.2) != (b.1, b.2);
    let mut kept: Vec<MentionKey> = hits
        .iter()
        .filter(|a| !hits.iter().any(|b| inside(a, b)))
        .cloned()
        .collect();
    kept.sort_by(|a, b| a.1.cmp(&b.1).then((b.2 - b.1).cmp(&(a.2 - a.1))));
    kept
}

/// BM25 over unique query terms with idf `ln(1 + (N - df + 0.5) / (df + 0.5))`,
/// restricted to documents containing every required phrase, sorted by
/// score descending then id ascending.
pub fn bm25_rank(
    docs: &[(u32, Vec<String>)],
    query: &[String],
    required: &[Vec<String>],
    k1: f64,
    b: f64,
) -> Vec<(u32, f64)> {
    let n = docs.len() as f64;
    let total: usize = docs.iter().map(|d| d.1.len()).sum();
    let avgdl = total as f64 / docs.len() as f64;
    let terms: BTreeSet<&String> = query.iter().collect();
    let has_phrase = |toks: &[String], p: &[String]| {
        p.is_empty()
            || (p.len() <= toks.len()
                && (0..=toks.len() - p.len()).any(|i| toks[i..i + p.len()] == *p))
    };
    let mut ranked: Vec<(u32, f64)> = docs
        .iter()
        .filter(|(_, toks)| required.iter().all(|p| has_phrase(toks, p)))
        .map(|(id, toks)| {
            let norm = k1 * (1.0 - b + b * toks.len() as f64 / avgdl);
            let mut score = 0.0;
            for t in &terms {
                let tf = toks.iter().filter(|x| x == t).count();
                if tf == 0 {
                    continue;
                }
                let df = docs.iter().filter(|d| d.1.contains(t)).count() as f64;
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                let tf = tf as f64;
                score += idf * tf * (k1 + 1.0) / (tf + norm);
            }
            (*id, score)
        })
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
}
