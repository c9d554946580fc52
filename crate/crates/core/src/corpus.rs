//! Sentence corpus with a BM25 inverted index.
//!
//! Scores use the positive-idf form
//!
//! ```text
//! idf(t)   = ln(1 + (N - df + 0.5) / (df + 0.5))
//! score(d) = Σ_{t ∈ unique(q)} idf(t) · tf·(k1+1) / (tf + k1·(1 - b + b·|d|/avgdl))
//! ```
//!
//! so every score is nonnegative. Search filters candidates by required
//! phrases before ranking.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::tokenize;

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;

const INDEX_FORMAT: &str = "k2t-bm25";
const INDEX_VERSION: u32 = 1;

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "vs", "e.g", "i.e", "inc", "ltd",
    "co", "no", "fig", "approx", "gen", "col", "lt", "sgt", "rev", "jan", "feb", "mar", "apr",
    "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec", "u.s", "u.k",
];

const CLOSERS: &[char] = &[')', ']', '"', '\'', '\u{201d}', '\u{2019}'];

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("corpus contains no sentences")]
    EmptyCorpus,
    #[error("duplicate sentence id {0}")]
    DuplicateId(u32),
    #[error("unknown sentence id {0}")]
    UnknownSentence(u32),
    #[error("invalid BM25 parameters: {0}")]
    Params(String),
    #[error("invalid index file: {0}")]
    Format(String),
    #[error("index I/O failed for {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("index serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: u32,
    pub text: String,
    pub tokens: Vec<String>,
}

impl Sentence {
    /// `None` when the text has no tokens.
    pub fn new(id: u32, text: impl Into<String>) -> Option<Self> {
        let text = text.into();
        let tokens = tokenize(&text);
        (!tokens.is_empty()).then_some(Self { id, text, tokens })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Whether `phrase` occurs as a contiguous token run.
    pub fn contains_phrase(&self, phrase: &[String]) -> bool {
        match phrase.len() {
            0 => true,
            n => self.tokens.windows(n).any(|w| w == phrase),
        }
    }
}

fn is_abbreviation(word: &str) -> bool {
    let word = word
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

/// Split a document into sentences at `.`, `?` or `!` followed by
/// whitespace or end of text. A lone `.` after a known abbreviation does
/// not split. Fragments without tokens are dropped; ids start at 0.
pub fn split_sentences(document: &str) -> Vec<Sentence> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = document.char_indices().collect();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (_, ch) = chars[i];
        if matches!(ch, '.' | '?' | '!') {
            let mut j = i;
            while j + 1 < chars.len() && matches!(chars[j + 1].1, '.' | '?' | '!') {
                j += 1;
            }
            let mut k = j;
            while k + 1 < chars.len() && CLOSERS.contains(&chars[k + 1].1) {
                k += 1;
            }
            let at_boundary = k + 1 == chars.len() || chars[k + 1].1.is_whitespace();
            if at_boundary {
                let end = chars.get(k + 1).map_or(document.len(), |&(b, _)| b);
                let fragment = &document[start..end];
                let single_period = ch == '.' && i == j;
                let last_word = document[start..chars[i].0]
                    .split_whitespace()
                    .next_back()
                    .unwrap_or("");
                if !(single_period && is_abbreviation(last_word)) {
                    push_fragment(&mut out, fragment);
                    start = end;
                }
                i = k + 1;
                continue;
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    push_fragment(&mut out, &document[start..]);
    out
}

fn push_fragment(out: &mut Vec<Sentence>, fragment: &str) {
    let text = fragment.trim();
    if let Some(s) = Sentence::new(out.len() as u32, text) {
        out.push(s);
    }
}

/// Split many documents and number the sentences sequentially across them.
pub fn split_corpus<'a>(documents: impl IntoIterator<Item = &'a str>) -> Vec<Sentence> {
    let mut out = Vec::new();
    for doc in documents {
        for mut s in split_sentences(doc) {
            s.id = out.len() as u32;
            out.push(s);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self {
            k1: DEFAULT_K1,
            b: DEFAULT_B,
        }
    }
}

impl Bm25Params {
    fn validate(&self) -> Result<(), IndexError> {
        if !(self.k1.is_finite() && self.k1 >= 0.0) {
            return Err(IndexError::Params(format!("k1 = {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(IndexError::Params(format!("b = {}", self.b)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub sentence: u32,
    pub tf: u32,
}

/// Inverted index over sentences.
#[derive(Clone, Debug, PartialEq)]
pub struct Bm25Index {
    params: Bm25Params,
    sentences: Vec<Sentence>,
    position: HashMap<u32, usize>,
    postings: BTreeMap<String, Vec<Posting>>,
    avgdl: f64,
}

/// A ranked search hit.
#[derive(Clone, Debug, PartialEq)]
pub struct Hit<'a> {
    pub sentence: &'a Sentence,
    pub score: f64,
}

impl Bm25Index {
    pub fn build(sentences: Vec<Sentence>, params: Bm25Params) -> Result<Self, IndexError> {
        params.validate()?;
        if sentences.is_empty() {
            return Err(IndexError::EmptyCorpus);
        }
        let mut position = HashMap::with_capacity(sentences.len());
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut total_len = 0usize;
        for (pos, s) in sentences.iter().enumerate() {
            if s.tokens.is_empty() {
                return Err(IndexError::Format(format!(
                    "sentence {} has no tokens",
                    s.id
                )));
            }
            if position.insert(s.id, pos).is_some() {
                return Err(IndexError::DuplicateId(s.id));
            }
            total_len += s.tokens.len();
            let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
            for t in &s.tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (t, n) in tf {
                postings.entry(t.to_string()).or_default().push(Posting {
                    sentence: s.id,
                    tf: n,
                });
            }
        }
        for list in postings.values_mut() {
            list.sort_by_key(|p| p.sentence);
        }
        let avgdl = total_len as f64 / sentences.len() as f64;
        Ok(Self {
            params,
            sentences,
            position,
            postings,
            avgdl,
        })
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    /// Number of indexed sentences.
    pub fn num_docs(&self) -> usize {
        self.sentences.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn sentence(&self, id: u32) -> Option<&Sentence> {
        self.position.get(&id).map(|&p| &self.sentences[p])
    }

    pub fn postings(&self, token: &str) -> &[Posting] {
        self.postings.get(token).map_or(&[], Vec::as_slice)
    }

    /// Document frequency.
    pub fn df(&self, token: &str) -> usize {
        self.postings(token).len()
    }

    pub fn idf(&self, token: &str) -> f64 {
        let n = self.sentences.len() as f64;
        let df = self.df(token) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn tf(&self, token: &str, id: u32) -> u32 {
        let list = self.postings(token);
        list.binary_search_by_key(&id, |p| p.sentence)
            .map_or(0, |i| list[i].tf)
    }

    pub fn score(&self, query_tokens: &[String], id: u32) -> Result<f64, IndexError> {
        let sentence = self.sentence(id).ok_or(IndexError::UnknownSentence(id))?;
        let Bm25Params { k1, b } = self.params;
        let norm = k1 * (1.0 - b + b * sentence.len() as f64 / self.avgdl);
        let unique: BTreeSet<&str> = query_tokens.iter().map(String::as_str).collect();
        let mut score = 0.0;
        for t in unique {
            let tf = self.tf(t, id);
            if tf == 0 {
                continue;
            }
            let tf = tf as f64;
            score += self.idf(t) * tf * (k1 + 1.0) / (tf + norm);
        }
        Ok(score)
    }

    /// Sentences containing every required phrase, ranked by score
    /// descending then id ascending, at most `top_n`.
    pub fn search(
        &self,
        query_tokens: &[String],
        required: &[Vec<String>],
        top_n: usize,
    ) -> Vec<Hit<'_>> {
        if top_n == 0 {
            return Vec::new();
        }
        let candidates: Vec<&Sentence> = match self.filter_candidates(required) {
            Some(ids) => ids
                .into_iter()
                .filter_map(|id| self.sentence(id))
                .filter(|s| required.iter().all(|p| s.contains_phrase(p)))
                .collect(),
            None => self.sentences.iter().collect(),
        };
        let mut hits: Vec<Hit<'_>> = candidates
            .into_iter()
            .map(|s| Hit {
                sentence: s,
                score: self
                    .score(query_tokens, s.id)
                    .expect("candidate is indexed"),
            })
            .collect();
        hits.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then(a.sentence.id.cmp(&b.sentence.id))
        });
        hits.truncate(top_n);
        hits
    }

    /// Intersect postings of every required token; `None` means no filter.
    fn filter_candidates(&self, required: &[Vec<String>]) -> Option<BTreeSet<u32>> {
        let mut tokens: Vec<&str> = required.iter().flatten().map(String::as_str).collect();
        if tokens.is_empty() {
            return None;
        }
        tokens.sort_by_key(|t| self.df(t));
        tokens.dedup();
        let mut acc: BTreeSet<u32> = self
            .postings(tokens[0])
            .iter()
            .map(|p| p.sentence)
            .collect();
        for t in &tokens[1..] {
            if acc.is_empty() {
                break;
            }
            let next: BTreeSet<u32> = self.postings(t).iter().map(|p| p.sentence).collect();
            acc.retain(|id| next.contains(id));
        }
        Some(acc)
    }

    pub fn save<W: Write>(&self, writer: W) -> Result<(), IndexError> {
        let file = IndexFile {
            format: INDEX_FORMAT.to_string(),
            version: INDEX_VERSION,
            params: self.params,
            sentences: self
                .sentences
                .iter()
                .map(|s| StoredSentence {
                    id: s.id,
                    text: s.text.clone(),
                })
                .collect(),
            doc_lengths: self.sentences.iter().map(|s| (s.id, s.len())).collect(),
            postings: self.postings.clone(),
        };
        serde_json::to_writer(writer, &file)?;
        Ok(())
    }

    pub fn load<R: Read>(reader: R) -> Result<Self, IndexError> {
        let file: IndexFile = serde_json::from_reader(reader)?;
        if file.format != INDEX_FORMAT {
            return Err(IndexError::Format(format!(
                "unexpected format tag {:?}",
                file.format
            )));
        }
        if file.version != INDEX_VERSION {
            return Err(IndexError::Format(format!(
                "unsupported version {} (expected {INDEX_VERSION})",
                file.version
            )));
        }
        let sentences = file
            .sentences
            .into_iter()
            .map(|s| {
                Sentence::new(s.id, s.text.clone())
                    .ok_or_else(|| IndexError::Format(format!("sentence {} is empty", s.id)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let index = Self::build(sentences, file.params)?;
        let lengths: BTreeMap<u32, usize> =
            index.sentences.iter().map(|s| (s.id, s.len())).collect();
        if lengths != file.doc_lengths || index.postings != file.postings {
            return Err(IndexError::Format(
                "stored postings disagree with stored sentences".into(),
            ));
        }
        Ok(index)
    }

    pub fn save_to(&self, path: &Path) -> Result<(), IndexError> {
        let file = std::fs::File::create(path).map_err(|source| IndexError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut w = std::io::BufWriter::new(file);
        self.save(&mut w)?;
        w.flush().map_err(|source| IndexError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load_from(path: &Path) -> Result<Self, IndexError> {
        let file = std::fs::File::open(path).map_err(|source| IndexError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::load(std::io::BufReader::new(file))
    }
}

#[derive(Serialize, Deserialize)]
struct StoredSentence {
    id: u32,
    text: String,
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    format: String,
    version: u32,
    params: Bm25Params,
    sentences: Vec<StoredSentence>,
    doc_lengths: BTreeMap<u32, usize>,
    postings: BTreeMap<String, Vec<Posting>>,
}

/// Convenience: build an index straight from documents.
pub fn build_index<'a>(
    documents: impl IntoIterator<Item = &'a str>,
    params: Bm25Params,
) -> Result<Bm25Index, IndexError> {
    Bm25Index::build(split_corpus(documents), params)
}
