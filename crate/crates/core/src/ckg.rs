//! In-memory commonsense knowledge graph.
//!
//! Triples are ingested from `head<TAB>relation<TAB>tail` lines, concept
//! surfaces are normalized into [`ConceptId`]s and the graph keeps sorted
//! forward/backward adjacency so neighbor listings are reproducible. Once
//! built the graph is immutable and can be shared freely across threads.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{collapse_whitespace, normalize_surface, tokenize};

const SNAPSHOT_FORMAT: &str = "k2t-graph";
const SNAPSHOT_VERSION: u32 = 1;

static DEFAULT_RELATIONS: &str = include_str!("../data/relations.json");

#[derive(Debug, Error)]
pub enum CkgError {
    #[error("failed to read triple source at line {line}: {source}")]
    Io {
        line: usize,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid relation config: {0}")]
    RelationConfig(String),
    #[error("invalid concept surface {0:?}")]
    InvalidConcept(String),
    #[error("invalid graph snapshot: {0}")]
    Snapshot(String),
    #[error("snapshot serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

/// Normalized concept surface: lowercase, single-spaced, no underscores.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ConceptId(String);

impl ConceptId {
    /// Normalize a raw surface (ConceptNet style `Intellectual_challenge`
    /// becomes `intellectual challenge`).
    pub fn normalize(raw: &str) -> Result<Self, CkgError> {
        let norm = normalize_surface(raw);
        if norm.is_empty() {
            return Err(CkgError::InvalidConcept(raw.to_string()));
        }
        Ok(ConceptId(norm))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Tokens of the concept under the shared tokenizer.
    pub fn tokens(&self) -> Vec<String> {
        tokenize(&self.0)
    }
}

impl TryFrom<String> for ConceptId {
    type Error = CkgError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        let id = ConceptId::normalize(&value)?;
        if id.0 != value {
            return Err(CkgError::InvalidConcept(value));
        }
        Ok(id)
    }
}

impl From<ConceptId> for String {
    fn from(value: ConceptId) -> Self {
        value.0
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A relation name plus its verbalization template.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationType {
    pub name: String,
    pub template: String,
}

impl RelationType {
    /// Fill `{head}` and `{tail}`.
    pub fn render(&self, head: &str, tail: &str) -> String {
        self.template
            .replace("{head}", head)
            .replace("{tail}", tail)
    }
}

/// The closed relation vocabulary, in configuration order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationSet {
    relations: Vec<RelationType>,
    by_name: HashMap<String, usize>,
}

impl RelationSet {
    pub fn new(relations: Vec<RelationType>) -> Result<Self, CkgError> {
        if relations.is_empty() {
            return Err(CkgError::RelationConfig("relation list is empty".into()));
        }
        let mut by_name = HashMap::with_capacity(relations.len());
        for (idx, rel) in relations.iter().enumerate() {
            if rel.name.trim().is_empty() {
                return Err(CkgError::RelationConfig("relation with empty name".into()));
            }
            for placeholder in ["{head}", "{tail}"] {
                let count = rel.template.matches(placeholder).count();
                if count != 1 {
                    return Err(CkgError::RelationConfig(format!(
                        "template of {} must contain {placeholder} exactly once (found {count})",
                        rel.name
                    )));
                }
            }
            if by_name.insert(rel.name.clone(), idx).is_some() {
                return Err(CkgError::RelationConfig(format!(
                    "duplicate relation name {}",
                    rel.name
                )));
            }
        }
        Ok(Self { relations, by_name })
    }

    pub fn from_json(json: &str) -> Result<Self, CkgError> {
        let relations: Vec<RelationType> =
            serde_json::from_str(json).map_err(|e| CkgError::RelationConfig(e.to_string()))?;
        Self::new(relations)
    }

    /// The shipped 22-relation vocabulary.
    pub fn default_set() -> Self {
        Self::from_json(DEFAULT_RELATIONS).expect("shipped relation config is valid")
    }

    pub fn get(&self, name: &str) -> Option<&RelationType> {
        self.by_name.get(name).map(|&i| &self.relations[i])
    }

    pub fn contains(&self, name: &str) -> bool {
        self.by_name.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &RelationType> {
        self.relations.iter()
    }
}

/// One `<head, relation, tail>` fact.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: ConceptId,
    pub relation: String,
    pub tail: ConceptId,
}

impl Triple {
    pub fn new(head: ConceptId, relation: impl Into<String>, tail: ConceptId) -> Self {
        Self {
            head,
            relation: relation.into(),
            tail,
        }
    }

    pub fn is_self_loop(&self) -> bool {
        self.head == self.tail
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}, {}, {}>", self.head, self.relation, self.tail)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
    Both,
}

/// Counts reported after ingestion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IngestSummary {
    /// Distinct triples kept.
    pub kept: usize,
    /// Lines dropped because their relation is not in the vocabulary.
    pub skipped_unknown_relation: usize,
    /// Lines that repeated an already kept triple.
    pub deduped: usize,
    /// Lines without exactly three fields or with an empty concept.
    pub malformed: usize,
}

/// An edge incident to a node, as seen from that node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Incidence {
    pub triple: u32,
    pub other: u32,
    /// `true` when the node is the triple's head.
    pub outgoing: bool,
}

/// Immutable triple store with sorted adjacency.
#[derive(Clone, Debug)]
pub struct KnowledgeGraph {
    relations: RelationSet,
    triples: Vec<Triple>,
    concepts: Vec<ConceptId>,
    concept_index: HashMap<ConceptId, u32>,
    surfaces: BTreeMap<ConceptId, String>,
    forward: Vec<Vec<u32>>,
    backward: Vec<Vec<u32>>,
    incident: Vec<Vec<Incidence>>,
}

impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.relations == other.relations
            && self.triples == other.triples
            && self.surfaces == other.surfaces
    }
}

impl Eq for KnowledgeGraph {}

impl KnowledgeGraph {
    /// Build from already-normalized triples. Duplicates collapse; triples
    /// with relations outside `relations` are rejected.
    pub fn from_triples(
        relations: RelationSet,
        triples: impl IntoIterator<Item = Triple>,
    ) -> Result<Self, CkgError> {
        let set: BTreeSet<Triple> = triples.into_iter().collect();
        if let Some(bad) = set.iter().find(|t| !relations.contains(&t.relation)) {
            return Err(CkgError::RelationConfig(format!(
                "triple {bad} uses unknown relation {}",
                bad.relation
            )));
        }
        Ok(Self::assemble(relations, set, BTreeMap::new()))
    }

    fn assemble(
        relations: RelationSet,
        set: BTreeSet<Triple>,
        surfaces: BTreeMap<ConceptId, String>,
    ) -> Self {
        let triples: Vec<Triple> = set.into_iter().collect();
        let lexicon: BTreeSet<&ConceptId> =
            triples.iter().flat_map(|t| [&t.head, &t.tail]).collect();
        let concepts: Vec<ConceptId> = lexicon.into_iter().cloned().collect();
        let concept_index: HashMap<ConceptId, u32> = concepts
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i as u32))
            .collect();

        let n = concepts.len();
        let mut forward = vec![Vec::new(); n];
        let mut backward = vec![Vec::new(); n];
        let mut incident = vec![Vec::new(); n];
        for (ti, t) in triples.iter().enumerate() {
            let h = concept_index[&t.head];
            let tl = concept_index[&t.tail];
            forward[h as usize].push(ti as u32);
            backward[tl as usize].push(ti as u32);
            incident[h as usize].push(Incidence {
                triple: ti as u32,
                other: tl,
                outgoing: true,
            });
            incident[tl as usize].push(Incidence {
                triple: ti as u32,
                other: h,
                outgoing: false,
            });
        }
        // Concept indices follow lexicographic order, so comparing indices
        // compares the endpoint surfaces.
        for list in &mut forward {
            list.sort_by(|&a, &b| {
                let (ta, tb) = (&triples[a as usize], &triples[b as usize]);
                (&ta.relation, &ta.tail).cmp(&(&tb.relation, &tb.tail))
            });
        }
        for list in &mut backward {
            list.sort_by(|&a, &b| {
                let (ta, tb) = (&triples[a as usize], &triples[b as usize]);
                (&ta.relation, &ta.head).cmp(&(&tb.relation, &tb.head))
            });
        }
        for list in &mut incident {
            list.sort_by(|a, b| {
                let (ta, tb) = (&triples[a.triple as usize], &triples[b.triple as usize]);
                (&ta.relation, a.other, !a.outgoing).cmp(&(&tb.relation, b.other, !b.outgoing))
            });
        }

        Self {
            relations,
            triples,
            concepts,
            concept_index,
            surfaces,
            forward,
            backward,
            incident,
        }
    }

    pub fn relations(&self) -> &RelationSet {
        &self.relations
    }

    /// All triples in `(head, relation, tail)` order.
    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Sorted concept lexicon (every head and tail).
    pub fn lexicon(&self) -> &[ConceptId] {
        &self.concepts
    }

    pub fn contains_concept(&self, concept: &ConceptId) -> bool {
        self.concept_index.contains_key(concept)
    }

    /// Lookup by normalized text without allocating a `ConceptId`.
    pub fn lookup(&self, normalized: &str) -> Option<&ConceptId> {
        // HashMap<ConceptId, _> cannot be probed with &str directly; the
        // sorted lexicon can.
        self.concepts
            .binary_search_by(|c| c.as_str().cmp(normalized))
            .ok()
            .map(|i| &self.concepts[i])
    }

    /// Display surface for rendering: the first-seen original casing when
    /// it differs from the normalized id, else the id itself.
    pub fn surface<'a>(&'a self, concept: &'a ConceptId) -> &'a str {
        self.surfaces
            .get(concept)
            .map(String::as_str)
            .unwrap_or_else(|| concept.as_str())
    }

    pub fn surfaces(&self) -> &BTreeMap<ConceptId, String> {
        &self.surfaces
    }

    /// Triples touching `node`, ordered by relation name and then the other
    /// endpoint. Unknown nodes yield an empty list.
    pub fn neighbors(&self, node: &ConceptId, direction: Direction) -> Vec<&Triple> {
        let Some(&idx) = self.concept_index.get(node) else {
            return Vec::new();
        };
        let idx = idx as usize;
        match direction {
            Direction::Forward => self.forward[idx]
                .iter()
                .map(|&t| &self.triples[t as usize])
                .collect(),
            Direction::Backward => self.backward[idx]
                .iter()
                .map(|&t| &self.triples[t as usize])
                .collect(),
            Direction::Both => {
                let mut seen = BTreeSet::new();
                self.incident[idx]
                    .iter()
                    .filter(|inc| seen.insert(inc.triple))
                    .map(|inc| &self.triples[inc.triple as usize])
                    .collect()
            }
        }
    }

    pub(crate) fn index_of(&self, concept: &ConceptId) -> Option<u32> {
        self.concept_index.get(concept).copied()
    }

    pub(crate) fn concept_at(&self, idx: u32) -> &ConceptId {
        &self.concepts[idx as usize]
    }

    pub(crate) fn triple_at(&self, idx: u32) -> &Triple {
        &self.triples[idx as usize]
    }

    pub(crate) fn incidences(&self, idx: u32) -> &[Incidence] {
        &self.incident[idx as usize]
    }

    /// Write the versioned JSON snapshot. Output is byte-stable for equal
    /// graphs.
    pub fn save_snapshot<W: Write>(&self, writer: W) -> Result<(), CkgError> {
        let snapshot = Snapshot {
            format: SNAPSHOT_FORMAT.to_string(),
            version: SNAPSHOT_VERSION,
            relations: self.relations.relations.clone(),
            triples: self
                .triples
                .iter()
                .map(|t| (t.head.clone(), t.relation.clone(), t.tail.clone()))
                .collect(),
            surfaces: self.surfaces.clone(),
        };
        serde_json::to_writer(writer, &snapshot)?;
        Ok(())
    }

    pub fn load_snapshot<R: Read>(reader: R) -> Result<Self, CkgError> {
        let snapshot: Snapshot = serde_json::from_reader(reader)?;
        if snapshot.format != SNAPSHOT_FORMAT {
            return Err(CkgError::Snapshot(format!(
                "unexpected format tag {:?}",
                snapshot.format
            )));
        }
        if snapshot.version != SNAPSHOT_VERSION {
            return Err(CkgError::Snapshot(format!(
                "unsupported version {} (expected {SNAPSHOT_VERSION})",
                snapshot.version
            )));
        }
        let relations = RelationSet::new(snapshot.relations)?;
        let set: BTreeSet<Triple> = snapshot
            .triples
            .into_iter()
            .map(|(h, r, t)| Triple::new(h, r, t))
            .collect();
        if let Some(bad) = set.iter().find(|t| !relations.contains(&t.relation)) {
            return Err(CkgError::Snapshot(format!(
                "triple {bad} has unknown relation"
            )));
        }
        Ok(Self::assemble(relations, set, snapshot.surfaces))
    }
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    format: String,
    version: u32,
    relations: Vec<RelationType>,
    triples: Vec<(ConceptId, String, ConceptId)>,
    surfaces: BTreeMap<ConceptId, String>,
}

/// Parse a TSV triple stream into a graph.
///
/// `#` comment lines and blank lines are ignored. Lines without three
/// tab-separated fields are counted as malformed and skipped; lines whose
/// relation is not in `relations` are counted and skipped.
pub fn ingest_triples<R: BufRead>(
    source: R,
    relations: RelationSet,
) -> Result<(KnowledgeGraph, IngestSummary), CkgError> {
    let mut summary = IngestSummary::default();
    let mut set = BTreeSet::new();
    let mut surfaces = BTreeMap::new();
    let mut seen = std::collections::HashSet::new();

    for (n, line) in source.lines().enumerate() {
        let line = line.map_err(|source| CkgError::Io {
            line: n + 1,
            source,
        })?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [head, relation, tail] = fields.as_slice() else {
            summary.malformed += 1;
            continue;
        };
        let relation = relation.trim();
        if !relations.contains(relation) {
            summary.skipped_unknown_relation += 1;
            continue;
        }
        let (Ok(h), Ok(t)) = (ConceptId::normalize(head), ConceptId::normalize(tail)) else {
            summary.malformed += 1;
            continue;
        };
        for (id, raw) in [(&h, head), (&t, tail)] {
            if seen.insert(id.clone()) {
                let display = collapse_whitespace(&raw.replace('_', " "));
                if display != id.as_str() {
                    surfaces.insert(id.clone(), display);
                }
            }
        }
        if !set.insert(Triple::new(h, relation, t)) {
            summary.deduped += 1;
        }
    }
    summary.kept = set.len();
    let graph = KnowledgeGraph::assemble(relations, set, surfaces);
    Ok((graph, summary))
}
