use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use k2t_core::ckg::IngestSummary;
use k2t_core::corpus::build_index;
use k2t_core::harness::{
    evaluate, load_dataset, load_golden_knowledge, summary_text, EvalOptions, EvaluationRun,
    Example, ExampleKnowledge, ExternalScorer, HarnessError, LexicalScorer, Pipeline, Scorer,
};
use k2t_core::paths::PathSet;
use k2t_core::transform::{ExternalParaphraser, IdentityParaphraser, KnowledgeDescription};
use k2t_core::{
    ingest_triples, Bm25Index, Bm25Params, ConceptId, KnowledgeGraph, MatcherConfig, Method,
    Paraphraser, RelationSet, RuleParaphraser,
};
use serde::Serialize;
use tracing::{info, warn};

use crate::config::{ParaphraserSpec, RunConfig, ScorerSpec};
use crate::CliError;

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read {}", path.display()), e))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::data(format!("cannot open {}", path.display()), e))
}

/// Write through a temporary sibling and rename, so a failed run never
/// leaves a partial file behind.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let ctx = || format!("cannot write {}", path.display());
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::data(ctx(), e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| CliError::data(ctx(), e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::data(ctx(), e))
}

fn load_relations(path: Option<&Path>) -> Result<RelationSet, CliError> {
    match path {
        None => Ok(RelationSet::default_set()),
        Some(p) => RelationSet::from_json(&read_text(p)?)
            .map_err(|e| CliError::data(format!("relation table {}", p.display()), e)),
    }
}

fn is_snapshot(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// A `.json` path is read as a snapshot, anything else as triple TSV.
pub fn load_graph(path: &Path, relations: Option<&Path>) -> Result<KnowledgeGraph, CliError> {
    if is_snapshot(path) {
        if relations.is_some() {
            warn!("relation table ignored: the snapshot carries its own");
        }
        return KnowledgeGraph::load_snapshot(open(path)?)
            .map_err(|e| CliError::data(format!("graph snapshot {}", path.display()), e));
    }
    let relations = load_relations(relations)?;
    let (graph, summary) = ingest_triples(open(path)?, relations)
        .map_err(|e| CliError::data(format!("graph {}", path.display()), e))?;
    info!(?summary, "graph ingested");
    Ok(graph)
}

/// Documents of a corpus: the file itself, or every regular file of a
/// directory in name order.
fn read_corpus(path: &Path) -> Result<Vec<String>, CliError> {
    if !path.is_dir() {
        return Ok(vec![read_text(path)?]);
    }
    let entries = fs::read_dir(path)
        .map_err(|e| CliError::data(format!("cannot list {}", path.display()), e))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry =
            entry.map_err(|e| CliError::data(format!("cannot list {}", path.display()), e))?;
        if entry.path().is_file() {
            files.push(entry.path());
        }
    }
    files.sort();
    files.iter().map(|f| read_text(f)).collect()
}

fn index_corpus(path: &Path, params: Bm25Params) -> Result<Bm25Index, CliError> {
    let docs = read_corpus(path)?;
    build_index(docs.iter().map(String::as_str), params)
        .map_err(|e| CliError::data(format!("corpus {}", path.display()), e))
}

/// Build and snapshot a graph.
pub fn cmd_ingest(
    graph: &Path,
    relations: Option<&Path>,
    out: &Path,
) -> Result<IngestSummary, CliError> {
    let relations = load_relations(relations)?;
    let (g, summary) = ingest_triples(open(graph)?, relations)
        .map_err(|e| CliError::data(format!("graph {}", graph.display()), e))?;
    let mut bytes = Vec::new();
    g.save_snapshot(&mut bytes)
        .map_err(|e| CliError::data("snapshot serialization", e))?;
    write_atomic(out, &bytes)?;
    info!(concepts = g.lexicon().len(), triples = g.len(), out = %out.display(), "snapshot written");
    Ok(summary)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IndexStats {
    pub sentences: usize,
    pub avgdl: f64,
}

/// Build and persist a sentence index.
pub fn cmd_index(corpus: &Path, params: Bm25Params, out: &Path) -> Result<IndexStats, CliError> {
    let index = index_corpus(corpus, params)?;
    let mut bytes = Vec::new();
    index
        .save(&mut bytes)
        .map_err(|e| CliError::data("index serialization", e))?;
    write_atomic(out, &bytes)?;
    Ok(IndexStats {
        sentences: index.num_docs(),
        avgdl: index.avgdl(),
    })
}

/// Inputs of a run, loaded once.
struct Loaded {
    graph: Option<KnowledgeGraph>,
    index: Option<Bm25Index>,
    golden: Option<BTreeMap<String, String>>,
    dataset: Vec<Example>,
    paraphraser: Box<dyn Paraphraser>,
    matcher: MatcherConfig,
}

fn load_inputs(cfg: &RunConfig) -> Result<Loaded, CliError> {
    let method = cfg.method;
    let dataset_path = cfg.dataset.as_deref().expect("validated");
    let dataset = load_dataset(dataset_path, cfg.skills.as_deref())
        .map_err(|e| CliError::data("dataset", e))?;

    let graph = match (&cfg.graph, method.needs_graph()) {
        (Some(p), true) => Some(load_graph(p, cfg.relations.as_deref())?),
        _ => None,
    };
    let index = if method.needs_index() {
        Some(match (&cfg.index, &cfg.corpus) {
            (Some(p), _) => Bm25Index::load_from(p)
                .map_err(|e| CliError::data(format!("index {}", p.display()), e))?,
            (None, Some(c)) => index_corpus(c, Bm25Params::default())?,
            (None, None) => unreachable!("validated"),
        })
    } else {
        None
    };
    let golden = match (&cfg.golden, method) {
        (Some(p), Method::Golden) => {
            Some(load_golden_knowledge(p).map_err(|e| CliError::data("golden knowledge", e))?)
        }
        _ => None,
    };
    let matcher = match &cfg.matcher {
        Some(p) => MatcherConfig::from_json(&read_text(p)?)
            .map_err(|e| CliError::data(format!("matcher config {}", p.display()), e))?,
        None => MatcherConfig::default(),
    };
    let paraphraser: Box<dyn Paraphraser> = match &cfg.paraphraser {
        _ if !matches!(method, Method::Paraphrase | Method::Full) => Box::new(IdentityParaphraser),
        ParaphraserSpec::Identity => Box::new(IdentityParaphraser),
        ParaphraserSpec::Rules => match &cfg.rules {
            Some(p) => Box::new(
                RuleParaphraser::from_json(&read_text(p)?)
                    .map_err(|e| CliError::data(format!("rewrite rules {}", p.display()), e))?,
            ),
            None => Box::new(RuleParaphraser::default()),
        },
        ParaphraserSpec::External(endpoint) => Box::new(
            ExternalParaphraser::connect(endpoint, cfg.plugin_timeout())
                .map_err(|e| CliError::data(format!("paraphraser {endpoint}"), e))?,
        ),
    };
    Ok(Loaded {
        graph,
        index,
        golden,
        dataset,
        paraphraser,
        matcher,
    })
}

fn harness_error(e: HarnessError) -> CliError {
    match e {
        HarnessError::Config(msg) => CliError::Config(msg),
        HarnessError::Score(e) => CliError::Scorer(e.to_string()),
        other => CliError::data("evaluation", other),
    }
}

impl Loaded {
    fn pipeline(&self, cfg: &RunConfig) -> Result<Pipeline<'_>, CliError> {
        Pipeline::new(
            cfg.pipeline_config(self.matcher.clone()),
            self.graph.as_ref(),
            self.paraphraser.as_ref(),
            self.index.as_ref(),
            self.golden.as_ref(),
        )
        .map_err(harness_error)
    }
}

/// Which examples a transform run covers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Selection {
    All,
    One(String),
}

/// One candidate of one example: the inspection record of `transform`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransformRecord {
    pub id: String,
    pub question: String,
    pub question_concepts: Vec<ConceptId>,
    pub label: String,
    pub candidate: String,
    pub candidate_concepts: Vec<ConceptId>,
    /// Paths rendered as `a->Rel->b<-Rel<-c`.
    pub path_text: Vec<String>,
    pub paths: PathSet,
    pub description: KnowledgeDescription,
}

fn records(example: &Example, knowledge: ExampleKnowledge) -> Vec<TransformRecord> {
    knowledge
        .candidates
        .into_iter()
        .map(|c| TransformRecord {
            id: example.id.clone(),
            question: example.stem.clone(),
            question_concepts: knowledge.question_concepts.clone(),
            label: c.label,
            candidate: c.text,
            candidate_concepts: c.concepts,
            path_text: c.paths.paths.iter().map(ToString::to_string).collect(),
            paths: c.paths,
            description: c.description,
        })
        .collect()
}

/// Describe every candidate of the selected examples.
pub fn cmd_transform(
    cfg: &RunConfig,
    selection: &Selection,
) -> Result<Vec<TransformRecord>, CliError> {
    cfg.validate(true)?;
    let loaded = load_inputs(cfg)?;
    let pipeline = loaded.pipeline(cfg)?;
    let chosen: Vec<&Example> = match selection {
        Selection::All => loaded.dataset.iter().collect(),
        Selection::One(id) => {
            let ex = loaded
                .dataset
                .iter()
                .find(|e| &e.id == id)
                .ok_or_else(|| CliError::Config(format!("no example with id {id:?}")))?;
            vec![ex]
        }
    };
    let per_example = k2t_core::parallel::map_ordered(cfg.jobs, &chosen, |ex| {
        pipeline.describe(ex, cfg.max_hops).map(|k| records(ex, k))
    });
    let mut out = Vec::new();
    for r in per_example {
        out.extend(r.map_err(harness_error)?);
    }
    Ok(out)
}

/// One JSON object per line.
pub fn write_records<W: Write>(mut out: W, records: &[TransformRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

fn connect_scorer(cfg: &RunConfig) -> Result<Box<dyn Scorer>, CliError> {
    Ok(match &cfg.scorer {
        ScorerSpec::Lexical => Box::new(LexicalScorer),
        ScorerSpec::External(endpoint) => Box::new(
            ExternalScorer::connect(endpoint, cfg.plugin_timeout())
                .map_err(|e| CliError::Scorer(format!("cannot start scorer {endpoint:?}: {e}")))?,
        ),
    })
}

pub const REPORT_FILE: &str = "report.json";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const RESOLVED_CONFIG_FILE: &str = "config.json";

/// Evaluate the dataset; with an output directory, write the report,
/// summary, predictions and the resolved config there.
pub fn cmd_evaluate(cfg: &RunConfig, ablate_hops: bool) -> Result<EvaluationRun, CliError> {
    cfg.validate(true)?;
    let loaded = load_inputs(cfg)?;
    let pipeline = loaded.pipeline(cfg)?;
    let scorer = connect_scorer(cfg)?;
    let run = evaluate(
        &loaded.dataset,
        &pipeline,
        scorer.as_ref(),
        EvalOptions {
            jobs: cfg.jobs,
            ablate_hops,
        },
    )
    .map_err(harness_error)?;

    if let Some(dir) = &cfg.output_dir {
        let mut predictions = Vec::new();
        for p in &run.predictions {
            serde_json::to_writer(&mut predictions, p)
                .map_err(|e| CliError::data("predictions", e))?;
            predictions.push(b'\n');
        }
        write_atomic(&dir.join(REPORT_FILE), &pretty_json(&run.report)?)?;
        write_atomic(
            &dir.join(SUMMARY_FILE),
            summary_text(&run.report).as_bytes(),
        )?;
        write_atomic(&dir.join(PREDICTIONS_FILE), &predictions)?;
        write_atomic(&dir.join(RESOLVED_CONFIG_FILE), &pretty_json(cfg)?)?;
    }
    Ok(run)
}

fn pretty_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|e| CliError::data("serialization", e))?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// Write transform records to `out`, or stdout when `None`.
pub fn emit_records(records: &[TransformRecord], out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let mut bytes = Vec::new();
            write_records(&mut bytes, records)
                .map_err(|e| CliError::data("transform output", e))?;
            write_atomic(path, &bytes)
        }
        None => {
            let stdout = std::io::stdout();
            write_records(BufWriter::new(stdout.lock()), records)
                .map_err(|e| CliError::data("stdout", e))
        }
    }
}
