use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use k2t_cli::commands::emit_records;
use k2t_cli::{
    cmd_evaluate, cmd_index, cmd_ingest, cmd_transform, CliError, ParaphraserSpec, RunConfig,
    ScorerSpec, Selection, CONFIG_ENV,
};
use k2t_core::{Bm25Params, Method};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(
    name = "k2t",
    version,
    about = "Knowledge-to-text commonsense QA pipeline"
)]
struct Cli {
    /// More log output (repeatable); RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load triples and write a graph snapshot.
    Ingest {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        relations: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a corpus into sentences and write a BM25 index.
    Index {
        /// Corpus file, or directory of corpus files.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = k2t_core::corpus::DEFAULT_K1)]
        k1: f64,
        #[arg(long, default_value_t = k2t_core::corpus::DEFAULT_B)]
        b: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print matched concepts, paths and descriptions as JSON lines.
    Transform {
        #[command(flatten)]
        run: RunArgs,
        /// Every example of the dataset.
        #[arg(long, conflicts_with = "id", required_unless_present = "id")]
        all: bool,
        /// A single example.
        #[arg(long)]
        id: Option<String>,
        /// Output file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score every example and write a report.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        /// Also evaluate hop limits 1, 2 and 3.
        #[arg(long)]
        ablate_hops: bool,
        /// Use the golden explanations as knowledge.
        #[arg(long)]
        golden: bool,
        #[arg(long)]
        scorer: Option<ScorerSpec>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

/// Flags shared by transform and evaluate; each overrides the config file.
#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    relations: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    index: Option<PathBuf>,
    /// Golden explanations (JSON lines of id and explanation).
    #[arg(long)]
    golden_file: Option<PathBuf>,
    #[arg(long)]
    skills: Option<PathBuf>,
    #[arg(long)]
    matcher: Option<PathBuf>,
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    method: Option<Method>,
    /// Hop limit K.
    #[arg(long)]
    max_hops: Option<usize>,
    /// Paraphrases kept per sentence.
    #[arg(long)]
    top_m: Option<usize>,
    #[arg(long)]
    max_paths: Option<usize>,
    #[arg(long)]
    max_tokens: Option<usize>,
    #[arg(long)]
    max_sentences: Option<usize>,
    #[arg(long)]
    separator: Option<String>,
    #[arg(long)]
    paraphraser: Option<ParaphraserSpec>,
    /// Seconds to wait for a plugin response.
    #[arg(long)]
    plugin_timeout: Option<f64>,
    #[arg(long)]
    jobs: Option<usize>,
}

macro_rules! override_fields {
    ($cfg:ident, $args:ident; opt: $($o:ident),*; val: $($v:ident),*) => {
        $( if $args.$o.is_some() { $cfg.$o = $args.$o; } )*
        $( if let Some(x) = $args.$v { $cfg.$v = x; } )*
    };
}

impl RunArgs {
    fn resolve(self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let args = self;
        override_fields!(cfg, args;
            opt: graph, relations, dataset, corpus, index, skills, matcher, rules;
            val: method, max_hops, top_m, max_paths, max_tokens, max_sentences, separator,
                 paraphraser, jobs);
        if args.golden_file.is_some() {
            cfg.golden = args.golden_file;
        }
        if let Some(t) = args.plugin_timeout {
            cfg.plugin_timeout_secs = t;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest {
            graph,
            relations,
            out,
        } => {
            let s = cmd_ingest(&graph, relations.as_deref(), &out)?;
            println!(
                "kept {} triples (skipped {} unknown relation, {} duplicate, {} malformed) -> {}",
                s.kept,
                s.skipped_unknown_relation,
                s.deduped,
                s.malformed,
                out.display()
            );
        }
        Command::Index { corpus, k1, b, out } => {
            let stats = cmd_index(&corpus, Bm25Params { k1, b }, &out)?;
            println!(
                "indexed N={} sentences, avgdl={:.4} -> {}",
                stats.sentences,
                stats.avgdl,
                out.display()
            );
        }
        Command::Transform { run, all, id, out } => {
            let cfg = run.resolve()?;
            let selection = match (all, id) {
                (true, _) => Selection::All,
                (false, Some(id)) => Selection::One(id),
                (false, None) => return Err(CliError::Config("pass --all or --id".into())),
            };
            let records = cmd_transform(&cfg, &selection)?;
            emit_records(&records, out.as_deref())?;
        }
        Command::Evaluate {
            run,
            ablate_hops,
            golden,
            scorer,
            output_dir,
        } => {
            let mut cfg = run.resolve()?;
            if golden {
                cfg.method = Method::Golden;
            }
            if let Some(s) = scorer {
                cfg.scorer = s;
            }
            if output_dir.is_some() {
                cfg.output_dir = output_dir;
            }
            let result = cmd_evaluate(&cfg, ablate_hops)?;
            print!("{}", k2t_core::harness::summary_text(&result.report));
            if let Some(dir) = &cfg.output_dir {
                println!("report written to {}", Path::new(dir).display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let default_level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default_level)),
        )
        .with_writer(std::io::stderr)
        .init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
