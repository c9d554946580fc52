//! Run configuration: a JSON file, overridden field by field from flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use k2t_core::harness::PipelineConfig;
use k2t_core::paths::{DEFAULT_MAX_HOPS, DEFAULT_MAX_PATHS};
use k2t_core::transform::{Limits, DEFAULT_MAX_SENTENCES, DEFAULT_MAX_TOKENS, DEFAULT_TOP_M};
use k2t_core::{MatcherConfig, Method};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable naming a config file when `--config` is absent.
pub const CONFIG_ENV: &str = "K2T_CONFIG";

/// Which scorer picks the answers.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum ScorerSpec {
    #[default]
    Lexical,
    /// Command line or `http(s)://` URL of a scorer plugin.
    External(String),
}

impl FromStr for ScorerSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            _ if s == "lexical" => Ok(ScorerSpec::Lexical),
            Some(("external", rest)) if !rest.trim().is_empty() => {
                Ok(ScorerSpec::External(rest.trim().to_string()))
            }
            _ => Err(format!(
                "scorer must be \"lexical\" or \"external:<command-or-url>\", got {s:?}"
            )),
        }
    }
}

impl fmt::Display for ScorerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScorerSpec::Lexical => f.write_str("lexical"),
            ScorerSpec::External(e) => write!(f, "external:{e}"),
        }
    }
}

impl Serialize for ScorerSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ScorerSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Source of paraphrases for the paraphrase and full methods.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum ParaphraserSpec {
    /// The rewrite-rule table (shipped, or `rules` when set).
    #[default]
    Rules,
    Identity,
    External(String),
}

impl FromStr for ParaphraserSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            _ if s == "rules" => Ok(ParaphraserSpec::Rules),
            _ if s == "identity" => Ok(ParaphraserSpec::Identity),
            Some(("external", rest)) if !rest.trim().is_empty() => {
                Ok(ParaphraserSpec::External(rest.trim().to_string()))
            }
            _ => Err(format!(
                "paraphraser must be \"rules\", \"identity\" or \"external:<command-or-url>\", got {s:?}"
            )),
        }
    }
}

impl fmt::Display for ParaphraserSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParaphraserSpec::Rules => f.write_str("rules"),
            ParaphraserSpec::Identity => f.write_str("identity"),
            ParaphraserSpec::External(e) => write!(f, "external:{e}"),
        }
    }
}

impl Serialize for ParaphraserSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ParaphraserSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Everything a transform or evaluate run needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Triple TSV or graph snapshot (`.json`).
    pub graph: Option<PathBuf>,
    /// Relation table; the shipped one when absent.
    pub relations: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    /// Corpus file or directory, indexed in memory when `index` is absent.
    pub corpus: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub golden: Option<PathBuf>,
    /// Skill tags; `skills.json` next to the dataset is used when absent.
    pub skills: Option<PathBuf>,
    /// Matcher settings; the shipped ones when absent.
    pub matcher: Option<PathBuf>,
    /// Rewrite rules for the rule paraphraser.
    pub rules: Option<PathBuf>,
    pub method: Method,
    pub max_hops: usize,
    pub top_m: usize,
    pub max_paths: usize,
    pub max_tokens: usize,
    pub max_sentences: usize,
    pub separator: String,
    pub scorer: ScorerSpec,
    pub paraphraser: ParaphraserSpec,
    pub plugin_timeout_secs: f64,
    pub output_dir: Option<PathBuf>,
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            graph: None,
            relations: None,
            dataset: None,
            corpus: None,
            index: None,
            golden: None,
            skills: None,
            matcher: None,
            rules: None,
            method: Method::Template,
            max_hops: DEFAULT_MAX_HOPS,
            top_m: DEFAULT_TOP_M,
            max_paths: DEFAULT_MAX_PATHS,
            max_tokens: DEFAULT_MAX_TOKENS,
            max_sentences: DEFAULT_MAX_SENTENCES,
            separator: k2t_core::harness::DEFAULT_SEPARATOR.to_string(),
            scorer: ScorerSpec::Lexical,
            paraphraser: ParaphraserSpec::Rules,
            plugin_timeout_secs: k2t_core::plugin::DEFAULT_TIMEOUT.as_secs_f64(),
            output_dir: None,
            jobs: 1,
        }
    }
}

impl RunConfig {
    pub fn from_json(json: &str) -> Result<Self, CliError> {
        serde_json::from_str(json).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&json).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn plugin_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.plugin_timeout_secs)
    }

    /// Check every invariant that does not need file contents. Runs before
    /// any input is read or output written.
    pub fn validate(&self, needs_dataset: bool) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.max_hops < 1 {
            return bad("max_hops must be at least 1".into());
        }
        if self.top_m < 1 {
            return bad("top_m must be at least 1".into());
        }
        if self.max_paths < 1 {
            return bad("max_paths must be at least 1".into());
        }
        if self.max_tokens < 1 || self.max_sentences < 1 {
            return bad("max_tokens and max_sentences must be at least 1".into());
        }
        if self.jobs < 1 {
            return bad("jobs must be at least 1".into());
        }
        if !(self.plugin_timeout_secs.is_finite() && self.plugin_timeout_secs > 0.0) {
            return bad(format!(
                "plugin timeout must be positive, got {}",
                self.plugin_timeout_secs
            ));
        }
        if needs_dataset && self.dataset.is_none() {
            return bad("a dataset is required".into());
        }
        if self.method.needs_graph() && self.graph.is_none() {
            return bad(format!("method {} requires a graph", self.method));
        }
        if self.method.needs_index() && self.index.is_none() && self.corpus.is_none() {
            return bad(format!(
                "method {} requires an index or a corpus",
                self.method
            ));
        }
        if self.method == Method::Golden && self.golden.is_none() {
            return bad("method golden requires a golden knowledge file".into());
        }
        for (name, path) in self.input_paths() {
            if !path.exists() {
                return bad(format!("{name} {} does not exist", path.display()));
            }
        }
        Ok(())
    }

    fn input_paths(&self) -> Vec<(&'static str, &Path)> {
        [
            ("graph", &self.graph),
            ("relations", &self.relations),
            ("dataset", &self.dataset),
            ("corpus", &self.corpus),
            ("index", &self.index),
            ("golden", &self.golden),
            ("skills", &self.skills),
            ("matcher", &self.matcher),
            ("rules", &self.rules),
        ]
        .into_iter()
        .filter_map(|(n, p)| p.as_deref().map(|p| (n, p)))
        .collect()
    }

    pub fn pipeline_config(&self, matcher: MatcherConfig) -> PipelineConfig {
        PipelineConfig {
            method: self.method,
            max_hops: self.max_hops,
            max_paths: self.max_paths,
            top_m: self.top_m,
            limits: Limits {
                max_sentences: self.max_sentences,
                max_tokens: self.max_tokens,
            },
            separator: self.separator.clone(),
            matcher,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scorer_spec_parsing() {
        assert_eq!(
            "lexical".parse::<ScorerSpec>().unwrap(),
            ScorerSpec::Lexical
        );
        assert_eq!(
            "external:python3 s.py --x".parse::<ScorerSpec>().unwrap(),
            ScorerSpec::External("python3 s.py --x".into())
        );
        assert_eq!(
            "external:http://h:1/score"
                .parse::<ScorerSpec>()
                .unwrap()
                .to_string(),
            "external:http://h:1/score"
        );
        assert!("external:".parse::<ScorerSpec>().is_err());
        assert!("bert".parse::<ScorerSpec>().is_err());
    }

    #[test]
    fn json_defaults_and_unknown_fields() {
        let c = RunConfig::from_json(r#"{"method":"full","max_hops":3}"#).unwrap();
        assert_eq!(c.method, Method::Full);
        assert_eq!(c.max_hops, 3);
        assert_eq!(c.top_m, 1);
        assert!(RunConfig::from_json(r#"{"hops":3}"#).is_err());
        let back = RunConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn invariants() {
        let ok = |c: &RunConfig| c.validate(false).is_ok();
        let base = RunConfig {
            method: Method::None,
            ..Default::default()
        };
        assert!(ok(&base));
        assert!(!ok(&RunConfig {
            max_hops: 0,
            ..base.clone()
        }));
        assert!(!ok(&RunConfig {
            top_m: 0,
            ..base.clone()
        }));
        assert!(!ok(&RunConfig {
            method: Method::Template,
            ..base.clone()
        }));
        assert!(!ok(&RunConfig {
            method: Method::Golden,
            ..base.clone()
        }));
        assert!(!ok(&RunConfig {
            dataset: Some("/nonexistent/k2t".into()),
            ..base.clone()
        }));
        assert!(base.validate(true).is_err());
    }
}
