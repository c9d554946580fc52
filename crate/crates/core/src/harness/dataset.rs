//! CommonsenseQA-style JSON-lines datasets, golden explanations and skill
//! tag sidecars.

use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// File name of the optional skills sidecar looked up next to a dataset.
pub const SKILLS_SIDECAR: &str = "skills.json";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed JSON: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("malformed skills sidecar: {0}")]
    Skills(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub label: String,
    pub text: String,
}

/// One multiple-choice question.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub stem: String,
    pub candidates: Vec<Candidate>,
    /// Absent in prediction-only data.
    pub gold: Option<String>,
    #[serde(default)]
    pub skills: Vec<String>,
}

impl Example {
    pub fn candidate(&self, label: &str) -> Option<&Candidate> {
        self.candidates.iter().find(|c| c.label == label)
    }

    fn validate(&self) -> Result<(), String> {
        if self.candidates.len() < 2 {
            return Err(format!("example {} has fewer than 2 candidates", self.id));
        }
        let mut labels = HashSet::new();
        for c in &self.candidates {
            if !labels.insert(c.label.as_str()) {
                return Err(format!("example {} repeats label {:?}", self.id, c.label));
            }
        }
        if let Some(gold) = &self.gold {
            if !labels.contains(gold.as_str()) {
                return Err(format!(
                    "example {} has answerKey {gold:?} outside its labels",
                    self.id
                ));
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct RawChoice {
    label: String,
    text: String,
}

#[derive(Deserialize)]
struct RawQuestion {
    stem: String,
    choices: Vec<RawChoice>,
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    question: RawQuestion,
    #[serde(rename = "answerKey", default)]
    answer_key: Option<String>,
}

/// Parse JSON-lines records. Blank lines are ignored.
pub fn parse_dataset<R: BufRead>(reader: R, origin: &Path) -> Result<Vec<Example>, DatasetError> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|source| DatasetError::Io {
            path: origin.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|source| DatasetError::Json {
            line: line_no,
            source,
        })?;
        let example = Example {
            id: raw.id,
            stem: raw.question.stem,
            candidates: raw
                .question
                .choices
                .into_iter()
                .map(|c| Candidate {
                    label: c.label,
                    text: c.text,
                })
                .collect(),
            gold: raw.answer_key.filter(|k| !k.is_empty()),
            skills: Vec::new(),
        };
        example
            .validate()
            .map_err(|message| DatasetError::Invalid {
                line: line_no,
                message,
            })?;
        if !ids.insert(example.id.clone()) {
            return Err(DatasetError::DuplicateId(example.id));
        }
        out.push(example);
    }
    Ok(out)
}

fn open(path: &Path) -> Result<std::io::BufReader<std::fs::File>, DatasetError> {
    std::fs::File::open(path)
        .map(std::io::BufReader::new)
        .map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Load a dataset and merge skill tags from `skills` or, when that is
/// `None`, from a `skills.json` next to the dataset if one exists.
pub fn load_dataset(path: &Path, skills: Option<&Path>) -> Result<Vec<Example>, DatasetError> {
    let mut examples = parse_dataset(open(path)?, path)?;
    let sidecar = match skills {
        Some(p) => Some(p.to_path_buf()),
        None => path
            .parent()
            .map(|d| d.join(SKILLS_SIDECAR))
            .filter(|p| p.is_file()),
    };
    if let Some(sidecar) = sidecar {
        let text = std::fs::read_to_string(&sidecar).map_err(|source| DatasetError::Io {
            path: sidecar.clone(),
            source,
        })?;
        let tags = parse_skills(&text)?;
        merge_skills(&mut examples, &tags);
    }
    Ok(examples)
}

/// Parse a skills sidecar: a JSON object mapping id to a tag list.
pub fn parse_skills(json: &str) -> Result<BTreeMap<String, Vec<String>>, DatasetError> {
    serde_json::from_str(json).map_err(|e| DatasetError::Skills(e.to_string()))
}

/// Attach tags to examples by id; tags for unknown ids are ignored.
pub fn merge_skills(examples: &mut [Example], tags: &BTreeMap<String, Vec<String>>) {
    for ex in examples {
        if let Some(t) = tags.get(&ex.id) {
            let mut t = t.clone();
            t.sort();
            t.dedup();
            ex.skills = t;
        }
    }
}

#[derive(Deserialize)]
struct RawExplanation {
    id: String,
    explanation: String,
}

/// Parse `{"id", "explanation"}` lines into an id → text map.
pub fn parse_golden<R: BufRead>(
    reader: R,
    origin: &Path,
) -> Result<BTreeMap<String, String>, DatasetError> {
    let mut out = BTreeMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| DatasetError::Io {
            path: origin.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawExplanation =
            serde_json::from_str(&line).map_err(|source| DatasetError::Json {
                line: n + 1,
                source,
            })?;
        if out.insert(raw.id.clone(), raw.explanation).is_some() {
            return Err(DatasetError::DuplicateId(raw.id));
        }
    }
    Ok(out)
}

pub fn load_golden_knowledge(path: &Path) -> Result<BTreeMap<String, String>, DatasetError> {
    parse_golden(open(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<Example>, DatasetError> {
        parse_dataset(text.as_bytes(), Path::new("mem"))
    }

    const RECORD: &str = r#"{"id":"q1","question":{"question_concept":"talk","stem":"What could people do that involves talking?","choices":[{"label":"A","text":"confession"},{"label":"B","text":"state park"},{"label":"C","text":"sing"},{"label":"D","text":"carnival"},{"label":"E","text":"opera"}]},"answerKey":"A"}"#;

    #[test]
    fn empty_file() {
        assert!(parse("").unwrap().is_empty());
    }

    #[test]
    fn well_formed_record() {
        let ex = parse(RECORD).unwrap();
        assert_eq!(ex.len(), 1);
        let e = &ex[0];
        assert_eq!(e.candidates.len(), 5);
        assert_eq!(e.gold.as_deref(), Some("A"));
        assert_eq!(e.candidate("E").unwrap().text, "opera");
        assert_eq!(e.stem, "What could people do that involves talking?");
    }

    #[test]
    fn answer_key_outside_labels() {
        let bad = RECORD.replace(r#""answerKey":"A""#, r#""answerKey":"F""#);
        assert!(matches!(
            parse(&bad),
            Err(DatasetError::Invalid { line: 1, .. })
        ));
    }

    #[test]
    fn missing_answer_key_is_prediction_only() {
        let rec = RECORD.replace(r#","answerKey":"A""#, "");
        assert_eq!(parse(&rec).unwrap()[0].gold, None);
    }

    #[test]
    fn malformed_line_reports_number() {
        let text = format!("{RECORD}\n\n{{not json");
        assert!(matches!(
            parse(&text),
            Err(DatasetError::Json { line: 3, .. })
        ));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = format!("{RECORD}\n{RECORD}");
        assert!(matches!(parse(&text), Err(DatasetError::DuplicateId(id)) if id == "q1"));
    }

    #[test]
    fn too_few_or_repeated_labels() {
        let one = r#"{"id":"x","question":{"stem":"s","choices":[{"label":"A","text":"a"}]}}"#;
        assert!(parse(one).is_err());
        let rep = r#"{"id":"x","question":{"stem":"s","choices":[{"label":"A","text":"a"},{"label":"A","text":"b"}]}}"#;
        assert!(parse(rep).is_err());
    }

    #[test]
    fn sidecar_is_merged_when_present() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("dev.jsonl");
        std::fs::write(&data, RECORD).unwrap();
        assert!(load_dataset(&data, None).unwrap()[0].skills.is_empty());
        std::fs::write(
            dir.path().join(SKILLS_SIDECAR),
            r#"{"q1":["Spatial","Causal","Spatial"],"zz":["X"]}"#,
        )
        .unwrap();
        assert_eq!(
            load_dataset(&data, None).unwrap()[0].skills,
            vec!["Causal", "Spatial"]
        );
    }

    #[test]
    fn golden_parsing() {
        let g = parse_golden("".as_bytes(), Path::new("mem")).unwrap();
        assert!(g.is_empty());
        let text = "{\"id\":\"q1\",\"explanation\":\"confession involves talking.\"}\n";
        let g = parse_golden(text.as_bytes(), Path::new("mem")).unwrap();
        assert_eq!(g["q1"], "confession involves talking.");
        let dup = format!("{text}{text}");
        assert!(matches!(
            parse_golden(dup.as_bytes(), Path::new("mem")),
            Err(DatasetError::DuplicateId(_))
        ));
    }
}
