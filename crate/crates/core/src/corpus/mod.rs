//! Annotated sentence corpora: types, the JSON Lines format, segmentation,
//! splitting, mixing and synthetic generation.
//!
//! All offsets are Unicode code-point offsets into the sentence text.

mod segment;
mod split;
mod synthetic;

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use segment::{read_paragraphs, segment_sentences, ABBREVIATIONS};
pub use split::{build_mixed, build_mixed_with_provenance, split_corpus, SplitSpec};
pub use synthetic::{generate_synthetic, SyntheticSpec, TemplateSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityKind {
    /// Method entity.
    M,
    /// Dataset entity.
    D,
}

impl EntityKind {
    pub const ALL: [EntityKind; 2] = [EntityKind::M, EntityKind::D];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::M => "M",
            EntityKind::D => "D",
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A typed half-open character range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub kind: EntityKind,
}

impl EntitySpan {
    pub fn new(start: usize, end: usize, kind: EntityKind) -> Self {
        EntitySpan { start, end, kind }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &EntitySpan) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// Surface string of the span within `text`.
    pub fn surface(&self, text: &str) -> String {
        text.chars().skip(self.start).take(self.len()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    pub text: String,
    pub entities: Vec<EntitySpan>,
}

impl AnnotatedSentence {
    pub fn new(text: impl Into<String>, entities: Vec<EntitySpan>) -> Result<Self> {
        let sentence = AnnotatedSentence {
            text: text.into(),
            entities,
        };
        sentence.validate()?;
        Ok(sentence)
    }

    pub fn unannotated(text: impl Into<String>) -> Self {
        AnnotatedSentence {
            text: text.into(),
            entities: Vec::new(),
        }
    }

    /// Number of characters (code points).
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    pub fn validate(&self) -> Result<()> {
        if self.text.is_empty() {
            return Err(Error::Annotation("sentence text is empty".into()));
        }
        let chars: Vec<char> = self.text.chars().collect();
        let mut prev: Option<&EntitySpan> = None;
        for span in &self.entities {
            if span.start >= span.end || span.end > chars.len() {
                return Err(Error::Annotation(format!(
                    "span ({}, {}) out of bounds for text of length {}",
                    span.start,
                    span.end,
                    chars.len()
                )));
            }
            if chars[span.start].is_whitespace() || chars[span.end - 1].is_whitespace() {
                return Err(Error::Annotation(format!(
                    "span ({}, {}) has leading or trailing whitespace",
                    span.start, span.end
                )));
            }
            if let Some(p) = prev {
                if span.start < p.start {
                    return Err(Error::Annotation("entities are not sorted by start".into()));
                }
                if p.overlaps(span) {
                    return Err(Error::Annotation(format!(
                        "spans ({}, {}) and ({}, {}) overlap",
                        p.start, p.end, span.start, span.end
                    )));
                }
            }
            prev = Some(span);
        }
        Ok(())
    }

    pub fn surfaces(&self) -> impl Iterator<Item = (EntityKind, String)> + '_ {
        self.entities
            .iter()
            .map(|s| (s.kind, s.surface(&self.text)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub name: String,
    pub sentences: Vec<AnnotatedSentence>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, sentences: Vec<AnnotatedSentence>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::Config("corpus name must be non-empty".into()));
        }
        Ok(Corpus { name, sentences })
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.sentences.iter().enumerate() {
            s.validate()
                .map_err(|e| Error::Annotation(format!("{} sentence {}: {}", self.name, i, e)))?;
        }
        Ok(())
    }

    pub fn entity_count(&self) -> usize {
        self.sentences.iter().map(|s| s.entities.len()).sum()
    }

    /// Parses JSON Lines text. Blank lines are skipped.
    pub fn from_jsonl(name: impl Into<String>, source: &str) -> Result<Self> {
        let name = name.into();
        let mut sentences = Vec::new();
        for (i, line) in source.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            sentences.push(parse_line(&name, i + 1, line)?);
        }
        Corpus::new(name, sentences)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.sentences {
            out.push_str(&serde_json::to_string(s).expect("sentence serializes"));
            out.push('\n');
        }
        out
    }
}

fn parse_line(name: &str, line_no: usize, line: &str) -> Result<AnnotatedSentence> {
    let sentence: AnnotatedSentence = serde_json::from_str(line).map_err(|e| Error::Parse {
        path: name.to_string(),
        line: line_no,
        message: e.to_string(),
    })?;
    sentence.validate().map_err(|e| Error::Parse {
        path: name.to_string(),
        line: line_no,
        message: e.to_string(),
    })?;
    Ok(sentence)
}

/// Loads a JSONL corpus; the corpus name is the file stem.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "corpus".to_string());
    let display = path.display().to_string();
    let mut sentences = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        sentences.push(parse_line(&display, i + 1, &line)?);
    }
    Corpus::new(name, sentences)
}

pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(corpus.to_jsonl().as_bytes())
        .map_err(|e| Error::io(path, e))
}
