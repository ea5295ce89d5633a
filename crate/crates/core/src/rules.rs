//! Rule tags from one blacklist and two whitelists. Rule tags feed the
//! rule-embedding table as weak supervision.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RuleTag {
    #[serde(rename = "B-M")]
    BeginMethod = 0,
    #[serde(rename = "I-M")]
    InsideMethod = 1,
    #[serde(rename = "B-D")]
    BeginDataset = 2,
    #[serde(rename = "I-D")]
    InsideDataset = 3,
    #[serde(rename = "O")]
    Outside = 4,
    #[serde(rename = "UNK")]
    Unknown = 5,
    #[serde(rename = "PAD")]
    Pad = 6,
}

/// Rows of the rule-embedding table.
pub const NUM_RULE_TAGS: usize = 7;

impl RuleTag {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RuleTag::BeginMethod => "B-M",
            RuleTag::InsideMethod => "I-M",
            RuleTag::BeginDataset => "B-D",
            RuleTag::InsideDataset => "I-D",
            RuleTag::Outside => "O",
            RuleTag::Unknown => "UNK",
            RuleTag::Pad => "PAD",
        }
    }
}

impl fmt::Display for RuleTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RuleTagSequence(pub Vec<RuleTag>);

impl RuleTagSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.0.iter().map(|t| t.index()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ListKind {
    Method,
    Dataset,
    Black,
}

impl ListKind {
    fn name(self) -> &'static str {
        match self {
            ListKind::Method => "method whitelist",
            ListKind::Dataset => "dataset whitelist",
            ListKind::Black => "blacklist",
        }
    }
}

/// Case-folded, whitespace-collapsed form used for all comparisons.
fn normalize(term: &str) -> String {
    term.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Maximal alphanumeric runs as `[start, end)` character ranges.
fn tokens(chars: &[char]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_alphanumeric() {
            let start = i;
            while i < chars.len() && chars[i].is_alphanumeric() {
                i += 1;
            }
            out.push((start, i));
        } else {
            i += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuleLexicon {
    methods: BTreeSet<String>,
    datasets: BTreeSet<String>,
    blacklist: BTreeSet<String>,
    /// Longest term, in tokens.
    max_tokens: usize,
}

const DEFAULT_METHODS: &str = include_str!("../lexicons/methods.txt");
const DEFAULT_DATASETS: &str = include_str!("../lexicons/datasets.txt");
const DEFAULT_BLACKLIST: &str = include_str!("../lexicons/blacklist.txt");

fn parse_terms(source: &str) -> Vec<String> {
    source
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

impl RuleLexicon {
    pub fn new<S: AsRef<str>>(methods: &[S], datasets: &[S], blacklist: &[S]) -> Result<Self> {
        let mut lex = RuleLexicon::default();
        let lists = [
            (ListKind::Method, methods),
            (ListKind::Dataset, datasets),
            (ListKind::Black, blacklist),
        ];
        for (kind, terms) in lists {
            for term in terms {
                let key = normalize(term.as_ref());
                if key.is_empty() {
                    continue;
                }
                if let Some(other) = lex.lookup(&key) {
                    if other != kind {
                        return Err(Error::DuplicateTerm {
                            term: term.as_ref().trim().to_string(),
                            first: other.name(),
                            second: kind.name(),
                        });
                    }
                }
                let key_chars: Vec<char> = key.chars().collect();
                lex.max_tokens = lex.max_tokens.max(tokens(&key_chars).len());
                lex.set_mut(kind).insert(key);
            }
        }
        Ok(lex)
    }

    /// Small curated lists bundled with the crate.
    pub fn builtin() -> Self {
        RuleLexicon::new(
            &parse_terms(DEFAULT_METHODS),
            &parse_terms(DEFAULT_DATASETS),
            &parse_terms(DEFAULT_BLACKLIST),
        )
        .expect("bundled lexicons are disjoint")
    }

    /// Reads `methods.txt`, `datasets.txt` and `blacklist.txt` from `dir`.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        load_lexicon(
            dir.join("methods.txt"),
            dir.join("datasets.txt"),
            dir.join("blacklist.txt"),
        )
    }

    fn set_mut(&mut self, kind: ListKind) -> &mut BTreeSet<String> {
        match kind {
            ListKind::Method => &mut self.methods,
            ListKind::Dataset => &mut self.datasets,
            ListKind::Black => &mut self.blacklist,
        }
    }

    fn lookup(&self, key: &str) -> Option<ListKind> {
        if self.methods.contains(key) {
            Some(ListKind::Method)
        } else if self.datasets.contains(key) {
            Some(ListKind::Dataset)
        } else if self.blacklist.contains(key) {
            Some(ListKind::Black)
        } else {
            None
        }
    }

    /// Sizes of the method whitelist, dataset whitelist and blacklist.
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.methods.len(), self.datasets.len(), self.blacklist.len())
    }

    pub fn is_empty(&self) -> bool {
        self.sizes() == (0, 0, 0)
    }

    /// SHA-256 over the normalized contents of all three lists.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (tag, set) in [("M", &self.methods), ("D", &self.datasets), ("B", &self.blacklist)] {
            for term in set {
                h.update(tag.as_bytes());
                h.update([0u8]);
                h.update(term.as_bytes());
                h.update([b'\n']);
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Tags every character of `text`. Whole token windows are matched
    /// greedily, longest first; at equal length the method whitelist wins
    /// over the dataset whitelist, which wins over the blacklist.
    /// Characters outside any match are UNK.
    pub fn tag(&self, text: &str) -> RuleTagSequence {
        let chars: Vec<char> = text.chars().collect();
        let mut out = vec![RuleTag::Unknown; chars.len()];
        let toks = tokens(&chars);
        let mut i = 0;
        while i < toks.len() {
            let widest = self.max_tokens.min(toks.len() - i);
            let hit = (1..=widest).rev().find_map(|w| {
                let (start, _) = toks[i];
                let (_, end) = toks[i + w - 1];
                let surface: String = chars[start..end].iter().collect();
                self.lookup(&normalize(&surface)).map(|k| (w, start, end, k))
            });
            match hit {
                Some((w, start, end, kind)) => {
                    let (first, rest) = match kind {
                        ListKind::Method => (RuleTag::BeginMethod, RuleTag::InsideMethod),
                        ListKind::Dataset => (RuleTag::BeginDataset, RuleTag::InsideDataset),
                        ListKind::Black => (RuleTag::Outside, RuleTag::Outside),
                    };
                    out[start] = first;
                    out[start + 1..end].iter_mut().for_each(|t| *t = rest);
                    i += w;
                }
                None => i += 1,
            }
        }
        RuleTagSequence(out)
    }
}

fn read_terms(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_terms(&text))
}

/// Loads three one-term-per-line files. `#` lines are comments.
pub fn load_lexicon(
    method_path: impl AsRef<Path>,
    dataset_path: impl AsRef<Path>,
    blacklist_path: impl AsRef<Path>,
) -> Result<RuleLexicon> {
    RuleLexicon::new(
        &read_terms(method_path.as_ref())?,
        &read_terms(dataset_path.as_ref())?,
        &read_terms(blacklist_path.as_ref())?,
    )
}

pub fn rule_tags(text: &str, lexicon: &RuleLexicon) -> RuleTagSequence {
    lexicon.tag(text)
}
