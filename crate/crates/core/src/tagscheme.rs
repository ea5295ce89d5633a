//! Character-level BIO tags and the conversion between entity spans and
//! tag sequences.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::{AnnotatedSentence, EntityKind, EntitySpan};
use crate::error::{Error, Result};

/// Output tag alphabet. The discriminant is the tag index used by the
/// network and the CRF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    BeginMethod = 0,
    InsideMethod = 1,
    BeginDataset = 2,
    InsideDataset = 3,
    Outside = 4,
    Pad = 5,
}

pub const NUM_TAGS: usize = 6;

impl Tag {
    pub const ALL: [Tag; NUM_TAGS] = [
        Tag::BeginMethod,
        Tag::InsideMethod,
        Tag::BeginDataset,
        Tag::InsideDataset,
        Tag::Outside,
        Tag::Pad,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Tag> {
        Tag::ALL.get(i).copied()
    }

    pub fn begin(kind: EntityKind) -> Tag {
        match kind {
            EntityKind::M => Tag::BeginMethod,
            EntityKind::D => Tag::BeginDataset,
        }
    }

    pub fn inside(kind: EntityKind) -> Tag {
        match kind {
            EntityKind::M => Tag::InsideMethod,
            EntityKind::D => Tag::InsideDataset,
        }
    }

    /// Entity kind of a B or I tag.
    pub fn kind(self) -> Option<EntityKind> {
        match self {
            Tag::BeginMethod | Tag::InsideMethod => Some(EntityKind::M),
            Tag::BeginDataset | Tag::InsideDataset => Some(EntityKind::D),
            Tag::Outside | Tag::Pad => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::BeginMethod => "B-M",
            Tag::InsideMethod => "I-M",
            Tag::BeginDataset => "B-D",
            Tag::InsideDataset => "I-D",
            Tag::Outside => "O",
            Tag::Pad => "PAD",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Tag::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Annotation(format!("unknown tag `{s}`")))
    }
}

impl Serialize for Tag {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Tag {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TagSequence(pub Vec<Tag>);

impl TagSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.0.iter().map(|t| t.index()).collect()
    }

    pub fn from_indices(idx: &[usize]) -> Result<Self> {
        idx.iter()
            .map(|&i| Tag::from_index(i).ok_or_else(|| Error::Shape(format!("tag index {i}"))))
            .collect::<Result<Vec<_>>>()
            .map(TagSequence)
    }

    /// Gold well-formedness: no PAD, and every I-X follows B-X or I-X.
    pub fn is_well_formed(&self) -> bool {
        let mut prev: Option<EntityKind> = None;
        for &t in &self.0 {
            match t {
                Tag::Pad => return false,
                Tag::InsideMethod | Tag::InsideDataset if prev != t.kind() => return false,
                _ => {}
            }
            prev = t.kind();
        }
        true
    }
}

impl fmt::Display for TagSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(|t| t.as_str()).collect();
        f.write_str(&names.join(" "))
    }
}

/// Span start gets B-X, the rest of the span I-X, everything else O.
pub fn encode_tags(sentence: &AnnotatedSentence) -> Result<TagSequence> {
    let n = sentence.char_len();
    let mut tags = vec![Tag::Outside; n];
    let mut taken = vec![false; n];
    for span in &sentence.entities {
        if span.start >= span.end || span.end > n {
            return Err(Error::Annotation(format!(
                "span ({}, {}) out of bounds for length {n}",
                span.start, span.end
            )));
        }
        if taken[span.start..span.end].iter().any(|&t| t) {
            return Err(Error::Annotation(format!(
                "span ({}, {}) overlaps another span",
                span.start, span.end
            )));
        }
        taken[span.start..span.end].iter_mut().for_each(|t| *t = true);
        tags[span.start] = Tag::begin(span.kind);
        for t in &mut tags[span.start + 1..span.end] {
            *t = Tag::inside(span.kind);
        }
    }
    Ok(TagSequence(tags))
}

/// Extracts maximal `B-X (I-X)*` runs. A stray `I-X` (not continuing an
/// entity of the same type) opens a new span. Whitespace at either edge of
/// a decoded run is trimmed off; runs that are only whitespace are dropped.
pub fn decode_entities(text: &str, tags: &TagSequence) -> Result<Vec<EntitySpan>> {
    let chars: Vec<char> = text.chars().collect();
    if chars.len() != tags.len() {
        return Err(Error::Shape(format!(
            "{} tags for {} characters",
            tags.len(),
            chars.len()
        )));
    }
    let mut spans = Vec::new();
    let mut open: Option<(usize, EntityKind)> = None;
    let close = |open: &mut Option<(usize, EntityKind)>, end: usize, spans: &mut Vec<EntitySpan>| {
        if let Some((start, kind)) = open.take() {
            let mut s = start;
            let mut e = end;
            while s < e && chars[s].is_whitespace() {
                s += 1;
            }
            while e > s && chars[e - 1].is_whitespace() {
                e -= 1;
            }
            if s < e {
                spans.push(EntitySpan::new(s, e, kind));
            }
        }
    };
    for (i, &tag) in tags.0.iter().enumerate() {
        match tag {
            Tag::Pad => {
                return Err(Error::Shape(format!("PAD tag at real position {i}")));
            }
            Tag::Outside => close(&mut open, i, &mut spans),
            Tag::BeginMethod | Tag::BeginDataset => {
                close(&mut open, i, &mut spans);
                open = Some((i, tag.kind().expect("B tag has a kind")));
            }
            Tag::InsideMethod | Tag::InsideDataset => {
                let kind = tag.kind().expect("I tag has a kind");
                if !matches!(open, Some((_, k)) if k == kind) {
                    close(&mut open, i, &mut spans);
                    open = Some((i, kind));
                }
            }
        }
    }
    close(&mut open, chars.len(), &mut spans);
    Ok(spans)
}
