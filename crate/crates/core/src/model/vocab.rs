use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::rules::{RuleLexicon, RuleTag};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

/// Character to embedding-row map. Row 0 is PAD, row 1 is UNK.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharVocabulary {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl Serialize for CharVocabulary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.chars.iter().collect::<String>().serialize(s)
    }
}

impl<'de> Deserialize<'de> for CharVocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        CharVocabulary::from_chars(s.chars()).map_err(serde::de::Error::custom)
    }
}

impl CharVocabulary {
    /// Every distinct character of the corpus, in code-point order.
    pub fn build(corpus: &Corpus) -> Self {
        let set: BTreeSet<char> = corpus
            .sentences
            .iter()
            .flat_map(|s| s.text.chars())
            .collect();
        CharVocabulary::from_chars(set).expect("set has no duplicates")
    }

    pub fn from_chars(chars: impl IntoIterator<Item = char>) -> Result<Self> {
        let chars: Vec<char> = chars.into_iter().collect();
        let mut index = HashMap::with_capacity(chars.len());
        for (i, &c) in chars.iter().enumerate() {
            if index.insert(c, i + 2).is_some() {
                return Err(Error::Checkpoint(format!("duplicate vocabulary character {c:?}")));
            }
        }
        Ok(CharVocabulary { chars, index })
    }

    /// Table rows including PAD and UNK.
    pub fn len(&self) -> usize {
        self.chars.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn id(&self, c: char) -> usize {
        self.index.get(&c).copied().unwrap_or(UNK_ID)
    }
}

/// Index form of one sentence. `mask[i]` is false exactly at padding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSequence {
    pub char_ids: Vec<usize>,
    pub rule_ids: Vec<usize>,
    pub mask: Vec<bool>,
}

impl EncodedSequence {
    /// Encodes `text`, truncating to `max_len` characters with a warning.
    pub fn new(text: &str, vocab: &CharVocabulary, lexicon: &RuleLexicon, max_len: usize) -> Self {
        let rules = lexicon.tag(text);
        let mut char_ids: Vec<usize> = text.chars().map(|c| vocab.id(c)).collect();
        let mut rule_ids = rules.indices();
        if char_ids.len() > max_len {
            log::warn!(
                "sentence of {} characters truncated to {}",
                char_ids.len(),
                max_len
            );
            char_ids.truncate(max_len);
            rule_ids.truncate(max_len);
        }
        let mask = vec![true; char_ids.len()];
        EncodedSequence {
            char_ids,
            rule_ids,
            mask,
        }
    }

    pub fn len(&self) -> usize {
        self.char_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.char_ids.is_empty()
    }

    /// Number of real (unpadded) positions.
    pub fn real_len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Appends PAD positions up to `len`.
    pub fn pad_to(&self, len: usize) -> Self {
        let mut out = self.clone();
        while out.char_ids.len() < len {
            out.char_ids.push(PAD_ID);
            out.rule_ids.push(RuleTag::Pad.index());
            out.mask.push(false);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.rule_ids.len() != self.char_ids.len() || self.mask.len() != self.char_ids.len() {
            return Err(Error::Shape("encoded sequence fields differ in length".into()));
        }
        if self.char_ids.is_empty() {
            return Err(Error::Shape("empty sequence".into()));
        }
        let first_pad = self.mask.iter().position(|&m| !m).unwrap_or(self.mask.len());
        if first_pad == 0 || self.mask[first_pad..].iter().any(|&m| m) {
            return Err(Error::Shape("padding must be a non-empty sequence's suffix".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::AnnotatedSentence;

    #[test]
    fn reserved_rows_and_unknowns() {
        let c = Corpus::new("c", vec![AnnotatedSentence::unannotated("abca")]).unwrap();
        let v = CharVocabulary::build(&c);
        assert_eq!(v.len(), 5);
        assert_eq!(v.id('a'), 2);
        assert_eq!(v.id('z'), UNK_ID);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<CharVocabulary>(&json).unwrap(), v);
    }

    #[test]
    fn encode_pad_and_truncate() {
        let c = Corpus::new("c", vec![AnnotatedSentence::unannotated("SVM x")]).unwrap();
        let v = CharVocabulary::build(&c);
        let lex = RuleLexicon::new(&["SVM"], &[], &[]).unwrap();
        let e = EncodedSequence::new("SVM x", &v, &lex, 600);
        assert_eq!(e.rule_ids, vec![0, 1, 1, 5, 5]);
        let p = e.pad_to(8);
        p.validate().unwrap();
        assert_eq!(p.real_len(), 5);
        assert_eq!(&p.char_ids[5..], &[PAD_ID; 3]);
        assert_eq!(&p.rule_ids[5..], &[6; 3]);
        let t = EncodedSequence::new("SVM x", &v, &lex, 3);
        assert_eq!(t.len(), 3);
    }
}
