//! Entity-substitution augmentation: copies of training sentences with
//! every gold span swapped for a same-kind term from a glossary.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedSentence, Corpus, EntityKind, EntitySpan};
use crate::error::{Error, Result};

/// Distinct gold surface strings per entity kind, sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Glossary {
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
}

impl Glossary {
    pub fn terms(&self, kind: EntityKind) -> &[String] {
        match kind {
            EntityKind::M => &self.methods,
            EntityKind::D => &self.datasets,
        }
    }
}

pub fn build_glossaries(corpus: &Corpus) -> Glossary {
    let mut m = BTreeSet::new();
    let mut d = BTreeSet::new();
    for s in &corpus.sentences {
        for (kind, surface) in s.surfaces() {
            match kind {
                EntityKind::M => m.insert(surface),
                EntityKind::D => d.insert(surface),
            };
        }
    }
    Glossary {
        methods: m.into_iter().collect(),
        datasets: d.into_iter().collect(),
    }
}

/// Number of sentences produced for `multiplier` times `n` originals.
pub fn augmented_size(n: usize, multiplier: f64) -> usize {
    (multiplier * n as f64).round() as usize
}

/// Returns the originals followed by `round(multiplier * n) - n` synthetic
/// sentences. Each synthetic sentence copies a uniformly chosen original
/// and replaces every span with a uniformly chosen glossary term of the
/// same kind. With `allow_self` false the current surface is excluded.
pub fn augment(
    corpus: &Corpus,
    multiplier: f64,
    glossary: &Glossary,
    seed: u64,
    allow_self: bool,
) -> Result<Corpus> {
    if !(multiplier >= 1.0 && multiplier.is_finite()) {
        return Err(Error::Config(format!("multiplier {multiplier} must be >= 1")));
    }
    let n = corpus.len();
    let total = augmented_size(n, multiplier);
    let mut sentences = corpus.sentences.clone();
    if total > n {
        if n == 0 {
            return Err(Error::Config("cannot augment an empty corpus".into()));
        }
        for kind in EntityKind::ALL {
            let used = corpus
                .sentences
                .iter()
                .any(|s| s.entities.iter().any(|e| e.kind == kind));
            let available = glossary.terms(kind).len();
            if used && (available == 0 || (!allow_self && available < 2)) {
                return Err(Error::Config(format!(
                    "glossary for {kind} entities has {available} terms, too few for substitution"
                )));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in n..total {
        let source = &corpus.sentences[rng.gen_range(0..n)];
        sentences.push(substitute(source, glossary, allow_self, &mut rng)?);
    }
    let name = if total == n {
        corpus.name.clone()
    } else {
        format!("{}-x{multiplier}", corpus.name)
    };
    Corpus::new(name, sentences)
}

fn substitute(
    source: &AnnotatedSentence,
    glossary: &Glossary,
    allow_self: bool,
    rng: &mut ChaCha8Rng,
) -> Result<AnnotatedSentence> {
    let chars: Vec<char> = source.text.chars().collect();
    let mut text = String::with_capacity(source.text.len());
    let mut entities = Vec::with_capacity(source.entities.len());
    let mut pos = 0;
    let mut out_len = 0;
    for span in &source.entities {
        let gap: String = chars[pos..span.start].iter().collect();
        out_len += span.start - pos;
        text.push_str(&gap);
        let own = span.surface(&source.text);
        let pool: Vec<&String> = glossary
            .terms(span.kind)
            .iter()
            .filter(|t| allow_self || **t != own)
            .collect();
        let term = pool.choose(rng).ok_or_else(|| {
            Error::Config(format!("no substitute available for {} entity `{own}`", span.kind))
        })?;
        let len = term.chars().count();
        entities.push(EntitySpan::new(out_len, out_len + len, span.kind));
        text.push_str(term);
        out_len += len;
        pos = span.end;
    }
    text.extend(&chars[pos..]);
    AnnotatedSentence::new(text, entities)
}
