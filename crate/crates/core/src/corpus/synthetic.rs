use std::fs;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AnnotatedSentence, Corpus, EntityKind, EntitySpan};
use crate::error::{Error, Result};

/// A sentence template. `{M}` and `{D}` mark method and dataset slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSpec {
    pub text: String,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

/// Declarative grammar for synthetic annotated corpora: weighted templates
/// plus one term pool per entity kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub name: String,
    pub templates: Vec<TemplateSpec>,
    #[serde(default)]
    pub methods: Vec<String>,
    #[serde(default)]
    pub datasets: Vec<String>,
}

enum Piece<'a> {
    Text(&'a str),
    Slot(EntityKind),
}

fn parse_template(text: &str) -> Vec<Piece<'_>> {
    let mut pieces = Vec::new();
    let mut rest = text;
    loop {
        let next = ["{M}", "{D}"]
            .iter()
            .filter_map(|tok| rest.find(tok).map(|i| (i, *tok)))
            .min_by_key(|(i, _)| *i);
        match next {
            Some((i, tok)) => {
                if i > 0 {
                    pieces.push(Piece::Text(&rest[..i]));
                }
                pieces.push(Piece::Slot(if tok == "{M}" {
                    EntityKind::M
                } else {
                    EntityKind::D
                }));
                rest = &rest[i + tok.len()..];
            }
            None => {
                if !rest.is_empty() {
                    pieces.push(Piece::Text(rest));
                }
                return pieces;
            }
        }
    }
}

const PRESETS: &[(&str, &str)] = &[
    ("nlp", include_str!("../../grammars/nlp.toml")),
    ("cv", include_str!("../../grammars/cv.toml")),
    ("dm", include_str!("../../grammars/dm.toml")),
    ("ai", include_str!("../../grammars/ai.toml")),
];

impl SyntheticSpec {
    pub fn from_toml(source: &str) -> Result<Self> {
        let spec: SyntheticSpec =
            toml::from_str(source).map_err(|e| Error::Config(format!("grammar: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Names of the bundled area grammars.
    pub fn preset_names() -> impl Iterator<Item = &'static str> {
        PRESETS.iter().map(|(n, _)| *n)
    }

    pub fn preset(name: &str) -> Result<Self> {
        PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, src)| Self::from_toml(src))
            .unwrap_or_else(|| Err(Error::Config(format!("unknown grammar preset `{name}`"))))
    }

    pub fn pool(&self, kind: EntityKind) -> &[String] {
        match kind {
            EntityKind::M => &self.methods,
            EntityKind::D => &self.datasets,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Config("grammar name must be non-empty".into()));
        }
        if self.templates.is_empty() {
            return Err(Error::Config(format!("grammar `{}` has no templates", self.name)));
        }
        for t in &self.templates {
            if !(t.weight.is_finite() && t.weight > 0.0) {
                return Err(Error::Config(format!(
                    "template `{}` has non-positive weight {}",
                    t.text, t.weight
                )));
            }
            for piece in parse_template(&t.text) {
                if let Piece::Slot(kind) = piece {
                    if self.pool(kind).is_empty() {
                        return Err(Error::Config(format!(
                            "template `{}` uses a {kind} slot but the {kind} pool is empty",
                            t.text
                        )));
                    }
                }
            }
        }
        for term in self.methods.iter().chain(&self.datasets) {
            if term.trim().is_empty() || term.trim() != term {
                return Err(Error::Config(format!(
                    "pool term `{term}` is empty or has surrounding whitespace"
                )));
            }
        }
        Ok(())
    }

    /// Expected number of slots of `kind` per generated sentence.
    pub fn expected_slots(&self, kind: EntityKind) -> f64 {
        let total: f64 = self.templates.iter().map(|t| t.weight).sum();
        self.templates
            .iter()
            .map(|t| {
                let n = parse_template(&t.text)
                    .iter()
                    .filter(|p| matches!(p, Piece::Slot(k) if *k == kind))
                    .count();
                t.weight * n as f64
            })
            .sum::<f64>()
            / total
    }
}

/// Fills `n` templates drawn by weight; every slot takes a uniformly chosen
/// term from its pool and becomes a gold span.
pub fn generate_synthetic(spec: &SyntheticSpec, n: usize, seed: u64) -> Result<Corpus> {
    spec.validate()?;
    let weights = WeightedIndex::new(spec.templates.iter().map(|t| t.weight))
        .map_err(|e| Error::Config(format!("template weights: {e}")))?;
    let parsed: Vec<Vec<Piece>> = spec.templates.iter().map(|t| parse_template(&t.text)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sentences = Vec::with_capacity(n);
    for _ in 0..n {
        let pieces = &parsed[weights.sample(&mut rng)];
        let mut text = String::new();
        let mut len = 0usize;
        let mut entities = Vec::new();
        for piece in pieces {
            match piece {
                Piece::Text(t) => {
                    text.push_str(t);
                    len += t.chars().count();
                }
                Piece::Slot(kind) => {
                    let term = spec
                        .pool(*kind)
                        .choose(&mut rng)
                        .expect("pool validated non-empty");
                    let start = len;
                    text.push_str(term);
                    len += term.chars().count();
                    entities.push(EntitySpan::new(start, len, *kind));
                }
            }
        }
        sentences.push(AnnotatedSentence::new(text, entities)?);
    }
    Corpus::new(spec.name.clone(), sentences)
}
