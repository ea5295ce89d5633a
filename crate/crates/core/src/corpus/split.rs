use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Corpus;
use crate::error::{Error, Result};

/// Train/validation/test proportions held as integer parts of a whole, so
/// the three fractions are exact rationals summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: u32,
    pub val: u32,
    pub test: u32,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 7,
            val: 1,
            test: 2,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn ratio(train: u32, val: u32, test: u32, seed: u64) -> Result<Self> {
        let spec = SplitSpec {
            train,
            val,
            test,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds a spec from decimal fractions, which must sum to one. The
    /// fractions are converted to parts per million.
    pub fn from_fractions(train: f64, val: f64, test: f64, seed: u64) -> Result<Self> {
        let sum = train + val + test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions {train} + {val} + {test} sum to {sum}, not 1"
            )));
        }
        let part = |f: f64| (f * 1e6).round() as u32;
        SplitSpec::ratio(part(train), part(val), part(test), seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train == 0 || self.val == 0 || self.test == 0 {
            return Err(Error::Config(
                "split fractions must all be positive".to_string(),
            ));
        }
        Ok(())
    }

    fn total(&self) -> u64 {
        self.train as u64 + self.val as u64 + self.test as u64
    }

    /// Fold sizes for `n` items: validation and test are floored, the
    /// remainder goes to training.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let total = self.total();
        let val = (n as u64 * self.val as u64 / total) as usize;
        let test = (n as u64 * self.test as u64 / total) as usize;
        (n - val - test, val, test)
    }
}

/// Shuffles `corpus` deterministically and cuts it into train, validation
/// and test corpora named `<name>-train`, `<name>-val`, `<name>-test`.
pub fn split_corpus(corpus: &Corpus, spec: &SplitSpec) -> Result<(Corpus, Corpus, Corpus)> {
    spec.validate()?;
    if corpus.is_empty() {
        return Err(Error::Config(format!("corpus `{}` is empty", corpus.name)));
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);
    let (n_train, n_val, _) = spec.sizes(corpus.len());
    let take = |idx: &[usize], suffix: &str| Corpus {
        name: format!("{}-{}", corpus.name, suffix),
        sentences: idx.iter().map(|&i| corpus.sentences[i].clone()).collect(),
    };
    Ok((
        take(&order[..n_train], "train"),
        take(&order[n_train..n_train + n_val], "val"),
        take(&order[n_train + n_val..], "test"),
    ))
}

/// Samples `per_area` sentences without replacement from each corpus and
/// shuffles the union. Returns the source index of every output sentence.
pub fn build_mixed_with_provenance(
    corpora: &[Corpus],
    per_area: usize,
    seed: u64,
) -> Result<(Corpus, Vec<usize>)> {
    if corpora.is_empty() {
        return Err(Error::Config("no corpora to mix".into()));
    }
    for c in corpora {
        if c.len() < per_area {
            return Err(Error::Size {
                corpus: c.name.clone(),
                available: c.len(),
                requested: per_area,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::with_capacity(per_area * corpora.len());
    for (source, c) in corpora.iter().enumerate() {
        let mut idx: Vec<usize> = (0..c.len()).collect();
        idx.shuffle(&mut rng);
        picked.extend(idx[..per_area].iter().map(|&i| (source, i)));
    }
    picked.shuffle(&mut rng);
    let provenance = picked.iter().map(|&(s, _)| s).collect();
    let sentences = picked
        .into_iter()
        .map(|(s, i)| corpora[s].sentences[i].clone())
        .collect();
    Ok((
        Corpus {
            name: "mixed".to_string(),
            sentences,
        },
        provenance,
    ))
}

pub fn build_mixed(corpora: &[Corpus], per_area: usize, seed: u64) -> Result<Corpus> {
    build_mixed_with_provenance(corpora, per_area, seed).map(|(c, _)| c)
}
