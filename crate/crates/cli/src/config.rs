//! Run configuration: defaults, overridden by a TOML file, overridden by
//! command-line flags. The resolved value is written into every artifact.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mder::corpus::SplitSpec;
use mder::model::ModelConfig;
use mder::rules::RuleLexicon;
use mder::train::TrainConfig;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatio {
    pub train: u32,
    pub val: u32,
    pub test: u32,
}

impl Default for SplitRatio {
    fn default() -> Self {
        SplitRatio { train: 7, val: 1, test: 2 }
    }
}

impl SplitRatio {
    /// Parses `train:val:test`, for example `7:1:2`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            bail!("split ratio `{s}` must look like 7:1:2");
        }
        let n = |p: &str| p.trim().parse::<u32>().with_context(|| format!("bad ratio part `{p}`"));
        Ok(SplitRatio { train: n(parts[0])?, val: n(parts[1])?, test: n(parts[2])? })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub multiplier: f64,
    /// Whether a span may be replaced by its own surface.
    pub allow_self: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig { multiplier: 2.0, allow_self: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiningConfig {
    /// Edges need at least this weight to be drawn; 3 keeps weights > 2.
    pub min_edge_weight: u32,
    pub top_k: usize,
    pub alias_file: Option<PathBuf>,
    pub exclude_file: Option<PathBuf>,
    pub categories_file: Option<PathBuf>,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            min_edge_weight: 3,
            top_k: 10,
            alias_file: None,
            exclude_file: None,
            categories_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds every random choice of the run.
    pub seed: u64,
    pub lexicon_dir: Option<PathBuf>,
    /// Base for relative paths.
    pub data_dir: Option<PathBuf>,
    pub repeats: usize,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub split: SplitRatio,
    pub augment: AugmentConfig,
    pub mining: MiningConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            lexicon_dir: None,
            data_dir: None,
            repeats: 1,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            split: SplitRatio::default(),
            augment: AugmentConfig::default(),
            mining: MiningConfig::default(),
        }
    }
}

/// Flag values that override the configuration file when present.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub lexicon_dir: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    pub ablation: Vec<String>,
    pub multiplier: Option<f64>,
    pub no_self: bool,
    pub repeats: Option<usize>,
    pub min_edge_weight: Option<u32>,
    pub top_k: Option<usize>,
    pub alias_file: Option<PathBuf>,
    pub exclude_file: Option<PathBuf>,
    pub categories_file: Option<PathBuf>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub ratio: Option<SplitRatio>,
}

impl RunConfig {
    pub fn from_toml(source: &str) -> Result<Self> {
        Ok(toml::from_str(source)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Defaults, then the file at `path` if any, then `o`.
    pub fn resolve(path: Option<&Path>, o: &Overrides) -> Result<Self> {
        let mut c = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        c.apply(o)?;
        c.validate()?;
        Ok(c)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if o.lexicon_dir.is_some() {
            self.lexicon_dir = o.lexicon_dir.clone();
        }
        if o.data_dir.is_some() {
            self.data_dir = o.data_dir.clone();
        }
        for component in &o.ablation {
            self.train.ablation = self.train.ablation.with(component)?;
        }
        if let Some(m) = o.multiplier {
            self.augment.multiplier = m;
        }
        if o.no_self {
            self.augment.allow_self = false;
        }
        if let Some(r) = o.repeats {
            self.repeats = r;
        }
        if let Some(w) = o.min_edge_weight {
            self.mining.min_edge_weight = w;
        }
        if let Some(k) = o.top_k {
            self.mining.top_k = k;
        }
        if o.alias_file.is_some() {
            self.mining.alias_file = o.alias_file.clone();
        }
        if o.exclude_file.is_some() {
            self.mining.exclude_file = o.exclude_file.clone();
        }
        if o.categories_file.is_some() {
            self.mining.categories_file = o.categories_file.clone();
        }
        if let Some(e) = o.epochs {
            self.train.max_epochs = e;
        }
        if let Some(lr) = o.learning_rate {
            self.train.learning_rate = lr;
        }
        if let Some(b) = o.batch_size {
            self.train.batch_size = b;
        }
        if let Some(r) = o.ratio {
            self.split = r;
        }
        // One seed drives the whole run.
        self.train.seed = self.seed;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate(&self.train.ablation)?;
        self.train.validate()?;
        self.split_spec()?;
        if self.repeats == 0 {
            bail!("repeats must be positive");
        }
        if !(self.augment.multiplier >= 1.0 && self.augment.multiplier.is_finite()) {
            bail!("multiplier {} must be >= 1", self.augment.multiplier);
        }
        if self.mining.min_edge_weight == 0 {
            bail!("min_edge_weight must be at least 1");
        }
        if self.mining.top_k == 0 {
            bail!("top_k must be at least 1");
        }
        Ok(())
    }

    pub fn split_spec(&self) -> Result<SplitSpec> {
        Ok(SplitSpec::ratio(self.split.train, self.split.val, self.split.test, self.seed)?)
    }

    /// Joins relative paths onto the data directory when one is set.
    pub fn path(&self, p: &Path) -> PathBuf {
        match &self.data_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn lexicon(&self) -> Result<RuleLexicon> {
        match &self.lexicon_dir {
            Some(dir) => Ok(RuleLexicon::from_dir(self.path(dir))?),
            None => Ok(RuleLexicon::builtin()),
        }
    }

    /// Provenance block embedded into every artifact.
    pub fn provenance(&self, command: &str) -> Value {
        json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "seed": self.seed,
            "config": self,
        })
    }
}
