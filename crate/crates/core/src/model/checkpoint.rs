use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AblationFlags, CharVocabulary, ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::rules::RuleLexicon;
use crate::tensor::Tensor;
use crate::util::write_atomic;

const FORMAT: &str = "mder-checkpoint";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Archive {
    format: String,
    version: u32,
    config: ModelConfig,
    flags: AblationFlags,
    vocabulary: CharVocabulary,
    lexicon_fingerprint: String,
    #[serde(default)]
    metadata: serde_json::Value,
    tensors: Vec<NamedTensor>,
}

/// A trained model: configuration, ablation flags, character vocabulary,
/// the fingerprint of the rule lexicon it was trained with, and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub flags: AblationFlags,
    pub vocabulary: CharVocabulary,
    pub lexicon_fingerprint: String,
    pub params: ModelParams,
    /// Free-form provenance stored alongside the model, `null` if unset.
    pub metadata: serde_json::Value,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        let archive = Archive {
            format: FORMAT.into(),
            version: VERSION,
            config: self.config.clone(),
            flags: self.flags,
            vocabulary: self.vocabulary.clone(),
            lexicon_fingerprint: self.lexicon_fingerprint.clone(),
            metadata: self.metadata.clone(),
            tensors: self
                .params
                .tensors()
                .into_iter()
                .map(|(name, t)| NamedTensor {
                    name,
                    shape: t.shape.clone(),
                    data: t.data.clone(),
                })
                .collect(),
        };
        serde_json::to_string(&archive).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    /// Parses and validates every tensor shape against the stored config.
    pub fn from_json(text: &str) -> Result<Self> {
        let a: Archive =
            serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if a.format != FORMAT || a.version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format {} v{}",
                a.format, a.version
            )));
        }
        a.config.validate(&a.flags)?;
        let mut params = ModelParams::zeros(&a.config, &a.flags, a.vocabulary.len());
        {
            let mut slots = params.tensors_mut();
            if slots.len() != a.tensors.len() {
                return Err(Error::Checkpoint(format!(
                    "{} tensors stored, {} expected for {}",
                    a.tensors.len(),
                    slots.len(),
                    a.flags.label()
                )));
            }
            for ((name, slot), stored) in slots.iter_mut().zip(a.tensors) {
                if *name != stored.name || slot.shape != stored.shape {
                    return Err(Error::Checkpoint(format!(
                        "tensor {} {:?} does not match expected {} {:?}",
                        stored.name, stored.shape, name, slot.shape
                    )));
                }
                **slot = Tensor::from_vec(&stored.shape, stored.data)
                    .map_err(|e| Error::Checkpoint(format!("tensor {}: {e}", stored.name)))?;
            }
        }
        params
            .validate(&a.config, &a.flags)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(Checkpoint {
            config: a.config,
            flags: a.flags,
            vocabulary: a.vocabulary,
            lexicon_fingerprint: a.lexicon_fingerprint,
            params,
            metadata: a.metadata,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_json(&text)
    }

    /// Fails when `lexicon` differs from the one used in training.
    pub fn check_lexicon(&self, lexicon: &RuleLexicon) -> Result<()> {
        let fp = lexicon.fingerprint();
        if fp != self.lexicon_fingerprint {
            return Err(Error::Checkpoint(format!(
                "rule lexicon fingerprint {} differs from the training lexicon {}",
                &fp[..12],
                &self.lexicon_fingerprint[..self.lexicon_fingerprint.len().min(12)]
            )));
        }
        Ok(())
    }
}
