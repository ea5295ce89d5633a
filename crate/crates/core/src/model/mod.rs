//! The forward network: rule + character embedding, a two-layer BiLSTM and
//! a strided 1x1 CNN in parallel, self-attention, and a linear projection
//! to per-character tag scores.

mod attention;
mod checkpoint;
mod cnn;
mod embed;
mod lstm;
mod network;
mod params;
mod vocab;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tagscheme::NUM_TAGS;

pub use attention::{attention, AttentionParams};
pub use checkpoint::Checkpoint;
pub use cnn::{cnn, CnnParams};
pub use embed::embed;
pub use lstm::{bilstm, LstmParams};
pub use network::{encode, forward, forward_with_attention, project, sequence_loss_and_grad, Decoder};
pub use params::ModelParams;
pub use vocab::{CharVocabulary, EncodedSequence, PAD_ID, UNK_ID};

/// Switches for the ablation variants. Each flag removes one component.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationFlags {
    pub no_rule: bool,
    pub no_cnn: bool,
    pub no_attention: bool,
    pub no_crf: bool,
}

impl AblationFlags {
    pub const FULL: AblationFlags = AblationFlags {
        no_rule: false,
        no_cnn: false,
        no_attention: false,
        no_crf: false,
    };

    /// The full model followed by the four single-component ablations.
    pub fn variants() -> [(&'static str, AblationFlags); 5] {
        let f = AblationFlags::FULL;
        [
            ("full", f),
            ("w/o rule", AblationFlags { no_rule: true, ..f }),
            ("w/o CNN", AblationFlags { no_cnn: true, ..f }),
            ("w/o self-attention", AblationFlags { no_attention: true, ..f }),
            ("w/o CRF", AblationFlags { no_crf: true, ..f }),
        ]
    }

    /// Parses a component name: `rule`, `cnn`, `attention` or `crf`.
    pub fn with(mut self, component: &str) -> Result<Self> {
        match component {
            "rule" => self.no_rule = true,
            "cnn" => self.no_cnn = true,
            "attention" | "self-attention" => self.no_attention = true,
            "crf" => self.no_crf = true,
            other => {
                return Err(Error::Config(format!(
                    "unknown ablation `{other}` (expected rule, cnn, attention or crf)"
                )))
            }
        }
        Ok(self)
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        for (on, name) in [
            (self.no_rule, "rule"),
            (self.no_cnn, "cnn"),
            (self.no_attention, "attention"),
            (self.no_crf, "crf"),
        ] {
            if on {
                parts.push(name);
            }
        }
        if parts.is_empty() {
            "full".to_string()
        } else {
            format!("w/o {}", parts.join("+"))
        }
    }
}

/// Network dimensions. Defaults are the published settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub d_rule: usize,
    pub d_char: usize,
    /// Hidden units per LSTM direction.
    pub d_hidden: usize,
    /// Number of convolution kernels; also the CNN output width.
    pub kernels: usize,
    /// Kernel size along (position, feature).
    pub kernel: [usize; 2],
    /// Stride along (position, feature).
    pub stride: [usize; 2],
    pub d_query: usize,
    pub max_len: usize,
    pub dropout: f64,
    pub num_tags: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_rule: 40,
            d_char: 200,
            d_hidden: 200,
            kernels: 30,
            kernel: [1, 1],
            stride: [1, 2],
            d_query: 400,
            max_len: 600,
            dropout: 0.5,
            num_tags: NUM_TAGS,
        }
    }
}

impl ModelConfig {
    /// Width of `x'` under `flags`.
    pub fn input_dim(&self, flags: &AblationFlags) -> usize {
        self.d_char + if flags.no_rule { 0 } else { self.d_rule }
    }

    /// Width of `G`, the concatenated BiLSTM and CNN features.
    pub fn encoder_dim(&self, flags: &AblationFlags) -> usize {
        2 * self.d_hidden + if flags.no_cnn { 0 } else { self.kernels }
    }

    /// Length of each CNN feature map along the feature axis.
    pub fn cnn_feature_len(&self, flags: &AblationFlags) -> usize {
        let d = self.input_dim(flags);
        if d < self.kernel[1] {
            0
        } else {
            (d - self.kernel[1]) / self.stride[1] + 1
        }
    }

    pub fn validate(&self, flags: &AblationFlags) -> Result<()> {
        let dims = [
            ("d_rule", self.d_rule),
            ("d_char", self.d_char),
            ("d_hidden", self.d_hidden),
            ("kernels", self.kernels),
            ("d_query", self.d_query),
            ("max_len", self.max_len),
            ("kernel width", self.kernel[1]),
            ("feature stride", self.stride[1]),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.kernel[0] != 1 || self.stride[0] != 1 {
            return Err(Error::Config(
                "kernel height and position stride must be 1 to keep one output per character"
                    .into(),
            ));
        }
        if !flags.no_cnn && self.cnn_feature_len(flags) < 1 {
            return Err(Error::Config(format!(
                "CNN feature dimension < 1: input width {} is narrower than the kernel",
                self.input_dim(flags)
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        if self.num_tags != NUM_TAGS {
            return Err(Error::Config(format!("num_tags must be {NUM_TAGS}")));
        }
        Ok(())
    }

    /// A very small configuration used by gradient checks.
    pub fn tiny() -> Self {
        ModelConfig {
            d_rule: 2,
            d_char: 3,
            d_hidden: 4,
            kernels: 2,
            d_query: 3,
            max_len: 64,
            dropout: 0.0,
            ..ModelConfig::default()
        }
    }
}
