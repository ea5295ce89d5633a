//! Character-level method and dataset entity recognition for scientific
//! text, plus co-occurrence trend mining over the extracted entities.
//!
//! The tagger stacks a rule embedding and a character embedding, runs a
//! two-layer BiLSTM and a strided 1x1 CNN in parallel, mixes the
//! concatenated features with self-attention, projects to per-character
//! tag scores and decodes them with a linear-chain CRF.

pub mod augment;
pub mod corpus;
pub mod crf;
pub mod error;
pub mod metrics;
pub mod mining;
pub mod model;
pub mod optim;
pub mod rules;
pub mod tagscheme;
pub mod tensor;
pub mod train;
pub mod util;

pub use error::{Error, Result};
