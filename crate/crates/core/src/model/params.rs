use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AblationFlags, AttentionParams, CnnParams, LstmParams, ModelConfig, PAD_ID};
use crate::crf::TransitionMatrix;
use crate::error::{Error, Result};
use crate::rules::{RuleTag, NUM_RULE_TAGS};
use crate::tensor::Tensor;

/// Every learned tensor of the tagger. Components removed by an ablation
/// are `None`. The same struct doubles as a gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub rule_embedding: Option<Tensor>,
    pub char_embedding: Tensor,
    /// Layer 1 forward, layer 1 backward, layer 2 forward, layer 2 backward.
    pub lstm: Vec<LstmParams>,
    pub cnn: Option<CnnParams>,
    pub attention: Option<AttentionParams>,
    pub projection_weight: Tensor,
    pub projection_bias: Tensor,
    pub transitions: Option<TransitionMatrix>,
}

fn uniform(shape: &[usize], bound: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let dist = Uniform::new_inclusive(-bound, bound);
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| dist.sample(rng)).collect()).expect("sized")
}

impl ModelParams {
    /// Shapes implied by `config` and `flags`, filled with zeros.
    pub fn zeros(config: &ModelConfig, flags: &AblationFlags, vocab_size: usize) -> Self {
        let d_in = config.input_dim(flags);
        let h = config.d_hidden;
        let g = config.encoder_dim(flags);
        let lstm = (0..4)
            .map(|i| LstmParams::zeros(h, if i < 2 { d_in } else { 2 * h }))
            .collect();
        ModelParams {
            rule_embedding: (!flags.no_rule).then(|| Tensor::zeros(&[NUM_RULE_TAGS, config.d_rule])),
            char_embedding: Tensor::zeros(&[vocab_size, config.d_char]),
            lstm,
            cnn: (!flags.no_cnn).then(|| CnnParams::zeros(config.kernels, config.kernel[1])),
            attention: (!flags.no_attention).then(|| AttentionParams::zeros(g, config.d_query)),
            projection_weight: Tensor::zeros(&[g, config.num_tags]),
            projection_bias: Tensor::zeros(&[config.num_tags]),
            transitions: (!flags.no_crf).then(|| TransitionMatrix::zeros(config.num_tags)),
        }
    }

    /// Seeded initialization: embeddings uniform in [-0.1, 0.1], weight
    /// matrices uniform in +-1/sqrt(fan_in), zero biases except the LSTM
    /// forget gate (1.0), zero transitions. Padding rows stay zero.
    pub fn init(
        config: &ModelConfig,
        flags: &AblationFlags,
        vocab_size: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate(flags)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ModelParams::zeros(config, flags, vocab_size);
        if let Some(r) = &mut p.rule_embedding {
            *r = uniform(&r.shape.clone(), 0.1, &mut rng);
        }
        p.char_embedding = uniform(&p.char_embedding.shape.clone(), 0.1, &mut rng);
        for l in &mut p.lstm {
            let fan_in = l.w.cols();
            l.w = uniform(&l.w.shape.clone(), 1.0 / (fan_in as f64).sqrt(), &mut rng);
            let h = l.hidden();
            l.b.data[h..2 * h].iter_mut().for_each(|b| *b = 1.0);
        }
        if let Some(c) = &mut p.cnn {
            c.w = uniform(&c.w.shape.clone(), 1.0 / (c.w.cols() as f64).sqrt(), &mut rng);
        }
        if let Some(a) = &mut p.attention {
            let bound = 1.0 / (a.w_query.rows() as f64).sqrt();
            a.w_query = uniform(&a.w_query.shape.clone(), bound, &mut rng);
            a.w_key = uniform(&a.w_key.shape.clone(), bound, &mut rng);
        }
        let bound = 1.0 / (p.projection_weight.rows() as f64).sqrt();
        p.projection_weight = uniform(&p.projection_weight.shape.clone(), bound, &mut rng);
        p.pin();
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.tensors_mut().into_iter().for_each(|(_, t)| t.fill(0.0));
        z
    }

    pub fn flags(&self) -> AblationFlags {
        AblationFlags {
            no_rule: self.rule_embedding.is_none(),
            no_cnn: self.cnn.is_none(),
            no_attention: self.attention.is_none(),
            no_crf: self.transitions.is_none(),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.char_embedding.rows()
    }

    /// Zeroes the padding embedding rows and the structurally forbidden
    /// transition cells.
    pub fn pin(&mut self) {
        if let Some(r) = &mut self.rule_embedding {
            r.row_mut(RuleTag::Pad.index()).fill(0.0);
        }
        self.char_embedding.row_mut(PAD_ID).fill(0.0);
        if let Some(t) = &mut self.transitions {
            t.pin_forbidden();
        }
    }

    /// Named tensors in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        if let Some(r) = &self.rule_embedding {
            out.push(("rule_embedding".to_string(), r));
        }
        out.push(("char_embedding".to_string(), &self.char_embedding));
        for (i, l) in self.lstm.iter().enumerate() {
            let name = lstm_name(i);
            out.push((format!("{name}.weight"), &l.w));
            out.push((format!("{name}.bias"), &l.b));
        }
        if let Some(c) = &self.cnn {
            out.push(("cnn.weight".to_string(), &c.w));
            out.push(("cnn.bias".to_string(), &c.b));
        }
        if let Some(a) = &self.attention {
            out.push(("attention.query".to_string(), &a.w_query));
            out.push(("attention.key".to_string(), &a.w_key));
        }
        out.push(("projection.weight".to_string(), &self.projection_weight));
        out.push(("projection.bias".to_string(), &self.projection_bias));
        if let Some(t) = &self.transitions {
            out.push(("crf.transitions".to_string(), &t.0));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        if let Some(r) = &mut self.rule_embedding {
            out.push(("rule_embedding".to_string(), r));
        }
        out.push(("char_embedding".to_string(), &mut self.char_embedding));
        for (i, l) in self.lstm.iter_mut().enumerate() {
            let name = lstm_name(i);
            out.push((format!("{name}.weight"), &mut l.w));
            out.push((format!("{name}.bias"), &mut l.b));
        }
        if let Some(c) = &mut self.cnn {
            out.push(("cnn.weight".to_string(), &mut c.w));
            out.push(("cnn.bias".to_string(), &mut c.b));
        }
        if let Some(a) = &mut self.attention {
            out.push(("attention.query".to_string(), &mut a.w_query));
            out.push(("attention.key".to_string(), &mut a.w_key));
        }
        out.push(("projection.weight".to_string(), &mut self.projection_weight));
        out.push(("projection.bias".to_string(), &mut self.projection_bias));
        if let Some(t) = &mut self.transitions {
            out.push(("crf.transitions".to_string(), &mut t.0));
        }
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.is_finite())
    }

    /// Checks every tensor against the shapes implied by `config` and
    /// `flags`, and that all values are finite.
    pub fn validate(&self, config: &ModelConfig, flags: &AblationFlags) -> Result<()> {
        config.validate(flags)?;
        let expected = ModelParams::zeros(config, flags, self.vocab_size());
        let have = self.tensors();
        let want = expected.tensors();
        if have.len() != want.len() {
            return Err(Error::Shape(format!(
                "{} parameter tensors, expected {} for {}",
                have.len(),
                want.len(),
                flags.label()
            )));
        }
        for ((hn, ht), (wn, wt)) in have.iter().zip(&want) {
            if hn != wn || ht.shape != wt.shape {
                return Err(Error::Shape(format!(
                    "tensor {hn} {:?} does not match expected {wn} {:?}",
                    ht.shape, wt.shape
                )));
            }
            if !ht.is_finite() {
                return Err(Error::Shape(format!("tensor {hn} has non-finite values")));
            }
        }
        if self.vocab_size() < 2 {
            return Err(Error::Shape("character table needs PAD and UNK rows".into()));
        }
        Ok(())
    }

    /// Global L2 norm over all tensors.
    pub fn norm(&self) -> f64 {
        self.tensors().iter().map(|(_, t)| t.sq_norm()).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, alpha: f64) {
        self.tensors_mut().into_iter().for_each(|(_, t)| t.scale(alpha));
    }
}

fn lstm_name(i: usize) -> String {
    format!("lstm.{}.{}", i / 2 + 1, if i % 2 == 0 { "forward" } else { "backward" })
}
