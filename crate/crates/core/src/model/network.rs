use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::attention::{attention_backward, attention_trace};
use super::cnn::{cnn_backward, cnn_trace};
use super::embed::{embed, embed_backward};
use super::lstm::{bilstm_backward, bilstm_trace};
use super::{AblationFlags, EncodedSequence, ModelConfig, ModelParams};
use crate::crf::{nll_with_grad, softmax_decode, softmax_nll_with_grad, viterbi};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `G = [H; H']` per position, or `H` alone when the CNN is ablated.
pub fn encode(h: &Tensor, h_cnn: Option<&Tensor>) -> Result<Tensor> {
    let Some(c) = h_cnn else {
        return Ok(h.clone());
    };
    if c.rows() != h.rows() {
        return Err(Error::Shape(format!(
            "BiLSTM produced {} positions but CNN produced {}",
            h.rows(),
            c.rows()
        )));
    }
    let (a, b) = (h.cols(), c.cols());
    let mut g = Tensor::zeros(&[h.rows(), a + b]);
    for t in 0..h.rows() {
        let row = g.row_mut(t);
        row[..a].copy_from_slice(h.row(t));
        row[a..].copy_from_slice(c.row(t));
    }
    Ok(g)
}

/// `Z = H^a W^a + b^a`.
pub fn project(ha: &Tensor, params: &ModelParams) -> Tensor {
    let mut z = ha.matmul(&params.projection_weight);
    for t in 0..z.rows() {
        for (v, b) in z.row_mut(t).iter_mut().zip(&params.projection_bias.data) {
            *v += b;
        }
    }
    z
}

struct Trace {
    x: Tensor,
    x_keep: Option<Vec<f64>>,
    lstm: super::lstm::BilstmTrace,
    cnn: Option<super::cnn::CnnTrace>,
    g_keep: Option<Vec<f64>>,
    attention: Option<super::attention::AttentionTrace>,
    ha: Tensor,
}

fn dropout_mask(t: &mut Tensor, rate: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let scale = 1.0 / (1.0 - rate);
    let keep: Vec<f64> = (0..t.len())
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { scale })
        .collect();
    t.data.iter_mut().zip(&keep).for_each(|(v, k)| *v *= k);
    keep
}

fn check_flags(params: &ModelParams, flags: &AblationFlags) -> Result<()> {
    if params.flags() != *flags {
        return Err(Error::Config(format!(
            "parameters are for `{}` but `{}` was requested",
            params.flags().label(),
            flags.label()
        )));
    }
    Ok(())
}

fn run(
    seq: &EncodedSequence,
    params: &ModelParams,
    config: &ModelConfig,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<(Tensor, Trace)> {
    let mut x = embed(seq, params)?;
    if x.cols() != params.lstm[0].w.cols() - params.lstm[0].hidden() {
        return Err(Error::Shape(format!(
            "embedding width {} does not match the first LSTM layer",
            x.cols()
        )));
    }
    let rate = config.dropout;
    let x_keep = match rng.as_deref_mut() {
        Some(r) if rate > 0.0 => Some(dropout_mask(&mut x, rate, r)),
        _ => None,
    };
    let (h, lstm) = bilstm_trace(&params.lstm, &x, &seq.mask);
    let (h_cnn, cnn) = match &params.cnn {
        Some(p) => {
            let (out, tr) = cnn_trace(p, &x, config.stride[1]);
            (Some(out), Some(tr))
        }
        None => (None, None),
    };
    let mut g = encode(&h, h_cnn.as_ref())?;
    let g_keep = match rng {
        Some(r) if rate > 0.0 => Some(dropout_mask(&mut g, rate, r)),
        _ => None,
    };
    let (ha, attention) = match &params.attention {
        Some(p) => {
            let (out, tr) = attention_trace(p, &g, &seq.mask);
            (out, Some(tr))
        }
        None => (g.clone(), None),
    };
    let z = project(&ha, params);
    Ok((
        z,
        Trace {
            x,
            x_keep,
            lstm,
            cnn,
            g_keep,
            attention,
            ha,
        },
    ))
}

fn backward(
    seq: &EncodedSequence,
    params: &ModelParams,
    trace: &Trace,
    dz: &Tensor,
    grads: &mut ModelParams,
) {
    grads.projection_weight.axpy(1.0, &trace.ha.t_matmul(dz));
    for t in 0..dz.rows() {
        for (b, d) in grads.projection_bias.data.iter_mut().zip(dz.row(t)) {
            *b += d;
        }
    }
    let d_ha = dz.matmul_t(&params.projection_weight);
    let mut dg = match (&params.attention, &trace.attention, &mut grads.attention) {
        (Some(p), Some(tr), Some(ga)) => attention_backward(p, tr, &d_ha, ga),
        _ => d_ha,
    };
    if let Some(keep) = &trace.g_keep {
        dg.data.iter_mut().zip(keep).for_each(|(v, k)| *v *= k);
    }
    let two_h = 2 * params.lstm[2].hidden();
    let m = dg.rows();
    let mut dh = Tensor::zeros(&[m, two_h]);
    for t in 0..m {
        dh.row_mut(t).copy_from_slice(&dg.row(t)[..two_h]);
    }
    let mut dx = Tensor::zeros(&trace.x.shape);
    if let (Some(p), Some(tr), Some(gc)) = (&params.cnn, &trace.cnn, &mut grads.cnn) {
        let k = p.kernels();
        let mut dc = Tensor::zeros(&[m, k]);
        for t in 0..m {
            dc.row_mut(t).copy_from_slice(&dg.row(t)[two_h..]);
        }
        cnn_backward(p, tr, &trace.x, &dc, gc, &mut dx);
    }
    bilstm_backward(&params.lstm, &trace.lstm, &dh, &mut grads.lstm, &mut dx);
    if let Some(keep) = &trace.x_keep {
        dx.data.iter_mut().zip(keep).for_each(|(v, k)| *v *= k);
    }
    embed_backward(seq, &dx, grads);
}

/// Tag scores `Z` (`[m, num_tags]`) for one encoded sentence at inference
/// time (no dropout).
pub fn forward(
    seq: &EncodedSequence,
    params: &ModelParams,
    config: &ModelConfig,
    flags: &AblationFlags,
) -> Result<Tensor> {
    check_flags(params, flags)?;
    Ok(run(seq, params, config, None)?.0)
}

/// Like [`forward`], also returning the attention weights when present.
pub fn forward_with_attention(
    seq: &EncodedSequence,
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<(Tensor, Option<Tensor>)> {
    let (z, trace) = run(seq, params, config, None)?;
    Ok((z, trace.attention.map(|a| a.alpha)))
}

/// Negative log-likelihood of `gold` (tag indices for the real positions)
/// summed over the sentence. Gradients are added into `grads`. Passing an
/// RNG enables dropout.
pub fn sequence_loss_and_grad(
    seq: &EncodedSequence,
    gold: &[usize],
    params: &ModelParams,
    config: &ModelConfig,
    rng: Option<&mut ChaCha8Rng>,
    grads: &mut ModelParams,
) -> Result<f64> {
    let real = seq.real_len();
    if gold.len() != real {
        return Err(Error::Shape(format!(
            "{} gold tags for {} characters",
            gold.len(),
            real
        )));
    }
    let (z, trace) = run(seq, params, config, rng)?;
    let zr = if real == z.rows() {
        z
    } else {
        Tensor::from_vec(&[real, z.cols()], z.data[..real * z.cols()].to_vec())?
    };
    let (loss, dzr) = match &params.transitions {
        Some(a) => {
            let g = nll_with_grad(&zr, gold, a)?;
            if let Some(ga) = &mut grads.transitions {
                ga.0.axpy(1.0, &g.d_transitions);
            }
            (g.loss, g.d_emissions)
        }
        None => softmax_nll_with_grad(&zr, gold)?,
    };
    let mut dz = Tensor::zeros(&[seq.len(), dzr.cols()]);
    dz.data[..dzr.len()].copy_from_slice(&dzr.data);
    backward(seq, params, &trace, &dz, grads);
    Ok(loss)
}

/// Viterbi decoding over the CRF, or per-position argmax without it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decoder {
    Viterbi,
    Softmax,
}

impl Decoder {
    pub fn for_params(params: &ModelParams) -> Self {
        if params.transitions.is_some() {
            Decoder::Viterbi
        } else {
            Decoder::Softmax
        }
    }

    /// Best tag indices for `z` restricted to its first `real` rows.
    pub fn decode(&self, z: &Tensor, real: usize, params: &ModelParams) -> Result<Vec<usize>> {
        let zr = Tensor::from_vec(&[real, z.cols()], z.data[..real * z.cols()].to_vec())?;
        match (self, &params.transitions) {
            (Decoder::Viterbi, Some(a)) => Ok(viterbi(&zr, a)?.0),
            (Decoder::Viterbi, None) => Err(Error::Config(
                "Viterbi decoding requires CRF transitions".into(),
            )),
            (Decoder::Softmax, _) => Ok(softmax_decode(&zr)),
        }
    }
}
