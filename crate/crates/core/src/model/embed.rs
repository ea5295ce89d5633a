use super::{EncodedSequence, ModelParams};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `x'_t = [rule_embedding[rule_t]; char_embedding[char_t]]`, or just the
/// character row when the rule embedding is ablated. Shape `[m, d_in]`.
pub fn embed(seq: &EncodedSequence, params: &ModelParams) -> Result<Tensor> {
    seq.validate()?;
    let d_char = params.char_embedding.cols();
    let d_rule = params.rule_embedding.as_ref().map_or(0, |r| r.cols());
    let mut out = Tensor::zeros(&[seq.len(), d_rule + d_char]);
    for t in 0..seq.len() {
        let row = out.row_mut(t);
        if let Some(r) = &params.rule_embedding {
            let id = seq.rule_ids[t];
            if id >= r.rows() {
                return Err(Error::Vocabulary {
                    table: "rule embedding",
                    index: id,
                    size: r.rows(),
                });
            }
            row[..d_rule].copy_from_slice(r.row(id));
        }
        let id = seq.char_ids[t];
        if id >= params.char_embedding.rows() {
            return Err(Error::Vocabulary {
                table: "character embedding",
                index: id,
                size: params.char_embedding.rows(),
            });
        }
        row[d_rule..].copy_from_slice(params.char_embedding.row(id));
    }
    Ok(out)
}

/// Scatters `dx` back into the embedding tables of `grads`.
pub(crate) fn embed_backward(seq: &EncodedSequence, dx: &Tensor, grads: &mut ModelParams) {
    let d_rule = grads.rule_embedding.as_ref().map_or(0, |r| r.cols());
    for t in 0..seq.len() {
        let d = dx.row(t);
        if let Some(r) = &mut grads.rule_embedding {
            for (g, v) in r.row_mut(seq.rule_ids[t]).iter_mut().zip(&d[..d_rule]) {
                *g += v;
            }
        }
        for (g, v) in grads
            .char_embedding
            .row_mut(seq.char_ids[t])
            .iter_mut()
            .zip(&d[d_rule..])
        {
            *g += v;
        }
    }
}
