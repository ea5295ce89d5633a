use crate::tensor::Tensor;

/// Query and key projections, each `[g, d_query]`. Values are `G` itself.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub w_query: Tensor,
    pub w_key: Tensor,
}

impl AttentionParams {
    pub fn zeros(g: usize, d_query: usize) -> Self {
        AttentionParams {
            w_query: Tensor::zeros(&[g, d_query]),
            w_key: Tensor::zeros(&[g, d_query]),
        }
    }
}

pub(crate) struct AttentionTrace {
    g: Tensor,
    q: Tensor,
    k: Tensor,
    pub(crate) alpha: Tensor,
}

/// `alpha = softmax_rows(Q K^T)` with padded columns excluded, and
/// `H^a = alpha G`. No score scaling is applied.
pub(crate) fn attention_trace(p: &AttentionParams, g: &Tensor, mask: &[bool]) -> (Tensor, AttentionTrace) {
    let m = g.rows();
    let q = g.matmul(&p.w_query);
    let k = g.matmul(&p.w_key);
    let mut alpha = q.matmul_t(&k);
    for i in 0..m {
        let row = alpha.row_mut(i);
        let max = row
            .iter()
            .zip(mask)
            .filter(|(_, &keep)| keep)
            .map(|(v, _)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (v, &keep) in row.iter_mut().zip(mask) {
            *v = if keep { (*v - max).exp() } else { 0.0 };
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    let out = alpha.matmul(g);
    (
        out,
        AttentionTrace {
            g: g.clone(),
            q,
            k,
            alpha,
        },
    )
}

/// Returns `dG`; accumulates projection gradients into `grads`.
pub(crate) fn attention_backward(
    p: &AttentionParams,
    trace: &AttentionTrace,
    d_out: &Tensor,
    grads: &mut AttentionParams,
) -> Tensor {
    let m = trace.g.rows();
    let alpha = &trace.alpha;
    let d_alpha = d_out.matmul_t(&trace.g);
    let mut dg = alpha.t_matmul(d_out);
    let mut ds = Tensor::zeros(&[m, m]);
    for i in 0..m {
        let a = alpha.row(i);
        let da = d_alpha.row(i);
        let inner: f64 = a.iter().zip(da).map(|(x, y)| x * y).sum();
        for (d, (&av, &dav)) in ds.row_mut(i).iter_mut().zip(a.iter().zip(da)) {
            *d = av * (dav - inner);
        }
    }
    let dq = ds.matmul(&trace.k);
    let dk = ds.t_matmul(&trace.q);
    grads.w_query.axpy(1.0, &trace.g.t_matmul(&dq));
    grads.w_key.axpy(1.0, &trace.g.t_matmul(&dk));
    dg.axpy(1.0, &dq.matmul_t(&p.w_query));
    dg.axpy(1.0, &dk.matmul_t(&p.w_key));
    dg
}

/// Self-attention over `G` (`[m, g]`) honoring `mask`; output `[m, g]`.
pub fn attention(p: &AttentionParams, g: &Tensor, mask: &[bool]) -> Tensor {
    attention_trace(p, g, mask).0
}
