use crate::tensor::{relu, Tensor};

/// `kernels` filters of width `q` sliding along the feature axis of each
/// position's `x'_t`. `w` is `[kernels, q]`, `b` is `[kernels]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnParams {
    pub w: Tensor,
    pub b: Tensor,
}

impl CnnParams {
    pub fn zeros(kernels: usize, width: usize) -> Self {
        CnnParams {
            w: Tensor::zeros(&[kernels, width]),
            b: Tensor::zeros(&[kernels]),
        }
    }

    pub fn kernels(&self) -> usize {
        self.w.rows()
    }
}

/// For every (position, kernel): the feature-axis offset of the maximum
/// and its pre-activation value.
pub(crate) struct CnnTrace {
    argmax: Vec<usize>,
    pre: Vec<f64>,
}

/// Feature map `M^i[t, j] = w_i . x'_t[j*stride .. j*stride + q] + b_i`,
/// ReLU, then max over `j`. Produces `[m, kernels]`; `h'_t` keeps one row
/// per character.
pub(crate) fn cnn_trace(p: &CnnParams, xs: &Tensor, stride: usize) -> (Tensor, CnnTrace) {
    let (m, d) = (xs.rows(), xs.cols());
    let k = p.kernels();
    let q = p.w.cols();
    let n_out = (d - q) / stride + 1;
    let mut out = Tensor::zeros(&[m, k]);
    let mut argmax = vec![0; m * k];
    let mut pre = vec![0.0; m * k];
    for t in 0..m {
        let x = xs.row(t);
        for i in 0..k {
            let w = p.w.row(i);
            let b = p.b.data[i];
            let mut best = 0;
            let mut best_v = f64::NEG_INFINITY;
            for j in 0..n_out {
                let off = j * stride;
                let v: f64 = w.iter().zip(&x[off..off + q]).map(|(a, b)| a * b).sum::<f64>() + b;
                if v > best_v {
                    best_v = v;
                    best = off;
                }
            }
            argmax[t * k + i] = best;
            pre[t * k + i] = best_v;
            // relu is monotone, so max of relu equals relu of max.
            out.set(t, i, relu(best_v));
        }
    }
    (out, CnnTrace { argmax, pre })
}

pub(crate) fn cnn_backward(
    p: &CnnParams,
    trace: &CnnTrace,
    xs: &Tensor,
    d_out: &Tensor,
    grads: &mut CnnParams,
    dx: &mut Tensor,
) {
    let k = p.kernels();
    let q = p.w.cols();
    for t in 0..xs.rows() {
        for i in 0..k {
            let idx = t * k + i;
            if trace.pre[idx] <= 0.0 {
                continue;
            }
            let d = d_out.get(t, i);
            let off = trace.argmax[idx];
            grads.b.data[i] += d;
            for u in 0..q {
                grads.w.data[i * q + u] += d * xs.get(t, off + u);
                let v = dx.get(t, off + u) + d * p.w.get(i, u);
                dx.set(t, off + u, v);
            }
        }
    }
}

/// The convolutional branch over embedded inputs `xs`, `[m, kernels]`.
pub fn cnn(p: &CnnParams, xs: &Tensor, stride: usize) -> Tensor {
    cnn_trace(p, xs, stride).0
}
