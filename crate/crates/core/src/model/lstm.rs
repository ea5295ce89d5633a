use super::EncodedSequence;
use crate::tensor::{matvec, matvec_t_acc, outer_acc, sigmoid, Tensor};

/// One LSTM direction. `w` stacks the input, forget, output and candidate
/// gate rows and acts on `[h_{t-1}; x_t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w: Tensor,
    pub b: Tensor,
}

impl LstmParams {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        LstmParams {
            w: Tensor::zeros(&[4 * hidden, hidden + input]),
            b: Tensor::zeros(&[4 * hidden]),
        }
    }

    pub fn hidden(&self) -> usize {
        self.b.len() / 4
    }
}

struct Step {
    pos: usize,
    /// `[h_{t-1}; x_t]`
    input: Vec<f64>,
    /// Post-activation gates `[i; f; o; c~]`.
    gates: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Cache for one direction. Masked positions are skipped entirely: their
/// state is carried through unchanged and their output is zero.
pub(crate) struct DirectionTrace {
    steps: Vec<Step>,
}

fn run_direction(
    p: &LstmParams,
    xs: &Tensor,
    mask: &[bool],
    reverse: bool,
) -> (Tensor, DirectionTrace) {
    let m = xs.rows();
    let h = p.hidden();
    let mut out = Tensor::zeros(&[m, h]);
    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];
    let mut steps = Vec::with_capacity(m);
    let mut pre = vec![0.0; 4 * h];
    let order: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..m).rev())
    } else {
        Box::new(0..m)
    };
    for t in order {
        if !mask[t] {
            continue;
        }
        let mut input = Vec::with_capacity(h + xs.cols());
        input.extend_from_slice(&h_prev);
        input.extend_from_slice(xs.row(t));
        matvec(&p.w, &input, &mut pre);
        let mut gates = vec![0.0; 4 * h];
        for k in 0..3 * h {
            gates[k] = sigmoid(pre[k] + p.b.data[k]);
        }
        for k in 3 * h..4 * h {
            gates[k] = (pre[k] + p.b.data[k]).tanh();
        }
        let mut c = vec![0.0; h];
        let mut tanh_c = vec![0.0; h];
        for j in 0..h {
            c[j] = gates[h + j] * c_prev[j] + gates[j] * gates[3 * h + j];
            tanh_c[j] = c[j].tanh();
            h_prev[j] = gates[2 * h + j] * tanh_c[j];
        }
        out.row_mut(t).copy_from_slice(&h_prev);
        steps.push(Step {
            pos: t,
            input,
            gates,
            c_prev: std::mem::replace(&mut c_prev, c),
            tanh_c,
        });
    }
    (out, DirectionTrace { steps })
}

/// Backpropagates `d_out` through one direction; accumulates parameter
/// gradients into `grads` and input gradients into `dx`.
fn back_direction(
    p: &LstmParams,
    trace: &DirectionTrace,
    d_out: &Tensor,
    grads: &mut LstmParams,
    dx: &mut Tensor,
) {
    let h = p.hidden();
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];
    let mut d_input = vec![0.0; p.w.cols()];
    for step in trace.steps.iter().rev() {
        let g = &step.gates;
        for j in 0..h {
            let (i, f, o, cand) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
            let dh = d_out.get(step.pos, j) + dh_next[j];
            let tc = step.tanh_c[j];
            let dc = dh * o * (1.0 - tc * tc) + dc_next[j];
            dz[j] = dc * cand * i * (1.0 - i);
            dz[h + j] = dc * step.c_prev[j] * f * (1.0 - f);
            dz[2 * h + j] = dh * tc * o * (1.0 - o);
            dz[3 * h + j] = dc * i * (1.0 - cand * cand);
            dc_next[j] = dc * f;
        }
        outer_acc(&mut grads.w, &dz, &step.input);
        for (b, d) in grads.b.data.iter_mut().zip(&dz) {
            *b += d;
        }
        d_input.iter_mut().for_each(|v| *v = 0.0);
        matvec_t_acc(&p.w, &dz, &mut d_input);
        dh_next.copy_from_slice(&d_input[..h]);
        for (d, v) in dx.row_mut(step.pos).iter_mut().zip(&d_input[h..]) {
            *d += v;
        }
    }
}

pub(crate) struct LayerTrace {
    forward: DirectionTrace,
    backward: DirectionTrace,
}

fn run_layer(
    fwd: &LstmParams,
    bwd: &LstmParams,
    xs: &Tensor,
    mask: &[bool],
) -> (Tensor, LayerTrace) {
    let (of, tf) = run_direction(fwd, xs, mask, false);
    let (ob, tb) = run_direction(bwd, xs, mask, true);
    let h = fwd.hidden();
    let mut out = Tensor::zeros(&[xs.rows(), 2 * h]);
    for t in 0..xs.rows() {
        let row = out.row_mut(t);
        row[..h].copy_from_slice(of.row(t));
        row[h..].copy_from_slice(ob.row(t));
    }
    (
        out,
        LayerTrace {
            forward: tf,
            backward: tb,
        },
    )
}

fn back_layer(
    fwd: &LstmParams,
    bwd: &LstmParams,
    trace: &LayerTrace,
    d_out: &Tensor,
    grads: &mut [LstmParams],
    dx: &mut Tensor,
) {
    let h = fwd.hidden();
    let m = d_out.rows();
    let mut df = Tensor::zeros(&[m, h]);
    let mut db = Tensor::zeros(&[m, h]);
    for t in 0..m {
        df.row_mut(t).copy_from_slice(&d_out.row(t)[..h]);
        db.row_mut(t).copy_from_slice(&d_out.row(t)[h..]);
    }
    let (gf, gb) = grads.split_at_mut(1);
    back_direction(fwd, &trace.forward, &df, &mut gf[0], dx);
    back_direction(bwd, &trace.backward, &db, &mut gb[0], dx);
}

pub(crate) struct BilstmTrace {
    layer1_out: Tensor,
    layers: [LayerTrace; 2],
}

/// Two stacked bidirectional layers; output `[m, 2 * d_hidden]` with the
/// forward stream first.
pub(crate) fn bilstm_trace(
    params: &[LstmParams],
    xs: &Tensor,
    mask: &[bool],
) -> (Tensor, BilstmTrace) {
    let (h1, t1) = run_layer(&params[0], &params[1], xs, mask);
    let (h2, t2) = run_layer(&params[2], &params[3], &h1, mask);
    (
        h2,
        BilstmTrace {
            layer1_out: h1,
            layers: [t1, t2],
        },
    )
}

pub(crate) fn bilstm_backward(
    params: &[LstmParams],
    trace: &BilstmTrace,
    d_out: &Tensor,
    grads: &mut [LstmParams],
    dx: &mut Tensor,
) {
    let mut dh1 = Tensor::zeros(&trace.layer1_out.shape);
    let (g1, g2) = grads.split_at_mut(2);
    back_layer(&params[2], &params[3], &trace.layers[1], d_out, g2, &mut dh1);
    back_layer(&params[0], &params[1], &trace.layers[0], &dh1, g1, dx);
}

/// Two-layer BiLSTM over embedded inputs `xs` (`[m, d_in]`) honoring the
/// sequence mask. `params` holds the four directions in the order layer 1
/// forward, layer 1 backward, layer 2 forward, layer 2 backward.
pub fn bilstm(params: &[LstmParams], xs: &Tensor, seq: &EncodedSequence) -> Tensor {
    bilstm_trace(params, xs, &seq.mask).0
}
