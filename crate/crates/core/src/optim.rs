//! Adam with global-norm gradient clipping.

use crate::model::ModelParams;

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: ModelParams,
    v: ModelParams,
}

impl Adam {
    pub fn new(params: &ModelParams, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update from `grads`. Padding rows and forbidden transitions are
    /// re-pinned afterwards.
    pub fn update(&mut self, params: &mut ModelParams, grads: &ModelParams) {
        self.step += 1;
        let b1 = self.beta1;
        let b2 = self.beta2;
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        let g = grads.tensors();
        let mut m = self.m.tensors_mut();
        let mut v = self.v.tensors_mut();
        for (i, (_, p)) in params.tensors_mut().into_iter().enumerate() {
            let (gt, mt, vt) = (&g[i].1.data, &mut m[i].1.data, &mut v[i].1.data);
            for j in 0..p.data.len() {
                mt[j] = b1 * mt[j] + (1.0 - b1) * gt[j];
                vt[j] = b2 * vt[j] + (1.0 - b2) * gt[j] * gt[j];
                p.data[j] -= self.lr * (mt[j] / c1) / ((vt[j] / c2).sqrt() + self.eps);
            }
        }
        params.pin();
    }
}

/// Rescales `grads` so its global L2 norm is at most `max_norm`. Returns
/// the norm before clipping.
pub fn clip_global_norm(grads: &mut ModelParams, max_norm: f64) -> f64 {
    let norm = grads.norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AblationFlags, ModelConfig};

    #[test]
    fn first_step_moves_each_weight_by_lr() {
        let c = ModelConfig::tiny();
        let f = AblationFlags::FULL;
        let p0 = ModelParams::init(&c, &f, 5, 0).unwrap();
        let mut p = p0.clone();
        let mut g = p.zeros_like();
        g.projection_bias.data = vec![2.0, -3.0, 0.0, 1e-3, 5.0, -1.0];
        let mut opt = Adam::new(&p, 0.01);
        opt.update(&mut p, &g);
        let moved: Vec<f64> = p
            .projection_bias
            .data
            .iter()
            .zip(&p0.projection_bias.data)
            .map(|(a, b)| a - b)
            .collect();
        for (d, gr) in moved.iter().zip(&g.projection_bias.data) {
            if *gr == 0.0 {
                assert_eq!(*d, 0.0);
            } else {
                assert!((d + 0.01 * gr.signum()).abs() < 1e-6);
            }
        }
        assert_eq!(p.char_embedding, p0.char_embedding);
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let c = ModelConfig::tiny();
        let p0 = ModelParams::init(&c, &AblationFlags::FULL, 5, 0).unwrap();
        let mut p = p0.clone();
        let mut g = p.zeros_like();
        g.char_embedding.fill(1.0);
        let mut opt = Adam::new(&p, 0.0);
        opt.update(&mut p, &g);
        assert_eq!(p, p0);
    }

    #[test]
    fn clipping_caps_the_norm() {
        let c = ModelConfig::tiny();
        let mut g = ModelParams::zeros(&c, &AblationFlags::FULL, 5);
        g.projection_bias.data = vec![3.0, 4.0, 0.0, 0.0, 0.0, 12.0];
        assert_eq!(clip_global_norm(&mut g, 5.0), 13.0);
        assert!((g.norm() - 5.0).abs() < 1e-12);
        let before = g.clone();
        clip_global_norm(&mut g, 10.0);
        assert_eq!(g, before);
    }
}
