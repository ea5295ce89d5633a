//! A minimal dense row-major tensor of `f64`. Only what the tagger needs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "{} values for shape {:?}",
                data.len(),
                shape
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Row width of a 2-D tensor (1 for vectors).
    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let c = self.cols();
        self.data[i * c + j] = v;
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn sq_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|x| *x *= alpha);
    }

    /// `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&self, other: &Tensor) -> Tensor {
        let (m, k, n) = (self.rows(), self.cols(), other.cols());
        debug_assert_eq!(k, other.rows());
        let mut out = Tensor::zeros(&[m, n]);
        for i in 0..m {
            let a = self.row(i);
            let o = &mut out.data[i * n..(i + 1) * n];
            for (p, &av) in a.iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                for (ov, &bv) in o.iter_mut().zip(other.row(p)) {
                    *ov += av * bv;
                }
            }
        }
        out
    }

    /// `self^T x other`: `[k, m]^T x [k, n] -> [m, n]`.
    pub fn t_matmul(&self, other: &Tensor) -> Tensor {
        let (k, m, n) = (self.rows(), self.cols(), other.cols());
        debug_assert_eq!(k, other.rows());
        let mut out = Tensor::zeros(&[m, n]);
        for p in 0..k {
            let a = self.row(p);
            let b = other.row(p);
            for (i, &av) in a.iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                for (ov, &bv) in out.data[i * n..(i + 1) * n].iter_mut().zip(b) {
                    *ov += av * bv;
                }
            }
        }
        out
    }

    /// `self x other^T`: `[m, k] x [n, k]^T -> [m, n]`.
    pub fn matmul_t(&self, other: &Tensor) -> Tensor {
        let (m, k, n) = (self.rows(), self.cols(), other.rows());
        debug_assert_eq!(k, other.cols());
        let mut out = Tensor::zeros(&[m, n]);
        for i in 0..m {
            let a = self.row(i);
            for j in 0..n {
                out.data[i * n + j] = dot(a, other.row(j));
            }
        }
        out
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    // Four independent accumulators let the compiler vectorize.
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail
}

/// `out = W x` for `W: [rows, cols]`.
pub fn matvec(w: &Tensor, x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(w.row(i), x);
    }
}

/// `out += W^T y` for `W: [rows, cols]`.
pub fn matvec_t_acc(w: &Tensor, y: &[f64], out: &mut [f64]) {
    for (i, &yv) in y.iter().enumerate() {
        if yv == 0.0 {
            continue;
        }
        for (o, &wv) in out.iter_mut().zip(w.row(i)) {
            *o += yv * wv;
        }
    }
}

/// `W += y x^T` for `W: [rows, cols]`.
pub fn outer_acc(w: &mut Tensor, y: &[f64], x: &[f64]) {
    for (i, &yv) in y.iter().enumerate() {
        if yv == 0.0 {
            continue;
        }
        for (wv, &xv) in w.row_mut(i).iter_mut().zip(x) {
            *wv += yv * xv;
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Numerically stable `log(sum(exp(xs)))`; `-inf` for an empty or all
/// `-inf` input.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.into_iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_piecewise() {
        assert_eq!(relu(-1.5), 0.0);
        assert_eq!(relu(3.0), 3.0);
        assert_eq!(relu(0.0), 0.0);
    }

    #[test]
    fn matmul_variants_agree() {
        let a = Tensor::from_vec(&[2, 3], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let b = Tensor::from_vec(&[3, 2], vec![7., 8., 9., 10., 11., 12.]).unwrap();
        let ab = a.matmul(&b);
        assert_eq!(ab.data, vec![58., 64., 139., 154.]);
        let at = Tensor::from_vec(&[3, 2], vec![1., 4., 2., 5., 3., 6.]).unwrap();
        assert_eq!(at.t_matmul(&b), ab);
        let bt = Tensor::from_vec(&[2, 3], vec![7., 9., 11., 8., 10., 12.]).unwrap();
        assert_eq!(a.matmul_t(&bt), ab);
    }

    #[test]
    fn lse_is_stable() {
        assert!((log_sum_exp([1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert!((sigmoid(-800.0)).abs() < 1e-300);
        assert_eq!(sigmoid(0.0), 0.5);
    }
}
