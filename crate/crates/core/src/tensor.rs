//! Dense row-major `f64` tensors and the handful of kernels the model needs.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn normal<R: Rng + ?Sized>(shape: &[usize], std: f64, rng: &mut R) -> Self {
        let dist = Normal::new(0.0, std).expect("finite std");
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..n).map(|_| dist.sample(rng)).collect(),
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

    pub fn cols(&self) -> usize {
        if self.shape.len() > 1 {
            self.shape[1]
        } else {
            1
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|x| *x = 0.0);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    let mut s3 = 0.0;
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    let mut s = (s0 + s1) + (s2 + s3);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `y = W x + b` for `W` of shape `out × in`.
pub fn matvec(w: &Tensor, x: &[f64], b: &[f64]) -> Vec<f64> {
    (0..w.rows()).map(|o| dot(w.row(o), x) + b[o]).collect()
}

/// Backward of [`matvec`]: accumulates `dW += dy xᵀ`, `db += dy`, returns `Wᵀ dy`.
pub fn matvec_backward(w: &Tensor, x: &[f64], dy: &[f64], dw: &mut Tensor, db: &mut [f64]) -> Vec<f64> {
    let mut dx = vec![0.0; w.cols()];
    for (o, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        db[o] += g;
        axpy(g, x, dw.row_mut(o));
        axpy(g, w.row(o), &mut dx);
    }
    dx
}

/// Row-wise `Y = X Wᵀ + b` for `X` of shape `rows × in` and `W` of shape `out × in`.
pub fn linear(x: &[f64], rows: usize, w: &Tensor, b: &[f64]) -> Vec<f64> {
    let (out, inp) = (w.rows(), w.cols());
    debug_assert_eq!(x.len(), rows * inp);
    let mut y = vec![0.0; rows * out];
    for t in 0..rows {
        let xr = &x[t * inp..(t + 1) * inp];
        let yr = &mut y[t * out..(t + 1) * out];
        for o in 0..out {
            yr[o] = dot(w.row(o), xr) + b[o];
        }
    }
    y
}

/// Backward of [`linear`]: accumulates into `dw`, `db` and returns `dX`.
pub fn linear_backward(
    x: &[f64],
    rows: usize,
    w: &Tensor,
    dy: &[f64],
    dw: &mut Tensor,
    db: &mut [f64],
) -> Vec<f64> {
    let (out, inp) = (w.rows(), w.cols());
    let mut dx = vec![0.0; rows * inp];
    for t in 0..rows {
        let xr = &x[t * inp..(t + 1) * inp];
        let dyr = &dy[t * out..(t + 1) * out];
        let dxr = &mut dx[t * inp..(t + 1) * inp];
        for (o, &g) in dyr.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            db[o] += g;
            axpy(g, xr, dw.row_mut(o));
            axpy(g, w.row(o), dxr);
        }
    }
    dx
}

/// Numerically stable softmax in place. `-inf` entries get probability 0.
pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_matches_naive() {
        let w = Tensor {
            shape: vec![2, 3],
            data: vec![1.0, 2.0, 3.0, -1.0, 0.5, 0.0],
        };
        let x = [1.0, 1.0, 1.0, 0.0, 2.0, -1.0];
        let y = linear(&x, 2, &w, &[0.5, -0.5]);
        assert_eq!(y, vec![6.5, -1.0, 1.5, 0.5]);
        assert_eq!(matvec(&w, &x[..3], &[0.5, -0.5]), vec![6.5, -1.0]);
    }

    #[test]
    fn linear_backward_accumulates() {
        let w = Tensor {
            shape: vec![1, 2],
            data: vec![2.0, 3.0],
        };
        let mut dw = Tensor::zeros(&[1, 2]);
        let mut db = vec![0.0];
        let dx = linear_backward(&[1.0, -1.0, 2.0, 0.0], 2, &w, &[1.0, 0.5], &mut dw, &mut db);
        assert_eq!(dx, vec![2.0, 3.0, 1.0, 1.5]);
        assert_eq!(dw.data, vec![2.0, -1.0]);
        assert_eq!(db, vec![1.5]);
    }

    #[test]
    fn softmax_handles_masked_entries() {
        let mut v = [1.0, f64::NEG_INFINITY, 1.0];
        softmax_in_place(&mut v);
        assert_eq!(v, [0.5, 0.0, 0.5]);
    }
}
