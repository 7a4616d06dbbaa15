//! Dense row-major `f64` tensors and the differentiable primitives the model
//! is built from.
//!
//! Hot loops work on plain slices; the [`Tensor`] wrapper carries shapes for
//! parameters, feature cubes and serialization.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if shape.contains(&0) || n != data.len() {
            return Err(Error::dim("Tensor::from_vec", shape, &[data.len()]));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::from_vec(&[rows, cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Number of rows of a 2-d tensor.
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Number of columns of a 2-d tensor.
    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }
}

/// `weight · x + bias` for a `[b × a]` weight matrix.
pub fn affine(weight: &Tensor, bias: &Tensor, x: &[f64]) -> Result<Vec<f64>> {
    if weight.shape().len() != 2 {
        return Err(Error::dim("affine", weight.shape(), &[x.len()]));
    }
    if weight.cols() != x.len() {
        return Err(Error::dim("affine", weight.shape(), &[x.len()]));
    }
    if bias.shape() != [weight.rows()] {
        return Err(Error::dim("affine", weight.shape(), bias.shape()));
    }
    let mut out = bias.data().to_vec();
    matvec_acc(weight.data(), weight.cols(), x, &mut out);
    Ok(out)
}

/// `out += W · x` for a row-major `W` with `cols` columns.
pub(crate) fn matvec_acc(w: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), cols * out.len());
    debug_assert_eq!(x.len(), cols);
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += dot(row, x);
    }
}

/// `out += Wᵀ · dz`.
pub(crate) fn matvec_t_acc(w: &[f64], cols: usize, dz: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), cols * dz.len());
    debug_assert_eq!(out.len(), cols);
    for (&g, row) in dz.iter().zip(w.chunks_exact(cols)) {
        if g != 0.0 {
            out.iter_mut().zip(row).for_each(|(o, &wv)| *o += g * wv);
        }
    }
}

/// `gw += dz ⊗ x`.
pub(crate) fn outer_acc(gw: &mut [f64], dz: &[f64], x: &[f64]) {
    let cols = x.len();
    debug_assert_eq!(gw.len(), cols * dz.len());
    for (&g, row) in dz.iter().zip(gw.chunks_exact_mut(cols)) {
        if g != 0.0 {
            row.iter_mut().zip(x).for_each(|(o, &xv)| *o += g * xv);
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Numerically stable softmax (the maximum is subtracted before exponentiating).
pub fn softmax(z: &[f64]) -> Result<Vec<f64>> {
    if z.is_empty() {
        return Err(Error::dim("softmax", &[0], &[1]));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("softmax input is not finite".into()));
    }
    Ok(softmax_unchecked(z))
}

pub(crate) fn softmax_unchecked(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    out
}

/// Backward pass of softmax given its output `p` and upstream gradient `g`.
pub(crate) fn softmax_backward(p: &[f64], g: &[f64]) -> Vec<f64> {
    let s = dot(p, g);
    p.iter().zip(g).map(|(&pi, &gi)| pi * (gi - s)).collect()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn tanh(x: f64) -> f64 {
    x.tanh()
}

pub fn hadamard(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::dim("hadamard", &[a.len()], &[b.len()]));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).collect())
}
