//! Elementwise and row-wise activations with their backward maps.

use crate::tensor::Tensor;
use crate::{NnError, Result};

pub const LEAKY_SLOPE: f64 = 0.01;

fn same_shape(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(NnError::Shape(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

pub fn leaky_relu(x: &Tensor, slope: f64) -> Tensor {
    let mut y = x.clone();
    y.data_mut().iter_mut().for_each(|v| {
        if *v < 0.0 {
            *v *= slope
        }
    });
    y
}

/// Uses the pre-activation `x`.
pub fn leaky_relu_backward(x: &Tensor, dy: &Tensor, slope: f64) -> Result<Tensor> {
    same_shape(x, dy)?;
    let mut dx = dy.clone();
    for (d, &v) in dx.data_mut().iter_mut().zip(x.data()) {
        if v < 0.0 {
            *d *= slope;
        }
    }
    Ok(dx)
}

pub fn tanh(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    y.data_mut().iter_mut().for_each(|v| *v = v.tanh());
    y
}

/// Uses the output `y = tanh(x)`.
pub fn tanh_backward(y: &Tensor, dy: &Tensor) -> Result<Tensor> {
    same_shape(y, dy)?;
    let mut dx = dy.clone();
    for (d, &t) in dx.data_mut().iter_mut().zip(y.data()) {
        *d *= 1.0 - t * t;
    }
    Ok(dx)
}

/// Row-wise softmax over the feature axis, stabilized by subtracting the
/// row maximum.
pub fn softmax(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    for r in 0..x.batch() {
        let row = y.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    y
}

/// Uses the output `y = softmax(x)`.
pub fn softmax_backward(y: &Tensor, dy: &Tensor) -> Result<Tensor> {
    same_shape(y, dy)?;
    let mut dx = dy.clone();
    for r in 0..y.batch() {
        let (yr, dr) = (y.row(r), dy.row(r));
        let dot: f64 = yr.iter().zip(dr).map(|(a, b)| a * b).sum();
        for (j, d) in dx.row_mut(r).iter_mut().enumerate() {
            *d = yr[j] * (dr[j] - dot);
        }
    }
    Ok(dx)
}
