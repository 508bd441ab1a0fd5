//! Adaptive average pooling to a fixed `3 × 3` map.

use crate::tensor::Tensor;
use crate::{NnError, Result};

pub const POOL_OUT: usize = 3;

/// Input rows (or columns) averaged into output cell `i` of `out` cells:
/// `[⌊i·len/out⌋, ⌊(i+1)·len/out⌋)`, widened to one element when the
/// input is shorter than the output.
pub fn pool_bin(i: usize, len: usize, out: usize) -> (usize, usize) {
    let start = i * len / out;
    let end = ((i + 1) * len / out).max(start + 1);
    (start, end)
}

/// `[batch, C, H, W] → [batch, C, 3, 3]`.
pub fn adaptive_avg_pool(x: &Tensor) -> Result<Tensor> {
    let s = x.shape();
    if s.len() != 4 || s[2] == 0 || s[3] == 0 {
        return Err(NnError::Shape(format!("pooling expects [batch, C, H, W], got {s:?}")));
    }
    let (b, c, h, w) = (s[0], s[1], s[2], s[3]);
    let mut y = Tensor::zeros(vec![b, c, POOL_OUT, POOL_OUT]);
    let xd = x.data();
    for plane in 0..b * c {
        let src = &xd[plane * h * w..(plane + 1) * h * w];
        for i in 0..POOL_OUT {
            let (r0, r1) = pool_bin(i, h, POOL_OUT);
            for j in 0..POOL_OUT {
                let (c0, c1) = pool_bin(j, w, POOL_OUT);
                let mut sum = 0.0;
                for r in r0..r1 {
                    sum += src[r * w + c0..r * w + c1].iter().sum::<f64>();
                }
                y.data_mut()[plane * POOL_OUT * POOL_OUT + i * POOL_OUT + j] = sum / ((r1 - r0) * (c1 - c0)) as f64;
            }
        }
    }
    Ok(y)
}

/// Spreads each output gradient uniformly over its bin.
pub fn adaptive_avg_pool_backward(input_shape: &[usize], dy: &Tensor) -> Result<Tensor> {
    if input_shape.len() != 4 || dy.shape() != [input_shape[0], input_shape[1], POOL_OUT, POOL_OUT] {
        return Err(NnError::Shape(format!(
            "pool gradient {:?} for input {input_shape:?}",
            dy.shape()
        )));
    }
    let (b, c, h, w) = (input_shape[0], input_shape[1], input_shape[2], input_shape[3]);
    let mut dx = Tensor::zeros(input_shape.to_vec());
    for plane in 0..b * c {
        for i in 0..POOL_OUT {
            let (r0, r1) = pool_bin(i, h, POOL_OUT);
            for j in 0..POOL_OUT {
                let (c0, c1) = pool_bin(j, w, POOL_OUT);
                let g = dy.data()[plane * POOL_OUT * POOL_OUT + i * POOL_OUT + j] / ((r1 - r0) * (c1 - c0)) as f64;
                let dst = &mut dx.data_mut()[plane * h * w..(plane + 1) * h * w];
                for r in r0..r1 {
                    dst[r * w + c0..r * w + c1].iter_mut().for_each(|v| *v += g);
                }
            }
        }
    }
    Ok(dx)
}
