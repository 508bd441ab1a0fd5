use rand::Rng;

use crate::report::LayerReport;
use crate::tensor::{gemm, Module, Param, Tensor};
use crate::{NnError, Result};

/// Stride-1 2-D cross-correlation on `[batch, C_in, H, W]` inputs with a
/// square kernel of odd size and zero padding that preserves `H × W`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    /// `[C_out, C_in, k, k]`.
    pub weight: Param,
    /// `[C_out]`.
    pub bias: Param,
}

/// Unfolded input patches kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ConvCache {
    input_shape: [usize; 4],
    /// `[C_in·k·k, batch·H·W]`; column `n·H·W + p` is pixel `p` of sample `n`.
    cols: Vec<f64>,
}

/// Visits every `(input offset, output offset)` pair linked by kernel tap
/// `(ky, kx)` within one `h × w` plane.
#[inline]
fn for_each_tap(h: usize, w: usize, ky: usize, kx: usize, pad: usize, mut f: impl FnMut(usize, usize, usize)) {
    let y0 = pad.saturating_sub(ky);
    let y1 = (h + pad).saturating_sub(ky).min(h);
    let x0 = pad.saturating_sub(kx);
    let x1 = (w + pad).saturating_sub(kx).min(w);
    if x0 >= x1 {
        return;
    }
    for oy in y0..y1 {
        let iy = oy + ky - pad;
        f(iy * w + x0 + kx - pad, oy * w + x0, x1 - x0);
    }
}

impl Conv2d {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, c_in: usize, c_out: usize, kernel: usize) -> Self {
        let area = kernel * kernel;
        Self {
            weight: Param::glorot(rng, vec![c_out, c_in, kernel, kernel], c_in * area, c_out * area),
            bias: Param::zeros(vec![c_out]),
        }
    }

    pub fn from_parts(weight: Tensor, bias: Tensor) -> Result<Self> {
        let s = weight.shape();
        if s.len() != 4 || s[2] != s[3] || s[2] % 2 == 0 || bias.shape() != [s[0]] {
            return Err(NnError::Shape(format!(
                "conv weight {:?} with bias {:?}",
                s,
                bias.shape()
            )));
        }
        Ok(Self {
            weight: Param::new(weight),
            bias: Param::new(bias),
        })
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }
    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }
    pub fn kernel(&self) -> usize {
        self.weight.shape()[2]
    }

    fn patch_len(&self) -> usize {
        self.in_channels() * self.kernel() * self.kernel()
    }

    fn im2col(&self, x: &Tensor) -> Result<ConvCache> {
        let s = x.shape();
        if s.len() != 4 || s[1] != self.in_channels() {
            return Err(NnError::Shape(format!(
                "conv expects [batch, {}, H, W], got {s:?}",
                self.in_channels()
            )));
        }
        let (b, c, h, w) = (s[0], s[1], s[2], s[3]);
        let k = self.kernel();
        let hw = h * w;
        let stride = b * hw;
        let mut cols = vec![0.0; self.patch_len() * stride];
        let xd = x.data();
        for ci in 0..c {
            for ky in 0..k {
                for kx in 0..k {
                    let row = (ci * k + ky) * k + kx;
                    let dst = &mut cols[row * stride..(row + 1) * stride];
                    for n in 0..b {
                        let plane = &xd[(n * c + ci) * hw..(n * c + ci + 1) * hw];
                        let out = &mut dst[n * hw..(n + 1) * hw];
                        for_each_tap(h, w, ky, kx, k / 2, |i, o, len| {
                            out[o..o + len].copy_from_slice(&plane[i..i + len]);
                        });
                    }
                }
            }
        }
        Ok(ConvCache {
            input_shape: [b, c, h, w],
            cols,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, ConvCache)> {
        let cache = self.im2col(x)?;
        let [b, _, h, w] = cache.input_shape;
        let hw = h * w;
        let stride = b * hw;
        let co = self.out_channels();
        let kk = self.patch_len();
        let mut flat = vec![0.0; co * stride];
        for (c, &bv) in self.bias.value.data().iter().enumerate() {
            flat[c * stride..(c + 1) * stride].fill(bv);
        }
        let wd = self.weight.value.data();
        gemm(co, kk, stride, 1.0, wd, kk, 1, &cache.cols, stride, 1, 1.0, &mut flat, stride, 1);
        let mut y = Tensor::zeros(vec![b, co, h, w]);
        let yd = y.data_mut();
        for c in 0..co {
            for n in 0..b {
                yd[(n * co + c) * hw..(n * co + c + 1) * hw].copy_from_slice(&flat[c * stride + n * hw..c * stride + (n + 1) * hw]);
            }
        }
        Ok((y, cache))
    }

    pub fn backward(&mut self, cache: &ConvCache, dy: &Tensor, accumulate: bool) -> Result<Tensor> {
        let [b, c, h, w] = cache.input_shape;
        let co = self.out_channels();
        if dy.shape() != [b, co, h, w] {
            return Err(NnError::Shape(format!(
                "conv output gradient {:?}, expected [{b}, {co}, {h}, {w}]",
                dy.shape()
            )));
        }
        let hw = h * w;
        let stride = b * hw;
        let k = self.kernel();
        let kk = self.patch_len();
        let dyd = dy.data();
        let mut g = vec![0.0; co * stride];
        for ch in 0..co {
            for n in 0..b {
                g[ch * stride + n * hw..ch * stride + (n + 1) * hw].copy_from_slice(&dyd[(n * co + ch) * hw..(n * co + ch + 1) * hw]);
            }
        }
        if accumulate {
            gemm(co, stride, kk, 1.0, &g, stride, 1, &cache.cols, 1, stride, 1.0, &mut self.weight.grad, kk, 1);
            for (ch, gb) in self.bias.grad.iter_mut().enumerate() {
                *gb += g[ch * stride..(ch + 1) * stride].iter().sum::<f64>();
            }
        }
        let mut dcols = vec![0.0; kk * stride];
        let wd = self.weight.value.data();
        gemm(kk, co, stride, 1.0, wd, 1, kk, &g, stride, 1, 0.0, &mut dcols, stride, 1);
        let mut dx = Tensor::zeros(vec![b, c, h, w]);
        let dxd = dx.data_mut();
        for ci in 0..c {
            for ky in 0..k {
                for kx in 0..k {
                    let row = (ci * k + ky) * k + kx;
                    let src = &dcols[row * stride..(row + 1) * stride];
                    for n in 0..b {
                        let plane = &mut dxd[(n * c + ci) * hw..(n * c + ci + 1) * hw];
                        let s = &src[n * hw..(n + 1) * hw];
                        for_each_tap(h, w, ky, kx, k / 2, |i, o, len| {
                            for (d, v) in plane[i..i + len].iter_mut().zip(&s[o..o + len]) {
                                *d += v;
                            }
                        });
                    }
                }
            }
        }
        Ok(dx)
    }

    pub fn report(&self, name: &str, height: usize, width: usize) -> LayerReport {
        LayerReport {
            name: name.to_string(),
            params: self.weight.len() + self.bias.len(),
            macs: self.out_channels() * self.patch_len() * height * width,
        }
    }
}

impl Module for Conv2d {
    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}
