use crate::report::LayerReport;
use crate::tensor::{Module, Param, Tensor};
use crate::{NnError, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Normalizes every sample over all of its features, then applies a
/// per-feature gain and shift.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gain: Param,
    pub shift: Param,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    normalized: Tensor,
    inv_std: Vec<f64>,
}

impl LayerNormCache {
    /// Pre-affine output.
    pub fn normalized(&self) -> &Tensor {
        &self.normalized
    }
}

impl LayerNorm {
    pub fn new(features: usize) -> Self {
        Self {
            gain: Param::new(Tensor::filled(vec![features], 1.0)),
            shift: Param::zeros(vec![features]),
            eps: LAYER_NORM_EPS,
        }
    }

    pub fn features(&self) -> usize {
        self.gain.len()
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, LayerNormCache)> {
        let f = self.features();
        if x.features() != f || x.shape().len() < 2 {
            return Err(NnError::Shape(format!(
                "layer norm over {f} features, got {:?}",
                x.shape()
            )));
        }
        let b = x.batch();
        let mut normalized = x.clone();
        let mut y = x.clone();
        let mut inv_std = Vec::with_capacity(b);
        let (g, s) = (self.gain.value.data(), self.shift.value.data());
        for r in 0..b {
            let row = x.row(r);
            let mean = row.iter().sum::<f64>() / f as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / f as f64;
            let is = 1.0 / (var + self.eps).sqrt();
            inv_std.push(is);
            let nrow = normalized.row_mut(r);
            for (n, v) in nrow.iter_mut().zip(row) {
                *n = (v - mean) * is;
            }
            let yrow = y.row_mut(r);
            for j in 0..f {
                yrow[j] = normalized.row(r)[j] * g[j] + s[j];
            }
        }
        Ok((y, LayerNormCache { normalized, inv_std }))
    }

    pub fn backward(&mut self, cache: &LayerNormCache, dy: &Tensor, accumulate: bool) -> Result<Tensor> {
        let xn = &cache.normalized;
        if dy.shape() != xn.shape() {
            return Err(NnError::Shape(format!(
                "layer norm gradient {:?}, expected {:?}",
                dy.shape(),
                xn.shape()
            )));
        }
        let f = self.features();
        let mut dx = Tensor::zeros(xn.shape().to_vec());
        let g = self.gain.value.data();
        let mut dxhat = vec![0.0; f];
        for r in 0..xn.batch() {
            let (d, n) = (dy.row(r), xn.row(r));
            if accumulate {
                for j in 0..f {
                    self.gain.grad[j] += d[j] * n[j];
                    self.shift.grad[j] += d[j];
                }
            }
            for j in 0..f {
                dxhat[j] = d[j] * g[j];
            }
            let mean_d = dxhat.iter().sum::<f64>() / f as f64;
            let mean_dn = dxhat.iter().zip(n).map(|(a, b)| a * b).sum::<f64>() / f as f64;
            let is = cache.inv_std[r];
            for (j, out) in dx.row_mut(r).iter_mut().enumerate() {
                *out = is * (dxhat[j] - mean_d - n[j] * mean_dn);
            }
        }
        Ok(dx)
    }

    pub fn report(&self, name: &str) -> LayerReport {
        LayerReport {
            name: name.to_string(),
            params: 2 * self.features(),
            macs: 2 * self.features(),
        }
    }
}

impl Module for LayerNorm {
    fn params(&self) -> Vec<&Param> {
        vec![&self.gain, &self.shift]
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.gain, &mut self.shift]
    }
}
