//! Actor network.
//!
//! Phase branch: the previous action's coefficient pairs are arranged as a
//! `2L`-channel `√N × √N` image (channel `2l` holds real parts of layer `l`,
//! channel `2l + 1` imaginary parts), passed through two residual blocks,
//! pooled to `3 × 3`, mapped by a dense layer and `tanh` to `2NL` values, and
//! normalized pairwise onto the unit circle.
//!
//! Power branch: the full state through three dense layers with LeakyReLU
//! between them, then softmax scaled by the budget.

use rand::Rng;

use simstack_nn::activation::{leaky_relu, leaky_relu_backward, softmax, softmax_backward, tanh, tanh_backward};
use simstack_nn::conv::{Conv2d, ConvCache};
use simstack_nn::dense::Dense;
use simstack_nn::norm::{LayerNorm, LayerNormCache};
use simstack_nn::pool::{adaptive_avg_pool, adaptive_avg_pool_backward, POOL_OUT};
use simstack_nn::report::NetworkReport;
use simstack_nn::tensor::Module;
use simstack_nn::{Param, Tensor};

use crate::action::Dims;
use crate::{DdpgError, Result};

/// `conv3×3 → LN → LeakyReLU` twice, plus a `conv1×1` skip from the input.
#[derive(Debug, Clone, PartialEq)]
pub struct ResBlock {
    pub conv_a: Conv2d,
    pub norm_a: LayerNorm,
    pub conv_b: Conv2d,
    pub norm_b: LayerNorm,
    pub skip: Conv2d,
    slope: f64,
}

#[derive(Debug, Clone)]
pub struct ResBlockCache {
    conv_a: ConvCache,
    norm_a: LayerNormCache,
    pre_a: Tensor,
    conv_b: ConvCache,
    norm_b: LayerNormCache,
    pre_b: Tensor,
    skip: ConvCache,
}

impl ResBlock {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, c_in: usize, c_out: usize, pixels: usize, slope: f64) -> Self {
        Self {
            conv_a: Conv2d::new(rng, c_in, c_out, 3),
            norm_a: LayerNorm::new(c_out * pixels),
            conv_b: Conv2d::new(rng, c_out, c_out, 3),
            norm_b: LayerNorm::new(c_out * pixels),
            skip: Conv2d::new(rng, c_in, c_out, 1),
            slope,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, ResBlockCache)> {
        let (h, conv_a) = self.conv_a.forward(x)?;
        let (pre_a, norm_a) = self.norm_a.forward(&h)?;
        let a = leaky_relu(&pre_a, self.slope);
        let (h, conv_b) = self.conv_b.forward(&a)?;
        let (pre_b, norm_b) = self.norm_b.forward(&h)?;
        let mut y = leaky_relu(&pre_b, self.slope);
        let (s, skip) = self.skip.forward(x)?;
        y.add_assign(&s)?;
        Ok((
            y,
            ResBlockCache {
                conv_a,
                norm_a,
                pre_a,
                conv_b,
                norm_b,
                pre_b,
                skip,
            },
        ))
    }

    pub fn backward(&mut self, c: &ResBlockCache, dy: &Tensor) -> Result<Tensor> {
        let mut dx = self.skip.backward(&c.skip, dy, true)?;
        let d = leaky_relu_backward(&c.pre_b, dy, self.slope)?;
        let d = self.norm_b.backward(&c.norm_b, &d, true)?;
        let d = self.conv_b.backward(&c.conv_b, &d, true)?;
        let d = leaky_relu_backward(&c.pre_a, &d, self.slope)?;
        let d = self.norm_a.backward(&c.norm_a, &d, true)?;
        dx.add_assign(&self.conv_a.backward(&c.conv_a, &d, true)?)?;
        Ok(dx)
    }
}

impl Module for ResBlock {
    fn params(&self) -> Vec<&Param> {
        let mut v = self.conv_a.params();
        v.extend(self.norm_a.params());
        v.extend(self.conv_b.params());
        v.extend(self.norm_b.params());
        v.extend(self.skip.params());
        v
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.conv_a.params_mut();
        v.extend(self.norm_a.params_mut());
        v.extend(self.conv_b.params_mut());
        v.extend(self.norm_b.params_mut());
        v.extend(self.skip.params_mut());
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerBranch {
    pub input: Dense,
    pub hidden: Dense,
    pub output: Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Actor {
    dims: Dims,
    budget: f64,
    slope: f64,
    pub block1: ResBlock,
    pub block2: ResBlock,
    pub head: Dense,
    pub power: Option<PowerBranch>,
}

#[derive(Debug, Clone)]
pub struct ActorCache {
    block1: ResBlockCache,
    block2: ResBlockCache,
    block2_shape: Vec<usize>,
    pooled: Tensor,
    tanh_out: Tensor,
    power: Option<PowerCache>,
}

#[derive(Debug, Clone)]
struct PowerCache {
    state: Tensor,
    z1: Tensor,
    h1: Tensor,
    z2: Tensor,
    h2: Tensor,
    shares: Tensor,
}

/// Scales each `(x, y)` pair to unit length; `(0, 0)` maps to `(1, 0)`.
pub fn normalize_pairs(t: &Tensor) -> Tensor {
    let mut out = t.clone();
    for p in out.data_mut().chunks_exact_mut(2) {
        let r = p[0].hypot(p[1]);
        if r > 0.0 {
            p[0] /= r;
            p[1] /= r;
        } else {
            p[0] = 1.0;
            p[1] = 0.0;
        }
    }
    out
}

/// Gradient of [`normalize_pairs`]: `(dn − n⟨n, dn⟩)/r` per pair.
pub fn normalize_pairs_backward(t: &Tensor, dy: &Tensor) -> Tensor {
    let mut dx = Tensor::zeros(t.shape().to_vec());
    for ((p, d), o) in t
        .data()
        .chunks_exact(2)
        .zip(dy.data().chunks_exact(2))
        .zip(dx.data_mut().chunks_exact_mut(2))
    {
        let r = p[0].hypot(p[1]);
        if r > 0.0 {
            let (nx, ny) = (p[0] / r, p[1] / r);
            let dot = nx * d[0] + ny * d[1];
            o[0] = (d[0] - nx * dot) / r;
            o[1] = (d[1] - ny * dot) / r;
        }
    }
    dx
}

impl Actor {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, dims: Dims, budget: f64, channels: usize, width_factor: usize, slope: f64) -> Self {
        let pixels = dims.atoms;
        let c_in = 2 * dims.layers;
        let block1 = ResBlock::new(rng, c_in, channels, pixels, slope);
        let block2 = ResBlock::new(rng, channels, channels, pixels, slope);
        let head = Dense::new(rng, channels * POOL_OUT * POOL_OUT, dims.phase_dim());
        let power = (!dims.phase_only).then(|| {
            let ds = dims.state_dim();
            let width = width_factor * ds.max(dims.users);
            PowerBranch {
                input: Dense::new(rng, ds, width),
                hidden: Dense::new(rng, width, width),
                output: Dense::new(rng, width, dims.users),
            }
        });
        Self {
            dims,
            budget,
            slope,
            block1,
            block2,
            head,
            power,
        }
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    fn phase_image(&self, states: &Tensor) -> Tensor {
        let d = &self.dims;
        let (b, n, c) = (states.batch(), d.atoms, 2 * d.layers);
        let mut img = Tensor::zeros(vec![b, c, d.n_max(), d.n_max()]);
        for r in 0..b {
            let s = states.row(r);
            let dst = img.row_mut(r);
            for l in 0..d.layers {
                for k in 0..n {
                    let src = 1 + 2 * (l * n + k);
                    dst[(2 * l) * n + k] = s[src];
                    dst[(2 * l + 1) * n + k] = s[src + 1];
                }
            }
        }
        img
    }

    pub fn forward(&self, states: &Tensor) -> Result<(Tensor, ActorCache)> {
        let d = &self.dims;
        if states.shape().len() != 2 || states.features() != d.state_dim() {
            return Err(DdpgError::Shape(format!(
                "actor expects [batch, {}], got {:?}",
                d.state_dim(),
                states.shape()
            )));
        }
        let b = states.batch();
        let img = self.phase_image(states);
        let (y1, block1) = self.block1.forward(&img)?;
        let (y2, block2) = self.block2.forward(&y1)?;
        let block2_shape = y2.shape().to_vec();
        let pooled = adaptive_avg_pool(&y2)?;
        let flat = pooled.features();
        let pooled = pooled.reshape(vec![b, flat])?;
        let tanh_out = tanh(&self.head.forward(&pooled)?);
        let phase = normalize_pairs(&tanh_out);

        let (action, power) = match &self.power {
            None => (phase, None),
            Some(p) => {
                let z1 = p.input.forward(states)?;
                let h1 = leaky_relu(&z1, self.slope);
                let z2 = p.hidden.forward(&h1)?;
                let h2 = leaky_relu(&z2, self.slope);
                let shares = softmax(&p.output.forward(&h2)?);
                let mut watts = shares.clone();
                watts.data_mut().iter_mut().for_each(|v| *v *= self.budget);
                let action = Tensor::concat_features(&[&phase, &watts])?;
                (
                    action,
                    Some(PowerCache {
                        state: states.clone(),
                        z1,
                        h1,
                        z2,
                        h2,
                        shares,
                    }),
                )
            }
        };
        Ok((
            action,
            ActorCache {
                block1,
                block2,
                block2_shape,
                pooled,
                tanh_out,
                power,
            },
        ))
    }

    /// Single-state convenience wrapper.
    pub fn act(&self, state: &[f64]) -> Result<Vec<f64>> {
        let s = Tensor::new(vec![1, state.len()], state.to_vec())?;
        Ok(self.forward(&s)?.0.into_data())
    }

    /// Accumulates parameter gradients for an upstream action gradient.
    pub fn backward(&mut self, cache: &ActorCache, d_action: &Tensor) -> Result<()> {
        let d = self.dims;
        let b = d_action.batch();
        if d_action.shape() != [b, d.action_dim()] {
            return Err(DdpgError::Shape(format!("actor gradient {:?}", d_action.shape())));
        }
        let d_phase = d_action.columns(0, d.phase_dim())?;
        let dt = normalize_pairs_backward(&cache.tanh_out, &d_phase);
        let dz = tanh_backward(&cache.tanh_out, &dt)?;
        let dp = self.head.backward(&cache.pooled, &dz, true)?;
        let c = cache.block2_shape[1];
        let dp = dp.reshape(vec![b, c, POOL_OUT, POOL_OUT])?;
        let dy2 = adaptive_avg_pool_backward(&cache.block2_shape, &dp)?;
        let dy1 = self.block2.backward(&cache.block2, &dy2)?;
        self.block1.backward(&cache.block1, &dy1)?;

        if let (Some(p), Some(pc)) = (self.power.as_mut(), cache.power.as_ref()) {
            let mut dw = d_action.columns(d.phase_dim(), d.users)?;
            dw.data_mut().iter_mut().for_each(|v| *v *= self.budget);
            let dz3 = softmax_backward(&pc.shares, &dw)?;
            let dh2 = p.output.backward(&pc.h2, &dz3, true)?;
            let dz2 = leaky_relu_backward(&pc.z2, &dh2, self.slope)?;
            let dh1 = p.hidden.backward(&pc.h1, &dz2, true)?;
            let dz1 = leaky_relu_backward(&pc.z1, &dh1, self.slope)?;
            p.input.accumulate(&pc.state, &dz1)?;
        }
        Ok(())
    }

    pub fn report(&self) -> NetworkReport {
        let n = self.dims.atoms;
        let side = self.dims.n_max();
        let mut r = NetworkReport::default();
        for (name, blk) in [("phase.block1", &self.block1), ("phase.block2", &self.block2)] {
            r.push(blk.conv_a.report(&format!("{name}.conv_a"), side, side));
            r.push(blk.norm_a.report(&format!("{name}.norm_a")));
            r.push(blk.conv_b.report(&format!("{name}.conv_b"), side, side));
            r.push(blk.norm_b.report(&format!("{name}.norm_b")));
            r.push(blk.skip.report(&format!("{name}.skip"), side, side));
        }
        debug_assert_eq!(side * side, n);
        r.push(self.head.report("phase.head"));
        if let Some(p) = &self.power {
            r.push(p.input.report("power.input"));
            r.push(p.hidden.report("power.hidden"));
            r.push(p.output.report("power.output"));
        }
        r
    }
}

impl Module for Actor {
    fn params(&self) -> Vec<&Param> {
        let mut v = self.block1.params();
        v.extend(self.block2.params());
        v.extend(self.head.params());
        if let Some(p) = &self.power {
            v.extend(p.input.params());
            v.extend(p.hidden.params());
            v.extend(p.output.params());
        }
        v
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.block1.params_mut();
        v.extend(self.block2.params_mut());
        v.extend(self.head.params_mut());
        if let Some(p) = &mut self.power {
            v.extend(p.input.params_mut());
            v.extend(p.hidden.params_mut());
            v.extend(p.output.params_mut());
        }
        v
    }
}
