//! Critic network: separate dense input layers for state and action whose
//! outputs are summed, then `LN → LeakyReLU → dense → LN → LeakyReLU →
//! dense → LeakyReLU → dense(1)`.

use rand::Rng;

use simstack_nn::activation::{leaky_relu, leaky_relu_backward};
use simstack_nn::dense::Dense;
use simstack_nn::norm::{LayerNorm, LayerNormCache};
use simstack_nn::report::NetworkReport;
use simstack_nn::tensor::Module;
use simstack_nn::{Param, Tensor};

use crate::action::Dims;
use crate::{DdpgError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Critic {
    pub state_in: Dense,
    pub action_in: Dense,
    pub norm1: LayerNorm,
    pub hidden1: Dense,
    pub norm2: LayerNorm,
    pub hidden2: Dense,
    pub output: Dense,
    slope: f64,
}

#[derive(Debug, Clone)]
pub struct CriticCache {
    states: Tensor,
    actions: Tensor,
    norm1: LayerNormCache,
    pre1: Tensor,
    h1: Tensor,
    norm2: LayerNormCache,
    pre2: Tensor,
    h2: Tensor,
    z3: Tensor,
    h3: Tensor,
}

impl Critic {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, dims: &Dims, width_factor: usize, slope: f64) -> Self {
        let (ds, da) = (dims.state_dim(), dims.action_dim());
        let w = width_factor * ds.max(da);
        Self::with_sizes(rng, ds, da, w, slope)
    }

    pub fn with_sizes<R: Rng + ?Sized>(rng: &mut R, state_dim: usize, action_dim: usize, width: usize, slope: f64) -> Self {
        Self {
            state_in: Dense::new(rng, state_dim, width),
            action_in: Dense::new(rng, action_dim, width),
            norm1: LayerNorm::new(width),
            hidden1: Dense::new(rng, width, width),
            norm2: LayerNorm::new(width),
            hidden2: Dense::new(rng, width, width),
            output: Dense::new(rng, width, 1),
            slope,
        }
    }

    pub fn forward(&self, states: &Tensor, actions: &Tensor) -> Result<(Tensor, CriticCache)> {
        if states.batch() != actions.batch() {
            return Err(DdpgError::Shape("state and action batches differ".into()));
        }
        let mut z1 = self.state_in.forward(states)?;
        z1.add_assign(&self.action_in.forward(actions)?)?;
        let (pre1, norm1) = self.norm1.forward(&z1)?;
        let h1 = leaky_relu(&pre1, self.slope);
        let z2 = self.hidden1.forward(&h1)?;
        let (pre2, norm2) = self.norm2.forward(&z2)?;
        let h2 = leaky_relu(&pre2, self.slope);
        let z3 = self.hidden2.forward(&h2)?;
        let h3 = leaky_relu(&z3, self.slope);
        let q = self.output.forward(&h3)?;
        Ok((
            q,
            CriticCache {
                states: states.clone(),
                actions: actions.clone(),
                norm1,
                pre1,
                h1,
                norm2,
                pre2,
                h2,
                z3,
                h3,
            },
        ))
    }

    /// Returns `∂L/∂a`. Parameter gradients are accumulated only when
    /// `accumulate` is set, so the actor step can differentiate through a
    /// frozen critic.
    pub fn backward(&mut self, c: &CriticCache, dq: &Tensor, accumulate: bool) -> Result<Tensor> {
        let d = self.output.backward(&c.h3, dq, accumulate)?;
        let d = leaky_relu_backward(&c.z3, &d, self.slope)?;
        let d = self.hidden2.backward(&c.h2, &d, accumulate)?;
        let d = leaky_relu_backward(&c.pre2, &d, self.slope)?;
        let d = self.norm2.backward(&c.norm2, &d, accumulate)?;
        let d = self.hidden1.backward(&c.h1, &d, accumulate)?;
        let d = leaky_relu_backward(&c.pre1, &d, self.slope)?;
        let d = self.norm1.backward(&c.norm1, &d, accumulate)?;
        if accumulate {
            self.state_in.accumulate(&c.states, &d)?;
        }
        Ok(self.action_in.backward(&c.actions, &d, accumulate)?)
    }

    pub fn report(&self) -> NetworkReport {
        let mut r = NetworkReport::default();
        r.push(self.state_in.report("critic.state_in"));
        r.push(self.action_in.report("critic.action_in"));
        r.push(self.norm1.report("critic.norm1"));
        r.push(self.hidden1.report("critic.hidden1"));
        r.push(self.norm2.report("critic.norm2"));
        r.push(self.hidden2.report("critic.hidden2"));
        r.push(self.output.report("critic.output"));
        r
    }
}

impl Module for Critic {
    fn params(&self) -> Vec<&Param> {
        let mut v = self.state_in.params();
        v.extend(self.action_in.params());
        v.extend(self.norm1.params());
        v.extend(self.hidden1.params());
        v.extend(self.norm2.params());
        v.extend(self.hidden2.params());
        v.extend(self.output.params());
        v
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.state_in.params_mut();
        v.extend(self.action_in.params_mut());
        v.extend(self.norm1.params_mut());
        v.extend(self.hidden1.params_mut());
        v.extend(self.norm2.params_mut());
        v.extend(self.hidden2.params_mut());
        v.extend(self.output.params_mut());
        v
    }
}
