use rand::Rng;

use crate::report::LayerReport;
use crate::tensor::{gemm, Module, Param, Tensor};
use crate::{NnError, Result};

/// Fully connected layer `y = W x + b` on `[batch, in]` inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `[out, in]`.
    pub weight: Param,
    /// `[out]`.
    pub bias: Param,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Param::glorot(rng, vec![outputs, inputs], inputs, outputs),
            bias: Param::zeros(vec![outputs]),
        }
    }

    pub fn from_parts(weight: Tensor, bias: Tensor) -> Result<Self> {
        if weight.shape().len() != 2 || bias.shape() != [weight.shape()[0]] {
            return Err(NnError::Shape(format!(
                "dense weight {:?} with bias {:?}",
                weight.shape(),
                bias.shape()
            )));
        }
        Ok(Self {
            weight: Param::new(weight),
            bias: Param::new(bias),
        })
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[1]
    }
    pub fn outputs(&self) -> usize {
        self.weight.shape()[0]
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape().len() != 2 || x.shape()[1] != self.inputs() {
            return Err(NnError::Shape(format!(
                "dense expects [batch, {}], got {:?}",
                self.inputs(),
                x.shape()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let (b, i, o) = (x.batch(), self.inputs(), self.outputs());
        let mut y = Tensor::zeros(vec![b, o]);
        let bias = self.bias.value.data();
        for r in 0..b {
            y.row_mut(r).copy_from_slice(bias);
        }
        gemm(b, i, o, 1.0, x.data(), i, 1, self.weight.value.data(), 1, i, 1.0, y.data_mut(), o, 1);
        Ok(y)
    }

    /// Returns `∂L/∂x`; adds `∂L/∂W`, `∂L/∂b` into the parameter gradients
    /// when `accumulate` is set.
    pub fn backward(&mut self, x: &Tensor, dy: &Tensor, accumulate: bool) -> Result<Tensor> {
        if accumulate {
            self.accumulate(x, dy)?;
        } else {
            self.check_backward(x, dy)?;
        }
        let (b, i, o) = (x.batch(), self.inputs(), self.outputs());
        let mut dx = Tensor::zeros(vec![b, i]);
        gemm(b, o, i, 1.0, dy.data(), o, 1, self.weight.value.data(), i, 1, 0.0, dx.data_mut(), i, 1);
        Ok(dx)
    }

    /// Parameter gradients only, for layers whose input needs no gradient.
    pub fn accumulate(&mut self, x: &Tensor, dy: &Tensor) -> Result<()> {
        self.check_backward(x, dy)?;
        let (b, i, o) = (x.batch(), self.inputs(), self.outputs());
        gemm(o, b, i, 1.0, dy.data(), 1, o, x.data(), i, 1, 1.0, &mut self.weight.grad, i, 1);
        for r in 0..b {
            for (g, d) in self.bias.grad.iter_mut().zip(dy.row(r)) {
                *g += d;
            }
        }
        Ok(())
    }

    fn check_backward(&self, x: &Tensor, dy: &Tensor) -> Result<()> {
        self.check_input(x)?;
        let (b, o) = (x.batch(), self.outputs());
        if dy.shape() != [b, o] {
            return Err(NnError::Shape(format!("dense output gradient {:?}, expected [{b}, {o}]", dy.shape())));
        }
        Ok(())
    }

    pub fn report(&self, name: &str) -> LayerReport {
        LayerReport {
            name: name.to_string(),
            params: self.weight.len() + self.bias.len(),
            macs: self.inputs() * self.outputs(),
        }
    }
}

impl Module for Dense {
    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}
