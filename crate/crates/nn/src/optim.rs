//! Adam and a reduce-on-plateau learning-rate schedule.

use crate::tensor::Param;
use crate::{NnError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step_count: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(shapes: &[usize]) -> Self {
        Self::with_hyper(shapes, 0.9, 0.999, 1e-8)
    }

    /// `shapes` lists the element count of each parameter, in the order
    /// they will be passed to [`Adam::step`].
    pub fn with_hyper(shapes: &[usize], beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            step_count: 0,
            first_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_params(params: &[&Param]) -> Self {
        Self::new(&params.iter().map(|p| p.len()).collect::<Vec<_>>())
    }

    /// One bias-corrected update with learning rate `lr` from the gradients
    /// stored in `params`.
    pub fn step(&mut self, params: &mut [&mut Param], lr: f64) -> Result<()> {
        if params.len() != self.first_moment.len()
            || params.iter().zip(&self.first_moment).any(|(p, m)| p.len() != m.len())
        {
            return Err(NnError::Shape("parameters do not match optimizer state".into()));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for ((p, m), v) in params.iter_mut().zip(&mut self.first_moment).zip(&mut self.second_moment) {
            let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
            let grad = &p.grad;
            for (((x, &g), m), v) in p.value.data_mut().iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *x -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Multiplies the learning rate by `factor` after `patience` consecutive
/// calls without a new maximum of the monitored metric.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauScheduler {
    pub patience: usize,
    pub factor: f64,
    best: f64,
    stale: usize,
    lr: f64,
}

impl PlateauScheduler {
    pub fn new(lr: f64, patience: usize, factor: f64) -> Self {
        Self {
            patience,
            factor,
            best: f64::NEG_INFINITY,
            stale: 0,
            lr,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }
    pub fn best(&self) -> f64 {
        self.best
    }
    pub fn stale_count(&self) -> usize {
        self.stale
    }

    /// Feeds one metric value and returns the (possibly reduced) rate.
    pub fn step(&mut self, metric: f64) -> f64 {
        if metric > self.best {
            self.best = metric;
            self.stale = 0;
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                self.lr *= self.factor;
                self.stale = 0;
            }
        }
        self.lr
    }
}
