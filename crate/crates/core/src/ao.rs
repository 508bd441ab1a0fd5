//! Alternating optimization: gradient ascent on the SIM
//! phases interleaved with iterative water-filling of the stream powers.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{iterative_water_filling, random_configuration, IWF_MAX_ITER, IWF_TOL};
use crate::geometry::{cascade_response, PhaseConfiguration, PropagationStack};
use crate::metrics::{effective_gains, sum_rate_for_phases, sum_rate_from_gains, sum_rate_phase_gradient, PowerAllocation};
use crate::numerics::CMatrix;
use crate::{Error, Result};

/// Label recorded in output metadata.
pub const GRADIENT_MODE: &str = "full-gradient";

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AoConfig {
    pub outer_iters: usize,
    pub inner_grad_steps: usize,
    /// Largest per-phase move of a trial step, radians.
    pub initial_step: f64,
    pub step_decay: f64,
    /// Minimum outer-iteration improvement, bps/Hz.
    pub tol: f64,
}

impl Default for AoConfig {
    fn default() -> Self {
        Self {
            outer_iters: 50,
            inner_grad_steps: 10,
            initial_step: 0.1,
            step_decay: 0.5,
            tol: 1e-4,
        }
    }
}

impl AoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.outer_iters == 0 || self.inner_grad_steps == 0 {
            return Err(Error::InvalidArgument("AO iteration counts must be positive".into()));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::InvalidArgument("AO initial step must be positive".into()));
        }
        if !(self.step_decay > 0.0 && self.step_decay < 1.0) {
            return Err(Error::InvalidArgument("AO step decay must lie in (0, 1)".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("AO tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoResult {
    pub phases: PhaseConfiguration,
    pub power: PowerAllocation,
    pub rate: f64,
    /// Objective at start and after every outer iteration.
    pub trace: Vec<f64>,
    pub accepted_steps: usize,
}

fn power_step(
    stack: &PropagationStack,
    phases: &PhaseConfiguration,
    g: &CMatrix,
    noise: &[f64],
    budget: f64,
) -> Result<(PowerAllocation, f64)> {
    let gains = effective_gains(g, &cascade_response(stack, phases)?)?;
    let p = iterative_water_filling(&gains, noise, budget, IWF_MAX_ITER, IWF_TOL)?;
    let rate = sum_rate_from_gains(&gains, p.as_slice(), noise)?;
    Ok((p, rate))
}

/// Runs AO from uniformly random phases drawn from `rng` and uniform power.
pub fn ao_optimize<R: Rng + ?Sized>(
    stack: &PropagationStack,
    g: &CMatrix,
    noise: &[f64],
    budget: f64,
    cfg: &AoConfig,
    rng: &mut R,
) -> Result<AoResult> {
    let start = random_configuration(rng, stack.layers(), stack.atoms());
    ao_optimize_from(stack, g, noise, budget, cfg, start)
}

/// Runs AO from a given starting configuration.
pub fn ao_optimize_from(
    stack: &PropagationStack,
    g: &CMatrix,
    noise: &[f64],
    budget: f64,
    cfg: &AoConfig,
    start: PhaseConfiguration,
) -> Result<AoResult> {
    cfg.validate()?;
    let users = stack.streams();
    let mut phases = start;
    let mut power = PowerAllocation::uniform(users, budget);
    let mut rate = sum_rate_for_phases(stack, &phases, g, &power, noise)?;
    let (p, r) = power_step(stack, &phases, g, noise, budget)?;
    if r >= rate {
        power = p;
        rate = r;
    }
    let mut trace = vec![rate];
    let mut accepted_steps = 0;

    for _ in 0..cfg.outer_iters {
        let before = rate;
        for _ in 0..cfg.inner_grad_steps {
            let grad = sum_rate_phase_gradient(stack, &phases, g, &power, noise)?;
            let scale = grad.amax();
            if !(scale > 0.0) || !scale.is_finite() {
                break;
            }
            let direction: DMatrix<f64> = &grad / scale;
            let slope = grad.dot(&direction);
            let mut step = cfg.initial_step;
            let mut moved = false;
            for _ in 0..=MAX_HALVINGS {
                let trial = phases.shifted(&direction, step);
                let r = sum_rate_for_phases(stack, &trial, g, &power, noise)?;
                if r >= rate + ARMIJO * step * slope {
                    phases = trial;
                    rate = r;
                    moved = true;
                    accepted_steps += 1;
                    break;
                }
                step *= cfg.step_decay;
            }
            if !moved {
                break;
            }
        }
        let (p, r) = power_step(stack, &phases, g, noise, budget)?;
        if r >= rate {
            power = p;
            rate = r;
        }
        trace.push(rate);
        if rate - before < cfg.tol {
            break;
        }
    }
    Ok(AoResult {
        phases,
        power,
        rate,
        trace,
        accepted_steps,
    })
}
