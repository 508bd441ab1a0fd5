//! Per-user SINR, sum rate, and the gradient of the sum rate with respect
//! to every SIM phase.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::geometry::{cascade_intermediates, cascade_response, PhaseConfiguration, PropagationStack};
use crate::numerics::CMatrix;
use crate::{Error, Result};

/// Transmit power per stream, watts.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation(pub Vec<f64>);

impl PowerAllocation {
    pub fn uniform(users: usize, budget: f64) -> Self {
        Self(vec![budget / users as f64; users])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Checks non-negativity and `Σ p ≤ budget` (within 1e-9 relative).
    pub fn validate(&self, budget: f64) -> Result<()> {
        if self.0.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidArgument("negative or non-finite power".into()));
        }
        if self.total() > budget + 1e-9 * budget.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidArgument(format!(
                "total power {} exceeds budget {budget}",
                self.total()
            )));
        }
        Ok(())
    }
}

/// `|[G]_{m,:} [B]_{:,k}|²` for all user/stream pairs (M × M).
pub fn effective_gains(g: &CMatrix, b: &CMatrix) -> Result<DMatrix<f64>> {
    if g.ncols() != b.nrows() || g.nrows() != b.ncols() {
        return Err(Error::Dimension(format!(
            "channel is {}x{} but SIM response is {}x{}",
            g.nrows(),
            g.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok((g * b).map(|z| z.norm_sqr()))
}

fn check_power_noise(users: usize, p: &[f64], noise: &[f64]) -> Result<()> {
    if p.len() != users || noise.len() != users {
        return Err(Error::Dimension(format!(
            "expected {users} powers and noise levels, got {} and {}",
            p.len(),
            noise.len()
        )));
    }
    if let Some(s) = noise.iter().find(|&&s| !(s > 0.0)) {
        return Err(Error::InvalidArgument(format!("noise power must be positive, got {s}")));
    }
    Ok(())
}

/// SINR per user from precomputed effective gains.
pub fn sinr_from_gains(gains: &DMatrix<f64>, p: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
    let m = gains.nrows();
    if gains.ncols() != m {
        return Err(Error::Dimension("effective gain matrix must be square".into()));
    }
    check_power_noise(m, p, noise)?;
    Ok((0..m)
        .map(|u| {
            let interference: f64 = (0..m).filter(|&k| k != u).map(|k| p[k] * gains[(u, k)]).sum();
            p[u] * gains[(u, u)] / (interference + noise[u])
        })
        .collect())
}

pub fn sinr(g: &CMatrix, b: &CMatrix, p: &PowerAllocation, noise: &[f64]) -> Result<Vec<f64>> {
    sinr_from_gains(&effective_gains(g, b)?, p.as_slice(), noise)
}

pub fn sum_rate_from_sinr(kappa: &[f64]) -> f64 {
    kappa.iter().map(|k| (1.0 + k).log2()).sum()
}

pub fn sum_rate_from_gains(gains: &DMatrix<f64>, p: &[f64], noise: &[f64]) -> Result<f64> {
    Ok(sum_rate_from_sinr(&sinr_from_gains(gains, p, noise)?))
}

/// System sum rate in bps/Hz.
pub fn sum_rate(g: &CMatrix, b: &CMatrix, p: &PowerAllocation, noise: &[f64]) -> Result<f64> {
    Ok(sum_rate_from_sinr(&sinr(g, b, p, noise)?))
}

/// Sum rate for a phase configuration, building `B` from the stack.
pub fn sum_rate_for_phases(
    stack: &PropagationStack,
    cfg: &PhaseConfiguration,
    g: &CMatrix,
    p: &PowerAllocation,
    noise: &[f64],
) -> Result<f64> {
    sum_rate(g, &cascade_response(stack, cfg)?, p, noise)
}

/// `∂C/∂φ_n^l` for every layer and atom (L × N), by an adjoint sweep back
/// through the cascade. Cost is one forward cascade plus `L−1` adjoint
/// matrix products.
pub fn sum_rate_phase_gradient(
    stack: &PropagationStack,
    cfg: &PhaseConfiguration,
    g: &CMatrix,
    p: &PowerAllocation,
    noise: &[f64],
) -> Result<DMatrix<f64>> {
    let xs = cascade_intermediates(stack, cfg)?;
    let b = xs.last().unwrap();
    let users = b.ncols();
    if g.nrows() != users || g.ncols() != b.nrows() {
        return Err(Error::Dimension(format!(
            "channel is {}x{} but SIM response is {}x{}",
            g.nrows(),
            g.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let p = p.as_slice();
    check_power_noise(users, p, noise)?;

    let h = g * b;
    // ∂C/∂conj(H_mk).
    let mut d = CMatrix::zeros(users, users);
    for m in 0..users {
        let total: f64 = (0..users).map(|k| p[k] * h[(m, k)].norm_sqr()).sum::<f64>() + noise[m];
        let interference = total - p[m] * h[(m, m)].norm_sqr();
        for k in 0..users {
            let mut coef = p[k] / total;
            if k != m {
                coef -= p[k] / interference;
            }
            d[(m, k)] = h[(m, k)] * (coef / LN_2);
        }
    }

    let layers = stack.layers();
    let atoms = stack.atoms();
    let mut grad = DMatrix::zeros(layers, atoms);
    let mut adj = g.adjoint() * d;
    for l in (0..layers).rev() {
        let x = &xs[l];
        for n in 0..atoms {
            let s: Complex64 = (0..users).map(|k| adj[(n, k)].conj() * x[(n, k)]).sum();
            grad[(l, n)] = -2.0 * s.im;
        }
        if l > 0 {
            let coeffs = cfg.coefficients(l);
            for (n, c) in coeffs.iter().enumerate() {
                let cc = c.conj();
                for v in adj.row_mut(n).iter_mut() {
                    *v *= cc;
                }
            }
            adj = stack.inter_layer[l - 1].adjoint() * adj;
        }
    }
    Ok(grad)
}

/// Central finite-difference version of [`sum_rate_phase_gradient`], for
/// debugging and as an independent check.
pub fn sum_rate_phase_gradient_fd(
    stack: &PropagationStack,
    cfg: &PhaseConfiguration,
    g: &CMatrix,
    p: &PowerAllocation,
    noise: &[f64],
    step: f64,
) -> Result<DMatrix<f64>> {
    let mut grad = DMatrix::zeros(cfg.layers(), cfg.atoms());
    let base = cfg.angles().clone();
    for l in 0..cfg.layers() {
        for n in 0..cfg.atoms() {
            let mut plus = base.clone();
            plus[(l, n)] += step;
            let mut minus = base.clone();
            minus[(l, n)] -= step;
            let cp = sum_rate_for_phases(stack, &PhaseConfiguration::new(plus)?, g, p, noise)?;
            let cm = sum_rate_for_phases(stack, &PhaseConfiguration::new(minus)?, g, p, noise)?;
            grad[(l, n)] = (cp - cm) / (2.0 * step);
        }
    }
    Ok(grad)
}
