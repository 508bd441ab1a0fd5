//! Finite-difference gate over every differentiable component.

use std::fmt;

use rand::Rng;

use simstack_core::baselines::random_configuration;
use simstack_core::channel::{correlation_matrix, sample_channel, ScenarioConfig, UserLayout};
use simstack_core::geometry::{build_propagation_stack, SimGeometry};
use simstack_core::metrics::{sum_rate_phase_gradient, sum_rate_phase_gradient_fd, PowerAllocation};
use simstack_core::numerics::psd_sqrt;
use simstack_core::rng::{indexed_stream, Component};
use simstack_ddpg::action::Dims;
use simstack_ddpg::critic::Critic;
use simstack_nn::gradcheck::{
    central_difference, check_all_ops_with_fault, compare, Comparison, OpCheck, Tolerance, FD_STEP,
};
use simstack_nn::Tensor;

use crate::Result;

pub const SUM_RATE_SUITE: &str = "sum_rate_phase_gradient";
pub const CRITIC_SUITE: &str = "critic_action_gradient";

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub checks: Vec<OpCheck>,
    pub tolerance: Tolerance,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(OpCheck::passed)
    }

    /// The suite with the largest relative error.
    pub fn worst(&self) -> Option<&OpCheck> {
        self.checks
            .iter()
            .max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err))
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<26} {:>9} {:>7} {:>13} {:>13}  status",
            "suite", "instances", "failed", "max_rel_err", "max_abs_err"
        )?;
        for c in &self.checks {
            writeln!(
                f,
                "{:<26} {:>9} {:>7} {:>13.3e} {:>13.3e}  {}",
                c.name,
                c.instances,
                c.failed_instances,
                c.max_rel_err,
                c.max_abs_err,
                if c.passed() { "ok" } else { "FAIL" }
            )?;
        }
        if let Some(w) = self.worst() {
            writeln!(f, "worst: {} (relative error {:.3e})", w.name, w.max_rel_err)?;
        }
        write!(
            f,
            "tolerance: relative {:.0e}, absolute {:.0e}; {}",
            self.tolerance.rel,
            self.tolerance.abs,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

fn corrupt(v: &mut [f64], on: bool) {
    if on {
        v[0] = v[0] * 1.01 + 1e-3;
    }
}

fn sum_rate_check<R: Rng + ?Sized>(rng: &mut R, tol: Tolerance, fault: bool) -> Result<Comparison> {
    let side = rng.random_range(2..5);
    let atoms = side * side;
    let layers = rng.random_range(1..4);
    let users = rng.random_range(1..4);
    let geom = SimGeometry::reference(layers, atoms, users)?;
    let stack = build_propagation_stack(&geom)?;
    let scenario = ScenarioConfig {
        power_dbm: rng.random_range(0.0..30.0),
        ..ScenarioConfig::default()
    };
    // Path losses drawn for a 0 to 20 dB receive SNR so gradients are O(1).
    let base = scenario.noise_watts() / scenario.power_watts();
    let layout = UserLayout::from_path_losses(
        (0..users)
            .map(|_| base * 10f64.powf(rng.random_range(0.0..2.0)))
            .collect(),
    );
    let ch = sample_channel(rng, &layout, &psd_sqrt(&correlation_matrix(&geom))?, 0)?;
    let cfg = random_configuration(rng, layers, atoms);
    let shares: Vec<f64> = (0..users).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = shares.iter().sum();
    let p = PowerAllocation(shares.iter().map(|s| s / total * scenario.power_watts()).collect());
    let noise = vec![scenario.noise_watts(); users];
    let mut analytic: Vec<f64> = sum_rate_phase_gradient(&stack, &cfg, &ch.g, &p, &noise)?.iter().copied().collect();
    let numeric: Vec<f64> = sum_rate_phase_gradient_fd(&stack, &cfg, &ch.g, &p, &noise, FD_STEP)?
        .iter()
        .copied()
        .collect();
    corrupt(&mut analytic, fault);
    Ok(compare(&analytic, &numeric, tol))
}

fn critic_check<R: Rng + ?Sized>(rng: &mut R, tol: Tolerance, fault: bool) -> Result<Comparison> {
    let side = rng.random_range(1..3);
    let dims = Dims::new(side * side, rng.random_range(1..3), rng.random_range(1..3), false)?;
    let mut critic = Critic::new(rng, &dims, 1, 0.01);
    let b = rng.random_range(1..4);
    let mut random = |cols: usize| {
        Tensor::new(vec![b, cols], (0..b * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("shape")
    };
    let s = random(dims.state_dim());
    let a = random(dims.action_dim());
    let (_, cache) = critic.forward(&s, &a)?;
    let mut analytic = critic
        .backward(&cache, &Tensor::filled(vec![b, 1], 1.0), false)?
        .into_data();
    let numeric = central_difference(
        |x| {
            let a2 = Tensor::new(a.shape().to_vec(), x.to_vec()).expect("shape");
            critic.forward(&s, &a2).expect("forward").0.data().iter().sum()
        },
        a.data(),
        FD_STEP,
    );
    corrupt(&mut analytic, fault);
    Ok(compare(&analytic, &numeric, tol))
}

/// Runs every suite on `instances` random instances. `fault` names one
/// suite whose analytic gradient is deliberately perturbed.
pub fn gradcheck(instances: usize, seed: u64, fault: Option<&str>) -> Result<GradcheckReport> {
    let tol = Tolerance::default();
    let mut rng = indexed_stream(seed, Component::Test, 0);
    let mut checks = check_all_ops_with_fault(&mut rng, instances, tol, fault);
    let mut rate = OpCheck::new(SUM_RATE_SUITE);
    let mut critic = OpCheck::new(CRITIC_SUITE);
    for _ in 0..instances {
        rate.record(sum_rate_check(&mut rng, tol, fault == Some(SUM_RATE_SUITE))?);
        critic.record(critic_check(&mut rng, tol, fault == Some(CRITIC_SUITE))?);
    }
    checks.push(rate);
    checks.push(critic);
    Ok(GradcheckReport { checks, tolerance: tol })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_build_passes() {
        let r = gradcheck(3, 1, None).unwrap();
        assert!(r.passed(), "{r}");
        assert_eq!(r.checks.len(), simstack_nn::gradcheck::OPS.len() + 2);
    }

    #[test]
    fn corrupted_suites_are_reported() {
        for suite in [SUM_RATE_SUITE, CRITIC_SUITE, "layer_norm"] {
            let r = gradcheck(2, 2, Some(suite)).unwrap();
            assert!(!r.passed());
            let failing: Vec<&str> = r.checks.iter().filter(|c| !c.passed()).map(|c| c.name.as_str()).collect();
            assert_eq!(failing, vec![suite]);
            assert!(r.to_string().contains("FAIL"));
        }
    }
}
