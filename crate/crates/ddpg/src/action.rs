//! Action vector layout, projection onto the feasible set, and exploration
//! noise.
//!
//! An action holds, for each layer in order, the interleaved pairs
//! `(Re e^{jφ_n}, Im e^{jφ_n})` of its `N` atoms, followed by the `M` stream
//! powers in watts (omitted in phase-only mode).

use rand::Rng;
use rand_distr::{Distribution, Normal};

use simstack_core::geometry::{wrap_phase, PhaseConfiguration};
use simstack_core::metrics::PowerAllocation;

use crate::{DdpgError, Result};

/// Problem dimensions shared by the state, action and networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub atoms: usize,
    pub layers: usize,
    pub users: usize,
    pub phase_only: bool,
}

impl Dims {
    pub fn new(atoms: usize, layers: usize, users: usize, phase_only: bool) -> Result<Self> {
        let n_max = (atoms as f64).sqrt().round() as usize;
        if atoms == 0 || n_max * n_max != atoms || layers == 0 || users == 0 {
            return Err(DdpgError::Shape(format!(
                "need a square atom count and positive layers/users, got N={atoms}, L={layers}, M={users}"
            )));
        }
        Ok(Self {
            atoms,
            layers,
            users,
            phase_only,
        })
    }

    pub fn n_max(&self) -> usize {
        (self.atoms as f64).sqrt().round() as usize
    }

    /// `2NL`.
    pub fn phase_dim(&self) -> usize {
        2 * self.atoms * self.layers
    }

    /// `2NL + M`, or `2NL` in phase-only mode.
    pub fn action_dim(&self) -> usize {
        self.phase_dim() + if self.phase_only { 0 } else { self.users }
    }

    /// `1 + D_a + 2NM`; equals `2N(L+M) + M + 1` with power entries.
    pub fn state_dim(&self) -> usize {
        1 + self.action_dim() + 2 * self.atoms * self.users
    }
}

pub fn encode_action(phases: &PhaseConfiguration, power: &PowerAllocation, dims: &Dims) -> Result<Vec<f64>> {
    if phases.layers() != dims.layers || phases.atoms() != dims.atoms {
        return Err(DdpgError::Shape("phase configuration does not match dimensions".into()));
    }
    let mut a = Vec::with_capacity(dims.action_dim());
    for l in 0..dims.layers {
        for n in 0..dims.atoms {
            let (s, c) = phases.angle(l, n).sin_cos();
            a.push(c);
            a.push(s);
        }
    }
    if !dims.phase_only {
        if power.0.len() != dims.users {
            return Err(DdpgError::Shape("power allocation does not match dimensions".into()));
        }
        a.extend_from_slice(&power.0);
    }
    Ok(a)
}

/// Phases by `atan2`, powers copied (uniform in phase-only mode).
pub fn decode_action(a: &[f64], dims: &Dims, budget: f64) -> Result<(PhaseConfiguration, PowerAllocation)> {
    if a.len() != dims.action_dim() {
        return Err(DdpgError::Shape(format!(
            "action has {} entries, expected {}",
            a.len(),
            dims.action_dim()
        )));
    }
    let angles: Vec<f64> = a[..dims.phase_dim()]
        .chunks_exact(2)
        .map(|p| wrap_phase(p[1].atan2(p[0])))
        .collect();
    let phases = PhaseConfiguration::from_layers(dims.layers, dims.atoms, &angles)?;
    let power = if dims.phase_only {
        PowerAllocation::uniform(dims.users, budget)
    } else {
        PowerAllocation(a[dims.phase_dim()..].to_vec())
    };
    Ok((phases, power))
}

/// Scales every coefficient pair to unit modulus (a zero pair becomes
/// `(1, 0)`), clamps powers at zero and rescales them to sum to `budget`
/// (uniform if all are zero).
pub fn project_action(a: &mut [f64], dims: &Dims, budget: f64) {
    let (pairs, power) = a.split_at_mut(dims.phase_dim());
    for p in pairs.chunks_exact_mut(2) {
        let r = p[0].hypot(p[1]);
        if r > 0.0 && r.is_finite() {
            p[0] /= r;
            p[1] /= r;
        } else {
            p[0] = 1.0;
            p[1] = 0.0;
        }
    }
    if dims.phase_only {
        return;
    }
    power.iter_mut().for_each(|p| {
        if !(*p > 0.0) || !p.is_finite() {
            *p = 0.0
        }
    });
    let total: f64 = power.iter().sum();
    if total > 0.0 {
        power.iter_mut().for_each(|p| *p *= budget / total);
    } else {
        let share = budget / power.len() as f64;
        power.iter_mut().for_each(|p| *p = share);
    }
}

/// Largest deviations of an action from the feasible set.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Feasibility {
    pub max_modulus_error: f64,
    pub budget_error: f64,
    pub min_power: f64,
}

impl Feasibility {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_modulus_error <= tol && self.budget_error <= tol && self.min_power >= 0.0
    }
}

/// Budget error is relative to the budget.
pub fn feasibility(a: &[f64], dims: &Dims, budget: f64) -> Feasibility {
    let (pairs, power) = a.split_at(dims.phase_dim());
    let max_modulus_error = pairs
        .chunks_exact(2)
        .map(|p| (p[0].hypot(p[1]) - 1.0).abs())
        .fold(0.0, f64::max);
    if dims.phase_only {
        return Feasibility {
            max_modulus_error,
            ..Feasibility::default()
        };
    }
    let total: f64 = power.iter().sum();
    Feasibility {
        max_modulus_error,
        budget_error: (total - budget).abs() / budget.max(f64::MIN_POSITIVE),
        min_power: power.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

/// Exploration variance `v₀ ζ^{t/t_gap}`, where `t` counts decay steps
/// since the last reset.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningSchedule {
    pub initial_variance: f64,
    pub decay: f64,
    pub gap: usize,
    pub clip: f64,
    t: u64,
}

impl WhiteningSchedule {
    pub fn new(initial_variance: f64, decay: f64, gap: usize, clip: f64) -> Self {
        Self {
            initial_variance,
            decay,
            gap,
            clip,
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn variance(&self) -> f64 {
        variance_at(self.initial_variance, self.decay, self.gap, self.t)
    }

    pub fn advance(&mut self) {
        self.t += 1;
    }

    pub fn reset(&mut self) {
        self.t = 0;
    }
}

pub fn variance_at(initial_variance: f64, decay: f64, gap: usize, t: u64) -> f64 {
    initial_variance * decay.powf(t as f64 / gap as f64)
}

/// Adds clamped Gaussian noise of variance `variance` to every entry, then
/// projects back onto the feasible set.
pub fn whiten_and_project<R: Rng + ?Sized>(
    a: &mut [f64],
    variance: f64,
    clip: f64,
    dims: &Dims,
    budget: f64,
    rng: &mut R,
) {
    if variance > 0.0 {
        let normal = Normal::new(0.0, variance.sqrt()).expect("finite positive deviation");
        for v in a.iter_mut() {
            *v += normal.sample(rng).clamp(-clip, clip);
        }
    }
    project_action(a, dims, budget);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn dims() -> Dims {
        Dims::new(4, 2, 2, false).unwrap()
    }

    #[test]
    fn dimension_formulas() {
        let d = Dims::new(49, 4, 4, false).unwrap();
        assert_eq!(d.action_dim(), 396);
        assert_eq!(d.state_dim(), 2 * 49 * 8 + 4 + 1);
        assert_eq!(d.state_dim(), 789);
        assert_eq!(Dims::new(4, 1, 1, false).unwrap().state_dim(), 18);
        assert_eq!(Dims::new(16, 2, 2, true).unwrap().action_dim(), 64);
        assert!(Dims::new(8, 2, 2, false).is_err());
    }

    #[test]
    fn decode_unit_pairs() {
        let d = Dims::new(1, 1, 1, false).unwrap();
        let (p, _) = decode_action(&[1.0, 0.0, 1.0], &d, 1.0).unwrap();
        assert_eq!(p.angle(0, 0), 0.0);
        let (p, _) = decode_action(&[0.0, 1.0, 1.0], &d, 1.0).unwrap();
        assert!((p.angle(0, 0) - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn round_trip() {
        let d = dims();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let angles: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
            let phases = PhaseConfiguration::from_layers(2, 4, &angles).unwrap();
            let power = PowerAllocation(vec![0.3, 0.7]);
            let a = encode_action(&phases, &power, &d).unwrap();
            let (p2, w2) = decode_action(&a, &d, 1.0).unwrap();
            let a2 = encode_action(&p2, &w2, &d).unwrap();
            for (x, y) in a.iter().zip(&a2) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_variance_is_identity_on_feasible_actions() {
        let d = dims();
        let phases = PhaseConfiguration::from_layers(2, 4, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]).unwrap();
        let a = encode_action(&phases, &PowerAllocation(vec![0.25, 0.75]), &d).unwrap();
        let mut b = a.clone();
        whiten_and_project(&mut b, 0.0, 2.0, &d, 1.0, &mut ChaCha8Rng::seed_from_u64(0));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn projection_fallbacks() {
        let d = Dims::new(1, 1, 2, false).unwrap();
        let mut a = vec![0.0, 0.0, -1.0, -2.0];
        project_action(&mut a, &d, 4.0);
        assert_eq!(a, vec![1.0, 0.0, 2.0, 2.0]);
    }

    #[test]
    fn noisy_actions_stay_feasible() {
        let d = dims();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let mut a: Vec<f64> = (0..d.action_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            whiten_and_project(&mut a, 2.0, 2.0, &d, 0.01, &mut rng);
            assert!(feasibility(&a, &d, 0.01).holds(1e-9));
        }
    }

    #[test]
    fn schedule_values() {
        let mut s = WhiteningSchedule::new(2.0, 0.95, 100, 2.0);
        assert_eq!(s.variance(), 2.0);
        for _ in 0..300 {
            s.advance();
        }
        assert!((s.variance() - 1.71475).abs() < 1e-12);
        let mut prev = f64::INFINITY;
        s.reset();
        for _ in 0..1000 {
            assert!(s.variance() <= prev);
            prev = s.variance();
            s.advance();
        }
    }
}
