//! Reference schemes: water-filling power allocation, random and codebook
//! SIM configurations, and digital ZF/MMSE precoding without a SIM.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{cscg, sinc, UserLayout};
use crate::geometry::{cascade_response, PhaseConfiguration, PropagationStack};
use crate::metrics::{effective_gains, sum_rate_from_gains, PowerAllocation};
use crate::numerics::{psd_sqrt, solve_hermitian, CMatrix};
use crate::{Error, Result};

pub const IWF_MAX_ITER: usize = 100;
/// Relative to the budget.
pub const IWF_TOL: f64 = 1e-10;

const BISECTION_MAX_ITER: usize = 200;
const BUDGET_TOL: f64 = 1e-12;

/// Pours `budget` over streams with floor levels `levels`: `p_m = [w − a_m]⁺`
/// with `Σ p_m = budget`. Infinite levels mark unusable streams, which get
/// zero. If no stream is usable the budget is split uniformly.
pub fn water_fill(levels: &[f64], budget: f64) -> Vec<f64> {
    let m = levels.len();
    if m == 0 {
        return Vec::new();
    }
    if !(budget > 0.0) {
        return vec![0.0; m];
    }
    let finite: Vec<f64> = levels.iter().copied().filter(|a| a.is_finite()).collect();
    if finite.is_empty() {
        return vec![budget / m as f64; m];
    }
    let fill = |w: f64| -> f64 { finite.iter().map(|a| (w - a).max(0.0)).sum() };

    let lowest = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (lowest, lowest + budget);
    let mut w = hi;
    for _ in 0..BISECTION_MAX_ITER {
        w = 0.5 * (lo + hi);
        let s = fill(w);
        if (s - budget).abs() <= BUDGET_TOL * budget {
            break;
        }
        if s < budget {
            lo = w;
        } else {
            hi = w;
        }
    }
    // Solve exactly on the identified active set.
    let active: Vec<f64> = finite.iter().copied().filter(|&a| a < w).collect();
    if !active.is_empty() {
        let exact = (budget + active.iter().sum::<f64>()) / active.len() as f64;
        if exact.is_finite() {
            w = exact;
        }
    }
    let mut p: Vec<f64> = levels
        .iter()
        .map(|&a| if a.is_finite() { (w - a).max(0.0) } else { 0.0 })
        .collect();
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        let scale = budget / total;
        p.iter_mut().for_each(|x| *x *= scale);
    }
    p
}

/// Iterative water-filling: each stream sees the interference produced by
/// the previous iterate as extra noise.
///
/// Stops when `max |Δp| < tol · budget` or after `max_iter` iterations.
pub fn iterative_water_filling(
    gains: &DMatrix<f64>,
    noise: &[f64],
    budget: f64,
    max_iter: usize,
    tol: f64,
) -> Result<PowerAllocation> {
    let m = gains.nrows();
    if gains.ncols() != m || noise.len() != m {
        return Err(Error::Dimension(format!(
            "gains are {}x{} with {} noise levels",
            gains.nrows(),
            gains.ncols(),
            noise.len()
        )));
    }
    if gains.iter().any(|&g| !(g >= 0.0)) {
        return Err(Error::InvalidArgument("gains must be non-negative".into()));
    }
    if !(budget >= 0.0) {
        return Err(Error::InvalidArgument(format!("budget must be non-negative, got {budget}")));
    }
    if budget == 0.0 {
        return Ok(PowerAllocation(vec![0.0; m]));
    }
    let mut p = vec![budget / m as f64; m];
    for _ in 0..max_iter.max(1) {
        let levels: Vec<f64> = (0..m)
            .map(|u| {
                let direct = gains[(u, u)];
                if direct > 0.0 {
                    let interference: f64 = (0..m).filter(|&k| k != u).map(|k| gains[(u, k)] * p[k]).sum();
                    (interference + noise[u]) / direct
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        let next = water_fill(&levels, budget);
        let delta = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        p = next;
        if delta < tol * budget {
            break;
        }
    }
    Ok(PowerAllocation(p))
}

/// i.i.d. uniform phases on `[0, 2π)`, drawn layer by layer.
pub fn random_configuration<R: Rng + ?Sized>(rng: &mut R, layers: usize, atoms: usize) -> PhaseConfiguration {
    let angles: Vec<f64> = (0..layers * atoms).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    PhaseConfiguration::from_layers(layers, atoms, &angles).expect("sizes match")
}

/// Water-filled power and sum rate of a fixed SIM configuration.
pub fn evaluate_configuration(
    stack: &PropagationStack,
    cfg: &PhaseConfiguration,
    g: &CMatrix,
    noise: &[f64],
    budget: f64,
) -> Result<(PowerAllocation, f64)> {
    let gains = effective_gains(g, &cascade_response(stack, cfg)?)?;
    let p = iterative_water_filling(&gains, noise, budget, IWF_MAX_ITER, IWF_TOL)?;
    let rate = sum_rate_from_gains(&gains, p.as_slice(), noise)?;
    Ok((p, rate))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodebookResult {
    pub best_phases: PhaseConfiguration,
    pub best_power: PowerAllocation,
    pub best_rate: f64,
    pub best_index: usize,
    pub evaluated: usize,
    /// Rate of every codeword, in draw order.
    pub rates: Vec<f64>,
}

/// Best of `k` random configurations. Codewords are drawn sequentially from
/// `rng`, so a larger `k` on the same stream extends the smaller codebook.
pub fn codebook_search<R: Rng + ?Sized>(
    rng: &mut R,
    stack: &PropagationStack,
    g: &CMatrix,
    noise: &[f64],
    budget: f64,
    k: usize,
) -> Result<CodebookResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("codebook size must be at least 1".into()));
    }
    let mut best: Option<(PhaseConfiguration, PowerAllocation, f64, usize)> = None;
    let mut rates = Vec::with_capacity(k);
    for i in 0..k {
        let cfg = random_configuration(rng, stack.layers(), stack.atoms());
        let (p, rate) = evaluate_configuration(stack, &cfg, g, noise, budget)?;
        rates.push(rate);
        if best.as_ref().is_none_or(|b| rate > b.2) {
            best = Some((cfg, p, rate, i));
        }
    }
    let (best_phases, best_power, best_rate, best_index) = best.expect("k >= 1");
    Ok(CodebookResult {
        best_phases,
        best_power,
        best_rate,
        best_index,
        evaluated: k,
        rates,
    })
}

/// Direct BS-to-user channel (`M × tx_antennas`) of a half-wavelength ULA.
///
/// With `correlated`, rows are colored by the sinc correlation of the array,
/// which is the identity at exactly half-wavelength spacing.
pub fn sample_nosim_channel<R: Rng + ?Sized>(
    rng: &mut R,
    layout: &UserLayout,
    tx_antennas: usize,
    correlated: bool,
) -> Result<CMatrix> {
    let m = layout.users();
    let mut h = CMatrix::zeros(m, tx_antennas);
    for i in 0..m {
        for j in 0..tx_antennas {
            h[(i, j)] = cscg(rng, layout.path_losses[i]);
        }
    }
    if correlated {
        let r = CMatrix::from_fn(tx_antennas, tx_antennas, |i, j| {
            Complex64::new(sinc(i.abs_diff(j) as f64), 0.0)
        });
        h *= psd_sqrt(&r)?;
    }
    Ok(h)
}

/// Digital precoder output.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderResult {
    /// `M_t × M`, unit-norm columns.
    pub v: CMatrix,
    pub power: PowerAllocation,
    pub rate: f64,
}

fn normalize_columns(v: &mut CMatrix) {
    for mut col in v.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= Complex64::new(norm, 0.0);
        }
    }
}

fn finish_precoder(h: &CMatrix, mut v: CMatrix, noise: &[f64], budget: f64) -> Result<PrecoderResult> {
    normalize_columns(&mut v);
    let gains = effective_gains(h, &v)?;
    let power = iterative_water_filling(&gains, noise, budget, IWF_MAX_ITER, IWF_TOL)?;
    let rate = sum_rate_from_gains(&gains, power.as_slice(), noise)?;
    Ok(PrecoderResult { v, power, rate })
}

fn check_precoder_shapes(h: &CMatrix, noise: &[f64]) -> Result<()> {
    if noise.len() != h.nrows() {
        return Err(Error::Dimension(format!(
            "{} users but {} noise levels",
            h.nrows(),
            noise.len()
        )));
    }
    if h.nrows() > h.ncols() {
        return Err(Error::Dimension(format!(
            "{} users exceed {} transmit antennas",
            h.nrows(),
            h.ncols()
        )));
    }
    Ok(())
}

/// Zero forcing `V = Hᴴ(HHᴴ)⁻¹` with water-filled stream powers.
pub fn zf_precoder(h: &CMatrix, budget: f64, noise: &[f64]) -> Result<PrecoderResult> {
    check_precoder_shapes(h, noise)?;
    let gram = h * h.adjoint();
    let x = solve_hermitian(&gram, h).map_err(|e| match e {
        Error::NotPositiveDefinite => Error::RankDeficient,
        other => other,
    })?;
    finish_precoder(h, x.adjoint(), noise, budget)
}

/// Regularized inverse `V = Hᴴ(HHᴴ + αI)⁻¹` for an explicit `α ≥ 0`.
pub fn mmse_precoder_with_regularizer(h: &CMatrix, budget: f64, noise: &[f64], alpha: f64) -> Result<PrecoderResult> {
    check_precoder_shapes(h, noise)?;
    if !(alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!("regularizer must be non-negative, got {alpha}")));
    }
    if alpha.is_infinite() {
        return finish_precoder(h, h.adjoint(), noise, budget);
    }
    let m = h.nrows();
    let a = h * h.adjoint() + CMatrix::identity(m, m) * Complex64::new(alpha, 0.0);
    let x = solve_hermitian(&a, h)?;
    finish_precoder(h, x.adjoint(), noise, budget)
}

/// MMSE (regularized ZF) with `α = M σ̄² / P`.
pub fn mmse_precoder(h: &CMatrix, budget: f64, noise: &[f64]) -> Result<PrecoderResult> {
    let m = h.nrows();
    let mean_noise = noise.iter().sum::<f64>() / noise.len().max(1) as f64;
    let alpha = if budget > 0.0 { m as f64 * mean_noise / budget } else { f64::INFINITY };
    mmse_precoder_with_regularizer(h, budget, noise, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_propagation_stack, SimGeometry};
    use crate::metrics::sum_rate_for_phases;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_stream_takes_everything() {
        let gains = DMatrix::from_element(1, 1, 0.3);
        let p = iterative_water_filling(&gains, &[1.0], 2.5, IWF_MAX_ITER, IWF_TOL).unwrap();
        assert_eq!(p.0, vec![2.5]);
    }

    #[test]
    fn symmetric_streams_split_evenly() {
        let gains = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let p = iterative_water_filling(&gains, &[0.5, 0.5], 3.0, IWF_MAX_ITER, IWF_TOL).unwrap();
        assert!((p.0[0] - 1.5).abs() < 1e-12 && (p.0[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn water_fill_hand_case() {
        // Levels 1 and 3 with budget 1: only the first stream is active.
        assert_eq!(water_fill(&[1.0, 3.0], 1.0), vec![1.0, 0.0]);
        // Budget 4: water level 4, allocation [3, 1].
        let p = water_fill(&[1.0, 3.0], 4.0);
        assert!((p[0] - 3.0).abs() < 1e-12 && (p[1] - 1.0).abs() < 1e-12);
        assert_eq!(water_fill(&[f64::INFINITY, f64::INFINITY], 2.0), vec![1.0, 1.0]);
        assert_eq!(water_fill(&[1.0, 2.0], 0.0), vec![0.0, 0.0]);
    }

    #[test]
    fn dead_stream_gets_nothing() {
        let gains = DMatrix::from_row_slice(3, 3, &[0.0, 0.1, 0.1, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0]);
        let p = iterative_water_filling(&gains, &[1.0; 3], 1.0, IWF_MAX_ITER, IWF_TOL).unwrap();
        assert_eq!(p.0[0], 0.0);
        assert!((p.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_search_and_slackness() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..30 {
            let g1 = rng.random_range(0.05..5.0);
            let g2 = rng.random_range(0.05..5.0);
            let noise = [rng.random_range(0.1..2.0), rng.random_range(0.1..2.0)];
            let budget = rng.random_range(0.1..10.0);
            let gains = DMatrix::from_row_slice(2, 2, &[g1, 0.0, 0.0, g2]);
            let p = iterative_water_filling(&gains, &noise, budget, IWF_MAX_ITER, IWF_TOL).unwrap();
            assert!((p.total() - budget).abs() <= 1e-9 * budget);
            let rate = sum_rate_from_gains(&gains, p.as_slice(), &noise).unwrap();
            let mut best = f64::NEG_INFINITY;
            for i in 0..=10_000 {
                let p1 = budget * i as f64 / 10_000.0;
                let r = sum_rate_from_gains(&gains, &[p1, budget - p1], &noise).unwrap();
                best = best.max(r);
            }
            assert!(rate >= best - 1e-12, "water-filling {rate} below grid {best}");
            assert!(rate - best < 1e-3);
            let levels: Vec<f64> = (0..2)
                .filter(|&m| p.0[m] > 0.0)
                .map(|m| p.0[m] + noise[m] / gains[(m, m)])
                .collect();
            for w in &levels {
                assert!((w - levels[0]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn chi_square_uniform_phases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bins = 20;
        let mut counts = vec![0usize; bins];
        let mut total = 0;
        while total < 100_000 {
            let cfg = random_configuration(&mut rng, 4, 25);
            for &a in cfg.angles().iter() {
                counts[((a / (2.0 * PI)) * bins as f64) as usize] += 1;
                total += 1;
            }
        }
        let expected = total as f64 / bins as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 99th percentile of χ² with 19 degrees of freedom.
        assert!(chi2 < 36.19, "chi2 = {chi2}");
    }

    #[test]
    fn random_configuration_reproducible() {
        let a = random_configuration(&mut ChaCha8Rng::seed_from_u64(3), 2, 9);
        let b = random_configuration(&mut ChaCha8Rng::seed_from_u64(3), 2, 9);
        assert_eq!(a, b);
        assert!(a.angles().iter().all(|&x| (0.0..2.0 * PI).contains(&x)));
    }

    fn tiny_setup() -> (PropagationStack, CMatrix, Vec<f64>) {
        let geom = SimGeometry::reference(2, 9, 2).unwrap();
        let stack = build_propagation_stack(&geom).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let g = CMatrix::from_fn(2, 9, |_, _| cscg(&mut rng, 1.0));
        (stack, g, vec![1e-3, 1e-3])
    }

    #[test]
    fn codebook_nesting_and_log() {
        let (stack, g, noise) = tiny_setup();
        let small = codebook_search(&mut ChaCha8Rng::seed_from_u64(1), &stack, &g, &noise, 1.0, 8).unwrap();
        let large = codebook_search(&mut ChaCha8Rng::seed_from_u64(1), &stack, &g, &noise, 1.0, 16).unwrap();
        assert_eq!(&large.rates[..8], &small.rates[..]);
        assert!(large.best_rate >= small.best_rate);
        let max = large.rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(large.best_rate, max);
        assert_eq!(large.rates[large.best_index], max);
        assert_eq!(large.evaluated, 16);

        let single = codebook_search(&mut ChaCha8Rng::seed_from_u64(2), &stack, &g, &noise, 1.0, 1).unwrap();
        let cfg = random_configuration(&mut ChaCha8Rng::seed_from_u64(2), 2, 9);
        let (p, rate) = evaluate_configuration(&stack, &cfg, &g, &noise, 1.0).unwrap();
        assert_eq!(single.best_rate, rate);
        assert_eq!(single.best_power, p);
        let check = sum_rate_for_phases(&stack, &single.best_phases, &g, &single.best_power, &noise).unwrap();
        assert!((check - rate).abs() < 1e-12);
        assert!(codebook_search(&mut ChaCha8Rng::seed_from_u64(2), &stack, &g, &noise, 1.0, 0).is_err());
    }

    #[test]
    fn codebook_ties_keep_lowest_index() {
        let (stack, g, noise) = tiny_setup();
        let r = codebook_search(&mut ChaCha8Rng::seed_from_u64(4), &stack, &g, &noise, 0.0, 5).unwrap();
        assert_eq!(r.best_index, 0);
        assert_eq!(r.best_rate, 0.0);
    }

    fn random_h(rng: &mut ChaCha8Rng, m: usize, mt: usize) -> CMatrix {
        CMatrix::from_fn(m, mt, |_, _| cscg(rng, 1.0))
    }

    #[test]
    fn zf_identity_channel() {
        let h = CMatrix::identity(3, 3);
        let r = zf_precoder(&h, 3.0, &[1.0; 3]).unwrap();
        assert!((r.v.clone() - CMatrix::identity(3, 3)).norm() < 1e-12);
        for &p in &r.power.0 {
            assert!((p - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zf_nulls_interference() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let h = random_h(&mut rng, 4, 4);
            let r = zf_precoder(&h, 1.0, &[0.1; 4]).unwrap();
            let hv = &h * &r.v;
            let diag_min = (0..4).map(|i| hv[(i, i)].norm()).fold(f64::INFINITY, f64::min);
            for i in 0..4 {
                for j in 0..4 {
                    if i != j {
                        assert!(hv[(i, j)].norm() / diag_min < 1e-10);
                    }
                }
                assert!((r.v.column(i).norm() - 1.0).abs() < 1e-12);
            }
            assert!((r.power.total() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zf_rank_deficient_and_zero_power() {
        let row = [Complex64::new(1.0, 0.5), Complex64::new(-0.3, 0.2)];
        let h = CMatrix::from_row_slice(2, 2, &[row[0], row[1], row[0], row[1]]);
        assert_eq!(zf_precoder(&h, 1.0, &[1.0, 1.0]).unwrap_err(), Error::RankDeficient);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = random_h(&mut rng, 2, 2);
        assert_eq!(zf_precoder(&h, 0.0, &[1.0, 1.0]).unwrap().rate, 0.0);
        assert!(zf_precoder(&h, 1e-12, &[1.0, 1.0]).unwrap().rate < 1e-9);
    }

    #[test]
    fn mmse_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let h = random_h(&mut rng, 3, 4);
        let zf = zf_precoder(&h, 1.0, &[1.0; 3]).unwrap();
        let near = mmse_precoder_with_regularizer(&h, 1.0, &[1.0; 3], 1e-12).unwrap();
        assert!((zf.v - near.v).norm() < 1e-6);

        let far = mmse_precoder_with_regularizer(&h, 1.0, &[1.0; 3], 1e12).unwrap();
        let mf = h.adjoint();
        for k in 0..3 {
            let a = far.v.column(k);
            let b = mf.column(k);
            let cos = a.dotc(&b).norm() / (a.norm() * b.norm());
            assert!(cos > 1.0 - 1e-9);
        }
    }

    #[test]
    fn nosim_channel_statistics() {
        let layout = UserLayout::from_path_losses(vec![2.0, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let trials = 4000;
        let mut power = [0.0; 2];
        for _ in 0..trials {
            let h = sample_nosim_channel(&mut rng, &layout, 2, true).unwrap();
            for i in 0..2 {
                power[i] += h.row(i).norm_squared() / (2.0 * trials as f64);
            }
        }
        assert!((power[0] / 2.0 - 1.0).abs() < 0.05);
        assert!((power[1] / 0.5 - 1.0).abs() < 0.05);
        let a = sample_nosim_channel(&mut ChaCha8Rng::seed_from_u64(1), &layout, 3, true).unwrap();
        let b = sample_nosim_channel(&mut ChaCha8Rng::seed_from_u64(1), &layout, 3, false).unwrap();
        assert!((a - b).norm() < 1e-12);
    }
}
