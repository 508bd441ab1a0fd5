//! Exhaustive search over quantized phases and a power grid.

use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use simstack_core::geometry::{cascade_response, PhaseConfiguration, PropagationStack};
use simstack_core::metrics::{effective_gains, sum_rate_from_gains, PowerAllocation};
use simstack_core::CMatrix;

use crate::config::ExperimentConfig;
use crate::experiment::RESULTS_FILE;
use crate::records::{summarize, write_results, write_summary, ExperimentRecord};
use crate::schemes::Instance;
use crate::{HarnessError, Result};

pub const ORACLE_FILE: &str = "oracle.json";

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub rate: f64,
    pub phases: PhaseConfiguration,
    pub power: PowerAllocation,
    pub evaluations: u64,
}

/// All ways to split `steps` units among `parts` streams.
pub fn power_grid(parts: usize, steps: usize, budget: f64) -> Vec<Vec<f64>> {
    fn rec(left: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            rec(left - k, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    if parts == 1 {
        return vec![vec![budget]];
    }
    let mut units = Vec::new();
    rec(steps, parts, &mut Vec::new(), &mut units);
    units
        .into_iter()
        .map(|u| u.into_iter().map(|k| budget * k as f64 / steps as f64).collect())
        .collect()
}

/// Number of evaluations `levels^(N·L) × |power grid|`, as a float to
/// survive overflow.
pub fn search_size(levels: usize, atoms: usize, layers: usize, grid: usize) -> f64 {
    (levels as f64).powi((atoms * layers) as i32) * grid as f64
}

fn phases_for(index: u64, levels: usize, layers: usize, atoms: usize) -> PhaseConfiguration {
    let mut rest = index;
    let step = 2.0 * PI / levels as f64;
    let angles: Vec<f64> = (0..layers * atoms)
        .map(|_| {
            let digit = rest % levels as u64;
            rest /= levels as u64;
            digit as f64 * step
        })
        .collect();
    PhaseConfiguration::from_layers(layers, atoms, &angles).expect("sizes match")
}

/// Maximum sum rate over every quantized phase configuration and grid
/// power vector. Ties keep the lowest configuration index, then the first
/// grid point.
pub fn brute_force(
    stack: &PropagationStack,
    g: &CMatrix,
    noise: &[f64],
    budget: f64,
    levels: usize,
    power_steps: usize,
    max_evaluations: u64,
) -> Result<OracleResult> {
    let (layers, atoms, m) = (stack.layers(), stack.atoms(), stack.streams());
    let grid = power_grid(m, power_steps, budget);
    let size = search_size(levels, atoms, layers, grid.len());
    if size > max_evaluations as f64 {
        return Err(HarnessError::SearchTooLarge {
            size,
            limit: max_evaluations,
        });
    }
    let configs = (levels as u64).pow((atoms * layers) as u32);
    let best = (0..configs)
        .into_par_iter()
        .map(|idx| -> Result<(f64, u64, usize)> {
            let phases = phases_for(idx, levels, layers, atoms);
            let gains = effective_gains(g, &cascade_response(stack, &phases)?)?;
            let mut local = (f64::NEG_INFINITY, idx, 0);
            for (k, p) in grid.iter().enumerate() {
                let rate = sum_rate_from_gains(&gains, p, noise)?;
                if rate > local.0 {
                    local = (rate, idx, k);
                }
            }
            Ok(local)
        })
        .try_reduce(
            || (f64::NEG_INFINITY, u64::MAX, 0),
            |a, b| {
                let better = b.0 > a.0 || (b.0 == a.0 && (b.1, b.2) < (a.1, a.2));
                Ok(if better { b } else { a })
            },
        )?;
    Ok(OracleResult {
        rate: best.0,
        phases: phases_for(best.1, levels, layers, atoms),
        power: PowerAllocation(grid[best.2].clone()),
        evaluations: size as u64,
    })
}

#[derive(Debug, Clone, Serialize)]
struct OracleEntry {
    seed: u64,
    sum_rate: f64,
    evaluations: u64,
    /// Layer-major phases, radians.
    phases: Vec<f64>,
    power_watts: Vec<f64>,
}

/// Runs the oracle for every configured seed and writes `results.csv`,
/// `summary.json` and `oracle.json` (with the maximizers) to `out`.
pub fn oracle(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<OracleResult>> {
    cfg.validate()?;
    let inst = Instance::new(cfg)?;
    let o = &cfg.oracle;
    let grid = power_grid(inst.geometry.streams(), o.power_steps, inst.budget()).len();
    let size = search_size(o.levels, inst.geometry.atoms(), inst.geometry.layers(), grid);
    if size > o.max_evaluations as f64 {
        return Err(HarnessError::SearchTooLarge {
            size,
            limit: o.max_evaluations,
        });
    }
    std::fs::create_dir_all(out)?;
    let hash = cfg.hash();
    let seeds: Vec<u64> = (0..cfg.run.seeds as u64).map(|k| cfg.run.first_seed + k).collect();
    let mut results = Vec::new();
    let mut records = Vec::new();
    let mut entries = Vec::new();
    for &seed in &seeds {
        let ch = inst.channel(seed)?;
        let r = brute_force(&inst.stack, &ch.g, &inst.noise(), inst.budget(), o.levels, o.power_steps, o.max_evaluations)?;
        records.push(ExperimentRecord {
            scheme: "oracle".into(),
            seed,
            atoms: cfg.geometry.atoms,
            layers: cfg.geometry.layers,
            users: cfg.geometry.users,
            power_dbm: cfg.scenario.power_dbm,
            sum_rate: r.rate,
            wall_time: 0.0,
            config_hash: hash.clone(),
            assumptions: format!(
                "oracle_levels={};oracle_power_steps={};evaluations={}",
                o.levels, o.power_steps, r.evaluations
            ),
        });
        entries.push(OracleEntry {
            seed,
            sum_rate: r.rate,
            evaluations: r.evaluations,
            phases: r.phases.to_layers(),
            power_watts: r.power.0.clone(),
        });
        results.push(r);
    }
    write_results(&out.join(RESULTS_FILE), &records)?;
    write_summary(&out.join(crate::experiment::SUMMARY_FILE), &summarize(&records))?;
    let mut text = serde_json::to_string_pretty(&entries)?;
    text.push('\n');
    std::fs::write(out.join(ORACLE_FILE), text)?;
    Ok(results)
}
