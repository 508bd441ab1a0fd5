//! Seeded runs and parameter sweeps.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::config::{Axis, ExperimentConfig};
use crate::records::{summarize, write_results, write_summary, write_trace, ExperimentRecord, Summary};
use crate::schemes::{evaluate, Instance, Scheme};
use crate::Result;

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<ExperimentRecord>,
    pub summary: Summary,
    pub results_path: PathBuf,
    pub trace_paths: Vec<PathBuf>,
}

struct Task<'a> {
    inst: &'a Instance,
    hash: String,
    scheme: Scheme,
    seed: u64,
    /// Sweep point label appended to trace file names.
    label: Option<String>,
}

fn seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    (0..cfg.run.seeds as u64).map(|k| cfg.run.first_seed + k).collect()
}

fn execute(task: &Task<'_>) -> (ExperimentRecord, Option<Vec<simstack_ddpg::train::TraceRow>>) {
    let cfg = &task.inst.config;
    let start = Instant::now();
    let outcome = evaluate(task.scheme, task.inst, task.seed);
    let elapsed = start.elapsed().as_secs_f64();
    let (sum_rate, mut tags, trace) = match outcome {
        Ok(o) if o.sum_rate.is_finite() => (o.sum_rate, o.tags, o.trace),
        Ok(o) => {
            let mut tags = o.tags;
            tags.push("failed=non-finite sum rate".into());
            (f64::NAN, tags, o.trace)
        }
        Err(e) => (f64::NAN, vec![format!("failed={}", e.to_string().replace([';', ',', '\n'], " "))], None),
    };
    if !task.scheme.uses_sim() {
        tags.insert(0, "sim=none".into());
    }
    let record = ExperimentRecord {
        scheme: task.scheme.name().to_string(),
        seed: task.seed,
        atoms: cfg.geometry.atoms,
        layers: cfg.geometry.layers,
        users: cfg.geometry.users,
        power_dbm: cfg.scenario.power_dbm,
        sum_rate,
        wall_time: if cfg.run.record_wall_time { elapsed } else { 0.0 },
        config_hash: task.hash.clone(),
        assumptions: tags.join(";"),
    };
    (record, trace)
}

fn run_tasks(tasks: &[Task<'_>], write_traces: bool, out: &Path) -> Result<RunOutput> {
    std::fs::create_dir_all(out)?;
    let results: Vec<_> = tasks.par_iter().map(execute).collect();
    let mut records = Vec::with_capacity(results.len());
    let mut trace_paths = Vec::new();
    for (task, (record, trace)) in tasks.iter().zip(results) {
        if let (true, Some(trace)) = (write_traces, trace) {
            let name = match &task.label {
                None => format!("trace_{}_{}.csv", task.scheme.name(), task.seed),
                Some(l) => format!("trace_{}_{}_{}.csv", task.scheme.name(), task.seed, l),
            };
            let path = out.join(name);
            write_trace(&path, &trace)?;
            trace_paths.push(path);
        }
        records.push(record);
    }
    let results_path = out.join(RESULTS_FILE);
    write_results(&results_path, &records)?;
    let summary = summarize(&records);
    write_summary(&out.join(SUMMARY_FILE), &summary)?;
    Ok(RunOutput {
        records,
        summary,
        results_path,
        trace_paths,
    })
}

/// Every scheme on every seed at the configured point.
pub fn run(cfg: &ExperimentConfig, schemes: &[Scheme], out: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    if cfg.run.seeds == 0 {
        eprintln!("warning: zero seeds requested; writing empty results");
    }
    let inst = Instance::new(cfg)?;
    let hash = cfg.hash();
    let tasks: Vec<Task<'_>> = schemes
        .iter()
        .flat_map(|&scheme| {
            seeds(cfg).into_iter().map({
                let (inst, hash) = (&inst, &hash);
                move |seed| Task {
                    inst,
                    hash: hash.clone(),
                    scheme,
                    seed,
                    label: None,
                }
            })
        })
        .collect();
    run_tasks(&tasks, cfg.run.traces, out)
}

/// The cross product of axis values, schemes and seeds, in that nesting order.
pub fn sweep(cfg: &ExperimentConfig, axis: Axis, values: &[f64], schemes: &[Scheme], out: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    let points: Vec<(f64, ExperimentConfig)> = values
        .iter()
        .map(|&v| Ok((v, cfg.with_axis(axis, v)?)))
        .collect::<Result<_>>()?;
    let instances: Vec<(f64, Instance, String)> = points
        .iter()
        .map(|(v, c)| Ok((*v, Instance::new(c)?, c.hash())))
        .collect::<Result<_>>()?;
    let mut tasks = Vec::new();
    for (v, inst, hash) in &instances {
        for &scheme in schemes {
            for seed in seeds(cfg) {
                tasks.push(Task {
                    inst,
                    hash: hash.clone(),
                    scheme,
                    seed,
                    label: Some(format!("{}{}", axis.name(), v)),
                });
            }
        }
    }
    if tasks.is_empty() {
        eprintln!("warning: empty sweep; writing empty results");
    }
    run_tasks(&tasks, cfg.run.traces, out)
}
