//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the lines reach the terminal. Failures listed in
//! `KNOWN_SHORTFALLS` are reported but do not fail the target; any other
//! failure, including a blown time budget, does.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng;

use simstack::config::{Axis, ExperimentConfig};
use simstack::experiment::{run, sweep, RESULTS_FILE, SUMMARY_FILE};
use simstack::gradcheck::gradcheck;
use simstack::oracle::brute_force;
use simstack::records::{mean_stderr, separation, ExperimentRecord};
use simstack::schemes::{evaluate, Instance};
use simstack::Scheme;
use simstack_core::baselines::{iterative_water_filling, mmse_precoder, sample_nosim_channel, zf_precoder, IWF_MAX_ITER, IWF_TOL};
use simstack_core::channel::{correlation_matrix, sample_channel, sample_layout, sinc, ScenarioConfig, UserLayout};
use simstack_core::geometry::SimGeometry;
use simstack_core::numerics::{psd_sqrt, rel_frobenius_error};
use simstack_core::rng::{indexed_stream, Component};
use simstack_core::{CMatrix, Complex64};
use simstack_ddpg::train;

/// (criterion, failing part). Both are analyzed in the README.
const KNOWN_SHORTFALLS: &[(&str, &str)] = &[
    ("scaled scheme ordering", "drl > codebook"),
    ("layer monotonicity", "whole"),
];

struct Verdict {
    /// Names of the failing parts; empty on success.
    failed: Vec<&'static str>,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict {
        failed: if passed { Vec::new() } else { vec!["whole"] },
        detail,
    }
}

fn minutes(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

fn gradient_gate() -> Verdict {
    let r = gradcheck(20, 0, None).expect("gradcheck runs");
    let worst = r.worst().expect("suites ran");
    verdict(
        r.passed() && r.checks.iter().all(|c| c.instances >= 20),
        format!(
            "{} suites x 20 instances, worst relative error {:.2e} ({})",
            r.checks.len(),
            worst.max_rel_err,
            worst.name
        ),
    )
}

fn tiny_oracle() -> Verdict {
    let mut cfg = ExperimentConfig::from_toml_str("[geometry]\nlayers = 1\natoms = 4\nusers = 1\n").unwrap();
    cfg.run.ao_restarts = 10;
    cfg.codebook.size = 2000;
    cfg.drl.episodes = 3;
    let inst = Instance::new(&cfg).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for seed in 0..3 {
        let g = inst.channel(seed).unwrap().g;
        let o = brute_force(&inst.stack, &g, &inst.noise(), inst.budget(), 16, 10, 1 << 20).unwrap();
        let ao = evaluate(Scheme::Ao, &inst, seed).unwrap().sum_rate / o.rate;
        let drl = evaluate(Scheme::Drl, &inst, seed).unwrap().sum_rate / o.rate;
        let cb = evaluate(Scheme::Codebook, &inst, seed).unwrap().sum_rate / o.rate;
        ok &= o.evaluations == 65536 && ao >= 1.0 && drl >= 0.9 && cb <= 1.0;
        detail.push(format!("seed {seed}: ao {ao:.4} drl {drl:.4} codebook {cb:.4}"));
    }
    verdict(ok, format!("ratios to the 16-level optimum; {}", detail.join(", ")))
}

fn water_filling() -> Verdict {
    let mut rng = indexed_stream(0, Component::Test, 1);
    let (mut worst_gap, mut worst_budget) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let m = rng.random_range(2..4);
        let budget = 10f64.powf(rng.random_range(-1.0..2.0));
        let noise: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..2.0)).collect();
        let direct: Vec<f64> = (0..m).map(|_| 10f64.powf(rng.random_range(-1.5..1.5))).collect();
        let gains = DMatrix::from_fn(m, m, |i, j| if i == j { direct[i] } else { 0.0 });
        let rate = |p: &[f64]| -> f64 { (0..m).map(|i| (1.0 + direct[i] * p[i] / noise[i]).log2()).sum() };
        let p = iterative_water_filling(&gains, &noise, budget, IWF_MAX_ITER, IWF_TOL).unwrap();
        let mut best = f64::NEG_INFINITY;
        if m == 2 {
            for k in 0..10_000 {
                let a = budget * k as f64 / 9_999.0;
                best = best.max(rate(&[a, budget - a]));
            }
        } else {
            // 141 steps per axis gives 10 153 simplex points.
            let s = 141;
            for i in 0..=s {
                for j in 0..=s - i {
                    let (a, b) = (budget * i as f64 / s as f64, budget * j as f64 / s as f64);
                    best = best.max(rate(&[a, b, (budget - a - b).max(0.0)]));
                }
            }
        }
        worst_gap = worst_gap.max((rate(&p.0) - best).abs());
        worst_budget = worst_budget.max((p.total() - budget).abs());
    }
    verdict(
        worst_gap <= 1e-3 && worst_budget <= 1e-9,
        format!("100 instances, worst rate gap {worst_gap:.2e} bps/Hz, worst budget error {worst_budget:.2e} W"),
    )
}

fn condition_number(h: &CMatrix) -> f64 {
    let s = h.clone().singular_values();
    s.max() / s.min()
}

fn zf_nulling() -> Verdict {
    let scenario = ScenarioConfig {
        power_dbm: 0.0,
        ..ScenarioConfig::default()
    };
    let mut rng = indexed_stream(0, Component::Test, 2);
    let noise = vec![scenario.noise_watts(); 4];
    let (mut worst_leak, mut zf_rates, mut mmse_rates) = (0.0f64, Vec::new(), Vec::new());
    while zf_rates.len() < 100 {
        let layout = sample_layout(&mut rng, &scenario, 4).unwrap();
        let h = sample_nosim_channel(&mut rng, &layout, 4, false).unwrap();
        let white = CMatrix::from_fn(4, 4, |i, j| h[(i, j)] / Complex64::new(layout.path_losses[i].sqrt(), 0.0));
        if condition_number(&white) > 10.0 {
            continue;
        }
        let zf = zf_precoder(&h, scenario.power_watts(), &noise).unwrap();
        let e = &h * &zf.v;
        let diag = (0..4).map(|i| e[(i, i)].norm()).fold(f64::INFINITY, f64::min);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    worst_leak = worst_leak.max(e[(i, j)].norm() / diag);
                }
            }
        }
        zf_rates.push(zf.rate);
        mmse_rates.push(mmse_precoder(&h, scenario.power_watts(), &noise).unwrap().rate);
    }
    let (zf, _) = mean_stderr(&zf_rates);
    let (mmse, _) = mean_stderr(&mmse_rates);
    verdict(
        worst_leak < 1e-10 && mmse >= zf,
        format!("worst relative leakage {worst_leak:.2e}; mean rate at 0 dBm: mmse {mmse:.4}, zf {zf:.4}"),
    )
}

fn channel_statistics() -> Verdict {
    let geom = SimGeometry::reference(1, 16, 2).unwrap();
    let r = correlation_matrix(&geom);
    let r_sqrt = psd_sqrt(&r).unwrap();
    let layout = UserLayout::from_path_losses(vec![2.5e-9, 4.0e-10]);
    let mut rng = indexed_stream(0, Component::Test, 3);
    let k = 10_000;
    let mut cov = vec![CMatrix::zeros(16, 16); 2];
    for _ in 0..k {
        let g = sample_channel(&mut rng, &layout, &r_sqrt, 0).unwrap().g;
        for (m, c) in cov.iter_mut().enumerate() {
            let row = g.row(m).transpose();
            *c += &row * row.adjoint();
        }
    }
    let errors: Vec<f64> = cov
        .iter()
        .zip(&layout.path_losses)
        .map(|(c, rho)| rel_frobenius_error(&(c / Complex64::new(k as f64, 0.0)), &(&r * Complex64::new(*rho, 0.0))))
        .collect();
    let diag_err = (0..16).map(|i| (r[(i, i)] - Complex64::new(1.0, 0.0)).norm()).fold(0.0, f64::max);
    // Horizontally adjacent atoms sit λ/2 apart.
    let zero = r[(0, 1)].norm().max(sinc(1.0).abs());
    let worst = errors.iter().copied().fold(0.0, f64::max);
    verdict(
        worst <= 0.05 && diag_err <= 1e-12 && zero <= 1e-12,
        format!("covariance error per row {errors:.4?}; diagonal error {diag_err:.1e}; λ/2 correlation {zero:.1e}"),
    )
}

fn rates(records: &[ExperimentRecord], scheme: Scheme) -> Vec<f64> {
    records
        .iter()
        .filter(|r| r.scheme == scheme.name())
        .map(|r| r.sum_rate)
        .collect()
}

fn separated(a: &[f64], b: &[f64]) -> (bool, String) {
    let (d, se) = separation(a, b);
    (d > se, format!("{d:+.4} (se {se:.4})"))
}

fn scaled_ordering() -> Verdict {
    let cfg = ExperimentConfig::default();
    let dir = tempfile::tempdir().unwrap();
    let schemes = [Scheme::Drl, Scheme::Codebook, Scheme::Random, Scheme::Ao];
    let out = run(&cfg, &schemes, dir.path()).unwrap();
    let [drl, cb, rnd, ao] = schemes.map(|s| rates(&out.records, s));
    let means: Vec<String> = schemes
        .iter()
        .zip([&drl, &cb, &rnd, &ao])
        .map(|(s, v)| format!("{} {:.4}", s, mean_stderr(v).0))
        .collect();
    let checks = [
        ("drl > codebook", separated(&drl, &cb)),
        ("codebook > random", separated(&cb, &rnd)),
        ("ao > random", separated(&ao, &rnd)),
    ];
    let mut failed: Vec<&'static str> = checks.iter().filter(|(_, (p, _))| !p).map(|(n, _)| *n).collect();
    if out.records.iter().any(|r| r.failed()) {
        failed.push("failed runs");
    }
    let seps: Vec<String> = checks
        .iter()
        .map(|(n, (p, s))| format!("{n} {s} {}", if *p { "ok" } else { "not separated" }))
        .collect();
    Verdict {
        failed,
        detail: format!("means {}; {}", means.join(", "), seps.join(", ")),
    }
}

fn layer_monotonicity() -> Verdict {
    let cfg = ExperimentConfig::default();
    let dir = tempfile::tempdir().unwrap();
    let out = sweep(&cfg, Axis::Layers, &[1.0, 2.0], &[Scheme::Ao], dir.path()).unwrap();
    let l1: Vec<f64> = out.records.iter().filter(|r| r.layers == 1).map(|r| r.sum_rate).collect();
    let l2: Vec<f64> = out.records.iter().filter(|r| r.layers == 2).map(|r| r.sum_rate).collect();
    let (ok, sep) = separated(&l2, &l1);
    verdict(
        ok && l1.len() == 20 && l2.len() == 20,
        format!("ao L=1 {:.4}, L=2 {:.4}, difference {sep}", mean_stderr(&l1).0, mean_stderr(&l2).0),
    )
}

fn ddpg_mechanics() -> Verdict {
    let mut cfg = ExperimentConfig::default();
    cfg.drl.audit = true;
    let inst = Instance::new(&cfg).unwrap();
    let env = simstack_ddpg::Environment {
        stack: inst.stack.clone(),
        scenario: cfg.scenario.clone(),
        r_sqrt: inst.r_sqrt.clone(),
        channel: inst.channel(0).unwrap(),
    };
    let r = train(&env, &cfg.drl, 0).unwrap();
    let a = r.audit.expect("audit enabled");
    let total = cfg.drl.episodes * cfg.drl.steps_per_episode;
    verdict(
        a.clean() && a.actions_checked == total && a.soft_update_checks > 0 && a.variance_checks == total,
        format!(
            "{} soft updates, {} actions (modulus error {:.1e}, budget error {:.1e}), {} variance entries, {} early samples",
            a.soft_update_checks, a.actions_checked, a.worst_modulus_error, a.worst_budget_error, a.variance_checks, a.samples_before_full
        ),
    )
}

fn determinism() -> Verdict {
    let cfg = ExperimentConfig::from_toml_str(
        "[geometry]\natoms = 9\n[codebook]\nsize = 200\n[run]\nseeds = 4\n[drl]\nepisodes = 2\nsteps_per_episode = 100\nreplay_capacity = 64\n",
    )
    .unwrap();
    let dirs: Vec<_> = (0..4).map(|_| tempfile::tempdir().unwrap()).collect();
    run(&cfg, &Scheme::ALL, dirs[0].path()).unwrap();
    run(&cfg, &Scheme::ALL, dirs[1].path()).unwrap();
    let schemes = [Scheme::Random, Scheme::Codebook, Scheme::Ao];
    sweep(&cfg, Axis::PowerDbm, &[0.0, 10.0, 20.0], &schemes, dirs[2].path()).unwrap();
    sweep(&cfg, Axis::PowerDbm, &[0.0, 10.0, 20.0], &schemes, dirs[3].path()).unwrap();
    let same = |a: usize, b: usize, f: &str| std::fs::read(dirs[a].path().join(f)).unwrap() == std::fs::read(dirs[b].path().join(f)).unwrap();
    let files = [RESULTS_FILE, SUMMARY_FILE];
    let ok = files.iter().all(|f| same(0, 1, f) && same(2, 3, f)) && same(0, 1, "trace_drl_3.csv");
    verdict(ok, "run (all schemes) and power sweep repeated: results, summary and traces compared byte for byte".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict, Duration); 9] = [
        ("gradient gate", gradient_gate, minutes(2)),
        ("tiny-instance oracle", tiny_oracle, minutes(10)),
        ("water-filling", water_filling, minutes(1)),
        ("zf nulling", zf_nulling, minutes(1)),
        ("channel statistics", channel_statistics, minutes(1)),
        ("scaled scheme ordering", scaled_ordering, minutes(30)),
        ("layer monotonicity", layer_monotonicity, minutes(10)),
        ("ddpg mechanics", ddpg_mechanics, minutes(10)),
        ("determinism", determinism, minutes(10)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut unexpected = 0;
    for (name, check, limit) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let v = check();
        let elapsed = start.elapsed();
        let mut failed = v.failed;
        if elapsed > limit {
            failed.push("time budget");
        }
        let passed = failed.is_empty();
        let known = !passed && failed.iter().all(|f| KNOWN_SHORTFALLS.contains(&(name, *f)));
        if !passed && !known {
            unexpected += 1;
        }
        println!(
            "{} {name} [{:.1}s of {}s]: {}",
            match (passed, known) {
                (true, _) => "PASS",
                (false, false) => "FAIL",
                (false, true) => "FAIL (known shortfall)",
            },
            elapsed.as_secs_f64(),
            limit.as_secs(),
            v.detail
        );
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
