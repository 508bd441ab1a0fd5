use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use simstack::config::Axis;
use simstack::experiment::{run, sweep, RunOutput};
use simstack::gradcheck::gradcheck;
use simstack::oracle::oracle;
use simstack::{ExperimentConfig, Result, Scheme};

#[derive(Parser)]
#[command(name = "simstack", version, about = "SIM-assisted multi-user MISO experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults apply to every missing key.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `run.seeds`.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Every scheme on every seed at one parameter point.
    Run {
        #[command(flatten)]
        common: Common,
        /// Comma-separated schemes; defaults to `sweep.schemes`.
        #[arg(long)]
        scheme: Option<String>,
    },
    /// The cross product of axis values, schemes and seeds.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scheme: Option<String>,
        /// power_dbm, layers, atoms or users; defaults to `sweep.axis`.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated values; defaults to `sweep.values`.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Exhaustive search over quantized phases and a power grid.
    Oracle {
        #[command(flatten)]
        common: Common,
    },
    /// Finite-difference check of every differentiable component.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Perturbs the analytic gradient of the named suite.
        #[arg(long, hide = true)]
        fault: Option<String>,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seeds {
        cfg.run.seeds = s;
    }
    Ok(cfg)
}

fn schemes(arg: &Option<String>, cfg: &ExperimentConfig) -> Result<Vec<Scheme>> {
    match arg {
        Some(list) => Scheme::parse_list(list),
        None => cfg.sweep.schemes.iter().map(|s| s.parse()).collect(),
    }
}

fn report(out: &RunOutput) {
    for p in &out.summary.points {
        println!(
            "{:<9} N={:<3} L={} M={} P={:>5.1} dBm  {:.4} ± {:.4} bit/s/Hz  ({} runs, {} failed)",
            p.scheme, p.atoms, p.layers, p.users, p.power_dbm, p.mean, p.stderr, p.count, p.failures
        );
    }
    println!("wrote {}", out.results_path.display());
}

fn main_inner(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { common, scheme } => {
            let cfg = load(&common)?;
            report(&run(&cfg, &schemes(&scheme, &cfg)?, &common.out)?);
        }
        Command::Sweep {
            common,
            scheme,
            axis,
            values,
        } => {
            let cfg = load(&common)?;
            let axis = match axis {
                Some(a) => Axis::parse(&a)?,
                None => cfg.sweep.axis,
            };
            let values = values.unwrap_or_else(|| cfg.sweep.values.clone());
            report(&sweep(&cfg, axis, &values, &schemes(&scheme, &cfg)?, &common.out)?);
        }
        Command::Oracle { common } => {
            let cfg = load(&common)?;
            for (k, r) in oracle(&cfg, &common.out)?.iter().enumerate() {
                println!(
                    "seed {}: {:.6} bit/s/Hz over {} evaluations",
                    cfg.run.first_seed + k as u64,
                    r.rate,
                    r.evaluations
                );
            }
        }
        Command::Gradcheck { instances, seed, fault } => {
            let r = gradcheck(instances, seed, fault.as_deref())?;
            println!("{r}");
            return Ok(r.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
