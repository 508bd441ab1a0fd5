//! One scheme evaluated on one seeded channel realization.

use std::fmt;
use std::str::FromStr;

use simstack_core::ao::{ao_optimize, GRADIENT_MODE};
use simstack_core::baselines::{
    codebook_search, evaluate_configuration, mmse_precoder, random_configuration, sample_nosim_channel, zf_precoder,
};
use simstack_core::channel::{correlation_matrix, sample_channel, sample_layout, ChannelRealization};
use simstack_core::geometry::{build_propagation_stack, PropagationStack, SimGeometry};
use simstack_core::numerics::psd_sqrt;
use simstack_core::rng::{indexed_stream, stream, Component};
use simstack_core::CMatrix;
use simstack_ddpg::train::TraceRow;
use simstack_ddpg::{train, AgentConfig, Environment};

use crate::config::ExperimentConfig;
use crate::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    Random,
    Codebook,
    Zf,
    Mmse,
    Ao,
    Drl,
    /// DRL with power held uniform.
    DrlUpa,
}

impl Scheme {
    pub const ALL: [Scheme; 7] = [
        Scheme::Random,
        Scheme::Codebook,
        Scheme::Zf,
        Scheme::Mmse,
        Scheme::Ao,
        Scheme::Drl,
        Scheme::DrlUpa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Random => "random",
            Scheme::Codebook => "codebook",
            Scheme::Zf => "zf",
            Scheme::Mmse => "mmse",
            Scheme::Ao => "ao",
            Scheme::Drl => "drl",
            Scheme::DrlUpa => "drl-upa",
        }
    }

    pub fn uses_sim(self) -> bool {
        !matches!(self, Scheme::Zf | Scheme::Mmse)
    }

    /// Parses a comma-separated list.
    pub fn parse_list(s: &str) -> Result<Vec<Scheme>> {
        s.split(',').map(|p| p.trim().parse()).collect()
    }
}

impl FromStr for Scheme {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| HarnessError::UnknownScheme(s.to_string()))
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Geometry-dependent quantities shared by every seed of a parameter point.
#[derive(Debug, Clone)]
pub struct Instance {
    pub config: ExperimentConfig,
    pub geometry: SimGeometry,
    pub stack: PropagationStack,
    pub r_sqrt: CMatrix,
}

impl Instance {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        let geometry = config.geometry.build()?;
        let stack = build_propagation_stack(&geometry)?;
        let r_sqrt = psd_sqrt(&correlation_matrix(&geometry))?;
        Ok(Self {
            config: config.clone(),
            geometry,
            stack,
            r_sqrt,
        })
    }

    pub fn budget(&self) -> f64 {
        self.config.scenario.power_watts()
    }

    pub fn noise(&self) -> Vec<f64> {
        vec![self.config.scenario.noise_watts(); self.geometry.streams()]
    }

    /// The user layout and SIM channel for `seed`; identical for every scheme.
    pub fn channel(&self, seed: u64) -> Result<ChannelRealization> {
        let layout = sample_layout(&mut stream(seed, Component::Layout), &self.config.scenario, self.geometry.streams())?;
        Ok(sample_channel(&mut stream(seed, Component::Channel), &layout, &self.r_sqrt, seed)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub sum_rate: f64,
    pub trace: Option<Vec<TraceRow>>,
    pub tags: Vec<String>,
}

fn drl_tags(cfg: &AgentConfig) -> Vec<String> {
    let refresh = serde_json::to_value(cfg.channel_refresh).expect("enum serializes");
    vec![
        format!("drl_episodes={}", cfg.episodes),
        format!("drl_steps={}", cfg.steps_per_episode),
        format!("replay={}", cfg.replay_capacity),
        format!("noise_gap={}", cfg.noise_gap),
        format!("conv_channels={}", cfg.conv_channels),
        format!("width_factor={}", cfg.width_factor),
        format!("channel_refresh={}", refresh.as_str().unwrap_or("?")),
        format!("phase_only={}", cfg.phase_only),
        "pool=adaptive_avg_3x3".into(),
    ]
}

/// Runs `scheme` on the channel of `seed`.
pub fn evaluate(scheme: Scheme, inst: &Instance, seed: u64) -> Result<Outcome> {
    let cfg = &inst.config;
    let budget = inst.budget();
    let noise = inst.noise();
    let channel = inst.channel(seed)?;
    let mut tags = Vec::new();
    let mut trace = None;
    let sum_rate = match scheme {
        Scheme::Random => {
            tags.push("power=iwf".into());
            let phases = random_configuration(&mut stream(seed, Component::Codebook), inst.stack.layers(), inst.stack.atoms());
            evaluate_configuration(&inst.stack, &phases, &channel.g, &noise, budget)?.1
        }
        Scheme::Codebook => {
            tags.push("power=iwf".into());
            tags.push(format!("codebook_size={}", cfg.codebook.size));
            let mut rng = stream(seed, Component::Codebook);
            codebook_search(&mut rng, &inst.stack, &channel.g, &noise, budget, cfg.codebook.size)?.best_rate
        }
        Scheme::Zf | Scheme::Mmse => {
            let m = inst.geometry.streams();
            tags.push(format!("nosim_tx_antennas={m}"));
            tags.push(format!("nosim_correlated={}", cfg.nosim.correlated));
            tags.push("power=iwf".into());
            let h = sample_nosim_channel(&mut stream(seed, Component::NoSimChannel), &channel.layout, m, cfg.nosim.correlated)?;
            if scheme == Scheme::Zf {
                zf_precoder(&h, budget, &noise)?.rate
            } else {
                tags.push("mmse_regularizer=M*noise/P".into());
                mmse_precoder(&h, budget, &noise)?.rate
            }
        }
        Scheme::Ao => {
            tags.push(format!("ao_gradient={GRADIENT_MODE}"));
            tags.push(format!("ao_restarts={}", cfg.run.ao_restarts));
            tags.push("power=iwf".into());
            let mut best = f64::NEG_INFINITY;
            for r in 0..cfg.run.ao_restarts {
                let mut rng = indexed_stream(seed, Component::InitialPhases, r as u32);
                best = best.max(ao_optimize(&inst.stack, &channel.g, &noise, budget, &cfg.ao, &mut rng)?.rate);
            }
            best
        }
        Scheme::Drl | Scheme::DrlUpa => {
            let agent = AgentConfig {
                phase_only: scheme == Scheme::DrlUpa,
                ..cfg.drl.clone()
            };
            tags.extend(drl_tags(&agent));
            let env = Environment {
                stack: inst.stack.clone(),
                scenario: cfg.scenario.clone(),
                r_sqrt: inst.r_sqrt.clone(),
                channel,
            };
            let result = train(&env, &agent, seed)?;
            for d in &result.diagnostics {
                tags.push(format!("diagnostic={}", d.replace([';', ','], " ")));
            }
            trace = Some(result.trace);
            result.best_rate
        }
    };
    Ok(Outcome { sum_rate, trace, tags })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("dqn".parse::<Scheme>().is_err());
        assert_eq!(Scheme::parse_list("ao, drl").unwrap(), vec![Scheme::Ao, Scheme::Drl]);
    }

    #[test]
    fn codebook_of_one_equals_random() {
        let mut cfg = ExperimentConfig::default();
        cfg.codebook.size = 1;
        let inst = Instance::new(&cfg).unwrap();
        for seed in 0..3 {
            let r = evaluate(Scheme::Random, &inst, seed).unwrap().sum_rate;
            let c = evaluate(Scheme::Codebook, &inst, seed).unwrap().sum_rate;
            assert_eq!(r, c);
        }
    }
}
