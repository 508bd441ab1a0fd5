//! The episode/step training loop.

use simstack_core::baselines::random_configuration;
use simstack_core::channel::{sample_channel, sample_layout, ChannelRealization, ScenarioConfig};
use simstack_core::geometry::{PhaseConfiguration, PropagationStack};
use simstack_core::metrics::{sum_rate_for_phases, PowerAllocation};
use simstack_core::rng::{indexed_stream, stream, Component};
use simstack_core::CMatrix;
use simstack_nn::report::NetworkReport;
use simstack_nn::tensor::Module;

use crate::action::{decode_action, encode_action, feasibility, variance_at, whiten_and_project, Dims, WhiteningSchedule};
use crate::agent::Agent;
use crate::config::{AgentConfig, ChannelRefresh};
use crate::replay::{ReplayBuffer, Transition};
use crate::state::{build_state, channel_scale};
use crate::Result;

/// Everything the agent interacts with.
#[derive(Debug, Clone)]
pub struct Environment {
    pub stack: PropagationStack,
    pub scenario: ScenarioConfig,
    /// Square root of the atom correlation matrix, for fresh channel draws.
    pub r_sqrt: CMatrix,
    /// Channel used for the first episode, and throughout with
    /// [`ChannelRefresh::Fixed`].
    pub channel: ChannelRealization,
}

impl Environment {
    pub fn budget(&self) -> f64 {
        self.scenario.power_watts()
    }

    pub fn noise(&self) -> Vec<f64> {
        vec![self.scenario.noise_watts(); self.stack.streams()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub episode: usize,
    pub reward: f64,
    /// Exploration variance applied at this step.
    pub variance: f64,
    /// Actor learning rate after this step.
    pub lr: f64,
}

/// Checks made in audit mode; every mismatch counter should stay at zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditReport {
    pub soft_update_checks: usize,
    pub soft_update_mismatches: usize,
    pub actions_checked: usize,
    pub infeasible_actions: usize,
    pub worst_modulus_error: f64,
    pub worst_budget_error: f64,
    pub samples_before_full: usize,
    pub variance_checks: usize,
    pub variance_mismatches: usize,
}

impl AuditReport {
    pub fn clean(&self) -> bool {
        self.soft_update_mismatches == 0
            && self.infeasible_actions == 0
            && self.samples_before_full == 0
            && self.variance_mismatches == 0
    }
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub best_phases: PhaseConfiguration,
    pub best_power: PowerAllocation,
    pub best_rate: f64,
    pub best_step: usize,
    pub trace: Vec<TraceRow>,
    pub episode_best: Vec<f64>,
    pub learning_steps: usize,
    pub last_critic_loss: Option<f64>,
    /// Non-finite values that cut an episode short.
    pub diagnostics: Vec<String>,
    pub audit: Option<AuditReport>,
    pub network_report: NetworkReport,
}

pub const FEASIBILITY_TOL: f64 = 1e-9;

fn snapshot<M: Module>(m: &M) -> Vec<Vec<f64>> {
    m.params().iter().map(|p| p.value.data().to_vec()).collect()
}

fn matches_convex_combination<M: Module>(updated: &M, old: &[Vec<f64>], source: &[Vec<f64>], eta: f64) -> bool {
    updated.params().iter().zip(old).zip(source).all(|((p, o), s)| {
        p.value
            .data()
            .iter()
            .zip(o)
            .zip(s)
            .all(|((&v, &a), &b)| v == (1.0 - eta) * a + eta * b)
    })
}

/// Runs `episodes × steps_per_episode` interactions and returns the best
/// executed action. All randomness derives from `seed`.
pub fn train(env: &Environment, cfg: &AgentConfig, seed: u64) -> Result<TrainResult> {
    cfg.validate()?;
    let stack = &env.stack;
    let dims = Dims::new(stack.atoms(), stack.layers(), stack.streams(), cfg.phase_only)?;
    let budget = env.budget();
    let noise = env.noise();

    let mut agent = Agent::new(&mut stream(seed, Component::NetworkInit), dims, budget, cfg);
    let mut explore_rng = stream(seed, Component::Exploration);
    let mut replay_rng = stream(seed, Component::Replay);
    let mut phase_rng = stream(seed, Component::InitialPhases);
    let mut env_rng = indexed_stream(seed, Component::Channel, 1);

    let mut replay = ReplayBuffer::new(cfg.replay_capacity);
    let mut whitening = WhiteningSchedule::new(cfg.noise_variance, cfg.noise_decay, cfg.noise_gap, cfg.noise_clip);
    let mut audit = cfg.audit.then(AuditReport::default);

    let mut g = env.channel.g.clone();
    let mut best: Option<(Vec<f64>, f64, usize)> = None;
    let mut trace = Vec::with_capacity(cfg.episodes * cfg.steps_per_episode);
    let mut episode_best = Vec::with_capacity(cfg.episodes);
    let mut diagnostics = Vec::new();
    let mut learning_steps = 0;
    let mut last_critic_loss = None;
    let mut step = 0;

    let resample = |rng: &mut _| -> Result<CMatrix> {
        let layout = sample_layout(rng, &env.scenario, dims.users)?;
        Ok(sample_channel(rng, &layout, &env.r_sqrt, seed)?.g)
    };

    for episode in 0..cfg.episodes {
        if episode > 0 && cfg.channel_refresh != ChannelRefresh::Fixed {
            g = resample(&mut env_rng)?;
        }
        let mut scale = channel_scale(&g);
        let start = random_configuration(&mut phase_rng, dims.layers, dims.atoms);
        let start_power = PowerAllocation::uniform(dims.users, budget);
        let start_rate = sum_rate_for_phases(stack, &start, &g, &start_power, &noise)?;
        let mut state = build_state(start_rate, &encode_action(&start, &start_power, &dims)?, &g, scale, &dims)?;
        whitening.reset();
        let mut learn_t: u64 = 0;
        let mut reward_sum = 0.0;
        let mut ep_best = f64::NEG_INFINITY;

        for t in 0..cfg.steps_per_episode {
            let mut action = agent.actor.act(&state)?;
            if action.iter().any(|v| !v.is_finite()) {
                diagnostics.push(format!("episode {episode} step {t}: actor produced a non-finite action"));
                break;
            }
            let variance = whitening.variance();
            whiten_and_project(&mut action, variance, cfg.noise_clip, &dims, budget, &mut explore_rng);
            if let Some(a) = audit.as_mut() {
                let f = feasibility(&action, &dims, budget);
                a.actions_checked += 1;
                a.worst_modulus_error = a.worst_modulus_error.max(f.max_modulus_error);
                a.worst_budget_error = a.worst_budget_error.max(f.budget_error);
                if !f.holds(FEASIBILITY_TOL) {
                    a.infeasible_actions += 1;
                }
                a.variance_checks += 1;
                if variance != variance_at(cfg.noise_variance, cfg.noise_decay, cfg.noise_gap, learn_t) {
                    a.variance_mismatches += 1;
                }
            }
            let (phases, power) = decode_action(&action, &dims, budget)?;
            let reward = sum_rate_for_phases(stack, &phases, &g, &power, &noise)?;
            if !reward.is_finite() {
                diagnostics.push(format!("episode {episode} step {t}: non-finite reward"));
                break;
            }
            if best.as_ref().is_none_or(|b| reward > b.1) {
                best = Some((action.clone(), reward, step));
            }
            ep_best = ep_best.max(reward);

            if cfg.channel_refresh == ChannelRefresh::PerStep {
                g = resample(&mut env_rng)?;
                scale = channel_scale(&g);
            }
            let next_state = build_state(reward, &action, &g, scale, &dims)?;
            replay.push(Transition {
                state: std::mem::take(&mut state),
                action,
                reward,
                next_state: next_state.clone(),
            });
            state = next_state;
            reward_sum += reward;

            if replay.is_full() {
                if let Some(a) = audit.as_mut() {
                    if replay.len() < replay.capacity() {
                        a.samples_before_full += 1;
                    }
                }
                let stats = {
                    let batch = replay.sample(&mut replay_rng, cfg.batch_size)?;
                    agent.train_step(&batch)?
                };
                if !stats.critic_loss.is_finite() || !stats.actor_objective.is_finite() {
                    diagnostics.push(format!("episode {episode} step {t}: non-finite loss"));
                    break;
                }
                last_critic_loss = Some(stats.critic_loss);
                if let Some(a) = audit.as_mut() {
                    let (old_c, old_a) = (snapshot(&agent.critic_target), snapshot(&agent.actor_target));
                    let (src_c, src_a) = (snapshot(&agent.critic), snapshot(&agent.actor));
                    agent.soft_update_targets()?;
                    a.soft_update_checks += 1;
                    if !matches_convex_combination(&agent.critic_target, &old_c, &src_c, agent.soft_rate_critic)
                        || !matches_convex_combination(&agent.actor_target, &old_a, &src_a, agent.soft_rate_actor)
                    {
                        a.soft_update_mismatches += 1;
                    }
                } else {
                    agent.soft_update_targets()?;
                }
                whitening.advance();
                learn_t += 1;
                learning_steps += 1;
                agent.observe_metric(reward_sum / (t + 1) as f64);
            }

            trace.push(TraceRow {
                step,
                episode,
                reward,
                variance,
                lr: agent.sched_actor.lr(),
            });
            step += 1;
        }
        episode_best.push(ep_best);
    }

    let network_report = agent.report();
    let (action, best_rate, best_step) = match best {
        Some(b) => b,
        None => {
            // Every episode aborted on its first step.
            let start = PhaseConfiguration::zeros(dims.layers, dims.atoms);
            let power = PowerAllocation::uniform(dims.users, budget);
            (encode_action(&start, &power, &dims)?, f64::NAN, 0)
        }
    };
    let (best_phases, best_power) = decode_action(&action, &dims, budget)?;
    Ok(TrainResult {
        best_phases,
        best_power,
        best_rate,
        best_step,
        trace,
        episode_best,
        learning_steps,
        last_critic_loss,
        diagnostics,
        audit,
        network_report,
    })
}
