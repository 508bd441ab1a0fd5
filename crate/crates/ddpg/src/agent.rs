//! Training and target networks with their optimizers, and one learning
//! step on a sampled batch.

use rand::Rng;

use simstack_nn::optim::{Adam, PlateauScheduler};
use simstack_nn::report::NetworkReport;
use simstack_nn::tensor::Module;
use simstack_nn::Tensor;

use crate::action::Dims;
use crate::actor::Actor;
use crate::config::AgentConfig;
use crate::critic::Critic;
use crate::replay::Transition;
use crate::{DdpgError, Result};

/// `r + μ Q̃(s', π̃(s'))`.
pub fn td_target(reward: f64, discount: f64, next_q: f64) -> f64 {
    reward + discount * next_q
}

/// `θ̃ ← (1 − η) θ̃ + η θ`, elementwise over matching parameter lists.
pub fn soft_update<M: Module>(target: &mut M, source: &M, eta: f64) -> Result<()> {
    let src = source.params();
    let mut dst = target.params_mut();
    if src.len() != dst.len() || src.iter().zip(&dst).any(|(s, d)| s.shape() != d.shape()) {
        return Err(DdpgError::Shape("target and source networks differ".into()));
    }
    for (d, s) in dst.iter_mut().zip(src) {
        for (t, &v) in d.value.data_mut().iter_mut().zip(s.value.data()) {
            *t = (1.0 - eta) * *t + eta * v;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub critic_loss: f64,
    /// Mean `Q(s, π(s))` over the batch before the actor update.
    pub actor_objective: f64,
}

pub struct Agent {
    pub actor: Actor,
    pub critic: Critic,
    pub actor_target: Actor,
    pub critic_target: Critic,
    pub adam_actor: Adam,
    pub adam_critic: Adam,
    pub sched_actor: PlateauScheduler,
    pub sched_critic: PlateauScheduler,
    pub discount: f64,
    pub soft_rate_actor: f64,
    pub soft_rate_critic: f64,
}

fn adam_for<M: Module>(m: &M, cfg: &AgentConfig) -> Adam {
    let sizes: Vec<usize> = m.params().iter().map(|p| p.len()).collect();
    Adam::with_hyper(&sizes, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
}

fn stack_rows<'a, I: Iterator<Item = &'a [f64]>>(rows: I) -> Result<Tensor> {
    let rows: Vec<&[f64]> = rows.collect();
    Ok(Tensor::from_rows(&rows)?)
}

impl Agent {
    /// Fresh networks; targets start as exact copies.
    pub fn new<R: Rng + ?Sized>(rng: &mut R, dims: Dims, budget: f64, cfg: &AgentConfig) -> Self {
        let actor = Actor::new(rng, dims, budget, cfg.conv_channels, cfg.width_factor, cfg.leaky_slope);
        let critic = Critic::new(rng, &dims, cfg.width_factor, cfg.leaky_slope);
        let adam_actor = adam_for(&actor, cfg);
        let adam_critic = adam_for(&critic, cfg);
        Self {
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            adam_actor,
            adam_critic,
            sched_actor: PlateauScheduler::new(cfg.lr_actor, cfg.plateau_patience, cfg.plateau_factor),
            sched_critic: PlateauScheduler::new(cfg.lr_critic, cfg.plateau_patience, cfg.plateau_factor),
            discount: cfg.discount,
            soft_rate_actor: cfg.soft_rate_actor,
            soft_rate_critic: cfg.soft_rate_critic,
        }
    }

    /// TD targets for a batch from the target networks.
    pub fn targets(&self, batch: &[&Transition]) -> Result<Vec<f64>> {
        let next = stack_rows(batch.iter().map(|t| t.next_state.as_slice()))?;
        let (a_next, _) = self.actor_target.forward(&next)?;
        let (q_next, _) = self.critic_target.forward(&next, &a_next)?;
        Ok(batch
            .iter()
            .zip(q_next.data())
            .map(|(t, &q)| td_target(t.reward, self.discount, q))
            .collect())
    }

    /// One Adam step of the critic towards fixed regression targets; returns
    /// the mean squared error before the step.
    pub fn critic_step(&mut self, states: &Tensor, actions: &Tensor, targets: &[f64]) -> Result<f64> {
        if targets.len() != states.batch() || targets.is_empty() {
            return Err(DdpgError::Shape("one target per batch row required".into()));
        }
        let n = targets.len() as f64;
        let (q, cache) = self.critic.forward(states, actions)?;
        let mut dq = Tensor::zeros(vec![targets.len(), 1]);
        let mut loss = 0.0;
        for ((g, &qv), &v) in dq.data_mut().iter_mut().zip(q.data()).zip(targets) {
            let e = v - qv;
            loss += e * e / n;
            *g = -2.0 * e / n;
        }
        self.critic.zero_grad();
        self.critic.backward(&cache, &dq, true)?;
        let lr = self.sched_critic.lr();
        self.adam_critic.step(&mut self.critic.params_mut(), lr)?;
        Ok(loss)
    }

    /// One Adam ascent step of the actor on `mean Q(s, π(s))` with the critic
    /// held fixed; returns the objective before the step.
    pub fn actor_step(&mut self, states: &Tensor) -> Result<f64> {
        let n = states.batch() as f64;
        let (a_pi, actor_cache) = self.actor.forward(states)?;
        let (q_pi, critic_cache) = self.critic.forward(states, &a_pi)?;
        let objective = q_pi.data().iter().sum::<f64>() / n;
        let dq = Tensor::filled(vec![states.batch(), 1], -1.0 / n);
        let da = self.critic.backward(&critic_cache, &dq, false)?;
        self.actor.zero_grad();
        self.actor.backward(&actor_cache, &da)?;
        let lr = self.sched_actor.lr();
        self.adam_actor.step(&mut self.actor.params_mut(), lr)?;
        Ok(objective)
    }

    /// Critic regression onto the TD targets, then one actor ascent step
    /// through the just-updated critic.
    pub fn train_step(&mut self, batch: &[&Transition]) -> Result<StepStats> {
        if batch.is_empty() {
            return Err(DdpgError::Shape("empty batch".into()));
        }
        let targets = self.targets(batch)?;
        let states = stack_rows(batch.iter().map(|t| t.state.as_slice()))?;
        let actions = stack_rows(batch.iter().map(|t| t.action.as_slice()))?;
        let critic_loss = self.critic_step(&states, &actions, &targets)?;
        let actor_objective = self.actor_step(&states)?;
        Ok(StepStats {
            critic_loss,
            actor_objective,
        })
    }

    pub fn soft_update_targets(&mut self) -> Result<()> {
        soft_update(&mut self.critic_target, &self.critic, self.soft_rate_critic)?;
        soft_update(&mut self.actor_target, &self.actor, self.soft_rate_actor)
    }

    /// Feeds the monitored reward to both plateau schedulers.
    pub fn observe_metric(&mut self, metric: f64) {
        self.sched_actor.step(metric);
        self.sched_critic.step(metric);
    }

    pub fn report(&self) -> NetworkReport {
        let mut r = self.actor.report();
        r.extend(self.critic.report());
        r
    }
}
