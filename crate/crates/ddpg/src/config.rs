use serde::{Deserialize, Serialize};

use crate::{DdpgError, Result};

/// When the environment draws a new user layout and channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelRefresh {
    /// Keep the channel supplied with the environment for the whole run.
    Fixed,
    PerEpisode,
    PerStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub discount: f64,
    pub soft_rate_critic: f64,
    pub soft_rate_actor: f64,
    pub lr_critic: f64,
    pub lr_actor: f64,
    /// Initial exploration variance.
    pub noise_variance: f64,
    pub noise_decay: f64,
    /// Noise is clamped to `±noise_clip`.
    pub noise_clip: f64,
    /// Learning steps per decay factor.
    pub noise_gap: usize,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub conv_channels: usize,
    /// Hidden widths are this multiple of the larger adjacent dimension.
    pub width_factor: usize,
    pub leaky_slope: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub channel_refresh: ChannelRefresh,
    /// Optimize phases only and hold power uniform.
    pub phase_only: bool,
    /// Re-verify soft updates, action projections, replay gating and the
    /// noise schedule while training.
    pub audit: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            episodes: 50,
            steps_per_episode: 26_000,
            replay_capacity: 5_000,
            batch_size: 32,
            discount: 0.99,
            soft_rate_critic: 0.01,
            soft_rate_actor: 0.01,
            lr_critic: 4e-4,
            lr_actor: 4e-4,
            noise_variance: 2.0,
            noise_decay: 0.95,
            noise_clip: 2.0,
            noise_gap: 100,
            plateau_patience: 200,
            plateau_factor: 0.8,
            conv_channels: 16,
            width_factor: 2,
            leaky_slope: 0.01,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            channel_refresh: ChannelRefresh::PerEpisode,
            phase_only: false,
            audit: false,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(DdpgError::Config(m.to_string()));
        if self.episodes == 0 || self.steps_per_episode == 0 || self.replay_capacity == 0 || self.batch_size == 0 {
            return bad("episodes, steps, replay capacity and batch size must be positive");
        }
        if self.noise_gap == 0 || self.plateau_patience == 0 || self.conv_channels == 0 || self.width_factor == 0 {
            return bad("noise gap, patience, conv channels and width factor must be positive");
        }
        if !(0.0..1.0).contains(&self.discount) {
            return bad("discount must lie in [0, 1)");
        }
        for (name, v) in [("soft_rate_critic", self.soft_rate_critic), ("soft_rate_actor", self.soft_rate_actor)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(DdpgError::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(self.noise_decay > 0.0 && self.noise_decay < 1.0) {
            return bad("noise_decay must lie in (0, 1)");
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor <= 1.0) {
            return bad("plateau_factor must lie in (0, 1]");
        }
        if !(self.lr_critic > 0.0 && self.lr_actor > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.noise_variance >= 0.0 && self.noise_clip >= 0.0) {
            return bad("noise variance and clip must be non-negative");
        }
        if self.batch_size > self.replay_capacity {
            return bad("batch size exceeds replay capacity");
        }
        Ok(())
    }
}
